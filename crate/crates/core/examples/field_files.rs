//! Writing and reading field files with their JSON sidecars.

use psm::fields::{Field2D, Grid2D, LocalSign, ProblemParams};
use psm::io::{read_field, read_sidecar, write_field, HEADER_LEN};
use psm::solver::Solution;

fn main() -> psm::error::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("fields/gauss.psm2");
    let u = Solution::Plane(Field2D::from_fn(Grid2D::new(4.0, 32)?, |x, y| {
        (-(x * x + y * y)).exp()
    }));
    let params = ProblemParams::new(2.0, 4.0, 1.0, LocalSign::Minus)?;
    write_field(
        &path,
        &u,
        Some(&params),
        serde_json::json!({ "source": "example" }),
    )?;
    let bytes = std::fs::metadata(&path)?.len();
    println!(
        "{} bytes ({} header + 8 x {})",
        bytes,
        HEADER_LEN,
        u.values().len()
    );
    assert_eq!(read_field(&path)?, u);
    println!("{}", serde_json::to_string_pretty(&read_sidecar(&path)?)?);
    Ok(())
}
