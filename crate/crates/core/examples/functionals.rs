//! Energies, Nehari and Pohozaev values of a trial field, and the
//! Gagliardo-Nirenberg check.

use psm::energy::{energy_report, gagliardo_nirenberg_check};
use psm::fields::{Field2D, Grid2D, LocalSign, ProblemParams};

fn main() -> psm::error::Result<()> {
    let grid = Grid2D::new(6.0, 64)?;
    let u = Field2D::from_fn(grid, |x, y| {
        1.5 * (1.0 + 0.3 * x) * (-(x * x + y * y) / 2.0).exp()
    });
    for sign in [LocalSign::Plus, LocalSign::Minus] {
        let params = ProblemParams::new(2.0, 4.0, 1.0, sign)?;
        let r = energy_report(&u, &params, &[0.0, 1.0])?;
        println!(
            "{sign:?}: I = {:.6}, J = {:.6}, Nehari = {:.6}",
            r.value_i, r.value_j, r.nehari
        );
        for (rp, v) in &r.pohozaev {
            println!("  P(u; {rp}) = {v:.6}");
        }
        println!("  X-dual gradient norm {:.4e}", r.grad_x_norm);
    }
    let gn = gagliardo_nirenberg_check(&u, 4.0);
    println!(
        "GN: {:.5} <= {:.5} (C = {:.4})",
        gn.lhs, gn.rhs, gn.constant
    );
    Ok(())
}
