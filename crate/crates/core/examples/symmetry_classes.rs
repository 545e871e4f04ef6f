//! Symmetry classes: projection, defect, and nesting of dihedral classes.

use psm::fields::{Field2D, Grid2D};
use psm::solver::dihedral_seed;
use psm::symmetry::{project, symmetry_defect, SymmetryClass};

fn main() -> psm::error::Result<()> {
    let grid = Grid2D::new(5.0, 64)?;
    let u = Field2D::from_fn(grid, |x, y| {
        (x + 0.4 * y + 0.2 * x * y + 0.3 * x * (x * x - 3.0 * y * y))
            * (-(x * x + y * y) / 2.0).exp()
    });
    for class in ["odd_even", "dihedral1", "dihedral2", "dihedral3", "radial"] {
        let c: SymmetryClass = class.parse()?;
        let v = project(&u, c);
        println!(
            "{class:<10} defect before {:.3e}, after {:.3e}, lattice exact {}",
            symmetry_defect(&u, c),
            symmetry_defect(&v, c),
            c.lattice_exact()
        );
    }
    // order 3 uses interpolated rotations, so its defect stays near the
    // interpolation error; the order-3 seed also lies in the order-1 class
    let s3 = dihedral_seed(grid, 3, 1.0);
    println!(
        "seed of order 3 in class 1: defect {:.3e}",
        symmetry_defect(&s3, SymmetryClass::Dihedral(1))
    );
    Ok(())
}
