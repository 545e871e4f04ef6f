//! Logarithmic Coulomb energies and potentials on the planar and radial grids.
//!
//! Run with `cargo run --release --example coulomb_energies`.

use psm::fields::{Field2D, Grid2D, RadialField, RadialGrid};
use psm::logkernel::{newtonian_potential, potential_at, radial_potential_at, LogField};

fn main() -> psm::error::Result<()> {
    let grid = Grid2D::new(6.0, 64)?;
    let u = Field2D::from_fn(grid, |x, y| (-(x * x + y * y) / 2.0).exp());
    let e = u.coulomb()?;
    println!(
        "gaussian: V0 = {:.6}  V1 = {:.6}  V2 = {:.6}  split defect {:.1e}",
        e.v0,
        e.v1,
        e.v2,
        e.split_defect()
    );

    let phi = newtonian_potential(&u);
    let center = phi.values[grid.index(32, 32)];
    println!("phi near the origin {center:.6}");

    // same profile through the radial operator
    let ur = RadialField::from_fn(RadialGrid::new(6.0, 512)?, |r| (-r * r / 2.0).exp());
    for r in [0.5, 1.0, 2.0, 4.0] {
        println!(
            "r = {r}: planar {:+.6}  radial {:+.6}",
            potential_at(&u, r, 0.0),
            radial_potential_at(&ur, r)
        );
    }

    // unit disk: phi(0) = -1/4 and phi = log|x| / 2 outside
    let disk = RadialField::from_fn(RadialGrid::new(3.0, 600)?, |r| f64::from(u8::from(r < 1.0)));
    println!(
        "disk: phi(0) = {:.6}, phi(e) = {:.6}",
        radial_potential_at(&disk, 0.0),
        radial_potential_at(&disk, 1f64.exp())
    );
    Ok(())
}
