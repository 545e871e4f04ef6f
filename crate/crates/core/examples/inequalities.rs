//! Nonexistence thresholds, the weighted log estimate, the radial decay bound
//! and the mountain-pass floor.

use psm::fields::{Grid2D, RadialGrid};
use psm::inequalities::{
    embedding_constants, lemma_constant, mp_floor, nonexistence_threshold, strauss_bound,
    verify_lemma, LemmaParams,
};
use psm::library::{planar_library, radial_library};

fn main() -> psm::error::Result<()> {
    println!("{:>4} {:>5} {:>12} {:>12}", "p", "alpha", "C", "qbar");
    for p in [5.0, 6.0, 8.0] {
        for alpha in [7.0, 10.0] {
            let t = nonexistence_threshold(alpha, p)?;
            println!("{p:>4} {alpha:>5} {:>12.4e} {:>12.4e}", t.c, t.qbar);
        }
    }

    let lp = LemmaParams::new(6.0, 6.0, 4.0, 1.0)?;
    println!(
        "lemma constant at (6, 6, 4, 1): {:.6e}",
        lemma_constant(&lp)?
    );
    let grid = Grid2D::new(8.0, 64)?;
    for f in planar_library(3, 4) {
        let c = verify_lemma(&f.sample(grid), &lp)?;
        println!("  {:.4e} <= {:.4e}: {}", c.lhs, c.rhs, c.satisfied);
    }

    let rg = RadialGrid::new(12.0, 400)?;
    for f in radial_library(3, 3) {
        let s = strauss_bound(&f.sample(rg), 3.0);
        println!("decay bound tightness {:.3}", s.tightness);
    }

    let e = embedding_constants(2.0)?;
    let floor = mp_floor(2.0, 4.0, 1.0);
    println!(
        "C_alpha(2) = {:.4}, mp floor {:.4e} at rho {:.4}",
        e.c_alpha, floor.floor, floor.rho
    );
    Ok(())
}
