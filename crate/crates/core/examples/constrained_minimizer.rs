//! Minimizes G on {V0 = 1} with W(s) = |s|^4 / 4 in the odd-even class; the
//! multiplier gives the coupling q = 4 lambda.

use std::sync::Arc;

use psm::energy::{pohozaev_uncoupled, PowerLaw};
use psm::fields::{Field2D, Grid2D, ProblemParams, WCoeffs};
use psm::solver::{minimize_on_h, Solution, SolveOptions};
use psm::symmetry::SymmetryClass;

fn main() -> psm::error::Result<()> {
    let w = WCoeffs {
        c1: 0.0,
        c2: 0.25,
        p: 4.0,
    };
    let params = ProblemParams::with_w(2.0, w)?;
    let grid = Grid2D::new(6.0, 64)?;
    let seed = Field2D::from_fn(grid, |x, y| x * (-(x * x + y * y)).exp());
    let out = minimize_on_h(
        &seed,
        &params,
        Arc::new(PowerLaw(w)),
        SymmetryClass::OddEven,
        &SolveOptions::default(),
    )?;
    println!(
        "converged {} in {} iterations: G = {:.6}, lambda = {:.6}, q = {:.6}",
        out.converged,
        out.iterations,
        out.level,
        out.multiplier_lambda.unwrap_or(f64::NAN),
        out.q_effective
    );
    if let Some(Solution::Plane(u)) = &out.solution {
        println!(
            "uncoupled Pohozaev {:.6}",
            pohozaev_uncoupled(u, 2.0, Arc::new(PowerLaw(w)))?
        );
    }
    out.notes.iter().for_each(|n| println!("  {n}"));
    Ok(())
}
