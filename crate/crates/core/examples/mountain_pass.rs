//! Sign-changing critical points of J by a climbing string in the dihedral
//! class of order 1.

use psm::fields::{LocalSign, ProblemParams};
use psm::solver::{mountain_pass_with_state, Solution, SolveOptions};

fn main() -> psm::error::Result<()> {
    let params = ProblemParams::new(2.0, 2.5, 1.0, LocalSign::Minus)?;
    let (out, state) = mountain_pass_with_state(&params, 1, 17, &SolveOptions::default())?;
    println!(
        "endpoint dilation t = {:.4}, r = {}",
        state.endpoint_t, state.r_pow
    );
    let shown: Vec<String> = state
        .level_history
        .iter()
        .step_by(25)
        .map(|v| format!("{v:.3}"))
        .collect();
    println!("max J along the path: {}", shown.join(" "));
    println!(
        "level {:.6}, gradient {:.1e}, Nehari {:.1e}, converged {}",
        out.level, out.residual_grad, out.residual_nehari, out.converged
    );
    if let Some(Solution::Plane(u)) = &out.solution {
        let (lo, hi) = u
            .values
            .iter()
            .fold((0.0f64, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        println!("range [{lo:.4}, {hi:.4}]");
    }
    out.notes.iter().for_each(|n| println!("  {n}"));
    Ok(())
}
