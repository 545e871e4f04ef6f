//! Radial existence and nonexistence at (p, alpha) = (6, 5): thresholds,
//! collapse below q-bar, and the negative-level minimizer above q-tilde.

use psm::fields::{LocalSign, ProblemParams};
use psm::inequalities::nonexistence_qbar;
use psm::solver::{
    find_q_tilde, minimize_i_radial, pde_residual_radial, radial_multistart, Solution,
    SolveOptions, DEFAULT_FAMILY_SIZE,
};

fn main() -> psm::error::Result<()> {
    let (alpha, p) = (5.0, 6.0);
    let qbar = nonexistence_qbar(alpha, p)?;
    let params = ProblemParams::new(alpha, p, 1.0, LocalSign::Plus)?;
    let qt = find_q_tilde(&params, DEFAULT_FAMILY_SIZE)?;
    println!("q-bar = {qbar:.4e}, q-tilde estimate = {qt:.4}");

    let opts = SolveOptions::default();
    let below = radial_multistart(&params.with_q(qbar / 2.0), 8, &opts)?;
    let largest = below.iter().map(|o| o.x_norm).fold(0.0, f64::max);
    println!(
        "q = q-bar/2: {} of 8 starts collapse (largest norm {largest:.1e})",
        below.iter().filter(|o| o.is_trivial()).count()
    );

    let above = params.with_q(10.0 * qt);
    let out = minimize_i_radial(&above, &opts)?;
    println!(
        "q = 10 q-tilde: {} level {:.4e}, gradient {:.1e}, Pohozaev {:.1e}, norm {:.3e}",
        out.classification.as_str(),
        out.level,
        out.residual_grad,
        out.residual_pohozaev,
        out.x_norm
    );
    for note in &out.notes {
        println!("  note: {note}");
    }
    if let Some(Solution::Radial(u)) = &out.solution {
        let r = pde_residual_radial(&above, u);
        println!(
            "strong residual {:.2e} against term scale {:.2e}",
            r.l2, r.term_scale
        );
    }
    Ok(())
}
