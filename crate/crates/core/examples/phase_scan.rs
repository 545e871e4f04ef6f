//! A small (p, alpha, q) scan: thresholds per row, one radial solve per
//! cell, CSV and plot files. Pass an output directory, or a temporary one is
//! used.

use std::path::PathBuf;

use psm::phase::{run_scan, ScanProblem, ScanSpec};
use psm::solver::SolveOptions;

fn main() -> psm::error::Result<()> {
    let tmp = tempfile::tempdir()?;
    let out_dir = std::env::args()
        .nth(1)
        .map_or_else(|| tmp.path().to_path_buf(), PathBuf::from);
    let spec = ScanSpec {
        p_values: vec![6.0, 8.0],
        alpha_values: vec![7.0, 9.0],
        q_values: vec![1e-4, 100.0],
        problem: ScanProblem::P1,
        options: SolveOptions {
            radial_m: 256,
            ..SolveOptions::default()
        },
        multistarts: 2,
        out_dir: out_dir.clone(),
    };
    let run = run_scan(&spec)?;
    for row in &run.manifest.constants {
        println!(
            "p {} alpha {}: q-bar {:?}, q-tilde {:?}",
            row.p, row.alpha, row.qbar, row.qtilde_est
        );
    }
    print!("{}", std::fs::read_to_string(out_dir.join("scan.csv"))?);
    println!("violations: {:?}", run.manifest.threshold_violations());
    let again = run_scan(&spec)?;
    println!("rerun performed {} solves", again.solves_performed);
    Ok(())
}
