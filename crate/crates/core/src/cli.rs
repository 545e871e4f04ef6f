//! The `psm` command line. Every command prints one JSON object on stdout
//! (`constants` prints CSV); diagnostics go to stderr.
//!
//! Exit codes: 0 success, 1 solver non-convergence or runtime failure,
//! 2 invalid input.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::Config;
use crate::energy::{eval_g, eval_i, eval_j, grad_g, grad_i, grad_j, PowerLaw};
use crate::error::{Error, Result};
use crate::fields::{
    resample_dilate, Field2D, Grid2D, LocalSign, ProblemParams, RadialField, RadialGrid, WCoeffs,
};
use crate::inequalities::{
    lemma_constant, nonexistence_beta, nonexistence_threshold, strauss_bound, verify_lemma_with,
    write_constants_csv, LemmaParams,
};
use crate::io::{read_field, write_field};
use crate::library::{library_grid, planar_library, radial_library};
use crate::logkernel::{
    newtonian_potential, potential_at, radial_potential, radial_potential_at, v0,
    v0_gradient_action,
};
use crate::phase::{run_scan, ScanSpec};
use crate::solver::{
    dihedral_seed, minimize_i_radial, minimize_on_h, mountain_pass, radial_multistart, RunManifest,
    Solution, SolveOutcome,
};
use crate::symmetry::{project, SymmetryClass};

#[derive(Debug, Parser)]
#[command(
    name = "psm",
    version,
    about = "Planar Schrödinger-Maxwell variational solver"
)]
pub struct Cli {
    /// Worker threads for scans and multistarts (default: logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize I over radial fields.
    SolveRadial(Common),
    /// Minimize G on {V0 = 1} in a symmetry class; reports q = 4 lambda.
    SolveNonradial(Common),
    /// Mountain pass for J in a dihedral class.
    SolveMp(Common),
    /// Newtonian potential of a field file.
    Potential {
        #[command(flatten)]
        common: Common,
        /// Input field file.
        #[arg(long)]
        field: PathBuf,
        /// Output field file (default: <out.dir>/potential.psm2).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Randomized property and inequality checks with a pass/fail table.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
    },
    /// Nonexistence constants as CSV, for `alpha`/`p` or the scan lists.
    Constants {
        #[command(flatten)]
        common: Common,
        /// Use `scan.alpha` x `scan.p` instead of the single pair.
        #[arg(long)]
        scan_lists: bool,
    },
    /// Parameter scan over `scan.p` x `scan.alpha` x `scan.q`.
    Scan(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Lemma,
    Strauss,
    Gradients,
    Rescaling,
    Kernel,
    All,
}

/// Options shared by every command; flags override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Any config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// `problem`: p1, p2 or pw
    #[arg(long)]
    pub problem: Option<String>,
    /// `alpha`
    #[arg(long)]
    pub alpha: Option<String>,
    /// `p`
    #[arg(long)]
    pub p: Option<String>,
    /// `q`
    #[arg(long)]
    pub q: Option<String>,
    /// `grid.n`
    #[arg(long = "grid-n")]
    pub grid_n: Option<String>,
    /// `grid.L`
    #[arg(long = "grid-l")]
    pub grid_l: Option<String>,
    /// `radial.m`
    #[arg(long = "radial-m")]
    pub radial_m: Option<String>,
    /// `radial.R`
    #[arg(long = "radial-r")]
    pub radial_r: Option<String>,
    /// `symmetry`: radial, odd_even, dihedral1..3
    #[arg(long)]
    pub symmetry: Option<String>,
    /// `tolerances.grad`
    #[arg(long)]
    pub tol: Option<String>,
    /// `solver.max_iter`
    #[arg(long = "max-iter")]
    pub max_iter: Option<String>,
    /// `seeds.rng`
    #[arg(long)]
    pub seed: Option<String>,
    /// `out.dir`
    #[arg(long)]
    pub out: Option<String>,
}

impl Common {
    /// Defaults, then the config file, then `PSM_SEED`, then flags.
    pub fn resolve(&self, env_seed: Option<String>) -> Result<Config> {
        let mut c = Config::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::Config {
                line: 0,
                reason: format!("{}: {e}", path.display()),
            })?;
            c.merge_text(&text)?;
        }
        if let Some(s) = env_seed {
            c.set("seeds.rng", &s).map_err(|reason| Error::Config {
                line: 0,
                reason: format!("PSM_SEED: {reason}"),
            })?;
        }
        let flags = [
            ("problem", &self.problem),
            ("alpha", &self.alpha),
            ("p", &self.p),
            ("q", &self.q),
            ("grid.n", &self.grid_n),
            ("grid.L", &self.grid_l),
            ("radial.m", &self.radial_m),
            ("radial.R", &self.radial_r),
            ("symmetry", &self.symmetry),
            ("tolerances.grad", &self.tol),
            ("solver.max_iter", &self.max_iter),
            ("seeds.rng", &self.seed),
            ("out.dir", &self.out),
        ];
        let bad = |reason: String| Error::Config {
            line: 0,
            reason: format!("flag: {reason}"),
        };
        for (k, v) in flags {
            if let Some(v) = v {
                c.set(k, v).map_err(bad)?;
            }
        }
        for kv in &self.sets {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("--set expects key=value, got '{kv}'")))?;
            c.set(k.trim(), v).map_err(bad)?;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Exit code of an error: 2 for bad input, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidGrid(_)
        | Error::InvalidParams(_)
        | Error::Inadmissible(_)
        | Error::Config { .. }
        | Error::FieldFile { .. }
        | Error::NonlinearityAudit(_)
        | Error::GridMismatch => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be positive");
            return 2;
        }
        // fails only if a pool already exists, which keeps its size
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let env_seed = std::env::var("PSM_SEED").ok();
    match dispatch(&cli.command, env_seed) {
        Ok((out, converged)) => {
            print!("{out}");
            i32::from(!converged)
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::SolveRadial(c)
        | Command::SolveNonradial(c)
        | Command::SolveMp(c)
        | Command::Scan(c) => c,
        Command::Potential { common, .. }
        | Command::Verify { common, .. }
        | Command::Constants { common, .. } => common,
    }
}

/// Runs one command; returns stdout text and whether it converged.
pub fn dispatch(cmd: &Command, env_seed: Option<String>) -> Result<(String, bool)> {
    let cfg = common(cmd).resolve(env_seed)?;
    eprintln!("effective config:\n{}", cfg.to_text());
    let pretty = |v: &Value| serde_json::to_string_pretty(v).expect("json") + "\n";
    match cmd {
        Command::SolveRadial(_) => {
            let (v, ok) = solve_radial(&cfg)?;
            Ok((pretty(&v), ok))
        }
        Command::SolveNonradial(_) => {
            let (v, ok) = solve_nonradial(&cfg)?;
            Ok((pretty(&v), ok))
        }
        Command::SolveMp(_) => {
            let (v, ok) = solve_mp(&cfg)?;
            Ok((pretty(&v), ok))
        }
        Command::Potential { field, output, .. } => {
            Ok((pretty(&potential(&cfg, field, output.as_deref())?), true))
        }
        Command::Verify { suite, .. } => {
            let v = verify(&cfg, *suite)?;
            let ok = v["passed"].as_bool().unwrap_or(false);
            Ok((pretty(&v), ok))
        }
        Command::Constants { scan_lists, .. } => Ok((constants(&cfg, *scan_lists)?, true)),
        Command::Scan(_) => {
            let (v, ok) = scan(&cfg)?;
            Ok((pretty(&v), ok))
        }
    }
}

fn finish(
    cfg: &Config,
    name: &str,
    manifest: &RunManifest,
    params: &ProblemParams,
) -> Result<(Value, bool)> {
    let outcome = &manifest.outcome;
    let mut field_file = Value::Null;
    if let Some(sol) = &outcome.solution {
        let path = cfg.out_dir.join(format!("{name}.psm2"));
        let prov = json!({ "operation": manifest.operation, "input_hash": manifest.input_hash });
        write_field(&path, sol, Some(params), prov)?;
        field_file = json!(path.display().to_string());
    }
    let manifest_path = cfg.out_dir.join(format!("{name}.manifest.json"));
    fs::write(&manifest_path, serde_json::to_string_pretty(manifest)?)?;
    Ok((
        json!({ "command": name, "field_file": field_file, "manifest": manifest }),
        outcome.converged,
    ))
}

fn extra(cfg: &Config) -> Value {
    json!({ "config": cfg })
}

fn solve_radial(cfg: &Config) -> Result<(Value, bool)> {
    let params = ProblemParams::new(cfg.alpha, cfg.p, cfg.q, LocalSign::Plus)?;
    let opts = cfg.solve_options();
    let manifest = RunManifest::record("solve-radial", &params, &opts, extra(cfg), || {
        let mut out = minimize_i_radial(&params, &opts)?;
        if cfg.radial_multistarts > 0 {
            for (k, o) in radial_multistart(&params, cfg.radial_multistarts, &opts)?
                .iter()
                .enumerate()
            {
                out.notes.push(format!(
                    "multistart {k}: {} level {:.6e}",
                    o.classification.as_str(),
                    o.level
                ));
            }
        }
        Ok(out)
    })?;
    finish(cfg, "solve-radial", &manifest, &params)
}

fn plane_grid(cfg: &Config) -> Result<Grid2D> {
    Grid2D::new(cfg.grid_l, cfg.grid_n)
}

fn solve_nonradial(cfg: &Config) -> Result<(Value, bool)> {
    let w = WCoeffs {
        c1: cfg.w_c1,
        c2: cfg.w_c2,
        p: cfg.p,
    };
    let params = ProblemParams::with_w(cfg.alpha, w)?;
    let class = cfg.symmetry.unwrap_or(SymmetryClass::OddEven).validate()?;
    let grid = plane_grid(cfg)?;
    let seed = match class {
        SymmetryClass::Dihedral(k) => dihedral_seed(grid, k, 1.0),
        SymmetryClass::Radial => Field2D::from_fn(grid, |x, y| (-(x * x + y * y)).exp()),
        SymmetryClass::OddEven => project(
            &Field2D::from_fn(grid, |x, y| x * (-(x * x + y * y)).exp()),
            class,
        ),
    };
    let opts = cfg.solve_options();
    let manifest = RunManifest::record("solve-nonradial", &params, &opts, extra(cfg), || {
        minimize_on_h(&seed, &params, Arc::new(PowerLaw(w)), class, &opts)
    })?;
    finish(cfg, "solve-nonradial", &manifest, &params)
}

fn solve_mp(cfg: &Config) -> Result<(Value, bool)> {
    let params = ProblemParams::new(cfg.alpha, cfg.p, cfg.q, LocalSign::Minus)?;
    let k = match cfg.symmetry.unwrap_or(SymmetryClass::Dihedral(1)) {
        SymmetryClass::Dihedral(k) => k,
        other => {
            return Err(Error::InvalidParams(format!(
                "mountain pass needs a dihedral class, got {other:?}"
            )))
        }
    };
    let opts = cfg.solve_options();
    let manifest = RunManifest::record("solve-mp", &params, &opts, extra(cfg), || {
        mountain_pass(&params, k, cfg.mp_points, &opts)
    })?;
    finish(cfg, "solve-mp", &manifest, &params)
}

fn potential(cfg: &Config, input: &Path, output: Option<&Path>) -> Result<Value> {
    let u = read_field(input)?;
    let (phi, v0_value) = match &u {
        Solution::Plane(f) => (Solution::Plane(newtonian_potential(f)), v0(f)),
        Solution::Radial(f) => (Solution::Radial(radial_potential(f)), v0(f)),
    };
    let out = output.map_or_else(|| cfg.out_dir.join("potential.psm2"), Path::to_path_buf);
    let vals = phi.values();
    let (lo, hi) = vals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    write_field(
        &out,
        &phi,
        None,
        json!({ "operation": "potential", "input": input.display().to_string() }),
    )?;
    Ok(json!({
        "command": "potential",
        "input": input.display().to_string(),
        "output": out.display().to_string(),
        "grid": phi.grid_label(),
        "v0": v0_value,
        "min": lo,
        "max": hi,
    }))
}

struct Row {
    suite: &'static str,
    satisfied: usize,
    total: usize,
    worst: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn lemma_rows(cfg: &Config) -> Result<Row> {
    let beta = if cfg.verify_beta > 0.0 {
        cfg.verify_beta
    } else {
        nonexistence_beta(cfg.p)
    };
    let lp = LemmaParams::new(cfg.alpha, cfg.p, beta, cfg.verify_epsilon)?;
    let c = lemma_constant(&lp)?;
    let grid = library_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut row = Row {
        suite: "lemma",
        satisfied: 0,
        total: 0,
        worst: 0.0,
    };
    for f in planar_library(cfg.seed, cfg.verify_count) {
        let u = f.sample(grid).scaled(10f64.powf(rng.gen_range(-2.0..2.0)));
        let check = verify_lemma_with(&u, &lp, c);
        row.total += 1;
        row.satisfied += usize::from(check.satisfied);
        if check.rhs > 0.0 {
            row.worst = row.worst.max(check.lhs / check.rhs);
        }
    }
    Ok(row)
}

fn strauss_rows(cfg: &Config) -> Row {
    let grid = RadialGrid::new(12.0, 600).expect("static grid");
    let mut row = Row {
        suite: "strauss",
        satisfied: 0,
        total: 0,
        worst: 0.0,
    };
    for f in radial_library(cfg.seed, cfg.verify_count) {
        let check = strauss_bound(&f.sample(grid), cfg.alpha);
        row.total += 1;
        row.satisfied += usize::from(check.satisfied);
        row.worst = row.worst.max(check.tightness);
    }
    row
}

fn gradient_rows(cfg: &Config) -> Result<Row> {
    let grid = Grid2D::new(5.0, 32)?;
    let params = ProblemParams::new(cfg.alpha, cfg.p, cfg.q, LocalSign::Plus)?;
    let wc = WCoeffs {
        c1: cfg.w_c1,
        c2: cfg.w_c2.max(0.25),
        p: cfg.p,
    };
    let gparams = ProblemParams::with_w(cfg.alpha, wc)?;
    let w = Arc::new(PowerLaw(wc));
    let lib = planar_library(cfg.seed, 2 * cfg.verify_count.max(1));
    let h2 = grid.spacing().powi(2);
    let inner = |g: &Field2D, v: &Field2D| {
        h2 * g
            .values
            .iter()
            .zip(&v.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };
    let eps = 1e-4;
    let mut row = Row {
        suite: "gradients",
        satisfied: 0,
        total: 0,
        worst: 0.0,
    };
    for k in 0..cfg.verify_count {
        let u = lib[2 * k].sample(grid);
        let v = lib[2 * k + 1].sample(grid);
        let shift = |s: f64| {
            u.with_values(
                u.values
                    .iter()
                    .zip(&v.values)
                    .map(|(a, b)| a + s * b)
                    .collect(),
            )
        };
        let (up, um) = (shift(eps), shift(-eps));
        let fd = |f: &dyn Fn(&Field2D) -> f64| (f(&up) - f(&um)) / (2.0 * eps);
        let errs = [
            rel(inner(&grad_i(&u, &params), &v), fd(&|x| eval_i(x, &params))),
            rel(inner(&grad_j(&u, &params), &v), fd(&|x| eval_j(x, &params))),
            rel(
                inner(&grad_g(&u, &gparams, w.clone())?, &v),
                fd(&|x| eval_g(x, &gparams, w.clone()).unwrap_or(f64::NAN)),
            ),
            rel(inner(&v0_gradient_action(&u), &v), fd(&|x| v0(x))),
        ];
        let worst = errs.iter().cloned().fold(0.0, f64::max);
        row.total += 1;
        row.satisfied += usize::from(worst < 1e-5);
        row.worst = row.worst.max(worst);
    }
    Ok(row)
}

fn rescaling_rows() -> Result<Row> {
    let grid = Grid2D::new(8.0, 96)?;
    let u = Field2D::from_fn(grid, |x, y| (-(x * x + y * y)).exp());
    let m = grid.spacing().powi(2) * u.values.iter().map(|v| v * v).sum::<f64>();
    let base = v0(&u);
    let mut row = Row {
        suite: "rescaling",
        satisfied: 0,
        total: 0,
        worst: 0.0,
    };
    for t in [0.5, 2.0] {
        let direct = v0(&resample_dilate(&u, t, 0.0)?.field);
        let scalar = t.powi(4) * (base + t.ln() / (2.0 * std::f64::consts::PI) * m * m);
        let err = (direct - scalar).abs() / direct.abs().max(1.0);
        row.total += 1;
        row.satisfied += usize::from(err <= 1e-3);
        row.worst = row.worst.max(err);
    }
    Ok(row)
}

fn kernel_rows() -> Result<Row> {
    let grid = Grid2D::new(2.0, 96)?;
    let h = grid.spacing();
    let frac = |x: f64, y: f64| {
        let k = 16;
        let mut hits = 0;
        for a in 0..k {
            for b in 0..k {
                let px = x + h * ((a as f64 + 0.5) / k as f64 - 0.5);
                let py = y + h * ((b as f64 + 0.5) / k as f64 - 0.5);
                hits += usize::from(px * px + py * py <= 1.0);
            }
        }
        hits as f64 / (k * k) as f64
    };
    let up = Field2D::from_fn(grid, |x, y| frac(x, y).sqrt());
    let ur = RadialField::from_fn(
        RadialGrid::new(2.0, 512)?,
        |r| if r < 1.0 { 1.0 } else { 0.0 },
    );
    let mut row = Row {
        suite: "kernel",
        satisfied: 0,
        total: 0,
        worst: 0.0,
    };
    for (r, exact) in [(0.0, -0.25), (1.0, 0.0)] {
        for got in [potential_at(&up, r, 0.0), radial_potential_at(&ur, r)] {
            let err = (got - exact).abs();
            row.total += 1;
            row.satisfied += usize::from(err <= 1e-3);
            row.worst = row.worst.max(err);
        }
    }
    Ok(row)
}

fn verify(cfg: &Config, suite: Suite) -> Result<Value> {
    let mut rows = Vec::new();
    let want = |s: Suite| suite == Suite::All || suite == s;
    if want(Suite::Lemma) {
        rows.push(lemma_rows(cfg)?);
    }
    if want(Suite::Strauss) {
        rows.push(strauss_rows(cfg));
    }
    if want(Suite::Gradients) {
        rows.push(gradient_rows(cfg)?);
    }
    if want(Suite::Rescaling) {
        rows.push(rescaling_rows()?);
    }
    if want(Suite::Kernel) {
        rows.push(kernel_rows()?);
    }
    for r in &rows {
        eprintln!(
            "{:<10} {:>4}/{:<4} {}  worst {:.3e}",
            r.suite,
            r.satisfied,
            r.total,
            if r.satisfied == r.total {
                "PASS"
            } else {
                "FAIL"
            },
            r.worst
        );
    }
    let passed = rows.iter().all(|r| r.satisfied == r.total);
    let table: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "suite": r.suite,
                "satisfied": r.satisfied,
                "total": r.total,
                "worst": r.worst,
                "pass": r.satisfied == r.total,
            })
        })
        .collect();
    Ok(json!({ "command": "verify", "passed": passed, "table": table }))
}

fn constants(cfg: &Config, scan_lists: bool) -> Result<String> {
    let pairs: Vec<(f64, f64)> = if scan_lists {
        cfg.scan_alpha
            .iter()
            .flat_map(|&a| cfg.scan_p.iter().map(move |&p| (a, p)))
            .collect()
    } else {
        vec![(cfg.alpha, cfg.p)]
    };
    let mut rows = Vec::new();
    for (a, p) in pairs {
        match nonexistence_threshold(a, p) {
            Ok(t) => rows.push(t),
            Err(e) if scan_lists => eprintln!("skipping alpha={a} p={p}: {e}"),
            Err(e) => return Err(e),
        }
    }
    let mut buf = Vec::new();
    write_constants_csv(&mut buf, &rows)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

fn scan(cfg: &Config) -> Result<(Value, bool)> {
    let spec = ScanSpec {
        p_values: cfg.scan_p.clone(),
        alpha_values: cfg.scan_alpha.clone(),
        q_values: cfg.scan_q.clone(),
        problem: cfg.problem,
        options: cfg.solve_options(),
        multistarts: cfg.scan_multistarts,
        out_dir: cfg.out_dir.clone(),
    };
    let run = run_scan(&spec)?;
    let m = &run.manifest;
    let errors = m.cells.iter().filter(|c| c.error.is_some()).count();
    let unconverged = m
        .cells
        .iter()
        .filter(|c| {
            c.outcome
                .as_ref()
                .is_some_and(|o: &SolveOutcome| !o.converged)
        })
        .count();
    let violations = m.threshold_violations();
    Ok((
        json!({
            "command": "scan",
            "out_dir": cfg.out_dir.display().to_string(),
            "spec_hash": m.spec_hash,
            "cells": m.cells.len(),
            "solves_performed": run.solves_performed,
            "cell_errors": errors,
            "unconverged": unconverged,
            "threshold_violations": violations,
        }),
        unconverged == 0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("psm").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_config_and_env_seed_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "alpha = 3\nq = 2\nseeds.rng = 5\n").unwrap();
        let cli = parse(&[
            "solve-radial",
            "--config",
            path.to_str().unwrap(),
            "--q",
            "7",
            "--set",
            "radial.m=256",
        ]);
        let cfg = common(&cli.command).resolve(Some("9".into())).unwrap();
        assert_eq!(
            (cfg.alpha, cfg.q, cfg.radial_m, cfg.seed),
            (3.0, 7.0, 256, 9)
        );
        let cli = parse(&[
            "solve-radial",
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "11",
        ]);
        assert_eq!(
            common(&cli.command).resolve(Some("9".into())).unwrap().seed,
            11
        );
    }

    #[test]
    fn invalid_input_exits_with_two() {
        assert_eq!(run(["psm", "solve-radial", "--set", "nope=1"]), 2);
        assert_eq!(run(["psm", "solve-radial", "--alpha", "x"]), 2);
        assert_eq!(run(["psm", "solve-radial", "--p", "3"]), 2);
        assert_eq!(run(["psm", "frobnicate"]), 2);
    }

    #[test]
    fn constants_row_has_closed_form_first_constant() {
        let cli = parse(&["constants", "--alpha", "5", "--p", "6"]);
        let (out, ok) = dispatch(&cli.command, None).unwrap();
        assert!(ok);
        let mut lines = out.lines();
        assert_eq!(lines.next().unwrap(), "alpha,p,beta,epsilon,C,C1,C2,qbar");
        let row: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        let c1 = 1.0 / (2.0 * std::f64::consts::PI * std::f64::consts::LN_2);
        assert!((row[5] - c1).abs() < 1e-12);
        assert!(lines.next().is_none());
    }

    #[test]
    fn lemma_suite_is_all_satisfied() {
        let cli = parse(&["verify", "--suite", "lemma", "--alpha", "6", "--p", "6"]);
        let (out, ok) = dispatch(&cli.command, None).unwrap();
        let v: Value = serde_json::from_str(&out).unwrap();
        assert!(ok);
        assert_eq!(v["table"][0]["satisfied"], 100);
        assert_eq!(v["table"][0]["total"], 100);
    }
}
