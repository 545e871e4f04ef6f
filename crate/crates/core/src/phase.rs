//! Parameter sweeps over `(p, alpha, q)`: thresholds, one designated solve per
//! cell, classification, and the files of a scan directory:
//!
//! ```text
//! <out>/manifest.json
//! <out>/scan.csv
//! <out>/fields/<cell>.psm2 (+ .json sidecar)
//! <out>/plots/phase.dat, <out>/plots/thresholds.dat
//! ```
//!
//! A scan whose directory already holds a manifest with the same spec hash is
//! not recomputed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::energy::PowerLaw;
use crate::error::{Error, Result};
use crate::fields::{Field2D, Grid2D, LocalSign, ProblemParams, WCoeffs};
use crate::inequalities::nonexistence_qbar;
use crate::io::write_field;
use crate::solver::{
    find_q_tilde, minimize_i_radial, minimize_on_h, mountain_pass, radial_multistart,
    Classification, SolveOptions, SolveOutcome, DEFAULT_FAMILY_SIZE,
};
use crate::symmetry::SymmetryClass;

/// Which problem a scan solves in each cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanProblem {
    /// Radial minimization of `I` plus multistarts.
    P1,
    /// Mountain pass for `J` in the class of order 1.
    P2,
    /// Constrained minimization with `W(s) = |s|^p / 4` in the odd-even class;
    /// `q` comes out as `4 lambda`.
    Pw,
}

impl ScanProblem {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Some(ScanProblem::P1),
            "p2" => Some(ScanProblem::P2),
            "pw" => Some(ScanProblem::Pw),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub p_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub q_values: Vec<f64>,
    pub problem: ScanProblem,
    pub options: SolveOptions,
    /// Extra random radial descents per `P1` cell.
    pub multistarts: usize,
    /// Not part of the spec hash.
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p", &self.p_values),
            ("alpha", &self.alpha_values),
            ("q", &self.q_values),
        ] {
            if v.is_empty() {
                return Err(Error::InvalidParams(format!("scan list {name} is empty")));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "scan list {name} has a non-finite entry"
                )));
            }
        }
        if self.p_values.iter().any(|&p| p <= 2.0) {
            return Err(Error::InvalidParams("scan needs p > 2".into()));
        }
        if self.alpha_values.iter().any(|&a| a <= 0.0) {
            return Err(Error::InvalidParams("scan needs alpha > 0".into()));
        }
        if self.q_values.iter().any(|&q| q < 0.0) {
            return Err(Error::InvalidParams("scan needs q >= 0".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of everything but the output directory.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn cells(&self) -> Vec<(usize, f64, f64, f64)> {
        let mut out = Vec::new();
        for &p in &self.p_values {
            for &alpha in &self.alpha_values {
                for &q in &self.q_values {
                    out.push((out.len(), p, alpha, q));
                }
            }
        }
        out
    }
}

/// `q-bar` and `q-tilde_est` of one `(p, alpha)`; `None` where undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsRow {
    pub p: f64,
    pub alpha: f64,
    pub qbar: Option<f64>,
    /// `None` also when no trial of the family reaches negative energy.
    pub qtilde_est: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub id: String,
    pub p: f64,
    pub alpha: f64,
    pub q: f64,
    pub qbar: Option<f64>,
    pub qtilde_est: Option<f64>,
    pub outcome: Option<SolveOutcome>,
    pub multistart_classes: Vec<Classification>,
    pub field_file: Option<String>,
    pub error: Option<String>,
}

impl CellRecord {
    pub fn classification_label(&self) -> &str {
        self.outcome
            .as_ref()
            .map_or("error", |o| o.classification.as_str())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanManifest {
    pub spec_hash: String,
    pub spec: ScanSpec,
    pub constants: Vec<ConstantsRow>,
    pub cells: Vec<CellRecord>,
    pub created_unix: u64,
    pub version: String,
}

impl ScanManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(
            dir.join("manifest.json"),
        )?)?)
    }

    /// Cells that contradict the thresholds: a nontrivial minimizer below
    /// `q-bar`, or a collapse at or above `q-tilde_est`.
    pub fn threshold_violations(&self) -> Vec<String> {
        if self.spec.problem != ScanProblem::P1 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for c in &self.cells {
            let Some(o) = &c.outcome else { continue };
            let below = c.qbar.is_some_and(|qb| c.q < qb);
            let above = c.qtilde_est.is_some_and(|qt| c.q >= qt);
            let any_nontrivial = o.classification != Classification::TrivialCollapse
                || c.multistart_classes
                    .iter()
                    .any(|k| *k != Classification::TrivialCollapse);
            if below && any_nontrivial {
                out.push(format!("{}: nontrivial outcome below q-bar", c.id));
            }
            if above && o.classification != Classification::NegativeLevelMinimizer {
                out.push(format!(
                    "{}: {} at or above q-tilde",
                    c.id,
                    o.classification.as_str()
                ));
            }
        }
        out
    }
}

/// A finished scan and how many cells were solved in this call.
#[derive(Debug, Clone)]
pub struct ScanRun {
    pub manifest: ScanManifest,
    pub solves_performed: usize,
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn cell_id(index: usize, p: f64, alpha: f64, q: f64) -> String {
    let clean = |x: f64| fmt_num(x).replace('-', "m").replace('.', "_");
    format!("c{index:04}-p{}-a{}-q{}", clean(p), clean(alpha), clean(q))
}

fn constants_for(p: f64, alpha: f64) -> ConstantsRow {
    let qbar = nonexistence_qbar(alpha, p).ok();
    let qtilde_est = ProblemParams::new(alpha, p, 1.0, LocalSign::Plus)
        .and_then(|pp| find_q_tilde(&pp, DEFAULT_FAMILY_SIZE))
        .ok()
        .filter(|q| q.is_finite());
    ConstantsRow {
        p,
        alpha,
        qbar,
        qtilde_est,
    }
}

fn solve_cell(
    spec: &ScanSpec,
    p: f64,
    alpha: f64,
    q: f64,
) -> Result<(SolveOutcome, Vec<Classification>)> {
    let opts = spec.options;
    match spec.problem {
        ScanProblem::P1 => {
            let params = ProblemParams::new(alpha, p, q, LocalSign::Plus)?;
            let main = minimize_i_radial(&params, &opts)?;
            let classes = if spec.multistarts > 0 {
                radial_multistart(&params, spec.multistarts, &opts)?
                    .iter()
                    .map(|o| o.classification)
                    .collect()
            } else {
                Vec::new()
            };
            Ok((main, classes))
        }
        ScanProblem::P2 => {
            let params = ProblemParams::new(alpha, p, q, LocalSign::Minus)?;
            Ok((mountain_pass(&params, 1, 17, &opts)?, Vec::new()))
        }
        ScanProblem::Pw => {
            let w = WCoeffs {
                c1: 0.0,
                c2: 0.25,
                p,
            };
            let params = ProblemParams::with_w(alpha, w)?;
            let grid = Grid2D::new(opts.grid_l, opts.grid_n)?;
            let seed = Field2D::from_fn(grid, |x, y| x * (-(x * x + y * y) / 2.0).exp());
            let out = minimize_on_h(
                &seed,
                &params,
                Arc::new(PowerLaw(w)),
                SymmetryClass::OddEven,
                &opts,
            )?;
            Ok((out, Vec::new()))
        }
    }
}

fn write_csv(dir: &Path, cells: &[CellRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(dir.join("scan.csv"))?;
    w.write_record([
        "p",
        "alpha",
        "q",
        "qbar",
        "qtilde_est",
        "classification",
        "level",
        "residual",
    ])?;
    let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
    for c in cells {
        let (level, residual) = c
            .outcome
            .as_ref()
            .map_or((String::new(), String::new()), |o| {
                (format!("{:e}", o.level), format!("{:e}", o.residual_grad))
            });
        w.write_record([
            fmt_num(c.p),
            fmt_num(c.alpha),
            fmt_num(c.q),
            opt(c.qbar),
            opt(c.qtilde_est),
            c.classification_label().to_string(),
            level,
            residual,
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn class_code(label: &str) -> i32 {
    match label {
        "trivial_collapse" => 0,
        "negative_level_minimizer" => 1,
        "mountain_pass_solution" => 2,
        "constrained_minimizer" => 3,
        _ => -1,
    }
}

fn write_plots(dir: &Path, m: &ScanManifest) -> Result<()> {
    let plots = dir.join("plots");
    fs::create_dir_all(&plots)?;
    let mut phase = String::from("# p alpha q class level\n# class: -1 error, 0 trivial, 1 negative level, 2 mountain pass, 3 constrained\n");
    for c in &m.cells {
        let level = c.outcome.as_ref().map_or(f64::NAN, |o| o.level);
        writeln!(
            phase,
            "{} {} {} {} {:e}",
            c.p,
            c.alpha,
            c.q,
            class_code(c.classification_label()),
            level
        )
        .expect("string write");
    }
    fs::write(plots.join("phase.dat"), phase)?;
    let mut th = String::from("# p alpha qbar qtilde_est (nan = undefined)\n");
    for r in &m.constants {
        writeln!(
            th,
            "{} {} {:e} {:e}",
            r.p,
            r.alpha,
            r.qbar.unwrap_or(f64::NAN),
            r.qtilde_est.unwrap_or(f64::NAN)
        )
        .expect("string write");
    }
    fs::write(plots.join("thresholds.dat"), th)?;
    Ok(())
}

/// Runs (or reloads) a scan. Cells run concurrently on the current rayon
/// pool; a failing cell is recorded and never aborts the scan.
pub fn run_scan(spec: &ScanSpec) -> Result<ScanRun> {
    spec.validate()?;
    let dir = &spec.out_dir;
    let hash = spec.hash();
    if let Ok(existing) = ScanManifest::load(dir) {
        if existing.spec_hash == hash {
            return Ok(ScanRun {
                manifest: existing,
                solves_performed: 0,
            });
        }
    }
    fs::create_dir_all(dir.join("fields"))?;

    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for &p in &spec.p_values {
        for &a in &spec.alpha_values {
            pairs.push((p, a));
        }
    }
    let constants: Vec<ConstantsRow> = pairs
        .par_iter()
        .map(|&(p, a)| constants_for(p, a))
        .collect();
    let lookup = |p: f64, a: f64| {
        *constants
            .iter()
            .find(|r| r.p == p && r.alpha == a)
            .expect("every pair has a constants row")
    };

    let records: Vec<CellRecord> = spec
        .cells()
        .into_par_iter()
        .map(|(index, p, alpha, q)| {
            let id = cell_id(index, p, alpha, q);
            let row = lookup(p, alpha);
            let mut rec = CellRecord {
                id: id.clone(),
                p,
                alpha,
                q,
                qbar: row.qbar,
                qtilde_est: row.qtilde_est,
                outcome: None,
                multistart_classes: Vec::new(),
                field_file: None,
                error: None,
            };
            match solve_cell(spec, p, alpha, q) {
                Ok((outcome, classes)) => {
                    if let Some(sol) = &outcome.solution {
                        let rel = format!("fields/{id}.psm2");
                        let prov = serde_json::json!({ "spec_hash": hash, "cell": id });
                        match write_field(&dir.join(&rel), sol, None, prov) {
                            Ok(()) => rec.field_file = Some(rel),
                            Err(e) => rec.error = Some(format!("field file: {e}")),
                        }
                    }
                    rec.outcome = Some(outcome);
                    rec.multistart_classes = classes;
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec
        })
        .collect();

    let manifest = ScanManifest {
        spec_hash: hash,
        spec: spec.clone(),
        constants,
        cells: records,
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_csv(dir, &manifest.cells)?;
    write_plots(dir, &manifest)?;
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    let solves = manifest.cells.len();
    Ok(ScanRun {
        manifest,
        solves_performed: solves,
    })
}
