//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! problem = p1
//! alpha = 5
//! scan.q = 1e-5, 100
//! ```
//!
//! Unknown keys are rejected. Lists are comma separated.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Grid2D;
use crate::phase::ScanProblem;
use crate::solver::SolveOptions;
use crate::symmetry::SymmetryClass;

/// Every key, its default, and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("problem", "p1", "p1, p2 or pw"),
    ("alpha", "5", "confinement exponent"),
    ("p", "6", "power of the local term"),
    ("q", "1", "coupling"),
    ("grid.n", "64", "planar cells per side (even, >= 8)"),
    ("grid.L", "6", "planar half width"),
    ("radial.m", "1024", "radial cells"),
    (
        "radial.R",
        "0",
        "radial radius; 0 picks it from the seed width",
    ),
    ("radial.multistarts", "0", "extra random radial descents"),
    (
        "symmetry",
        "auto",
        "radial, odd_even, dihedral1..3; auto = odd_even or dihedral1",
    ),
    ("tolerances.grad", "1e-6", "relative gradient tolerance"),
    ("solver.max_iter", "5000", "iteration budget"),
    ("seeds.rng", "1", "seed of every random draw"),
    ("mp.points", "17", "mountain-pass path intervals"),
    ("w.c1", "0", "quadratic coefficient of W"),
    ("w.c2", "0.25", "power coefficient of W"),
    (
        "verify.count",
        "100",
        "random fields per verification suite",
    ),
    (
        "verify.beta",
        "0",
        "beta of the weighted log estimate; 0 = (2p-4)/(p-4)",
    ),
    (
        "verify.epsilon",
        "1",
        "epsilon of the weighted log estimate",
    ),
    ("scan.p", "5,6,7,8", "scan list"),
    ("scan.alpha", "7,8,9,10", "scan list"),
    ("scan.q", "1e-5,100", "scan list"),
    ("scan.multistarts", "4", "multistarts per radial scan cell"),
    ("out.dir", "psm-out", "output directory"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub problem: ScanProblem,
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub grid_n: usize,
    pub grid_l: f64,
    pub radial_m: usize,
    pub radial_r: f64,
    pub radial_multistarts: usize,
    pub symmetry: Option<SymmetryClass>,
    pub tol_grad: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub mp_points: usize,
    pub w_c1: f64,
    pub w_c2: f64,
    pub verify_count: usize,
    pub verify_beta: f64,
    pub verify_epsilon: f64,
    pub scan_p: Vec<f64>,
    pub scan_alpha: Vec<f64>,
    pub scan_q: Vec<f64>,
    pub scan_multistarts: usize,
    pub out_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        let mut c = Config {
            problem: ScanProblem::P1,
            alpha: 0.0,
            p: 0.0,
            q: 0.0,
            grid_n: 0,
            grid_l: 0.0,
            radial_m: 0,
            radial_r: 0.0,
            radial_multistarts: 0,
            symmetry: None,
            tol_grad: 0.0,
            max_iter: 0,
            seed: 0,
            mp_points: 0,
            w_c1: 0.0,
            w_c2: 0.0,
            verify_count: 0,
            verify_beta: 0.0,
            verify_epsilon: 0.0,
            scan_p: Vec::new(),
            scan_alpha: Vec::new(),
            scan_q: Vec::new(),
            scan_multistarts: 0,
            out_dir: PathBuf::new(),
        };
        for (k, v, _) in KEYS {
            c.set(k, v).expect("defaults parse");
        }
        c
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("{key}: cannot parse '{v}'"))
}

fn list(key: &str, v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

impl Config {
    /// Sets one key; the error names the key and the bad value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key {
            "problem" => {
                self.problem =
                    ScanProblem::parse(v).ok_or_else(|| format!("problem: unknown '{v}'"))?
            }
            "alpha" => self.alpha = num(key, v)?,
            "p" => self.p = num(key, v)?,
            "q" => self.q = num(key, v)?,
            "grid.n" => self.grid_n = num(key, v)?,
            "grid.L" => self.grid_l = num(key, v)?,
            "radial.m" => self.radial_m = num(key, v)?,
            "radial.R" => self.radial_r = num(key, v)?,
            "radial.multistarts" => self.radial_multistarts = num(key, v)?,
            "symmetry" => {
                self.symmetry = match v {
                    "auto" => None,
                    s => Some(s.parse().map_err(|e: Error| format!("symmetry: {e}"))?),
                }
            }
            "tolerances.grad" => self.tol_grad = num(key, v)?,
            "solver.max_iter" => self.max_iter = num(key, v)?,
            "seeds.rng" => self.seed = num(key, v)?,
            "mp.points" => self.mp_points = num(key, v)?,
            "w.c1" => self.w_c1 = num(key, v)?,
            "w.c2" => self.w_c2 = num(key, v)?,
            "verify.count" => self.verify_count = num(key, v)?,
            "verify.beta" => self.verify_beta = num(key, v)?,
            "verify.epsilon" => self.verify_epsilon = num(key, v)?,
            "scan.p" => self.scan_p = list(key, v)?,
            "scan.alpha" => self.scan_alpha = list(key, v)?,
            "scan.q" => self.scan_q = list(key, v)?,
            "scan.multistarts" => self.scan_multistarts = num(key, v)?,
            "out.dir" => self.out_dir = PathBuf::from(v),
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Applies a config file on top of `self`.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                reason: format!("expected key = value, got '{line}'"),
            })?;
            self.set(k.trim(), v).map_err(|reason| Error::Config {
                line: i + 1,
                reason,
            })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Config::default();
        c.merge_text(text)?;
        Ok(c)
    }

    /// Range checks that do not depend on the command.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::Config { line: 0, reason });
        Grid2D::new(self.grid_l, self.grid_n).map_err(|e| Error::Config {
            line: 0,
            reason: format!("grid: {e}"),
        })?;
        if self.radial_m < 2 {
            return bad(format!("radial.m must be >= 2, got {}", self.radial_m));
        }
        if !(self.radial_r >= 0.0 && self.radial_r.is_finite()) {
            return bad(format!("radial.R must be >= 0, got {}", self.radial_r));
        }
        if !(self.tol_grad > 0.0) {
            return bad(format!(
                "tolerances.grad must be > 0, got {}",
                self.tol_grad
            ));
        }
        if self.max_iter == 0 {
            return bad("solver.max_iter must be positive".into());
        }
        if self.mp_points < 2 {
            return bad(format!("mp.points must be >= 2, got {}", self.mp_points));
        }
        if !(self.verify_epsilon > 0.0) || self.verify_beta < 0.0 {
            return bad("verify.epsilon must be > 0 and verify.beta >= 0".into());
        }
        Ok(())
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol_grad: self.tol_grad,
            max_iter: self.max_iter,
            grid_n: self.grid_n,
            grid_l: self.grid_l,
            radial_m: self.radial_m,
            radial_r: self.radial_r,
            seed: self.seed,
        }
    }

    /// The config as text that [`Config::parse`] reads back.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let sym = match self.symmetry {
            None => "auto".to_string(),
            Some(SymmetryClass::Radial) => "radial".into(),
            Some(SymmetryClass::OddEven) => "odd_even".into(),
            Some(SymmetryClass::Dihedral(k)) => format!("dihedral{k}"),
        };
        let problem = match self.problem {
            ScanProblem::P1 => "p1",
            ScanProblem::P2 => "p2",
            ScanProblem::Pw => "pw",
        };
        let mut s = String::new();
        let rows: [(&str, String); 24] = [
            ("problem", problem.into()),
            ("alpha", self.alpha.to_string()),
            ("p", self.p.to_string()),
            ("q", self.q.to_string()),
            ("grid.n", self.grid_n.to_string()),
            ("grid.L", self.grid_l.to_string()),
            ("radial.m", self.radial_m.to_string()),
            ("radial.R", self.radial_r.to_string()),
            ("radial.multistarts", self.radial_multistarts.to_string()),
            ("symmetry", sym),
            ("tolerances.grad", self.tol_grad.to_string()),
            ("solver.max_iter", self.max_iter.to_string()),
            ("seeds.rng", self.seed.to_string()),
            ("mp.points", self.mp_points.to_string()),
            ("w.c1", self.w_c1.to_string()),
            ("w.c2", self.w_c2.to_string()),
            ("verify.count", self.verify_count.to_string()),
            ("verify.beta", self.verify_beta.to_string()),
            ("verify.epsilon", self.verify_epsilon.to_string()),
            ("scan.p", join(&self.scan_p)),
            ("scan.alpha", join(&self.scan_alpha)),
            ("scan.q", join(&self.scan_q)),
            ("scan.multistarts", self.scan_multistarts.to_string()),
            ("out.dir", self.out_dir.display().to_string()),
        ];
        for (k, v) in rows {
            writeln!(s, "{k} = {v}").expect("string write");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_cover_every_key() {
        let c = Config::default();
        assert_eq!(c.grid_n, 64);
        assert_eq!(c.scan_q, vec![1e-5, 100.0]);
        assert_eq!(c.symmetry, None);
        assert_eq!(KEYS.len(), c.to_text().lines().count());
    }

    #[test]
    fn unknown_keys_and_bad_lines_name_the_line() {
        match Config::parse("alpha = 3\n\nbogus = 1\n") {
            Err(Error::Config { line, reason }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            Config::parse("alpha 3"),
            Err(Error::Config { line: 1, .. })
        ));
        assert!(matches!(
            Config::parse("grid.n = x"),
            Err(Error::Config { line: 1, .. })
        ));
        assert!(Config::default().validate().is_ok());
        assert!(Config::parse("grid.n = 7").unwrap().validate().is_err());
        assert!(Config::parse("tolerances.grad = 0")
            .unwrap()
            .validate()
            .is_err());
    }

    #[test]
    fn comments_lists_and_symmetry() {
        let c =
            Config::parse("# run\nscan.q = 1, 2.5 ,3 # three\nsymmetry = dihedral3\nproblem = PW")
                .unwrap();
        assert_eq!(c.scan_q, vec![1.0, 2.5, 3.0]);
        assert_eq!(c.symmetry, Some(SymmetryClass::Dihedral(3)));
        assert_eq!(c.problem, ScanProblem::Pw);
    }

    proptest! {
        #[test]
        fn text_round_trips(alpha in 0.1f64..20.0, q in 0.0f64..1e3, n in 4usize..200, seed in any::<u64>()) {
            let mut c = Config::default();
            c.alpha = alpha;
            c.q = q;
            c.grid_n = 2 * n;
            c.seed = seed;
            c.symmetry = Some(SymmetryClass::Dihedral(2));
            prop_assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
        }
    }
}
