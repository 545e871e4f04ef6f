//! The constructive programs: radial minimization of `I`, constrained
//! minimization of `G` on `{V0 = 1}`, mountain passes for `J` in dihedral
//! classes, and the threshold search for the existence coupling.

mod constrained;
mod mountain;
pub(crate) mod optim;
mod radial;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fields::{x_norm, Field2D, Grid2D, ProblemParams, RadialField, RadialGrid};

pub use constrained::{find_t0_on_h, minimize_on_h, v0_dilated};
pub use mountain::{dihedral_seed, mountain_pass, mountain_pass_with_state, MountainPassState};
pub use radial::{
    best_trial as radial_best_trial, find_q_tilde, gaussian_family, minimize_i_radial,
    pde_residual_radial, radial_multistart, GaussianTrial, PdeResidual, DEFAULT_FAMILY_SIZE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    TrivialCollapse,
    NegativeLevelMinimizer,
    MountainPassSolution,
    ConstrainedMinimizer,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::TrivialCollapse => "trivial_collapse",
            Classification::NegativeLevelMinimizer => "negative_level_minimizer",
            Classification::MountainPassSolution => "mountain_pass_solution",
            Classification::ConstrainedMinimizer => "constrained_minimizer",
        }
    }
}

/// A solution on either discretization.
#[derive(Debug, Clone, PartialEq)]
pub enum Solution {
    Plane(Field2D),
    Radial(RadialField),
}

impl Solution {
    pub fn values(&self) -> &[f64] {
        match self {
            Solution::Plane(u) => &u.values,
            Solution::Radial(u) => &u.values,
        }
    }

    pub fn x_norm(&self, alpha: f64) -> f64 {
        match self {
            Solution::Plane(u) => x_norm(u, alpha),
            Solution::Radial(u) => x_norm(u, alpha),
        }
    }

    pub fn grid_label(&self) -> GridSpec {
        match self {
            Solution::Plane(u) => GridSpec::Plane(u.grid),
            Solution::Radial(u) => GridSpec::Radial(u.grid),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    Plane(Grid2D),
    Radial(RadialGrid),
}

/// Result of one solve. The field itself is not serialized; it goes to a
/// field file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub classification: Classification,
    #[serde(skip)]
    pub solution: Option<Solution>,
    pub grid: Option<GridSpec>,
    pub level: f64,
    pub multiplier_lambda: Option<f64>,
    pub q_effective: f64,
    /// X-dual norm of the (projected) gradient divided by `max(1, ||u||)`.
    pub residual_grad: f64,
    /// Absolute X-dual norm of the gradient.
    pub residual_grad_abs: f64,
    /// `|N(u)| / max(1, ||u||^2)`.
    pub residual_nehari: f64,
    /// `|P(u; 0)|` divided by the sum of magnitudes of its terms.
    pub residual_pohozaev: f64,
    pub x_norm: f64,
    pub l2_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Diagnostics: anomalies, range tags, restarts.
    pub notes: Vec<String>,
}

impl SolveOutcome {
    pub fn is_trivial(&self) -> bool {
        self.classification == Classification::TrivialCollapse
    }
}

/// Budgets and tolerances shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative tolerance on the gradient dual norm.
    pub tol_grad: f64,
    pub max_iter: usize,
    /// Planar grid for the nonradial solvers.
    pub grid_n: usize,
    pub grid_l: f64,
    /// Radial grid; `radial_r <= 0` selects the radius from the seed scale.
    pub radial_m: usize,
    pub radial_r: f64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_grad: 1e-6,
            max_iter: 5000,
            grid_n: 64,
            grid_l: 6.0,
            radial_m: 1024,
            radial_r: 0.0,
            seed: 1,
        }
    }
}

/// Provenance of one solver invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub operation: String,
    pub params: ProblemParams,
    pub options: SolveOptions,
    pub extra: serde_json::Value,
    /// SHA-256 of the canonical JSON of `(operation, params, options, extra)`.
    pub input_hash: String,
    pub outcome: SolveOutcome,
    pub wall_seconds: f64,
    pub version: String,
}

pub fn input_hash(
    operation: &str,
    params: &ProblemParams,
    options: &SolveOptions,
    extra: &serde_json::Value,
) -> String {
    let canon = serde_json::json!({ "op": operation, "params": params, "options": options, "extra": extra });
    let digest = Sha256::digest(canon.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    /// Runs `f` and records its provenance.
    pub fn record<F>(
        operation: &str,
        params: &ProblemParams,
        options: &SolveOptions,
        extra: serde_json::Value,
        f: F,
    ) -> crate::error::Result<RunManifest>
    where
        F: FnOnce() -> crate::error::Result<SolveOutcome>,
    {
        let start = Instant::now();
        let outcome = f()?;
        Ok(RunManifest {
            operation: operation.to_string(),
            params: *params,
            options: *options,
            input_hash: input_hash(operation, params, options, &extra),
            extra,
            outcome,
            wall_seconds: start.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }
}
