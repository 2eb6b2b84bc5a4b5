//! Run configuration: a TOML file with a fixed key set, validated ranges and
//! defaults. Unknown keys are rejected.
//!
//! ```toml
//! output_dir = "out"
//!
//! [profile]
//! kappa = 1.0
//! alpha = 2.0
//! delta = -1.0          # default
//! bottom = "power"      # or "flat", which requires delta_prime
//!
//! [solver]
//! n_across = 16
//! grading = 1.2
//! tol = 1e-10
//! preconditioner = "column_line"   # or "jacobi", "none"
//! d_width = 1.0
//! # truncation = 50.0  (strip cut-off, required when epsilon = 0)
//!
//! [sweep]
//! epsilons = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4]
//!
//! [collide]
//! m_s = 1.0
//! rho_f = 1.0
//! eps_star = 0.1
//! v0 = -1.0
//! eps_stop = 1e-8
//! rtol = 1e-10
//!
//! [acceptance]
//! log_slope = [0.30, 0.37]
//! power_slope = [-0.30, -0.20]
//! flat_slope_tol = 0.05
//! flat_coefficient_tol = 0.10
//! bounded_rel_change = 0.02
//! lower_bound_slack = 0.05
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CuspProfile;
use crate::solver::{Discretization, Preconditioner, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BottomKind {
    #[default]
    Power,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub kappa: f64,
    pub alpha: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub bottom: BottomKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_prime: Option<f64>,
}

fn default_delta() -> f64 {
    -1.0
}

impl ProfileConfig {
    pub fn profile(&self, epsilon: f64) -> Result<CuspProfile> {
        match self.bottom {
            BottomKind::Power => CuspProfile::power(self.kappa, self.alpha, epsilon, self.delta),
            BottomKind::Flat => {
                let dp = self.delta_prime.ok_or_else(|| {
                    config_error(None, "a flat profile requires profile.delta_prime")
                })?;
                CuspProfile::flat(self.kappa, self.alpha, epsilon, self.delta, dp)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    None,
    Jacobi,
    #[default]
    ColumnLine,
}

impl From<PreconditionerKind> for Preconditioner {
    fn from(p: PreconditionerKind) -> Self {
        match p {
            PreconditionerKind::None => Preconditioner::None,
            PreconditionerKind::Jacobi => Preconditioner::Jacobi,
            PreconditionerKind::ColumnLine => Preconditioner::ColumnLine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub n_across: usize,
    pub grading: f64,
    pub tol: f64,
    pub preconditioner: PreconditionerKind,
    pub d_width: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_across: 16,
            grading: 1.2,
            tol: 1e-10,
            preconditioner: PreconditionerKind::ColumnLine,
            d_width: 1.0,
            truncation: None,
            max_iterations: None,
        }
    }
}

impl SolverConfig {
    pub fn discretization(&self) -> Discretization {
        Discretization {
            n_across: self.n_across,
            grading: self.grading,
            solve: SolveOptions {
                tol: self.tol,
                max_iterations: self.max_iterations,
                preconditioner: self.preconditioner.into(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollideConfig {
    pub m_s: f64,
    pub rho_f: f64,
    pub eps_star: f64,
    pub v0: f64,
    pub eps_stop: f64,
    pub rtol: f64,
    /// Limit energy used when the law is bounded and no sweep is supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounded_limit: Option<f64>,
}

impl Default for CollideConfig {
    fn default() -> Self {
        Self {
            m_s: 1.0,
            rho_f: 1.0,
            eps_star: 0.1,
            v0: -1.0,
            eps_stop: 1e-8,
            rtol: 1e-10,
            bounded_limit: None,
        }
    }
}

/// Pass bands echoed into the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcceptanceConfig {
    pub log_slope: [f64; 2],
    pub power_slope: [f64; 2],
    pub flat_slope_tol: f64,
    pub flat_coefficient_tol: f64,
    pub bounded_rel_change: f64,
    pub lower_bound_slack: f64,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        Self {
            log_slope: [0.30, 0.37],
            power_slope: [-0.30, -0.20],
            flat_slope_tol: 0.05,
            flat_coefficient_tol: 0.10,
            bounded_rel_change: 0.02,
            lower_bound_slack: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    pub profile: ProfileConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub collide: CollideConfig,
    #[serde(default)]
    pub acceptance: AcceptanceConfig,
}

fn default_output_dir() -> String {
    "cusplab-out".into()
}

impl RunConfig {
    /// Defaults around the given profile parameters.
    pub fn with_profile(kappa: f64, alpha: f64) -> Self {
        Self {
            output_dir: default_output_dir(),
            profile: ProfileConfig {
                kappa,
                alpha,
                delta: default_delta(),
                bottom: BottomKind::Power,
                delta_prime: None,
            },
            solver: SolverConfig::default(),
            sweep: SweepConfig::default(),
            collide: CollideConfig::default(),
            acceptance: AcceptanceConfig::default(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_error(None, e.to_string()))
    }

    /// Range checks; `source` (when given) is used to attach line numbers.
    pub fn validate(&self, source: Option<&str>) -> Result<()> {
        let fail =
            |key: &str, msg: String| Err(config_error(source.and_then(|s| key_line(s, key)), msg));
        let p = &self.profile;
        if !(p.kappa > 0.0 && p.kappa.is_finite()) {
            return fail(
                "kappa",
                format!("profile.kappa must be positive, got {}", p.kappa),
            );
        }
        if !(p.alpha > 0.0 && p.alpha.is_finite()) {
            return fail(
                "alpha",
                format!("profile.alpha must be positive, got {}", p.alpha),
            );
        }
        if !(p.delta < 0.0 && p.delta.is_finite()) {
            return fail(
                "delta",
                format!("profile.delta must be negative, got {}", p.delta),
            );
        }
        match (p.bottom, p.delta_prime) {
            (BottomKind::Flat, None) => {
                return fail(
                    "bottom",
                    "a flat profile requires profile.delta_prime".into(),
                )
            }
            (BottomKind::Flat, Some(dp)) if !(dp > p.delta && dp < 0.0) => {
                return fail(
                    "delta_prime",
                    format!("profile.delta_prime must lie in (delta, 0), got {dp}"),
                )
            }
            (BottomKind::Power, Some(_)) => {
                return fail(
                    "delta_prime",
                    "profile.delta_prime is only valid for bottom = \"flat\"".into(),
                )
            }
            _ => {}
        }
        let s = &self.solver;
        if s.n_across < 4 {
            return fail(
                "n_across",
                format!("solver.n_across must be at least 4, got {}", s.n_across),
            );
        }
        if !(s.grading >= 1.0 && s.grading <= 4.0) {
            return fail(
                "grading",
                format!("solver.grading must lie in [1, 4], got {}", s.grading),
            );
        }
        if !(s.tol > 0.0 && s.tol < 1.0) {
            return fail(
                "tol",
                format!("solver.tol must lie in (0, 1), got {}", s.tol),
            );
        }
        if !(s.d_width > 0.0 && s.d_width.is_finite()) {
            return fail(
                "d_width",
                format!("solver.d_width must be positive, got {}", s.d_width),
            );
        }
        if let Some(t) = s.truncation {
            if !(t > 0.0 && t.is_finite()) {
                return fail(
                    "truncation",
                    format!("solver.truncation must be positive, got {t}"),
                );
            }
        }
        let eps = &self.sweep.epsilons;
        if eps.is_empty() {
            return fail("epsilons", "sweep.epsilons must not be empty".into());
        }
        if eps.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return fail("epsilons", "sweep.epsilons must lie in (0, 1]".into());
        }
        if eps.windows(2).any(|w| !(w[1] < w[0])) {
            return fail(
                "epsilons",
                "sweep.epsilons must be strictly decreasing".into(),
            );
        }
        let c = &self.collide;
        for (key, v) in [("m_s", c.m_s), ("rho_f", c.rho_f), ("eps_star", c.eps_star)] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(key, format!("collide.{key} must be positive, got {v}"));
            }
        }
        if !(c.v0 < 0.0) {
            return fail("v0", format!("collide.v0 must be negative, got {}", c.v0));
        }
        if !(c.eps_stop > 0.0 && c.eps_stop < c.eps_star) {
            return fail(
                "eps_stop",
                format!(
                    "collide.eps_stop must lie in (0, eps_star), got {}",
                    c.eps_stop
                ),
            );
        }
        if !(c.rtol > 0.0 && c.rtol < 1.0) {
            return fail(
                "rtol",
                format!("collide.rtol must lie in (0, 1), got {}", c.rtol),
            );
        }
        let a = &self.acceptance;
        for (key, band) in [("log_slope", a.log_slope), ("power_slope", a.power_slope)] {
            if !(band[0] <= band[1]) {
                return fail(key, format!("acceptance.{key} must be an ordered pair"));
            }
        }
        Ok(())
    }
}

fn config_error(line: Option<usize>, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

/// First line (1-based) whose text starts with `key` followed by `=`.
fn key_line(source: &str, key: &str) -> Option<usize> {
    source
        .lines()
        .position(|l| {
            l.trim_start()
                .strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

/// Parse and validate a configuration held in memory.
pub fn parse_config_str(source: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(source).map_err(|e| {
        let line = e
            .span()
            .map(|s| source[..s.start.min(source.len())].matches('\n').count() + 1);
        config_error(line, e.message().trim().to_string())
    })?;
    cfg.validate(Some(source))?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}
