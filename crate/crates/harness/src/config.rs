//! Experiment configuration: a JSON file and command-line flags, merged.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Bottom eigenvalues, Gumbel fit, localization centers.
    Spectrum,
    /// Explosion times of the Riccati diffusion and their interval counts.
    Explosions,
    /// First explosion times against the exponential law.
    Mckean,
    /// Counts on the exponential-quantile grid over the level set `𝓜_{L,ε}`.
    Poisson,
    /// Eigenfunction and environment profiles around the localization center.
    Shape,
    /// Tridiagonal ensemble edge against the operator's ground state.
    EnsembleEdge,
    /// Exit-time transform of the Ornstein–Uhlenbeck process.
    OuExit,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::Spectrum,
        Self::Explosions,
        Self::Mckean,
        Self::Poisson,
        Self::Shape,
        Self::EnsembleEdge,
        Self::OuExit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::Explosions => "explosions",
            Self::Mckean => "mckean",
            Self::Poisson => "poisson",
            Self::Shape => "shape",
            Self::EnsembleEdge => "ensemble-edge",
            Self::OuExit => "ou-exit",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment kind {s:?}")))
    }
}

/// Every setting optional; used for config files and flags alike.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigPatch {
    /// Inverse temperature β.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Level `a` of the homogeneous diffusion.
    #[arg(long)]
    pub a: Option<f64>,
    /// Horizon T.
    #[arg(long = "T", value_name = "T")]
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Depth of the exponential-quantile grid.
    #[arg(long)]
    pub n: Option<u32>,
    /// Spacing parameter of the level grid.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Base step of the Brownian path or of the OU scheme.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Eigenvalue tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Level of the statistical tests.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Number of eigenvalues per replica.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Matrix size of the tridiagonal ensemble.
    #[arg(long)]
    pub size: Option<usize>,
    /// Replicas that also solve the operator (ensemble-edge).
    #[arg(long)]
    pub sao_replicas: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    /// Exit level of the rescaled OU process.
    #[arg(long)]
    pub b: Option<f64>,
    /// OU paths per replica.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Number of equal cells for interval counts.
    #[arg(long)]
    pub cells: Option<usize>,
    /// Half-width of the shape window in microscopic units.
    #[arg(long)]
    pub x_max: Option<f64>,
    /// Where to write the JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub workers: Option<usize>,
}

macro_rules! overlay {
    ($base:expr, $top:expr; $($f:ident),*) => {
        ConfigPatch { $($f: $top.$f.or($base.$f)),* }
    };
}

impl ConfigPatch {
    /// Fields set in `top` win.
    pub fn overlay(self, top: ConfigPatch) -> ConfigPatch {
        overlay!(self, top; beta, a, horizon, replicas, n, epsilon, dt, tol, seed, alpha, k_max, size,
            sao_replicas, theta, nu, b, paths, cells, x_max, out, workers)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path.display(), e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }
}

/// A complete, validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub beta: Option<f64>,
    pub a: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub replicas: usize,
    pub n: Option<u32>,
    pub epsilon: Option<f64>,
    pub dt: f64,
    pub tol: f64,
    pub seed: u64,
    pub alpha: f64,
    pub k_max: usize,
    pub size: Option<usize>,
    pub sao_replicas: usize,
    pub theta: Option<f64>,
    pub nu: Option<f64>,
    pub b: Option<f64>,
    pub paths: usize,
    pub cells: usize,
    pub x_max: f64,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    /// Fills defaults for `kind` and validates.
    pub fn from_patch(kind: ExperimentKind, p: ConfigPatch) -> Result<Self> {
        let default_dt = match kind {
            ExperimentKind::OuExit => 2e-3,
            ExperimentKind::EnsembleEdge => 1e-3,
            _ => 1e-2,
        };
        let cfg = Self {
            kind,
            beta: p.beta,
            a: p.a,
            horizon: p.horizon,
            replicas: p.replicas.unwrap_or(100),
            n: p.n,
            epsilon: p.epsilon,
            dt: p.dt.unwrap_or(default_dt),
            tol: p.tol.unwrap_or(1e-8),
            seed: p.seed.unwrap_or(0),
            alpha: p.alpha.unwrap_or(sao_core::stats::DEFAULT_ALPHA),
            k_max: p.k_max.unwrap_or(if kind == ExperimentKind::EnsembleEdge { 1 } else { 3 }),
            size: p.size,
            sao_replicas: p.sao_replicas.unwrap_or(0),
            theta: p.theta,
            nu: p.nu,
            b: p.b,
            paths: p.paths.unwrap_or(10_000),
            cells: p.cells.unwrap_or(8),
            x_max: p.x_max.unwrap_or(3.0),
            out: p.out,
            workers: p.workers,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                bad(format!("{name} must be positive and finite, got {v}"))
            }
        };
        let need = |name: &str, v: Option<f64>| -> Result<f64> {
            v.ok_or_else(|| HarnessError::Config(format!("{} needs --{name}", self.kind)))
        };
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        positive("dt", self.dt)?;
        positive("tol", self.tol)?;
        positive("x_max", self.x_max)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.k_max == 0 || self.cells == 0 || self.paths == 0 {
            return bad("k_max, cells and paths must be at least 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        if let Some(t) = self.horizon {
            positive("T", t)?;
        }
        let small_beta = |b: f64| -> Result<()> {
            if b > 0.0 && b <= 0.3 {
                Ok(())
            } else {
                bad(format!("{} needs 0 < beta <= 0.3, got {b}", self.kind))
            }
        };
        match self.kind {
            ExperimentKind::Spectrum | ExperimentKind::Shape => small_beta(need("beta", self.beta)?)?,
            ExperimentKind::Explosions => {
                let a = need("a", self.a)?;
                if !a.is_finite() {
                    return bad(format!("a must be finite, got {a}"));
                }
                let beta = self.beta.unwrap_or(0.0);
                if !(beta >= 0.0 && beta.is_finite()) {
                    return bad(format!("beta must be nonnegative, got {beta}"));
                }
                if beta > 0.0 && self.horizon.is_none() {
                    return bad("explosions with beta > 0 needs --T".into());
                }
            }
            ExperimentKind::Mckean => {
                let a = need("a", self.a)?;
                if !a.is_finite() {
                    return bad(format!("a must be finite, got {a}"));
                }
            }
            ExperimentKind::Poisson => {
                small_beta(need("beta", self.beta)?)?;
                let eps = need("epsilon", self.epsilon)?;
                if !(eps > 0.0 && eps <= 1.0) {
                    return bad(format!("epsilon must lie in (0, 1], got {eps}"));
                }
                match self.n {
                    Some(n) if (1..=12).contains(&n) => {}
                    Some(n) => return bad(format!("grid depth n must lie in 1..=12, got {n}")),
                    None => return bad("poisson needs --n".into()),
                }
            }
            ExperimentKind::EnsembleEdge => {
                positive("beta", need("beta", self.beta)?)?;
                match self.size {
                    Some(n) if n >= 2 && self.k_max <= n => {}
                    Some(n) => return bad(format!("size must be at least max(2, k_max), got {n}")),
                    None => return bad("ensemble-edge needs --size".into()),
                }
                if self.sao_replicas > self.replicas {
                    return bad("sao_replicas cannot exceed replicas".into());
                }
            }
            ExperimentKind::OuExit => {
                let (theta, nu, b) = (need("theta", self.theta)?, need("nu", self.nu)?, need("b", self.b)?);
                sao_core::stats::OUExitSpec::new(theta, nu, b).map_err(|e| HarnessError::Config(e.to_string()))?;
                if self.paths < 10_000 {
                    return bad(format!("ou-exit needs at least 10000 paths per replica, got {}", self.paths));
                }
            }
        }
        Ok(())
    }
}
