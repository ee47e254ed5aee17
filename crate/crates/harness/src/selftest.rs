//! Fast end-to-end checks behind `sao selftest`.

use std::f64::consts::PI;

use sao_core::paths::BrownianPath;
use sao_core::riccati::{integrate_forward, DriftSpec};
use sao_core::spectrum::eigenvalue_bisect;
use sao_core::stats::{ou_exit_laplace, OUExitSpec, OU_DEFAULT_TERMS};

use crate::config::{ConfigPatch, ExperimentConfig, ExperimentKind};
use crate::run;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        self.checks
            .iter()
            .map(|c| format!("{} {:<24} {}\n", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect()
    }
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> Check {
    match f() {
        Ok(detail) => Check { name, pass: true, detail },
        Err(detail) => Check { name, pass: false, detail },
    }
}

/// Explosions at `kπ` for `a = -1` and the `coth` trajectory for `a = 1`.
pub fn riccati_quiet() -> Result<String, String> {
    let quiet = BrownianPath::zero(0.0, 10.0, 1e-3).map_err(|e| e.to_string())?;
    let osc = integrate_forward(&quiet, &DriftSpec::forward(-1.0, 0.0), 0.0, f64::INFINITY, 10.0, 1e-10)
        .map_err(|e| e.to_string())?;
    if osc.explosions.len() != 3 {
        return Err(format!("expected 3 explosions, got {:?}", osc.explosions));
    }
    let worst = osc.explosions.iter().enumerate().map(|(k, t)| (t - (k + 1) as f64 * PI).abs()).fold(0.0, f64::max);
    if worst > 1e-6 {
        return Err(format!("explosion times off by {worst:e}"));
    }
    let hyp = integrate_forward(&quiet, &DriftSpec::forward(1.0, 0.0), 0.0, f64::INFINITY, 10.0, 1e-10)
        .map_err(|e| e.to_string())?;
    if !hyp.explosions.is_empty() {
        return Err(format!("a = 1 exploded at {:?}", hyp.explosions));
    }
    let coth = hyp
        .samples
        .iter()
        .filter(|s| s.t >= 0.1)
        .map(|s| (s.z - 1.0 / s.t.tanh()).abs())
        .fold(0.0, f64::max);
    if coth > 1e-6 {
        return Err(format!("coth deviation {coth:e}"));
    }
    Ok(format!("max time error {worst:.1e}, coth error {coth:.1e}"))
}

/// `k²π²` on the unit interval.
pub fn sine_spectrum() -> Result<String, String> {
    let quiet = BrownianPath::zero(0.0, 1.0, 1e-3).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for k in 1..=3 {
        let l = eigenvalue_bisect(&quiet, 0.0, 1.0, k, 1e-10).map_err(|e| e.to_string())?;
        let want = (k as f64 * PI).powi(2);
        worst = worst.max((l / want - 1.0).abs());
    }
    if worst > 1e-3 {
        return Err(format!("relative error {worst:e}"));
    }
    Ok(format!("relative error {worst:.1e}"))
}

pub fn ou_closed_form() -> Result<String, String> {
    let spec = OUExitSpec::new(1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let v = ou_exit_laplace(&spec, OU_DEFAULT_TERMS).map_err(|e| e.to_string())?;
    let err = (v - (-0.5f64).exp()).abs();
    if err > 1e-6 {
        return Err(format!("series {v} differs from exp(-1/2) by {err:e}"));
    }
    Ok(format!("error {err:.1e}"))
}

/// Reruns small experiments with one and two workers and compares payloads.
pub fn determinism() -> Result<String, String> {
    let configs = [
        (ExperimentKind::Explosions, ConfigPatch { a: Some(0.5), horizon: Some(300.0), replicas: Some(6), ..Default::default() }),
        (ExperimentKind::Spectrum, ConfigPatch { beta: Some(0.3), replicas: Some(4), ..Default::default() }),
        (ExperimentKind::OuExit, ConfigPatch { theta: Some(2.0), nu: Some(0.5), b: Some(1.0), replicas: Some(3), dt: Some(1e-2), ..Default::default() }),
    ];
    for (kind, patch) in configs {
        let mut payloads = Vec::new();
        for workers in [1, 2, 1] {
            let cfg = ExperimentConfig::from_patch(kind, ConfigPatch { workers: Some(workers), seed: Some(17), ..patch.clone() })
                .map_err(|e| e.to_string())?;
            payloads.push(run(&cfg).map_err(|e| e.to_string())?.numeric_payload());
        }
        if payloads.windows(2).any(|w| w[0] != w[1]) {
            return Err(format!("{kind}: payload depends on the worker count or the run"));
        }
    }
    Ok("explosions, spectrum, ou-exit identical across 1/2/1 workers".into())
}

pub fn selftest() -> SelftestReport {
    SelftestReport {
        checks: vec![
            check("riccati_quiet", riccati_quiet),
            check("sine_spectrum", sine_spectrum),
            check("ou_closed_form", ou_closed_form),
            check("determinism", determinism),
        ],
    }
}
