//! One pipeline per experiment kind: a per-replica computation and an
//! aggregation step producing summary statistics and verdicts.

use std::collections::BTreeMap;

use sao_core::beta_ensemble::EnsembleSample;
use sao_core::paths::{key_hash, BrownianPath};
use sao_core::riccati::{integrate_forward, shoot, DriftSpec, ForwardRunner};
use sao_core::scaling::{invert_conventions, m, ScalingParams};
use sao_core::spectrum::{eigenvalue_bisect, eigenvalues, extract_crossing, reconstruct_eigenfunction, shape_profiles};
use sao_core::stats::{
    self, gumbel_ks, ks_statistic, mckean_exponential_test, ou_exit_laplace, ou_exit_mc, poisson_test, Cdf,
    OUExitSpec, PointProcessSample, PoissonTestConfig, PoissonVerdict, QuantileGrid, OU_DEFAULT_TERMS,
};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{HarnessError, Result};
use crate::report::{put, EcdfOverlay, ExperimentReport, ReplicaRecord, Scalars, Verdict};

/// Stitching tolerance for eigenfunction reconstruction.
const STITCH_TOL: f64 = 1e-6;
/// Window length of the homogeneous explosion simulations.
const WINDOW: f64 = 100.0;
/// Stream tag separating operator paths from ensemble draws.
const SAO_STREAM: u64 = 0x5A0;
/// Two-horizon tolerance on the ground state in `ensemble-edge`.
const HORIZON_CERT_TOL: f64 = 1e-6;
const MAX_DOUBLINGS: u32 = 4;

/// Output of one replica before it is wrapped into a record.
#[derive(Default)]
pub(crate) struct Output {
    pub scalars: Scalars,
    pub arrays: BTreeMap<String, Vec<f64>>,
}

impl Output {
    fn scalar(&mut self, k: &str, v: f64) {
        put(&mut self.scalars, k, v);
    }

    fn array(&mut self, k: &str, v: Vec<f64>) {
        self.arrays.insert(k.into(), v);
    }
}

/// Parameters resolved once per run.
pub(crate) enum Plan {
    Spectrum { beta: f64, horizon: f64, params: ScalingParams },
    Explosions { a: f64, beta: f64, horizon: f64, m_a: Option<f64> },
    Mckean { a: f64, m_a: f64 },
    Poisson { beta: f64, horizon: f64, params: ScalingParams, grid: QuantileGrid, levels: Vec<Level> },
    Shape { beta: f64, horizon: f64, params: ScalingParams },
    EnsembleEdge { beta: f64, size: usize, horizon: f64 },
    OuExit { spec: OUExitSpec, series: f64 },
}

/// One element of `𝓜_{L,ε}`: level `q = a_L - r/(4√a_L)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Level {
    pub q: f64,
    pub r: f64,
}

/// `𝓜_{L,ε}` in decreasing order of `q`.
pub(crate) fn level_grid(a_l: f64, epsilon: f64) -> Vec<Level> {
    let p_max = (1.0 / (epsilon * epsilon) + 1e-9).floor() as i64;
    let s = 4.0 * a_l.sqrt();
    (-p_max..=p_max)
        .rev()
        .map(|p| {
            let q = a_l + p as f64 * epsilon / s;
            Level { q, r: s * (a_l - q) }
        })
        .collect()
}

/// `h(seed) ⊕ replica_id`. Hashing the base seed first keeps the replica
/// seeds of nearby base seeds from coinciding as sets.
pub fn derived_seed(seed: u64, replica_id: u64) -> u64 {
    key_hash(&[seed]) ^ replica_id
}

fn windows_of(horizon: f64) -> f64 {
    horizon / (horizon / WINDOW).ceil().max(1.0)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl Plan {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| HarnessError::Config(format!("{} needs --{name}", cfg.kind)))
        };
        Ok(match cfg.kind {
            ExperimentKind::Spectrum | ExperimentKind::Shape => {
                let beta = need(cfg.beta, "beta")?;
                let params = ScalingParams::from_beta(beta)?;
                let horizon = cfg.horizon.unwrap_or(8.0 * params.l);
                if cfg.kind == ExperimentKind::Spectrum {
                    Plan::Spectrum { beta, horizon, params }
                } else {
                    Plan::Shape { beta, horizon, params }
                }
            }
            ExperimentKind::Explosions => {
                let a = need(cfg.a, "a")?;
                let beta = cfg.beta.unwrap_or(0.0);
                let m_a = if beta == 0.0 { Some(m(a)?) } else { None };
                let horizon = match (cfg.horizon, m_a) {
                    (Some(t), _) => t,
                    (None, Some(m_a)) => 10.0 * m_a,
                    (None, None) => return Err(HarnessError::Config("explosions with beta > 0 needs --T".into())),
                };
                Plan::Explosions { a, beta, horizon, m_a }
            }
            ExperimentKind::Mckean => {
                let a = need(cfg.a, "a")?;
                Plan::Mckean { a, m_a: m(a)? }
            }
            ExperimentKind::Poisson => {
                let beta = need(cfg.beta, "beta")?;
                let params = ScalingParams::from_beta(beta)?;
                let grid = QuantileGrid::new(cfg.n.unwrap_or(1))?;
                let last = grid.knots[grid.cells() - 1];
                let horizon = cfg.horizon.unwrap_or((last + 6.0) * params.l);
                let levels = level_grid(params.a_l, need(cfg.epsilon, "epsilon")?);
                Plan::Poisson { beta, horizon, params, grid, levels }
            }
            ExperimentKind::EnsembleEdge => Plan::EnsembleEdge {
                beta: need(cfg.beta, "beta")?,
                size: cfg.size.ok_or_else(|| HarnessError::Config("ensemble-edge needs --size".into()))?,
                horizon: cfg.horizon.unwrap_or(8.0),
            },
            ExperimentKind::OuExit => {
                let spec = OUExitSpec::new(need(cfg.theta, "theta")?, need(cfg.nu, "nu")?, need(cfg.b, "b")?)?;
                Plan::OuExit { spec, series: ou_exit_laplace(&spec, OU_DEFAULT_TERMS)? }
            }
        })
    }

    /// Runs replica `id`; module errors are stored in the record.
    pub fn record(&self, cfg: &ExperimentConfig, id: u64) -> ReplicaRecord {
        let seed = derived_seed(cfg.seed, id);
        let mut rec = ReplicaRecord::new(id, seed);
        match self.replica(cfg, id, seed) {
            Ok(out) => {
                rec.scalars = out.scalars;
                rec.arrays = out.arrays;
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
        rec
    }

    fn replica(&self, cfg: &ExperimentConfig, id: u64, seed: u64) -> Result<Output> {
        let mut out = Output::default();
        match self {
            Plan::Spectrum { beta, horizon, params } => {
                let path = BrownianPath::generate(0.0, *horizon, cfg.dt, seed)?;
                let lambdas = eigenvalues(&path, *beta, *horizon, cfg.k_max, cfg.tol)?;
                let ef = reconstruct_eigenfunction(&path, *beta, *horizon, lambdas[0], STITCH_TOL)?;
                out.scalar("lambda1", lambdas[0]);
                out.scalar("rescaled1", params.rescale_eigenvalue(lambdas[0]));
                out.scalar("center1_over_L", ef.center / params.l);
                out.array("rescaled", lambdas.iter().map(|&l| params.rescale_eigenvalue(l)).collect());
                out.array("lambda", lambdas);
            }
            Plan::Explosions { a, beta, horizon, .. } => {
                let times = explosion_times(*a, *beta, *horizon, cfg.dt, seed, None)?;
                out.scalar("count", times.len() as f64);
                if let Some(&t) = times.first() {
                    out.scalar("first", t);
                }
                out.array("times", times);
            }
            Plan::Mckean { a, .. } => {
                let gamma = explosion_times(*a, 0.0, f64::INFINITY, cfg.dt, seed, Some(1))?;
                out.scalar("gamma", gamma[0]);
            }
            Plan::Poisson { beta, horizon, params, grid, levels } => {
                let path = BrownianPath::generate(0.0, *horizon, cfg.dt, seed)?;
                let cells = grid.cells();
                let mut counts = Vec::with_capacity(levels.len() * cells);
                let mut violations = 0u32;
                for j in 0..cells {
                    let lo = grid.knots[j] * params.l;
                    let hi = (grid.knots[j + 1] * params.l).min(*horizon);
                    let mut prev = 0u8;
                    for lv in levels {
                        let v = if hi > lo { u8::from(shoot(&path, lv.q, *beta, lo, hi, Some(1))?.zeros >= 1) } else { 0 };
                        if v < prev {
                            violations += 1;
                        }
                        counts.push(f64::from(v.saturating_sub(prev)));
                        prev = prev.max(v);
                    }
                }
                let m = levels.len();
                let totals = (0..m).map(|i| (0..cells).map(|j| counts[j * m + i]).sum()).collect();
                out.scalar("order_violations", f64::from(violations));
                // row-major: cell j, level i
                out.array("counts", counts);
                out.array("level_counts", totals);
            }
            Plan::Shape { beta, horizon, params } => shape_replica(&mut out, cfg, *beta, *horizon, params, seed)?,
            Plan::EnsembleEdge { beta, size, horizon } => {
                let draw = EnsembleSample::draw(*size, *beta, seed, cfg.k_max)?;
                out.scalar("edge1", draw.edge_rescaled[0]);
                out.array("edge", draw.edge_rescaled);
                if (id as usize) < cfg.sao_replicas {
                    let (lambda, t) = certified_ground_state(*beta, *horizon, cfg.dt, cfg.tol, key_hash(&[seed, SAO_STREAM]))?;
                    out.scalar("sao_lambda1", lambda);
                    out.scalar("sao_mu1", invert_conventions(lambda, 0.0, *beta)?.0);
                    out.scalar("sao_T", t);
                }
            }
            Plan::OuExit { spec, .. } => {
                let est = ou_exit_mc(spec, cfg.paths, cfg.dt, seed)?;
                out.scalar("estimate", est.estimate);
                out.scalar("stderr", est.stderr);
                out.scalar("truncated", est.truncated as f64);
            }
        }
        Ok(out)
    }

    pub fn aggregate(&self, cfg: &ExperimentConfig, report: &ExperimentReport) -> Result<(Scalars, Vec<Verdict>)> {
        let mut s = Scalars::new();
        let mut verdicts = Vec::new();
        let ok = || report.records.iter().filter(|r| r.ok());
        put(&mut s, "replicas_ok", ok().count() as f64);
        match self {
            Plan::Spectrum { horizon, params, .. } => {
                put(&mut s, "T", *horizon);
                put(&mut s, "L", params.l);
                put(&mut s, "a_L", params.a_l);
                let l1 = report.column("lambda1");
                if l1.len() >= 2 {
                    let (mean, sd) = mean_sd(&l1);
                    put(&mut s, "lambda1_mean", mean);
                    put(&mut s, "lambda1_sd", sd);
                }
                let g: Vec<f64> = report.column("rescaled1").iter().map(|x| -x).collect();
                if let Ok((fit, ks)) = gumbel_ks(&g) {
                    put(&mut s, "gumbel_location", fit.location);
                    put(&mut s, "gumbel_scale", fit.scale);
                    put(&mut s, "gumbel_D", ks.d);
                    put(&mut s, "gumbel_p", ks.p_value);
                    verdicts.push(Verdict::gated("gumbel_ks", ks.d, Some(ks.p_value), cfg.alpha, ks.p_value > cfg.alpha));
                }
                let centers = report.column("center1_over_L");
                if !centers.is_empty() {
                    let ks = ks_statistic(&centers, Cdf::Exp1);
                    put(&mut s, "center_D", ks.d);
                    put(&mut s, "center_p", ks.p_value);
                    verdicts.push(
                        Verdict::gated("center_exp_ks", ks.d, Some(ks.p_value), cfg.alpha, ks.p_value > cfg.alpha)
                            .monitored(),
                    );
                }
            }
            Plan::Explosions { horizon, m_a, .. } => {
                put(&mut s, "T", *horizon);
                let counts = report.column("count");
                if counts.len() >= 2 {
                    let (mean, sd) = mean_sd(&counts);
                    put(&mut s, "count_mean", mean);
                    put(&mut s, "count_sd", sd);
                }
                if let Some(m_a) = m_a {
                    put(&mut s, "m(a)", *m_a);
                    put(&mut s, "count_expected", horizon / m_a);
                    let rows = ok()
                        .map(|r| {
                            let pp = PointProcessSample::new(r.arrays.get("times").cloned().unwrap_or_default(), r.replica_id)?;
                            Ok(stats::uniform_counts(&pp, *horizon, cfg.cells))
                        })
                        .collect::<std::result::Result<Vec<_>, sao_core::Error>>()?;
                    if rows.len() >= 100 {
                        let intensity = vec![horizon / (cfg.cells as f64 * m_a); cfg.cells];
                        let v = poisson_test(&rows, &intensity, &PoissonTestConfig { alpha: cfg.alpha, ..Default::default() })?;
                        poisson_summary(&mut s, &v);
                        verdicts.push(poisson_verdict(&v, cfg.alpha));
                    }
                }
            }
            Plan::Mckean { a, m_a } => {
                let g = report.column("gamma");
                put(&mut s, "a", *a);
                put(&mut s, "n", g.len() as f64);
                put(&mut s, "m(a)", *m_a);
                if g.len() >= 300 {
                    let v = mckean_exponential_test(&g, *m_a, cfg.alpha)?;
                    put(&mut s, "D", v.d);
                    put(&mut s, "p", v.p_value);
                    put(&mut s, "mean", v.sample_mean);
                    put(&mut s, "stderr", v.stderr);
                    put(&mut s, "mean_z", v.mean_z);
                    verdicts.push(Verdict::gated("exponential_ks", v.d, Some(v.p_value), cfg.alpha, v.pass));
                    verdicts.push(Verdict::gated("mean_vs_m", v.mean_z, None, 3.0, v.mean_z.abs() <= 3.0));
                }
            }
            Plan::Poisson { horizon, params, grid, levels, .. } => {
                put(&mut s, "T", *horizon);
                put(&mut s, "L", params.l);
                put(&mut s, "a_L", params.a_l);
                put(&mut s, "levels", levels.len() as f64);
                put(&mut s, "order_violations", report.column("order_violations").iter().sum());
                put(&mut s, "cells", grid.cells() as f64);
                let rows: Vec<Vec<u64>> = ok()
                    .filter_map(|r| r.arrays.get("level_counts"))
                    .map(|c| c.iter().map(|&x| x as u64).collect())
                    .collect();
                // summed over the 2^n time cells, level i has mean e^{r_i} - e^{r_{i-1}}
                let mut r_prev = f64::NEG_INFINITY;
                let intensity: Vec<f64> = levels
                    .iter()
                    .map(|lv| {
                        let p = stats::cell_intensity(r_prev, lv.r, 0);
                        r_prev = lv.r;
                        p
                    })
                    .collect();
                if rows.len() >= 100 {
                    let v = poisson_test(&rows, &intensity, &PoissonTestConfig { alpha: cfg.alpha, ..Default::default() })?;
                    poisson_summary(&mut s, &v);
                    verdicts.push(poisson_verdict(&v, cfg.alpha));
                }
            }
            Plan::Shape { horizon, params, .. } => {
                put(&mut s, "T", *horizon);
                put(&mut s, "L", params.l);
                put(&mut s, "a_L", params.a_l);
                for key in ["h_distance", "b_distance", "tanh_distance", "tanh_distance_rel"] {
                    let col = report.column(key);
                    put(&mut s, format!("{key}_count"), col.len() as f64);
                    put(&mut s, format!("{key}_median"), median(col));
                }
                let h = s.get("h_distance_median").copied().unwrap_or(f64::NAN);
                verdicts.push(Verdict::gated("h_distance_finite", h, None, f64::INFINITY, h.is_finite()));
            }
            Plan::EnsembleEdge { .. } => {
                let edge = report.column("edge1");
                let sao = report.column("sao_mu1");
                if edge.len() >= 2 {
                    let (mean, sd) = mean_sd(&edge);
                    put(&mut s, "edge_mean", mean);
                    put(&mut s, "edge_sd", sd);
                    put(&mut s, "edge_median", median(edge.clone()));
                }
                if sao.len() >= 2 {
                    let (mean, sd) = mean_sd(&sao);
                    put(&mut s, "sao_mean", mean);
                    put(&mut s, "sao_sd", sd);
                    put(&mut s, "sao_median", median(sao.clone()));
                    put(&mut s, "sao_T_max", report.column("sao_T").iter().copied().fold(0.0, f64::max));
                    let ks = stats::two_sample_ks(&edge, &sao);
                    put(&mut s, "ks_D", ks.d);
                    put(&mut s, "ks_p", ks.p_value);
                    verdicts.push(Verdict::gated("two_sample_ks", ks.d, Some(ks.p_value), cfg.alpha, ks.p_value > cfg.alpha));
                }
            }
            Plan::OuExit { spec, series } => {
                let est = report.column("estimate");
                let se = report.column("stderr");
                put(&mut s, "series", *series);
                let bound = spec.upper_bound(3.0);
                put(&mut s, "bound_c3", bound);
                verdicts.push(Verdict::gated("bound_c3", *series, None, bound, *series <= bound));
                if !est.is_empty() && est.len() == se.len() {
                    let k = est.len() as f64;
                    let mc = est.iter().sum::<f64>() / k;
                    let stderr = se.iter().map(|x| x * x).sum::<f64>().sqrt() / k;
                    let z = (mc - series) / stderr;
                    put(&mut s, "mc", mc);
                    put(&mut s, "mc_stderr", stderr);
                    put(&mut s, "z", z);
                    put(&mut s, "truncated", report.column("truncated").iter().sum());
                    verdicts.push(Verdict::gated("series_vs_mc", z, None, 3.0, z.abs() <= 3.0));
                }
            }
        }
        Ok((s, verdicts))
    }
}

fn poisson_summary(s: &mut Scalars, v: &PoissonVerdict) {
    for (j, c) in v.dispersion.iter().enumerate() {
        put(s, format!("dispersion[{j:03}]"), c.index);
    }
    put(s, "chi_square", v.chi_square);
    put(s, "chi_square_dof", v.chi_square_dof as f64);
    put(s, "chi_square_p", v.chi_square_p);
    put(s, "max_abs_correlation", v.max_abs_correlation);
    put(s, "correlation_band", v.correlation_band);
    put(s, "degenerate_cells", v.degenerate_cells.len() as f64);
    let min_p = v.dispersion.iter().map(|c| c.p_value).fold(1.0, f64::min);
    put(s, "dispersion_min_p", min_p);
}

fn poisson_verdict(v: &PoissonVerdict, alpha: f64) -> Verdict {
    Verdict::gated("poisson", v.chi_square, Some(v.chi_square_p), alpha, v.pass)
}

/// Explosion times of `Z_a` from `+∞` at time 0 up to `horizon`, simulated
/// over consecutive windows with independently keyed paths.
pub(crate) fn explosion_times(
    a: f64,
    beta: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
    limit: Option<usize>,
) -> Result<Vec<f64>> {
    let window = if horizon.is_finite() { windows_of(horizon) } else { WINDOW };
    let mut runner = ForwardRunner::from_infinity(a, beta);
    let mut out = Vec::new();
    let mut t0 = 0.0;
    for w in 0u64.. {
        if t0 >= horizon || limit.is_some_and(|k| out.len() >= k) {
            break;
        }
        let t1 = (t0 + window).min(horizon);
        let path = BrownianPath::generate(t0, t1, dt, key_hash(&[seed, w]))?;
        runner.advance(&path, &mut out, limit)?;
        t0 = path.t1();
    }
    out.retain(|&t| t <= horizon);
    Ok(out)
}

fn shape_replica(
    out: &mut Output,
    cfg: &ExperimentConfig,
    beta: f64,
    horizon: f64,
    params: &ScalingParams,
    seed: u64,
) -> Result<()> {
    let path = BrownianPath::generate(0.0, horizon, cfg.dt, seed)?;
    let lambda = eigenvalue_bisect(&path, beta, horizon, 1, cfg.tol)?;
    let ef = reconstruct_eigenfunction(&path, beta, horizon, lambda, STITCH_TOL)?;
    out.scalar("lambda1", lambda);
    out.scalar("center1_over_L", ef.center / params.l);
    // A center closer than x_max/√a_L to an end leaves no full window.
    if let Ok(p) = shape_profiles(&ef.t, &ef.phi, &path, ef.center, params.a_l, cfg.x_max) {
        out.scalar("h_distance", p.h_distance);
        out.scalar("b_distance", p.b_distance);
        out.array("shape_x", p.x);
        out.array("shape_h", p.h);
        out.array("shape_b", p.b);
    }
    let traj = integrate_forward(&path, &DriftSpec::forward(params.a_l, beta), 0.0, f64::INFINITY, horizon, cfg.tol)?;
    if let Ok(c) = extract_crossing(&traj, params.a_l) {
        out.scalar("tanh_distance", c.tanh_distance);
        out.scalar("tanh_distance_rel", c.tanh_distance / params.a_l.sqrt());
        out.scalar("crossing_upsilon", c.event.upsilon);
    }
    Ok(())
}

/// Ground state on `[0, T]` with `T` doubled until the values at `T` and
/// `2T` agree. Returns the value at the final `2T` and that horizon.
fn certified_ground_state(beta: f64, horizon: f64, dt: f64, tol: f64, seed: u64) -> Result<(f64, f64)> {
    let mut t = horizon;
    let mut last = None;
    for _ in 0..=MAX_DOUBLINGS {
        let path = BrownianPath::generate(0.0, 2.0 * t, dt, seed)?;
        let short = eigenvalue_bisect(&path, beta, t, 1, tol)?;
        let long = eigenvalue_bisect(&path, beta, 2.0 * t, 1, tol)?;
        if (short - long).abs() <= HORIZON_CERT_TOL.max(10.0 * tol) {
            return Ok((long, 2.0 * t));
        }
        last = Some((short - long).abs());
        t *= 2.0;
    }
    Err(HarnessError::Core(sao_core::Error::Certificate {
        discrepancy: last.unwrap_or(f64::NAN),
        tol: HORIZON_CERT_TOL,
    }))
}

/// Plot-ready ECDF for the kinds that have a reference law.
pub fn overlay(report: &ExperimentReport) -> Option<EcdfOverlay> {
    match report.config.kind {
        ExperimentKind::Spectrum => {
            let loc = *report.summary.get("gumbel_location")?;
            let scale = *report.summary.get("gumbel_scale")?;
            let z: Vec<f64> = report.column("rescaled1").iter().map(|x| (-x - loc) / scale).collect();
            Some(EcdfOverlay::new("gumbel", &z, |x| Cdf::Gumbel.eval(x)))
        }
        ExperimentKind::Mckean => {
            let m_a = *report.summary.get("m(a)")?;
            let z: Vec<f64> = report.column("gamma").iter().map(|g| g / m_a).collect();
            (!z.is_empty()).then(|| EcdfOverlay::new("exp1", &z, |x| Cdf::Exp1.eval(x)))
        }
        ExperimentKind::EnsembleEdge => {
            let mut sao = report.column("sao_mu1");
            if sao.is_empty() {
                return None;
            }
            sao.sort_by(f64::total_cmp);
            let n = sao.len() as f64;
            let edge = report.column("edge1");
            Some(EcdfOverlay::new("sao", &edge, |x| sao.partition_point(|&v| v <= x) as f64 / n))
        }
        _ => None,
    }
}
