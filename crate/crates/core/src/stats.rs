//! Goodness-of-fit machinery for the limit laws.
//!
//! One- and two-sample Kolmogorov–Smirnov tests, interval counts on the
//! exponential quantile grid with a Poisson verdict, the Laplace transform of
//! an Ornstein–Uhlenbeck exit time (series and Monte Carlo), and a
//! two-parameter Gumbel fit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Normal, Poisson};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Default significance level for every verdict.
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Number of terms used in the Kolmogorov series.
const KOLMOGOROV_TERMS: usize = 40;

/// Reference distributions for the one-sample test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cdf {
    Exp1,
    Gumbel,
    Uniform01,
    Normal01,
}

impl Cdf {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Cdf::Exp1 => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x).exp_m1()
                }
            }
            Cdf::Gumbel => (-(-x).exp()).exp(),
            Cdf::Uniform01 => x.clamp(0.0, 1.0),
            Cdf::Normal01 => 0.5 * erfc(-x / std::f64::consts::SQRT_2),
        }
    }
}

/// Statistic and asymptotic p-value of a KS test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub n: usize,
    pub d: f64,
    pub p_value: f64,
}

/// `P(K > λ)` for the Kolmogorov distribution.
///
/// Uses the alternating series for `λ ≥ 1.18` and the Jacobi theta form
/// below, both with a fixed number of terms.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let c = -pi2 / (8.0 * lambda * lambda);
        let s: f64 = (0..KOLMOGOROV_TERMS)
            .map(|j| {
                let k = (2 * j + 1) as f64;
                (c * k * k).exp()
            })
            .sum();
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let c = -2.0 * lambda * lambda;
        let s: f64 = (1..=KOLMOGOROV_TERMS)
            .map(|k| {
                let k = k as f64;
                let sign = if k as usize % 2 == 1 { 1.0 } else { -1.0 };
                sign * (c * k * k).exp()
            })
            .sum();
        2.0 * s
    };
    p.clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let rn = effective_n.sqrt();
    kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d)
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample KS test of `sample` against `cdf`.
///
/// ```
/// use sao_core::stats::{ks_statistic, Cdf};
/// let r = ks_statistic(&[0.5], Cdf::Uniform01);
/// assert_eq!(r.d, 0.5);
/// ```
pub fn ks_statistic(sample: &[f64], cdf: Cdf) -> KsResult {
    let n = sample.len();
    if n == 0 {
        return KsResult { n, d: 0.0, p_value: 1.0 };
    }
    let x = sorted(sample);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &xi) in x.iter().enumerate() {
        let f = cdf.eval(xi);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    KsResult { n, d, p_value: ks_p_value(d, nf) }
}

/// Two-sample KS test.
pub fn two_sample_ks(x: &[f64], y: &[f64]) -> KsResult {
    let (n, m) = (x.len(), y.len());
    if n == 0 || m == 0 {
        return KsResult { n: n.min(m), d: 0.0, p_value: 1.0 };
    }
    let (xs, ys) = (sorted(x), sorted(y));
    let (nf, mf) = (n as f64, m as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / nf - j as f64 / mf).abs());
    }
    KsResult { n: n.min(m), d, p_value: ks_p_value(d, nf * mf / (nf + mf)) }
}

/// Dyadic quantile grid of the unit exponential law.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileGrid {
    pub n: u32,
    /// `2^n + 1` knots, the last one `+∞`.
    pub knots: Vec<f64>,
}

impl QuantileGrid {
    pub fn new(n: u32) -> Result<Self> {
        if n > 30 {
            return Err(Error::Domain(format!("grid depth {n} is too large")));
        }
        let cells = 1usize << n;
        let h = (cells as f64).recip();
        let knots = (0..=cells)
            .map(|j| if j == cells { f64::INFINITY } else { -(-(j as f64) * h).ln_1p() })
            .collect();
        Ok(Self { n, knots })
    }

    pub fn cells(&self) -> usize {
        self.knots.len() - 1
    }

    /// Index of the cell `[t_j, t_{j+1})` holding `x`, if `x ≥ 0`.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !(x >= 0.0) {
            return None;
        }
        Some(self.knots.partition_point(|&k| k <= x) - 1)
    }

    /// A point inside cell `j`: the midpoint, or `t_j + 1` for the last cell.
    pub fn representative(&self, j: usize) -> f64 {
        let (lo, hi) = (self.knots[j], self.knots[j + 1]);
        if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            lo + 1.0
        }
    }
}

/// Expected count in the cell `(r_lo, r_hi] × [t_j, t_{j+1})` of depth `n`.
pub fn cell_intensity(r_lo: f64, r_hi: f64, n: u32) -> f64 {
    (r_hi.exp() - r_lo.exp()) * 0.5f64.powi(n as i32)
}

/// Points of one replica of a point process on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointProcessSample {
    pub points: Vec<f64>,
    pub replica_id: u64,
}

impl PointProcessSample {
    pub fn new(points: Vec<f64>, replica_id: u64) -> Result<Self> {
        if points.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Domain("points must be finite and nonnegative".into()));
        }
        if points.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Domain("points must be increasing".into()));
        }
        Ok(Self { points, replica_id })
    }
}

/// Counts of `pp` in each cell of `grid`.
pub fn interval_counts(pp: &PointProcessSample, grid: &QuantileGrid) -> Vec<u64> {
    let mut c = vec![0u64; grid.cells()];
    for &p in &pp.points {
        if let Some(j) = grid.cell_of(p) {
            c[j] += 1;
        }
    }
    c
}

/// Counts of `pp` in `cells` equal cells of `[0, t_max)`.
pub fn uniform_counts(pp: &PointProcessSample, t_max: f64, cells: usize) -> Vec<u64> {
    let mut c = vec![0u64; cells];
    let h = t_max / cells as f64;
    for &p in &pp.points {
        if p < t_max {
            c[((p / h) as usize).min(cells - 1)] += 1;
        }
    }
    c
}

/// Levels used by [`poisson_test`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonTestConfig {
    pub alpha: f64,
    /// Floor of the correlation band, in units of `1/√R`.
    pub correlation_floor: f64,
    /// Minimum expected frequency of a chi-square bin.
    pub min_expected: f64,
}

impl Default for PoissonTestConfig {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA, correlation_floor: 3.0, min_expected: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDispersion {
    pub intensity: f64,
    pub mean: f64,
    pub variance: f64,
    /// Variance over mean; `NaN` for an empty cell.
    pub index: f64,
    pub p_value: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonVerdict {
    pub replicas: usize,
    pub cells: usize,
    pub dispersion: Vec<CellDispersion>,
    pub chi_square: f64,
    pub chi_square_dof: usize,
    pub chi_square_p: f64,
    pub max_abs_correlation: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub correlation_band: f64,
    pub dispersion_pass: bool,
    pub chi_square_pass: bool,
    pub correlation_pass: bool,
    pub degenerate_cells: Vec<usize>,
    pub pass: bool,
}

fn chi2_survival(x: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).map(|c| c.sf(x)).unwrap_or(f64::NAN)
}

/// Chi-square contribution of one cell, with tail bins merged.
fn cell_chi_square(counts: &[u64], lambda: f64, min_expected: f64) -> Result<(f64, usize)> {
    let r = counts.len() as f64;
    if lambda <= 0.0 {
        // All mass at zero: any positive count is impossible.
        let bad = counts.iter().any(|&c| c > 0);
        return Ok((if bad { f64::INFINITY } else { 0.0 }, 0));
    }
    let pois = Poisson::new(lambda).map_err(|e| Error::Domain(e.to_string()))?;
    let max_c = counts.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0u64; max_c as usize + 1];
    for &c in counts {
        hist[c as usize] += 1;
    }
    let observed_from = |lo: u64, hi: Option<u64>| -> f64 {
        let top = hi.map_or(max_c, |h| h.min(max_c));
        if lo > max_c {
            return 0.0;
        }
        hist[lo as usize..=top as usize].iter().sum::<u64>() as f64
    };
    let (mut stat, mut bins) = (0.0, 0usize);
    let (mut start, mut k, mut acc) = (0u64, 0u64, 0.0f64);
    loop {
        acc += pois.pmf(k);
        let tail = pois.sf(k);
        if acc * r >= min_expected && tail * r >= min_expected {
            let e = acc * r;
            let o = observed_from(start, Some(k));
            stat += (o - e).powi(2) / e;
            bins += 1;
            start = k + 1;
            acc = 0.0;
        } else if tail * r < min_expected {
            let e = (acc + tail) * r;
            let o = observed_from(start, None);
            stat += (o - e).powi(2) / e;
            bins += 1;
            break;
        }
        k += 1;
    }
    Ok((stat, bins - 1))
}

fn z_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).map(|n| n.inverse_cdf(p)).unwrap_or(f64::NAN)
}

/// Tests a replicas-by-cells count matrix against independent Poisson
/// variables with the given means.
///
/// Three sub-tests, each at level `alpha`: a two-sided per-cell dispersion
/// test `(R-1)·s²/x̄ ~ χ²_{R-1}` with a Bonferroni split across cells, a
/// pooled chi-square of per-cell count histograms, and a bound on every
/// pairwise correlation.
pub fn poisson_test(
    counts: &[Vec<u64>],
    intensities: &[f64],
    cfg: &PoissonTestConfig,
) -> Result<PoissonVerdict> {
    let replicas = counts.len();
    if replicas < 100 {
        return Err(Error::Domain(format!("poisson_test needs at least 100 replicas, got {replicas}")));
    }
    let cells = intensities.len();
    if cells == 0 || counts.iter().any(|row| row.len() != cells) {
        return Err(Error::Domain("count rows must match the number of intensities".into()));
    }
    if intensities.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::Domain("intensities must be finite and nonnegative".into()));
    }
    let r = replicas as f64;
    let column = |j: usize| -> Vec<u64> { counts.iter().map(|row| row[j]).collect() };
    let cell_alpha = cfg.alpha / cells as f64;

    let mut dispersion = Vec::with_capacity(cells);
    let mut degenerate_cells = Vec::new();
    let mut means = Vec::with_capacity(cells);
    let mut sds = Vec::with_capacity(cells);
    let (mut chi_square, mut chi_square_dof) = (0.0, 0usize);
    for (j, &lambda) in intensities.iter().enumerate() {
        let col = column(j);
        let mean = col.iter().sum::<u64>() as f64 / r;
        let variance = col.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (r - 1.0);
        let degenerate = mean == 0.0 && lambda > 0.5;
        if degenerate {
            degenerate_cells.push(j);
        }
        let (index, p_value) = if mean > 0.0 {
            let idx = variance / mean;
            let stat = (r - 1.0) * idx;
            let chi = ChiSquared::new(r - 1.0).map_err(|e| Error::Domain(e.to_string()))?;
            (idx, (2.0 * chi.cdf(stat).min(chi.sf(stat))).min(1.0))
        } else {
            (f64::NAN, if degenerate { 0.0 } else { 1.0 })
        };
        dispersion.push(CellDispersion { intensity: lambda, mean, variance, index, p_value, degenerate });
        let (s, dof) = cell_chi_square(&col, lambda, cfg.min_expected)?;
        chi_square += s;
        chi_square_dof += dof;
        means.push(mean);
        sds.push(variance.sqrt());
    }
    let dispersion_pass = dispersion.iter().all(|c| c.p_value > cell_alpha && !c.degenerate);
    let chi_square_p = if chi_square.is_finite() { chi2_survival(chi_square, chi_square_dof) } else { 0.0 };
    let chi_square_pass = chi_square_p > cfg.alpha;

    let pairs = cells * (cells - 1) / 2;
    let z = if pairs > 0 { z_quantile(1.0 - cfg.alpha / (2.0 * pairs as f64)) } else { 0.0 };
    let correlation_band = cfg.correlation_floor.max(z) / r.sqrt();
    let (mut max_abs_correlation, mut worst_pair) = (0.0f64, None);
    for i in 0..cells {
        for j in i + 1..cells {
            if sds[i] == 0.0 || sds[j] == 0.0 {
                continue;
            }
            let cov = counts
                .iter()
                .map(|row| (row[i] as f64 - means[i]) * (row[j] as f64 - means[j]))
                .sum::<f64>()
                / (r - 1.0);
            let rho = cov / (sds[i] * sds[j]);
            if rho.abs() > max_abs_correlation {
                max_abs_correlation = rho.abs();
                worst_pair = Some((i, j));
            }
        }
    }
    let correlation_pass = max_abs_correlation <= correlation_band;
    let pass = dispersion_pass && chi_square_pass && correlation_pass && degenerate_cells.is_empty();
    Ok(PoissonVerdict {
        replicas,
        cells,
        dispersion,
        chi_square,
        chi_square_dof,
        chi_square_p,
        max_abs_correlation,
        worst_pair,
        correlation_band,
        dispersion_pass,
        chi_square_pass,
        correlation_pass,
        degenerate_cells,
        pass,
    })
}

/// Parameters of the exit problem for `dU = -θU dt + dB`, `U(0) = 0`,
/// leaving `(-b/√(2θ), b/√(2θ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OUExitSpec {
    pub theta: f64,
    pub nu: f64,
    pub b: f64,
}

impl OUExitSpec {
    pub fn new(theta: f64, nu: f64, b: f64) -> Result<Self> {
        if !(theta > 0.0 && nu > 0.0 && nu <= 1.0 && b > 0.0 && theta.is_finite() && b.is_finite()) {
            return Err(Error::Domain(format!(
                "need theta > 0, 0 < nu <= 1, b > 0; got ({theta}, {nu}, {b})"
            )));
        }
        Ok(Self { theta, nu, b })
    }

    /// Exit level `b/√(2θ)`.
    pub fn level(&self) -> f64 {
        self.b / (2.0 * self.theta).sqrt()
    }

    /// `3/(1 + (ν/b²)e^{b²/2})`.
    pub fn upper_bound(&self, c: f64) -> f64 {
        c / (1.0 + self.nu / (self.b * self.b) * (0.5 * self.b * self.b).exp())
    }
}

/// Number of series terms that covers the whole domain `b ≤ 10`.
pub const OU_DEFAULT_TERMS: usize = 400;

/// `E[exp(-θνH)]` from its power series in `b²`.
///
/// Fields are not re-validated so that the limits `ν → 0` and `b = 0` can
/// be evaluated directly.
pub fn ou_exit_laplace(spec: &OUExitSpec, terms: usize) -> Result<f64> {
    let (nu, b) = (spec.nu, spec.b);
    if terms < 10 {
        return Err(Error::Domain(format!("need at least 10 terms, got {terms}")));
    }
    if !(b >= 0.0 && b <= 10.0) || !(nu >= 0.0 && nu <= 1.0) {
        return Err(Error::Domain(format!("series domain is 0 <= b <= 10, 0 <= nu <= 1; got b = {b}, nu = {nu}")));
    }
    let b2 = b * b;
    let ratio = |k: usize| {
        let k = k as f64;
        (nu + 2.0 * k) * b2 / ((2.0 * k + 1.0) * (2.0 * k + 2.0))
    };
    let (mut term, mut sum) = (nu * b2 / 2.0, 0.0);
    for k in 1..=terms {
        sum += term;
        if k < terms {
            term *= ratio(k);
        }
    }
    let next = term * ratio(terms);
    let r = ratio(terms + 1);
    let tail = if next == 0.0 {
        0.0
    } else if r < 1.0 {
        next / (1.0 - r)
    } else {
        f64::INFINITY
    };
    let rel = tail / (1.0 + sum);
    if rel > 1e-10 {
        return Err(Error::MoreTerms { terms, tail: rel });
    }
    Ok(1.0 / (1.0 + sum))
}

/// Monte Carlo estimate of `E[exp(-θνH)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuMcEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n_paths: usize,
    /// Paths stopped once `exp(-θνt)` fell below `e^{-30}`; they contribute 0.
    pub truncated: usize,
}

/// Simulates exit times with the exact Gaussian transition over steps of
/// `dt` and a Brownian-bridge test for excursions between grid points.
pub fn ou_exit_mc(spec: &OUExitSpec, n_paths: usize, dt: f64, seed: u64) -> Result<OuMcEstimate> {
    let spec = OUExitSpec::new(spec.theta, spec.nu, spec.b)?;
    if n_paths < 10_000 {
        return Err(Error::Domain(format!("need at least 10^4 paths, got {n_paths}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let theta = spec.theta;
    let rate = theta * spec.nu;
    let c = spec.level();
    let decay = (-theta * dt).exp();
    let sd = ((-(-2.0 * theta * dt).exp_m1()) / (2.0 * theta)).sqrt();
    let budget = (30.0 / (rate * dt)).ceil() as u64 + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s1, mut s2, mut truncated) = (0.0, 0.0, 0usize);
    for _ in 0..n_paths {
        let mut x = 0.0f64;
        let mut hit = None;
        for step in 0..budget {
            let z: f64 = rng.sample(StandardNormal);
            let y = x * decay + sd * z;
            if y.abs() >= c {
                hit = Some((step as f64 + 1.0) * dt);
                break;
            }
            let p = (-2.0 * (c - x) * (c - y) / dt).exp() + (-2.0 * (c + x) * (c + y) / dt).exp();
            if rng.random::<f64>() < p {
                hit = Some((step as f64 + 0.5) * dt);
                break;
            }
            x = y;
        }
        let v = match hit {
            Some(h) => (-rate * h).exp(),
            None => {
                truncated += 1;
                0.0
            }
        };
        s1 += v;
        s2 += v * v;
    }
    let n = n_paths as f64;
    let estimate = s1 / n;
    let var = (s2 / n - estimate * estimate).max(0.0) * n / (n - 1.0);
    Ok(OuMcEstimate { estimate, stderr: (var / n).sqrt(), n_paths, truncated })
}

/// Verdict of the exponential-law test for explosion times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McKeanVerdict {
    pub n: usize,
    pub d: f64,
    pub p_value: f64,
    pub m_a: f64,
    pub sample_mean: f64,
    pub stderr: f64,
    /// `(sample_mean - m_a) / stderr`.
    pub mean_z: f64,
    pub alpha: f64,
    pub pass: bool,
}

/// KS of `gamma_samples / m_a` against Exp(1); passes iff `p > alpha`.
pub fn mckean_exponential_test(gamma_samples: &[f64], m_a: f64, alpha: f64) -> Result<McKeanVerdict> {
    let n = gamma_samples.len();
    if n < 300 {
        return Err(Error::Domain(format!("need at least 300 samples, got {n}")));
    }
    if !(m_a > 0.0 && m_a.is_finite()) {
        return Err(Error::Domain(format!("m_a must be positive, got {m_a}")));
    }
    let scaled: Vec<f64> = gamma_samples.iter().map(|g| g / m_a).collect();
    let ks = ks_statistic(&scaled, Cdf::Exp1);
    let nf = n as f64;
    let sample_mean = gamma_samples.iter().sum::<f64>() / nf;
    let var = gamma_samples.iter().map(|g| (g - sample_mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let stderr = (var / nf).sqrt();
    let mean_z = if stderr > 0.0 { (sample_mean - m_a) / stderr } else { f64::INFINITY };
    Ok(McKeanVerdict {
        n,
        d: ks.d,
        p_value: ks.p_value,
        m_a,
        sample_mean,
        stderr,
        mean_z,
        alpha,
        pass: ks.p_value > alpha,
    })
}

/// Location and scale of a Gumbel (maximum) law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GumbelFit {
    pub location: f64,
    pub scale: f64,
}

impl GumbelFit {
    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.location) / self.scale
    }
}

/// Maximum-likelihood Gumbel fit.
///
/// The scale solves `s = x̄ - Σ x e^{-x/s} / Σ e^{-x/s}` (found by bisection);
/// then `μ = -s ln(mean e^{-x/s})`.
pub fn fit_gumbel(x: &[f64]) -> Result<GumbelFit> {
    if x.len() < 2 || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("Gumbel fit needs at least two finite samples".into()));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let lo_x = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_x = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi_x - lo_x;
    if !(spread > 0.0) {
        return Err(Error::Domain("Gumbel fit needs non-constant samples".into()));
    }
    let weighted = |s: f64| -> (f64, f64) {
        let (mut sw, mut swx) = (0.0, 0.0);
        for &v in x {
            let w = (-(v - lo_x) / s).exp();
            sw += w;
            swx += w * v;
        }
        (sw, swx)
    };
    let g = |s: f64| {
        let (sw, swx) = weighted(s);
        s - mean + swx / sw
    };
    let (mut lo, mut hi) = (spread * 1e-6, spread);
    while g(hi) < 0.0 {
        hi *= 2.0;
        if hi > spread * 1e12 {
            return Err(Error::Bracket("Gumbel scale equation has no sign change".into()));
        }
    }
    if g(lo) > 0.0 {
        return Err(Error::Bracket("Gumbel scale below the resolvable range".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    let scale = 0.5 * (lo + hi);
    let (sw, _) = weighted(scale);
    let location = lo_x - scale * (sw / n).ln();
    Ok(GumbelFit { location, scale })
}

/// Fits a Gumbel law, then runs KS on the standardized sample.
pub fn gumbel_ks(x: &[f64]) -> Result<(GumbelFit, KsResult)> {
    let fit = fit_gumbel(x)?;
    let z: Vec<f64> = x.iter().map(|&v| fit.standardize(v)).collect();
    Ok((fit, ks_statistic(&z, Cdf::Gumbel)))
}
