//! Eigenvalues and eigenfunctions of the Dirichlet problem on `[0, T]`.
//!
//! `λ ≤ -a` is an eigenvalue count question for the forward diffusion from
//! `+∞`: the number of eigenvalues `≤ -a` equals the number of explosions on
//! `(0, T]`. An explosion landing exactly on `T` counts.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::paths::BrownianPath;
use crate::riccati::{self, DriftSpec, RiccatiTrajectory};

/// Number of eigenvalues `≤ -a` on `[0, T]`.
pub fn eigenvalue_count(path: &BrownianPath, beta: f64, t_max: f64, a: f64) -> Result<usize> {
    Ok(riccati::shoot(path, a, beta, 0.0, t_max, None)?.zeros)
}

/// Whether at least `k` eigenvalues are `≤ -a`; stops at the `k`-th zero.
pub fn has_at_least(path: &BrownianPath, beta: f64, t_max: f64, a: f64, k: usize) -> Result<bool> {
    Ok(riccati::shoot(path, a, beta, 0.0, t_max, Some(k))?.zeros >= k)
}

/// Outcome of [`eigenvalue_search`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub lambda: f64,
    /// Final bracket, width at most `tol`.
    pub bracket: (f64, f64),
    /// Number of shots fired.
    pub shots: usize,
    /// The count jumped by two or more across a bracket of width `tol`.
    pub tie: bool,
}

/// `λ_k` to within `tol`.
pub fn eigenvalue_bisect(path: &BrownianPath, beta: f64, t_max: f64, k: usize, tol: f64) -> Result<f64> {
    Ok(eigenvalue_search(path, beta, t_max, k, tol)?.lambda)
}

/// `λ_k` with diagnostics.
///
/// Counts are bisected until the bracket isolates `λ_k`; the bracket is then
/// closed with a safeguarded regula falsi on the Prüfer phase, which is
/// continuous and increasing in `λ` and equals `k` exactly at `λ_k`.
pub fn eigenvalue_search(path: &BrownianPath, beta: f64, t_max: f64, k: usize, tol: f64) -> Result<Bisection> {
    if k == 0 {
        return Err(Error::Domain("eigenvalue index starts at 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let mut shots = 0usize;
    let mut count = |lambda: f64| -> Result<usize> {
        shots += 1;
        Ok(riccati::shoot(path, -lambda, beta, 0.0, t_max, Some(k + 1))?.zeros)
    };

    let mut hi = 1.0;
    let mut c_hi = count(hi)?;
    let mut guard = 0;
    while c_hi < k {
        hi = 2.0 * hi + 1.0;
        c_hi = count(hi)?;
        guard += 1;
        if guard > 200 {
            return Err(Error::Bracket(format!("no upper bracket for k = {k}")));
        }
    }
    let mut lo = hi.min(0.0) - 1.0;
    let mut c_lo = count(lo)?;
    guard = 0;
    while c_lo >= k {
        lo = 2.0 * lo - 1.0;
        c_lo = count(lo)?;
        guard += 1;
        if guard > 200 {
            return Err(Error::Bracket(format!("no lower bracket for k = {k}")));
        }
    }

    // isolate λ_k: count(lo) = k-1 and count(hi) = k
    let mut tie = false;
    while c_lo + 1 < k || c_hi > k {
        if hi - lo <= tol {
            tie = true;
            break;
        }
        let mid = 0.5 * (lo + hi);
        let c = count(mid)?;
        if c >= k {
            hi = mid;
            c_hi = c;
        } else {
            lo = mid;
            c_lo = c;
        }
    }

    let mut phase = |lambda: f64| -> Result<f64> {
        shots += 1;
        Ok(riccati::shoot(path, -lambda, beta, 0.0, t_max, None)?.phase - k as f64)
    };
    let mut g_lo = phase(lo)?;
    let mut g_hi = phase(hi)?;
    if g_lo >= 0.0 || g_hi < 0.0 {
        return Err(Error::Bracket(format!("phase does not change sign on [{lo}, {hi}]")));
    }
    let mut side = 0i8;
    let mut since = 0;
    let mut width_mark = hi - lo;
    for _ in 0..500 {
        if hi - lo <= tol {
            break;
        }
        let mut x = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        since += 1;
        if since == 3 {
            // regula falsi stalled: force a halving
            if hi - lo > 0.5 * width_mark {
                x = 0.5 * (lo + hi);
            }
            since = 0;
            width_mark = hi - lo;
        }
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let g = phase(x)?;
        if g == 0.0 {
            lo = x;
            hi = x;
            break;
        }
        if g < 0.0 {
            lo = x;
            g_lo = g;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            g_hi = g;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
    }
    let lambda = 0.5 * (lo + hi);
    Ok(Bisection { lambda, bracket: (lo, hi), shots, tie })
}

/// The smallest `k_max` eigenvalues.
pub fn eigenvalues(path: &BrownianPath, beta: f64, t_max: f64, k_max: usize, tol: f64) -> Result<Vec<f64>> {
    (1..=k_max).map(|k| eigenvalue_bisect(path, beta, t_max, k, tol)).collect()
}

/// A reconstructed, L²-normalized eigenfunction.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenfunction {
    pub lambda: f64,
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
    /// First argmax of `|φ|`.
    pub center: f64,
    /// Time where the forward and backward pieces were joined.
    pub stitch: f64,
    /// `|Z - Ẑ|` at the stitch point.
    pub mismatch: f64,
    /// `χ = φ'/φ` from the left.
    pub forward: RiccatiTrajectory,
    /// `χ` from the right.
    pub backward: RiccatiTrajectory,
}

impl Eigenfunction {
    /// Interior sign changes of the sampled function.
    pub fn sign_changes(&self) -> usize {
        sign_changes(&self.phi)
    }
}

fn sign_changes(v: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut n = 0;
    for &x in v {
        if x != 0.0 {
            if last != 0.0 && x.signum() != last.signum() {
                n += 1;
            }
            last = x;
        }
    }
    n
}

/// Builds `φ` from `χ = Z_{-λ}` on the left and `Ẑ_{-λ}` on the right.
///
/// Both pieces are exact solutions of the same linear equation; each is
/// trustworthy on its own side of the localization region. They are glued at
/// the downward zero crossing of `Z` (a local maximum of `|φ|`) where the two
/// log-derivatives agree best.
pub fn reconstruct_eigenfunction(
    path: &BrownianPath,
    beta: f64,
    t_max: f64,
    lambda: f64,
    tol: f64,
) -> Result<Eigenfunction> {
    let a = -lambda;
    let fwd = riccati::integrate_forward(path, &DriftSpec::forward(a, beta), 0.0, f64::INFINITY, t_max, tol)?;
    let bwd = riccati::integrate_backward(path, &DriftSpec::reversed(a, beta), t_max, f64::NEG_INFINITY, 0.0, tol)?;
    let (fs, bs) = (&fwd.samples, &bwd.samples);
    if fs.len() != bs.len() || fs.iter().zip(bs).any(|(x, y)| x.t != y.t) {
        return Err(Error::Domain("forward and backward grids differ".into()));
    }
    let n = fs.len();
    let gap = |i: usize| {
        let d = (fs[i].z - bs[i].z).abs();
        if d.is_nan() {
            f64::INFINITY
        } else {
            d
        }
    };
    let mut best: Option<usize> = None;
    for i in 1..n - 1 {
        let crossing = fs[i - 1].z > 0.0 && fs[i].z <= 0.0 && fs[i - 1].z.is_finite();
        if crossing && best.is_none_or(|b| gap(i) < gap(b)) {
            best = Some(i);
        }
    }
    let i = match best {
        Some(i) => i,
        None => (1..n - 1)
            .min_by(|&x, &y| {
                riccati::projective_distance(fs[x].z, bs[x].z).total_cmp(&riccati::projective_distance(fs[y].z, bs[y].z))
            })
            .ok_or_else(|| Error::Domain("too few samples to stitch".into()))?,
    };
    let mismatch = gap(i);
    let stitch = fs[i].t;
    if mismatch > 10.0 * tol {
        return Err(Error::StitchMismatch { mismatch, at: stitch });
    }
    let shift = fs[i].log_abs_phi - bs[i].log_abs_phi;
    let flip = f64::from(fs[i].sign) * f64::from(bs[i].sign);
    let mut logs = Vec::with_capacity(n);
    let mut signs = Vec::with_capacity(n);
    for j in 0..n {
        if j <= i {
            logs.push(fs[j].log_abs_phi);
            signs.push(f64::from(fs[j].sign));
        } else {
            logs.push(bs[j].log_abs_phi + shift);
            signs.push(flip * f64::from(bs[j].sign));
        }
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t: Vec<f64> = fs.iter().map(|s| s.t).collect();
    let mut phi: Vec<f64> = logs.iter().zip(&signs).map(|(l, s)| s * (l - top).exp()).collect();
    let norm = trapezoid_sq(&t, &phi).sqrt();
    let orient = phi.iter().find(|&&v| v != 0.0).map_or(1.0, |v| v.signum());
    for v in &mut phi {
        *v *= orient / norm;
    }
    let center = localization_center(&t, &phi);
    Ok(Eigenfunction { lambda, t, phi, center, stitch, mismatch, forward: fwd, backward: bwd })
}

fn trapezoid_sq(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2)
        .zip(v.windows(2))
        .map(|(tw, vw)| 0.5 * (tw[1] - tw[0]) * (vw[0] * vw[0] + vw[1] * vw[1]))
        .sum()
}

/// First time where `|φ|` attains its maximum over the samples.
pub fn localization_center(t: &[f64], phi: &[f64]) -> f64 {
    let mut best = 0;
    for (i, v) in phi.iter().enumerate() {
        if v.abs() > phi[best].abs() {
            best = i;
        }
    }
    t[best]
}

/// Histogram of `m_k(dx) = L φ²(xL) dx` on `[0, x_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub edges: Vec<f64>,
    /// Mass per bin divided by its width.
    pub density: Vec<f64>,
}

pub fn measure_histogram(t: &[f64], phi: &[f64], l_scale: f64, bins: usize, x_max: f64) -> Measure {
    let edges: Vec<f64> = (0..=bins).map(|j| x_max * j as f64 / bins as f64).collect();
    let mut mass = vec![0.0; bins];
    for (tw, vw) in t.windows(2).zip(phi.windows(2)) {
        let x = 0.5 * (tw[0] + tw[1]) / l_scale;
        if x < 0.0 || x >= x_max {
            continue;
        }
        let j = ((x / x_max) * bins as f64) as usize;
        mass[j.min(bins - 1)] += 0.5 * (tw[1] - tw[0]) * (vw[0] * vw[0] + vw[1] * vw[1]);
    }
    let w = x_max / bins as f64;
    Measure { edges, density: mass.into_iter().map(|m| m / w).collect() }
}

/// Everything computed for the first `k_max` levels of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub lambdas: Vec<f64>,
    pub eigenfunctions: Vec<Eigenfunction>,
    pub centers: Vec<f64>,
    pub measures: Vec<Measure>,
}

/// Eigenvalues, eigenfunctions, centers and rescaled measures on `[0, T]`.
pub fn solve(path: &BrownianPath, beta: f64, t_max: f64, k_max: usize, tol: f64, l_scale: f64) -> Result<SpectralResult> {
    let lambdas = eigenvalues(path, beta, t_max, k_max, tol)?;
    let eigenfunctions = lambdas
        .iter()
        .map(|&l| reconstruct_eigenfunction(path, beta, t_max, l, tol))
        .collect::<Result<Vec<_>>>()?;
    let centers = eigenfunctions.iter().map(|e| e.center).collect();
    let measures = eigenfunctions
        .iter()
        .map(|e| measure_histogram(&e.t, &e.phi, l_scale, 64, t_max / l_scale))
        .collect();
    Ok(SpectralResult { lambdas, eigenfunctions, centers, measures })
}

/// Microscopic profiles around a localization center.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeProfiles {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    pub b: Vec<f64>,
    /// `sup |h - 1/cosh|` over the returned points.
    pub h_distance: f64,
    /// `sup |b + 2 tanh|` over the returned points.
    pub b_distance: f64,
}

/// `h(x) = √2 a_L^{-1/4} φ(U + x/√a_L)` and
/// `b(x) = (B(U + x/√a_L) - B(U))/√a_L` at the sample points with `|x| ≤ x_max`.
///
/// `φ` is oriented so that `h(0) > 0`.
pub fn shape_profiles(
    t: &[f64],
    phi: &[f64],
    path: &BrownianPath,
    center: f64,
    a_l: f64,
    x_max: f64,
) -> Result<ShapeProfiles> {
    if !(a_l > 0.0) || !(x_max > 0.0) || t.len() != phi.len() || t.is_empty() {
        return Err(Error::Domain("shape profiles need a_L > 0, x_max > 0 and matching samples".into()));
    }
    let s = a_l.sqrt();
    let (lo, hi) = (center - x_max / s, center + x_max / s);
    let slack = 1e-9 * (t[t.len() - 1] - t[0]).abs().max(1.0);
    if lo < t[0] - slack || hi > t[t.len() - 1] + slack {
        return Err(Error::Range(format!(
            "window [{lo}, {hi}] leaves the solved interval [{}, {}]",
            t[0],
            t[t.len() - 1]
        )));
    }
    let at_center = {
        let i = t.partition_point(|&x| x < center).min(t.len() - 1);
        let j = if i > 0 && (t[i - 1] - center).abs() < (t[i] - center).abs() { i - 1 } else { i };
        phi[j]
    };
    let orient = if at_center < 0.0 { -1.0 } else { 1.0 };
    let amp = 2f64.sqrt() / a_l.powf(0.25);
    let b_center = path.interp(center)?;
    let mut out = ShapeProfiles { x: Vec::new(), h: Vec::new(), b: Vec::new(), h_distance: 0.0, b_distance: 0.0 };
    for (&tj, &pj) in t.iter().zip(phi) {
        let x = (tj - center) * s;
        if x.abs() > x_max {
            continue;
        }
        let h = amp * orient * pj;
        let b = (path.interp(tj)? - b_center) / s;
        out.h_distance = out.h_distance.max((h - 1.0 / x.cosh()).abs());
        out.b_distance = out.b_distance.max((b + 2.0 * x.tanh()).abs());
        out.x.push(x);
        out.h.push(h);
        out.b.push(b);
    }
    Ok(out)
}

/// Times describing one passage of `Z` across the barrier `[-√a_L, √a_L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEvent {
    /// Last zero of `Z` before `theta`.
    pub upsilon: f64,
    /// First hit of `-√a_L`.
    pub theta: f64,
    /// Last hit of `+√a_L` before `theta`.
    pub iota: f64,
    /// First explosion after `theta`.
    pub zeta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub event: CrossingEvent,
    /// `sup |Z(t) - √a_L tanh(-√a_L (t - υ))|` on `[ι, θ]`, endpoints included.
    pub tanh_distance: f64,
}

/// Locates the first barrier crossing of a forward trajectory.
///
/// Hitting times are interpolated linearly between samples (in `atan z` when
/// an endpoint is infinite). Cells containing an explosion are skipped: the
/// path goes around through infinity there, not across the levels.
pub fn extract_crossing(traj: &RiccatiTrajectory, a_l: f64) -> Result<Crossing> {
    if !(a_l > 0.0) {
        return Err(Error::Domain(format!("a_L must be positive, got {a_l}")));
    }
    let s = a_l.sqrt();
    let smp = &traj.samples;
    let exploding = |i: usize| {
        let (t0, t1) = (smp[i - 1].t, smp[i].t);
        let k = traj.explosions.partition_point(|&e| e <= t0);
        traj.explosions.get(k).is_some_and(|&e| e <= t1)
    };
    let hit = |i: usize, level: f64| -> Option<f64> {
        let (z0, z1) = (smp[i - 1].z, smp[i].z);
        if (z0 - level) * (z1 - level) > 0.0 || z0 == z1 || z0.is_nan() || z1.is_nan() {
            return None;
        }
        let (t0, t1) = (smp[i - 1].t, smp[i].t);
        let frac = if z0.is_finite() && z1.is_finite() {
            (level - z0) / (z1 - z0)
        } else {
            (level.atan() - z0.atan()) / (z1.atan() - z0.atan())
        };
        Some(t0 + frac.clamp(0.0, 1.0) * (t1 - t0))
    };

    let level = -s;
    let mut theta = None;
    for i in 1..smp.len() {
        if smp[i - 1].z > level && smp[i].z <= level && !exploding(i) {
            theta = hit(i, level).map(|t| (i, t));
            if theta.is_some() {
                break;
            }
        }
    }
    let (i_theta, theta) = theta.ok_or(Error::NoCrossing { level })?;
    let last_hit = |lv: f64| -> Option<f64> {
        (1..=i_theta).rev().filter(|&i| !exploding(i)).find_map(|i| {
            hit(i, lv).filter(|&t| t <= theta)
        })
    };
    let iota = last_hit(s).ok_or(Error::NoCrossing { level: s })?;
    let upsilon = last_hit(0.0).ok_or(Error::NoCrossing { level: 0.0 })?;
    let k = traj.explosions.partition_point(|&e| e <= theta);
    let zeta = traj.explosions.get(k).copied();

    let model = |t: f64| s * (-s * (t - upsilon)).tanh();
    let mut dist = (s - model(iota)).abs().max((-s - model(theta)).abs());
    for x in smp.iter().filter(|x| x.t > iota && x.t < theta) {
        dist = dist.max((x.z - model(x.t)).abs());
    }
    Ok(Crossing { event: CrossingEvent { upsilon, theta, iota, zeta }, tanh_distance: dist })
}

/// Eigenvalues of `-∂²` on `[0, T]` with Dirichlet conditions.
pub fn sine_spectrum(t_max: f64, k: usize) -> f64 {
    (k as f64 * PI / t_max).powi(2)
}
