//! Deterministic scales of the high-temperature edge.
//!
//! Everything here is a plain function of `β` or `a`: the length scale
//! `L(β)`, the mean explosion time `m(a)` of the homogeneous diffusion
//! `dX = (a - X²) dt + dB`, its inverse `a_L`, and the affine maps between
//! eigenvalue conventions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible inverse temperature.
pub const BETA_MAX: f64 = 0.3;

/// Bisection bracket for [`a_l_inverse`].
pub const A_L_BRACKET: (f64, f64) = (0.5, 10.0);

/// `L(β) = 1 / (β (3/8 ln 1/β)^{1/3})`.
pub fn length_scale(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(1.0 / (beta * (0.375 * (1.0 / beta).ln()).cbrt()))
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= BETA_MAX {
        Ok(())
    } else {
        Err(Error::Domain(format!("beta must lie in (0, {BETA_MAX}], got {beta}")))
    }
}

/// Node schedule for [`mean_explosion_time`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Initial number of trapezoid panels, at least 256.
    pub nodes: usize,
    /// Stop once a doubling changes the value by less than this (relative).
    pub rel_tol: f64,
    pub max_nodes: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { nodes: 256, rel_tol: 1e-8, max_nodes: 1 << 20 }
    }
}

/// Mean time for `X_a` to travel from `+∞` to `-∞`.
///
/// Start from the classical double integral
/// `2 ∫∫_{x<y} exp(2V(x) - 2V(y))` with `V(x) = x³/3 - a x`. Writing
/// `x = s - v`, `y = s + v` makes the integrand Gaussian in `s`; after that
/// integral and `v = w²/2` one is left with
///
/// ```text
/// m(a) = √(2π) ∫ exp(2 a u² - u⁶/6) du.
/// ```
///
/// The integrand is even and decays like `exp(-u⁶/6)`, so the trapezoid rule
/// on a truncated half line converges geometrically. The exponent is shifted
/// by its maximum `8/3 a^{3/2}` to avoid overflow.
pub fn mean_explosion_time(a: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::Domain(format!("a must be finite, got {a}")));
    }
    if cfg.nodes < 256 {
        return Err(Error::Domain(format!("at least 256 quadrature nodes required, got {}", cfg.nodes)));
    }
    let g = |u: f64| 2.0 * a * u * u - u.powi(6) / 6.0;
    let peak_u = if a > 0.0 { (4.0 * a).powf(0.25) } else { 0.0 };
    let g_max = g(peak_u);
    // truncate where the integrand has fallen by e^-60
    let mut upper = peak_u + 1.0;
    while g(upper) - g_max > -60.0 {
        upper *= 1.25;
    }
    let trapezoid = |panels: usize| -> f64 {
        let h = upper / panels as f64;
        let mut s = 0.5 * ((g(0.0) - g_max).exp() + (g(upper) - g_max).exp());
        for i in 1..panels {
            s += (g(i as f64 * h) - g_max).exp();
        }
        s * h
    };
    let mut panels = cfg.nodes;
    let mut prev = trapezoid(panels);
    loop {
        panels *= 2;
        let next = trapezoid(panels);
        let change = ((next - prev) / next).abs();
        if change < cfg.rel_tol {
            return Ok(2.0 * (2.0 * PI).sqrt() * next * g_max.exp());
        }
        if panels >= cfg.max_nodes {
            return Err(Error::Convergence { change, nodes: panels });
        }
        prev = next;
    }
}

/// `m(a)` with the default quadrature schedule.
pub fn m(a: f64) -> Result<f64> {
    mean_explosion_time(a, &QuadratureConfig::default())
}

/// McKean's asymptotic `π/√a · exp(8/3 a^{3/2})`.
pub fn mean_explosion_time_asymptotic(a: f64) -> f64 {
    PI / a.sqrt() * (8.0 / 3.0 * a.powf(1.5)).exp()
}

/// Solves `m(a) = L` by bisection on [`A_L_BRACKET`].
pub fn a_l_inverse(l: f64) -> Result<f64> {
    let (mut lo, mut hi) = A_L_BRACKET;
    let m_lo = m(lo)?;
    let m_hi = m(hi)?;
    if !(l >= m_lo && l <= m_hi) {
        return Err(Error::Bracket(format!(
            "L = {l} outside [m({lo}), m({hi})] = [{m_lo}, {m_hi}]"
        )));
    }
    let target = l.ln();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if m(mid)?.ln() < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Truncated asymptotic expansion of `a_L`.
pub fn a_l_asymptotic(l: f64) -> Result<f64> {
    if !(l >= std::f64::consts::E) {
        return Err(Error::Domain(format!("asymptotic a_L needs L >= e, got {l}")));
    }
    let ln_l = l.ln();
    let lead = (0.375 * ln_l).powf(2.0 / 3.0);
    let corr = 2.0 / 9.0 * ln_l.ln() / ln_l + (-(2.0 / 3.0) * PI.ln() + 2.0 / 9.0 * 0.375f64.ln()) / ln_l;
    Ok(lead * (1.0 + corr))
}

/// How `a_L` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ALMethod {
    Inverse,
    /// `L < m(0.5)`, below the inversion bracket.
    Asymptotic,
}

/// Scales attached to one inverse temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub beta: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub a_l: f64,
    pub c_beta: f64,
    pub a_l_method: ALMethod,
}

impl ScalingParams {
    pub fn from_beta(beta: f64) -> Result<Self> {
        let l = length_scale(beta)?;
        let (a_l, a_l_method) = if l >= m(A_L_BRACKET.0)? {
            (a_l_inverse(l)?, ALMethod::Inverse)
        } else {
            (a_l_asymptotic(l)?, ALMethod::Asymptotic)
        };
        let c_beta = (1.5 / beta * (1.0 / (PI * beta)).ln()).powf(2.0 / 3.0);
        Ok(Self { beta, l, a_l, c_beta, a_l_method })
    }

    /// `4 √a_L (λ + a_L)`.
    pub fn rescale_eigenvalue(&self, lambda: f64) -> f64 {
        rescale_eigenvalue(lambda, self)
    }
}

/// `4 √a_L (λ + a_L)`.
pub fn rescale_eigenvalue(lambda: f64, params: &ScalingParams) -> f64 {
    4.0 * params.a_l.sqrt() * (lambda + params.a_l)
}

/// Result of moving from the `𝓐_β` convention to `𝓛_β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Converted {
    pub lambda: f64,
    /// Time coordinate of `𝓛_β` matching the given `𝓐_β` time.
    pub phi_time: f64,
    /// `(β/4)^{-1/3}`: multiply an `𝓐_β` time by this to get an `𝓛_β` time.
    pub time_factor: f64,
    /// `(β/4)^{1/6}`: amplitude factor between the eigenfunctions.
    pub amplitude_factor: f64,
}

/// `λ = (β/4)^{2/3} μ` and `x_𝓛 = x_𝓐 (β/4)^{-1/3}`.
///
/// Takes `β` directly since the conversion is valid for any `β > 0`,
/// including the moderate values used for cross-sampler checks.
pub fn convert_conventions(mu: f64, psi_time: f64, beta: f64) -> Result<Converted> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    let r = beta / 4.0;
    let time_factor = r.powf(-1.0 / 3.0);
    Ok(Converted {
        lambda: r.powf(2.0 / 3.0) * mu,
        phi_time: psi_time * time_factor,
        time_factor,
        amplitude_factor: r.powf(1.0 / 6.0),
    })
}

/// Inverse of [`convert_conventions`]: returns `(μ, ψ-time)`.
pub fn invert_conventions(lambda: f64, phi_time: f64, beta: f64) -> Result<(f64, f64)> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    let r = beta / 4.0;
    Ok((lambda * r.powf(-2.0 / 3.0), phi_time * r.powf(1.0 / 3.0)))
}
