//! Gaussian β-ensemble through its tridiagonal model.
//!
//! Diagonal entries are `N(0, 2/β)`; the `i`-th off-diagonal entry is
//! `χ_{β(N-i)} / √β`. With this normalization the joint eigenvalue density
//! is proportional to `∏|μ_i - μ_j|^β exp(-β/4 Σ μ_i²)` and the spectrum
//! fills `[-2√N, 2√N]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::discrete_oracle::SymTridiagonal;
use crate::error::{Error, Result};

/// Default bisection tolerance for ensemble eigenvalues.
pub const EIGEN_TOL: f64 = 1e-11;

/// Draws the tridiagonal matrix for `(N, β)` from `seed`.
pub fn sample_tridiagonal(n: usize, beta: f64, seed: u64) -> Result<SymTridiagonal> {
    if n == 0 || !(beta > 0.0) {
        return Err(Error::Domain(format!("need N >= 1 and beta > 0, got N = {n}, beta = {beta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = (2.0 / beta).sqrt();
    let diag: Vec<f64> = (0..n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            sd * g
        })
        .collect();
    let inv_sqrt_beta = beta.sqrt().recip();
    let mut offdiag = Vec::with_capacity(n.saturating_sub(1));
    for i in 1..n {
        let dof = beta * (n - i) as f64;
        let gamma = Gamma::new(0.5 * dof, 2.0).map_err(|e| Error::Domain(e.to_string()))?;
        offdiag.push(inv_sqrt_beta * gamma.sample(&mut rng).sqrt());
    }
    SymTridiagonal::new(diag, offdiag)
}

/// `N^{1/6} (2√N - μ_i)` for the first `k_max` entries of a decreasing `mu`.
pub fn edge_rescale(mu: &[f64], n: usize, k_max: usize) -> Result<Vec<f64>> {
    if k_max > mu.len() || k_max > n {
        return Err(Error::Domain(format!("k_max = {k_max} exceeds the available {} eigenvalues", mu.len())));
    }
    let nf = n as f64;
    let scale = nf.powf(1.0 / 6.0);
    Ok(mu[..k_max].iter().map(|m| scale * (2.0 * nf.sqrt() - m)).collect())
}

/// One ensemble draw reduced to its top eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSample {
    pub n: usize,
    pub beta: f64,
    /// Largest eigenvalues, decreasing.
    pub mu: Vec<f64>,
    pub edge_rescaled: Vec<f64>,
}

impl EnsembleSample {
    /// Samples and keeps the `k_max` largest eigenvalues.
    pub fn draw(n: usize, beta: f64, seed: u64, k_max: usize) -> Result<Self> {
        let m = sample_tridiagonal(n, beta, seed)?;
        let mu = m.largest(k_max, EIGEN_TOL)?;
        let edge_rescaled = edge_rescale(&mu, n, mu.len())?;
        Ok(Self { n, beta, mu, edge_rescaled })
    }
}

/// Every eigenvalue of a draw, decreasing.
pub fn spectrum(n: usize, beta: f64, seed: u64) -> Result<Vec<f64>> {
    sample_tridiagonal(n, beta, seed)?.largest(n, 1e-9)
}
