//! Finite-difference oracle.
//!
//! The Dirichlet operator on `[0, T]` is discretized on interior nodes
//! `t_i = i T/(n+1)`. Its noise column is read off the same
//! [`BrownianPath`] the Riccati integrator uses, so both methods answer the
//! same question about the same `ω`. Eigenvalues come from Sturm bisection,
//! eigenvectors from inverse iteration.

use crate::error::{Error, Result};
use crate::paths::BrownianPath;

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || offdiag.len() + 1 != diag.len() {
            return Err(Error::Domain(format!(
                "need n >= 1 diagonal and n - 1 off-diagonal entries, got {} and {}",
                diag.len(),
                offdiag.len()
            )));
        }
        Ok(Self { diag, offdiag })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn pivmin(&self) -> f64 {
        let m = self.offdiag.iter().map(|e| e * e).fold(1.0, f64::max);
        f64::MIN_POSITIVE * m
    }

    /// Number of eigenvalues `≤ x` (negative pivots of `A - xI`).
    pub fn count_le(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut d = self.diag[0] - x;
        if d.abs() < pivmin {
            d = -pivmin;
        }
        if d < 0.0 {
            count += 1;
        }
        for i in 1..self.diag.len() {
            let e = self.offdiag[i - 1];
            d = self.diag[i] - x - e * e / d;
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.offdiag[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.offdiag[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        let pad = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        (lo - pad, hi + pad)
    }

    /// `k`-th smallest eigenvalue (1-based) by bisection to absolute `tol`.
    pub fn kth_smallest(&self, k: usize, tol: f64) -> Result<f64> {
        if k == 0 || k > self.len() {
            return Err(Error::Domain(format!("eigenvalue index {k} outside 1..={}", self.len())));
        }
        let (mut lo, mut hi) = self.gershgorin();
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_le(mid) >= k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// The `k_max` smallest eigenvalues, increasing.
    pub fn smallest(&self, k_max: usize, tol: f64) -> Result<Vec<f64>> {
        (1..=k_max).map(|k| self.kth_smallest(k, tol)).collect()
    }

    /// The `k_max` largest eigenvalues, decreasing.
    pub fn largest(&self, k_max: usize, tol: f64) -> Result<Vec<f64>> {
        let n = self.len();
        (0..k_max.min(n)).map(|j| self.kth_smallest(n - j, tol)).collect()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.offdiag[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.offdiag[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// `‖(A - λI) v‖₂`.
    pub fn residual(&self, lambda: f64, v: &[f64]) -> f64 {
        self.apply(v).iter().zip(v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt()
    }

    /// Unit eigenvector for the eigenvalue near `lambda`, by inverse iteration.
    ///
    /// The sign is fixed so that the first nonzero component is positive.
    /// The residual `‖(A - λI)v‖` is checked against `1e-8`, or against
    /// `64 ε ‖A‖` when that rounding floor is larger.
    pub fn eigenvector(&self, lambda: f64, tol: f64) -> Result<Vec<f64>> {
        let n = self.len();
        let lu = ShiftedLu::factor(self, lambda);
        // deterministic, generic start
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).fract()).collect();
        normalize(&mut v);
        let mut prev = f64::INFINITY;
        for it in 0..100 {
            let mut w = lu.solve(&v);
            normalize(&mut w);
            fix_sign(&mut w);
            let change = w.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            v = w;
            // either converged, or stuck at the rounding floor
            if change <= tol || (it >= 2 && change < 1e-6 && change > 0.5 * prev) {
                let (glo, ghi) = self.gershgorin();
                let floor = 1e-8f64.max(64.0 * f64::EPSILON * glo.abs().max(ghi.abs()));
                if self.residual(lambda, &v) <= floor {
                    return Ok(v);
                }
            }
            prev = change;
        }
        Err(Error::NoConvergence { iterations: 100 })
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn fix_sign(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|&&x| x != 0.0) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// LU factors of `A - λI` with partial pivoting (two superdiagonals).
struct ShiftedLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    l: Vec<f64>,
    swap: Vec<bool>,
}

impl ShiftedLu {
    fn factor(a: &SymTridiagonal, lambda: f64) -> Self {
        let n = a.len();
        let tiny = f64::EPSILON * a.gershgorin().0.abs().max(a.gershgorin().1.abs()).max(1.0);
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut l = vec![0.0; n];
        let mut swap = vec![false; n];
        // current row i holds (d, e, f) for columns i, i+1, i+2
        let mut d = a.diag[0] - lambda;
        let mut e = if n > 1 { a.offdiag[0] } else { 0.0 };
        let mut f = 0.0;
        for i in 0..n {
            if i + 1 == n {
                u0[i] = if d.abs() < tiny { tiny } else { d };
                break;
            }
            // next row: (sub, diag, super) in columns i, i+1, i+2
            let sub = a.offdiag[i];
            let nd = a.diag[i + 1] - lambda;
            let ne = if i + 2 < n { a.offdiag[i + 1] } else { 0.0 };
            if sub.abs() > d.abs() {
                swap[i] = true;
                u0[i] = sub;
                u1[i] = nd;
                u2[i] = ne;
                let m = d / sub;
                l[i] = m;
                d = e - m * nd;
                e = f - m * ne;
            } else {
                let piv = if d.abs() < tiny { tiny } else { d };
                u0[i] = piv;
                u1[i] = e;
                u2[i] = f;
                let m = sub / piv;
                l[i] = m;
                d = nd - m * e;
                e = ne - m * f;
            }
            f = 0.0;
        }
        Self { u0, u1, u2, l, swap }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y = b.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swap[i] {
                y.swap(i, i + 1);
            }
            y[i + 1] -= self.l[i] * y[i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
        }
        x
    }
}

/// How the white noise is averaged onto the nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseQuadrature {
    /// `(B(t_i + dx/2) - B(t_i - dx/2)) / dx`.
    #[default]
    Midpoint,
    /// Midpoint average of the two adjacent cell potentials, minus
    /// `dx² (V_L² + V_R²) / 24`. Removes the `O(dx)` bias that a
    /// `dx^{-1/2}`-sized cell potential induces in the three-point stencil.
    SecondOrder,
}

/// Dirichlet discretization of `-∂² + (β/4) t + ξ` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    pub n: usize,
    pub dx: f64,
    pub t_max: f64,
    pub beta: f64,
    /// Potential at the nodes, without the `2/dx²` stencil part.
    pub potential: Vec<f64>,
    pub matrix: SymTridiagonal,
}

/// Builds the operator with [`NoiseQuadrature::Midpoint`].
pub fn build(path: &BrownianPath, beta: f64, t_max: f64, n: usize) -> Result<TridiagonalOperator> {
    build_with(path, beta, t_max, n, NoiseQuadrature::Midpoint)
}

pub fn build_with(path: &BrownianPath, beta: f64, t_max: f64, n: usize, quad: NoiseQuadrature) -> Result<TridiagonalOperator> {
    if n < 8 {
        return Err(Error::Domain(format!("need at least 8 interior nodes, got {n}")));
    }
    path.check_cover(0.0, t_max)?;
    let dx = t_max / (n + 1) as f64;
    let q = 0.25 * beta;
    let mut potential = Vec::with_capacity(n);
    for i in 1..=n {
        let t = i as f64 * dx;
        let v = match quad {
            NoiseQuadrature::Midpoint => q * t + (path.interp(t + 0.5 * dx)? - path.interp(t - 0.5 * dx)?) / dx,
            NoiseQuadrature::SecondOrder => {
                let b = path.interp(t)?;
                let vl = q * (t - 0.5 * dx) + (b - path.interp(t - dx)?) / dx;
                let vr = q * (t + 0.5 * dx) + (path.interp(t + dx)? - b) / dx;
                0.5 * (vl + vr) - dx * dx * (vl * vl + vr * vr) / 24.0
            }
        };
        potential.push(v);
    }
    let stencil = 2.0 / (dx * dx);
    let diag = potential.iter().map(|v| stencil + v).collect();
    let offdiag = vec![-1.0 / (dx * dx); n - 1];
    Ok(TridiagonalOperator { n, dx, t_max, beta, potential, matrix: SymTridiagonal::new(diag, offdiag)? })
}

impl TridiagonalOperator {
    /// Interior node times.
    pub fn grid(&self) -> Vec<f64> {
        (1..=self.n).map(|i| i as f64 * self.dx).collect()
    }

    /// Rayleigh quotient in difference form, robust to the large stencil.
    pub fn rayleigh(&self, v: &[f64]) -> f64 {
        let h2 = self.dx * self.dx;
        let mut num = v[0] * v[0] / h2 + v[self.n - 1] * v[self.n - 1] / h2;
        for w in v.windows(2) {
            num += (w[1] - w[0]).powi(2) / h2;
        }
        num += v.iter().zip(&self.potential).map(|(x, p)| p * x * x).sum::<f64>();
        num / v.iter().map(|x| x * x).sum::<f64>()
    }
}

/// Number of eigenvalues `≤ -a`.
pub fn sturm_count(op: &TridiagonalOperator, a: f64) -> usize {
    op.matrix.count_le(-a)
}

/// The `k_max` smallest eigenvalues, each to within `tol`.
pub fn eigenvalues(op: &TridiagonalOperator, k_max: usize, tol: f64) -> Result<Vec<f64>> {
    if k_max > op.n {
        return Err(Error::Domain(format!("k_max = {k_max} exceeds n = {}", op.n)));
    }
    op.matrix.smallest(k_max, tol)
}

/// Eigenvector for `lambda`, normalized by `Σ v² dx = 1`.
pub fn eigenvector(op: &TridiagonalOperator, lambda: f64, tol: f64) -> Result<Vec<f64>> {
    let mut v = op.matrix.eigenvector(lambda, tol)?;
    let s = op.dx.sqrt().recip();
    v.iter_mut().for_each(|x| *x *= s);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn laplacian(n: usize) -> TridiagonalOperator {
        let p = BrownianPath::zero(0.0, 1.0, 1.0 / (n + 1) as f64).unwrap();
        build(&p, 0.0, 1.0, n).unwrap()
    }

    #[test]
    fn quiet_operator_is_the_laplacian() {
        let op = laplacian(9);
        assert!(op.matrix.diag.iter().all(|&d| (d - 200.0).abs() < 1e-9));
        assert!(op.matrix.offdiag.iter().all(|&e| (e + 100.0).abs() < 1e-9));
        assert!(build(&BrownianPath::zero(0.0, 1.0, 0.1).unwrap(), 0.0, 1.0, 4).is_err());
    }

    #[test]
    fn sturm_counts() {
        let op = laplacian(2000);
        assert_eq!(sturm_count(&op, -50.0), 2);
        let (_, hi) = op.matrix.gershgorin();
        assert_eq!(sturm_count(&op, -hi), 2000);
        assert_eq!(sturm_count(&op, 1.0), 0);
    }

    #[test]
    fn sine_spectrum_and_vectors() {
        let op = laplacian(4000);
        let ev = eigenvalues(&op, 3, 1e-10).unwrap();
        for (k, l) in ev.iter().enumerate() {
            let want = ((k + 1) as f64 * PI).powi(2);
            assert!((l / want - 1.0).abs() < 1e-3);
        }
        let v = eigenvector(&op, ev[0], 1e-12).unwrap();
        let err = op.grid().iter().zip(&v).map(|(t, x)| (x - 2f64.sqrt() * (PI * t).sin()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
        let unit: Vec<f64> = v.iter().map(|x| x * op.dx.sqrt()).collect();
        // at n = 4000 the rounding floor ε‖A‖ is itself about 1.4e-8
        let r = op.matrix.residual(ev[0], &unit);
        assert!(r <= 4.0 * f64::EPSILON * op.matrix.gershgorin().1, "residual {r}");
        let w = eigenvector(&op, ev[1], 1e-12).unwrap();
        let dot: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() * op.dx;
        assert!(dot.abs() < 1e-6);
        assert!((op.rayleigh(&v) - ev[0]).abs() < 1e-6);
    }

    #[test]
    fn residual_below_1e8_on_a_moderate_grid() {
        let op = laplacian(1000);
        let ev = eigenvalues(&op, 2, 1e-11).unwrap();
        for l in ev {
            let v = op.matrix.eigenvector(l, 1e-12).unwrap();
            assert!(op.matrix.residual(l, &v) <= 1e-8);
        }
    }

    #[test]
    fn lu_solves_general_systems() {
        let a = SymTridiagonal::new(vec![0.0, 1.0, -2.0, 3.0, 0.5], vec![2.0, -1.0, 0.5, 4.0]).unwrap();
        let lu = ShiftedLu::factor(&a, 0.3);
        let b = vec![1.0, -2.0, 0.5, 3.0, 1.0];
        let x = lu.solve(&b);
        let ax = a.apply(&x);
        for i in 0..5 {
            assert!((ax[i] - 0.3 * x[i] - b[i]).abs() < 1e-12);
        }
    }
}
