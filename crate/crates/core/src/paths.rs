//! Seeded Brownian environments.
//!
//! A [`BrownianPath`] is a realization of `B` on `[t0, t1]`, stored on an
//! equispaced base grid and optionally refined cell by cell with Brownian
//! bridge midpoints. Every random number is a pure function of
//! `(seed, cell, depth, index)`, so the value at a dyadic time stamp does not
//! depend on which refinements were requested, or in which order. All
//! diffusions integrated against the same path therefore see the same `ω`.
//!
//! Between grid points the path is read as its piecewise-linear interpolant.
//! This is the driving signal used by the Riccati integrator and by the
//! finite-difference oracle.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of stored grid points.
pub const DEFAULT_MAX_POINTS: usize = 50_000_000;

/// Number of base cells drawn from one keyed ChaCha stream.
const BLOCK: usize = 1024;

/// Relative slack used when matching a time against a grid stamp.
const GRID_SLACK: f64 = 1e-9;

/// SplitMix64 finalizer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a key tuple into one well-mixed word.
#[inline]
pub fn key_hash(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3_u64, |acc, &p| mix64(acc ^ mix64(p)))
}

/// Standard normal variate that is a pure function of its key.
///
/// Two hashed words feed a Box–Muller transform. Only used for bridge
/// midpoints; the base increments come from keyed ChaCha blocks.
pub fn keyed_normal(seed: u64, cell: u64, depth: u32, index: u64) -> f64 {
    let h1 = key_hash(&[seed, cell, u64::from(depth), index, 1]);
    let h2 = key_hash(&[seed, cell, u64::from(depth), index, 2]);
    // (0, 1] and [0, 1)
    let u1 = ((h1 >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
    let u2 = (h2 >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[derive(Debug, Clone, PartialEq)]
struct Refinement {
    depth: u32,
    /// Interior values of the cell, `2^depth - 1` of them.
    interior: Vec<f64>,
}

/// A piece of the piecewise-linear driving signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_lo: f64,
    pub t_hi: f64,
    pub b_lo: f64,
    pub b_hi: f64,
}

impl Segment {
    #[inline]
    pub fn len(&self) -> f64 {
        self.t_hi - self.t_lo
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.t_hi <= self.t_lo
    }

    /// Slope of `B` on the segment, i.e. the cell average of the white noise.
    #[inline]
    pub fn slope(&self) -> f64 {
        (self.b_hi - self.b_lo) / (self.t_hi - self.t_lo)
    }
}

/// Traversal order for [`BrownianPath::visit_segments`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Traversal {
    Forward,
    Backward,
}

/// Metadata from which a path can be rebuilt bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub seed: u64,
    pub quiet: bool,
    /// `(t_lo, t_hi, new_dt)` in the order they were applied.
    pub refinements: Vec<(f64, f64, f64)>,
}

const SPEC_MAGIC: &[u8; 4] = b"SAOP";
const SPEC_VERSION: u32 = 1;

impl PathSpec {
    /// Little-endian binary dump.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + 24 * self.refinements.len());
        out.extend_from_slice(SPEC_MAGIC);
        out.extend_from_slice(&SPEC_VERSION.to_le_bytes());
        out.extend_from_slice(&self.t0.to_le_bytes());
        out.extend_from_slice(&self.t1.to_le_bytes());
        out.extend_from_slice(&self.dt.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.push(u8::from(self.quiet));
        out.extend_from_slice(&(self.refinements.len() as u32).to_le_bytes());
        for &(lo, hi, dt) in &self.refinements {
            out.extend_from_slice(&lo.to_le_bytes());
            out.extend_from_slice(&hi.to_le_bytes());
            out.extend_from_slice(&dt.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = || Error::Domain("malformed path spec".into());
        let mut rd = ByteReader { bytes, pos: 0 };
        if rd.take(4).ok_or_else(bad)? != SPEC_MAGIC {
            return Err(bad());
        }
        let version = rd.u32().ok_or_else(bad)?;
        if version != SPEC_VERSION {
            return Err(Error::Domain(format!("unsupported path spec version {version}")));
        }
        let t0 = rd.f64().ok_or_else(bad)?;
        let t1 = rd.f64().ok_or_else(bad)?;
        let dt = rd.f64().ok_or_else(bad)?;
        let seed = rd.u64().ok_or_else(bad)?;
        let quiet = rd.take(1).ok_or_else(bad)?[0] != 0;
        let n = rd.u32().ok_or_else(bad)? as usize;
        let mut refinements = Vec::with_capacity(n);
        for _ in 0..n {
            let lo = rd.f64().ok_or_else(bad)?;
            let hi = rd.f64().ok_or_else(bad)?;
            let d = rd.f64().ok_or_else(bad)?;
            refinements.push((lo, hi, d));
        }
        if rd.pos != bytes.len() {
            return Err(bad());
        }
        Ok(Self { t0, t1, dt, seed, quiet, refinements })
    }

    /// Regenerates the path described by this spec.
    pub fn materialize(&self) -> Result<BrownianPath> {
        let mut path = if self.quiet {
            BrownianPath::zero(self.t0, self.t1, self.dt)?
        } else {
            BrownianPath::generate(self.t0, self.t1, self.dt, self.seed)?
        };
        for &(lo, hi, d) in &self.refinements {
            path.refine(lo, hi, d)?;
        }
        Ok(path)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }
    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }
    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

/// A seeded, refinable realization of Brownian motion with `B(t0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    t0: f64,
    dt: f64,
    seed: u64,
    quiet: bool,
    base: Vec<f64>,
    refined: BTreeMap<usize, Refinement>,
    history: Vec<(f64, f64, f64)>,
    max_points: usize,
}

impl BrownianPath {
    /// Equispaced path of step `dt` covering `[t0, t1]`.
    ///
    /// When `t1 - t0` is not a multiple of `dt` the last cell is kept whole,
    /// so [`t1`](Self::t1) may slightly exceed the requested endpoint.
    pub fn generate(t0: f64, t1: f64, dt: f64, seed: u64) -> Result<Self> {
        Self::generate_with_cap(t0, t1, dt, seed, DEFAULT_MAX_POINTS)
    }

    pub fn generate_with_cap(t0: f64, t1: f64, dt: f64, seed: u64, max_points: usize) -> Result<Self> {
        let n = Self::cell_count(t0, t1, dt, max_points)?;
        let mut base = Vec::with_capacity(n + 1);
        base.push(0.0);
        let sd = dt.sqrt();
        let mut acc = 0.0;
        let mut cell = 0usize;
        while cell < n {
            let block = (cell / BLOCK) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(key_hash(&[seed, block, 0xB10C]));
            let stop = ((cell / BLOCK + 1) * BLOCK).min(n);
            while cell < stop {
                let g: f64 = StandardNormal.sample(&mut rng);
                acc += sd * g;
                base.push(acc);
                cell += 1;
            }
        }
        Ok(Self {
            t0,
            dt,
            seed,
            quiet: false,
            base,
            refined: BTreeMap::new(),
            history: Vec::new(),
            max_points,
        })
    }

    /// The noiseless path `B ≡ 0` on the same kind of grid.
    pub fn zero(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        let n = Self::cell_count(t0, t1, dt, DEFAULT_MAX_POINTS)?;
        Ok(Self {
            t0,
            dt,
            seed: 0,
            quiet: true,
            base: vec![0.0; n + 1],
            refined: BTreeMap::new(),
            history: Vec::new(),
            max_points: DEFAULT_MAX_POINTS,
        })
    }

    fn cell_count(t0: f64, t1: f64, dt: f64, max_points: usize) -> Result<usize> {
        if !(t0 < t1) || !(dt > 0.0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::Domain(format!("need t0 < t1 and dt > 0, got [{t0}, {t1}], dt = {dt}")));
        }
        let cells = ((t1 - t0) / dt - GRID_SLACK).ceil().max(1.0);
        if cells + 1.0 > max_points as f64 {
            return Err(Error::PathSize { points: cells as usize + 1, cap: max_points });
        }
        Ok(cells as usize)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.cells() as f64 * self.dt
    }

    /// Base grid step.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_quiet(&self) -> bool {
        self.quiet
    }

    /// Number of base cells.
    pub fn cells(&self) -> usize {
        self.base.len() - 1
    }

    /// Deepest dyadic refinement present anywhere on the path.
    pub fn refinement_level(&self) -> u32 {
        self.refined.values().map(|r| r.depth).max().unwrap_or(0)
    }

    /// Total number of stored grid points.
    pub fn len(&self) -> usize {
        self.base.len() + self.refined.values().map(|r| r.interior.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spec(&self) -> PathSpec {
        PathSpec {
            t0: self.t0,
            t1: self.t1(),
            dt: self.dt,
            seed: self.seed,
            quiet: self.quiet,
            refinements: self.history.clone(),
        }
    }

    #[inline]
    fn stamp(&self, cell: usize, depth: u32, j: usize) -> f64 {
        if j == 0 {
            self.t0 + cell as f64 * self.dt
        } else {
            self.t0 + (cell as f64 + j as f64 / (1u64 << depth) as f64) * self.dt
        }
    }

    fn cell_depth(&self, cell: usize) -> u32 {
        self.refined.get(&cell).map_or(0, |r| r.depth)
    }

    /// Value at sub-point `j` (of `2^depth`) inside `cell`; `j` may be `0` or `2^depth`.
    #[inline]
    fn cell_value(&self, cell: usize, r: Option<&Refinement>, j: usize) -> f64 {
        match r {
            _ if j == 0 => self.base[cell],
            Some(r) if j < (1usize << r.depth) => r.interior[j - 1],
            _ => self.base[cell + 1],
        }
    }

    /// All time stamps in increasing order.
    pub fn grid(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for cell in 0..self.cells() {
            let depth = self.cell_depth(cell);
            for j in 0..(1usize << depth) {
                out.push(self.stamp(cell, depth, j));
            }
        }
        out.push(self.t1());
        out
    }

    /// Values of `B` at [`grid`](Self::grid).
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for cell in 0..self.cells() {
            let r = self.refined.get(&cell);
            let depth = r.map_or(0, |r| r.depth);
            for j in 0..(1usize << depth) {
                out.push(self.cell_value(cell, r, j));
            }
        }
        out.push(*self.base.last().expect("non-empty"));
        out
    }

    /// Refines `[t_lo, t_hi]` so that the local step is at most `new_dt`.
    ///
    /// `t_lo` and `t_hi` must be base grid points and `dt / new_dt` a power
    /// of two. Cells that are already finer are left untouched.
    pub fn refine(&mut self, t_lo: f64, t_hi: f64, new_dt: f64) -> Result<()> {
        if !(t_lo < t_hi) || t_lo < self.t0 - GRID_SLACK * self.dt || t_hi > self.t1() + GRID_SLACK * self.dt {
            return Err(Error::Coverage {
                have_lo: self.t0,
                have_hi: self.t1(),
                want_lo: t_lo,
                want_hi: t_hi,
            });
        }
        let ratio = self.dt / new_dt;
        let depth = ratio.round();
        if !(new_dt > 0.0) || (ratio - depth).abs() > 1e-9 * ratio || depth < 1.0 || !(depth as u64).is_power_of_two() {
            return Err(Error::Alignment { new_dt, local_dt: self.dt });
        }
        let depth = (depth as u64).trailing_zeros();
        if depth > 30 {
            return Err(Error::Alignment { new_dt, local_dt: self.dt });
        }
        let c_lo = self.base_index(t_lo)?;
        let c_hi = self.base_index(t_hi)?;
        let extra: usize = (c_lo..c_hi)
            .map(|c| {
                let have = self.cell_depth(c);
                if have >= depth { 0 } else { (1usize << depth) - (1usize << have) }
            })
            .sum();
        if self.len() + extra > self.max_points {
            return Err(Error::PathSize { points: self.len() + extra, cap: self.max_points });
        }
        for cell in c_lo..c_hi {
            self.refine_cell(cell, depth);
        }
        self.history.push((t_lo, t_hi, new_dt));
        Ok(())
    }

    fn base_index(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.dt;
        let i = x.round();
        if (x - i).abs() > GRID_SLACK * x.abs().max(1.0) || i < 0.0 || i as usize > self.cells() {
            return Err(Error::OffGrid { t });
        }
        Ok(i as usize)
    }

    fn refine_cell(&mut self, cell: usize, depth: u32) {
        let have = self.cell_depth(cell);
        if have >= depth {
            return;
        }
        let left = self.base[cell];
        let right = self.base[cell + 1];
        // current points of the cell including both ends
        let mut pts: Vec<f64> = Vec::with_capacity((1usize << depth) + 1);
        pts.push(left);
        if let Some(r) = self.refined.get(&cell) {
            pts.extend_from_slice(&r.interior);
        }
        pts.push(right);
        for d in (have + 1)..=depth {
            let parent_len = self.dt / (1u64 << (d - 1)) as f64;
            let sd = (parent_len / 4.0).sqrt();
            let mut next = Vec::with_capacity(2 * pts.len() - 1);
            for (k, w) in pts.windows(2).enumerate() {
                next.push(w[0]);
                let j = (2 * k + 1) as u64;
                let noise = if self.quiet {
                    0.0
                } else {
                    sd * keyed_normal(self.seed, cell as u64, d, j)
                };
                next.push(0.5 * (w[0] + w[1]) + noise);
            }
            next.push(right);
            pts = next;
        }
        let interior = pts[1..pts.len() - 1].to_vec();
        self.refined.insert(cell, Refinement { depth, interior });
    }

    fn locate(&self, t: f64) -> (usize, u32, usize, f64) {
        // (cell, depth, sub-index, fractional position inside the sub-cell)
        let x = ((t - self.t0) / self.dt).max(0.0);
        let mut cell = x.floor() as usize;
        if cell >= self.cells() {
            cell = self.cells() - 1;
        }
        let depth = self.cell_depth(cell);
        let scale = (1u64 << depth) as f64;
        let y = ((x - cell as f64) * scale).clamp(0.0, scale);
        let mut j = y.floor() as usize;
        if j >= (1usize << depth) {
            j = (1usize << depth) - 1;
        }
        (cell, depth, j, y - j as f64)
    }

    /// `B(t)` at a grid point.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        self.check_cover(t, t)?;
        let (cell, depth, j, frac) = self.locate(t);
        let r = self.refined.get(&cell);
        if frac <= GRID_SLACK {
            Ok(self.cell_value(cell, r, j))
        } else if 1.0 - frac <= GRID_SLACK {
            Ok(self.cell_value(cell, r, j + 1))
        } else {
            let _ = depth;
            Err(Error::OffGrid { t })
        }
    }

    /// `B(t) - B(s)` for grid points `s <= t`.
    pub fn increment(&self, s: f64, t: f64) -> Result<f64> {
        if s > t {
            return Err(Error::Domain(format!("increment needs s <= t, got s = {s}, t = {t}")));
        }
        Ok(self.value_at(t)? - self.value_at(s)?)
    }

    /// Piecewise-linear interpolant of the path at any `t` in its span.
    pub fn interp(&self, t: f64) -> Result<f64> {
        self.check_cover(t, t)?;
        let (cell, _depth, j, frac) = self.locate(t);
        let r = self.refined.get(&cell);
        let lo = self.cell_value(cell, r, j);
        if frac == 0.0 {
            return Ok(lo);
        }
        let hi = self.cell_value(cell, r, j + 1);
        Ok(lo + frac * (hi - lo))
    }

    pub(crate) fn check_cover(&self, lo: f64, hi: f64) -> Result<()> {
        let slack = GRID_SLACK * self.dt;
        if lo < self.t0 - slack || hi > self.t1() + slack || lo.is_nan() || hi.is_nan() {
            return Err(Error::Coverage {
                have_lo: self.t0,
                have_hi: self.t1(),
                want_lo: lo,
                want_hi: hi,
            });
        }
        Ok(())
    }

    /// Walks the piecewise-linear signal on `[lo, hi]`, clipping the end cells.
    ///
    /// The callback may stop the walk early by returning `ControlFlow::Break`.
    pub fn visit_segments<B>(
        &self,
        lo: f64,
        hi: f64,
        order: Traversal,
        mut f: impl FnMut(Segment) -> ControlFlow<B>,
    ) -> Result<Option<B>> {
        self.check_cover(lo, hi)?;
        let lo = lo.max(self.t0);
        let hi = hi.min(self.t1());
        if !(lo < hi) {
            return Ok(None);
        }
        let (c_lo, ..) = self.locate(lo);
        let (c_hi, ..) = self.locate(hi);
        match order {
            Traversal::Forward => {
                for cell in c_lo..=c_hi {
                    if let Some(b) = self.visit_cell(cell, lo, hi, order, &mut f) {
                        return Ok(Some(b));
                    }
                }
            }
            Traversal::Backward => {
                for cell in (c_lo..=c_hi).rev() {
                    if let Some(b) = self.visit_cell(cell, lo, hi, order, &mut f) {
                        return Ok(Some(b));
                    }
                }
            }
        }
        Ok(None)
    }

    #[inline]
    fn visit_cell<B, F: FnMut(Segment) -> ControlFlow<B>>(
        &self,
        cell: usize,
        lo: f64,
        hi: f64,
        order: Traversal,
        f: &mut F,
    ) -> Option<B> {
        let r = self.refined.get(&cell);
        let depth = r.map_or(0, |r| r.depth);
        let m = 1usize << depth;
        let seg = |j: usize| Segment {
            t_lo: self.stamp(cell, depth, j),
            t_hi: if j + 1 == m { self.t0 + (cell + 1) as f64 * self.dt } else { self.stamp(cell, depth, j + 1) },
            b_lo: self.cell_value(cell, r, j),
            b_hi: self.cell_value(cell, r, j + 1),
        };
        let clip = |mut s: Segment| -> Option<Segment> {
            if s.t_hi <= lo || s.t_lo >= hi {
                return None;
            }
            let slope = s.slope();
            if s.t_lo < lo {
                s.b_lo += slope * (lo - s.t_lo);
                s.t_lo = lo;
            }
            if s.t_hi > hi {
                s.b_hi -= slope * (s.t_hi - hi);
                s.t_hi = hi;
            }
            (s.t_hi > s.t_lo).then_some(s)
        };
        let mut emit = |j: usize| match clip(seg(j)) {
            Some(s) => f(s),
            None => ControlFlow::Continue(()),
        };
        let stop = match order {
            Traversal::Forward => (0..m).try_for_each(&mut emit),
            Traversal::Backward => (0..m).rev().try_for_each(&mut emit),
        };
        match stop {
            ControlFlow::Break(b) => Some(b),
            ControlFlow::Continue(()) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_path() {
        let a = BrownianPath::generate(0.0, 3.0, 0.01, 7).unwrap();
        let b = BrownianPath::generate(0.0, 3.0, 0.01, 7).unwrap();
        assert_eq!(a.values(), b.values());
        let c = BrownianPath::generate(0.0, 3.0, 0.01, 8).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn refinement_keeps_existing_values() {
        let mut p = BrownianPath::generate(0.0, 2.0, 0.1, 3).unwrap();
        let before: Vec<(f64, f64)> = p.grid().into_iter().zip(p.values()).collect();
        p.refine(0.0, 2.0, 0.025).unwrap();
        for (t, v) in before {
            assert_eq!(p.value_at(t).unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(p.refinement_level(), 2);
        assert_eq!(p.len(), 81);
    }

    #[test]
    fn refinement_is_idempotent_and_local() {
        let base = BrownianPath::generate(0.0, 2.0, 0.125, 11).unwrap();
        let mut once = base.clone();
        once.refine(0.0, 2.0, 0.125 / 8.0).unwrap();
        let mut twice = once.clone();
        twice.refine(0.0, 2.0, 0.125 / 8.0).unwrap();
        assert_eq!(once.values(), twice.values());

        let mut split = base.clone();
        split.refine(0.0, 1.0, 0.125 / 8.0).unwrap();
        split.refine(1.0, 2.0, 0.125 / 8.0).unwrap();
        assert_eq!(split.grid(), once.grid());
        assert_eq!(split.values(), once.values());

        // coarse-then-fine equals fine directly
        let mut staged = base;
        staged.refine(0.0, 2.0, 0.125 / 2.0).unwrap();
        staged.refine(0.0, 2.0, 0.125 / 8.0).unwrap();
        assert_eq!(staged.values(), once.values());
    }

    #[test]
    fn refine_rejects_non_dyadic_steps() {
        let mut p = BrownianPath::generate(0.0, 1.0, 0.1, 1).unwrap();
        assert!(matches!(p.refine(0.0, 1.0, 0.03), Err(Error::Alignment { .. })));
        assert!(matches!(p.refine(0.05, 1.0, 0.05), Err(Error::OffGrid { .. })));
    }

    #[test]
    fn increments_add_up() {
        let p = BrownianPath::generate(0.0, 1.0, 0.01, 5).unwrap();
        assert_eq!(p.increment(0.3, 0.3).unwrap(), 0.0);
        let sum = p.increment(0.1, 0.4).unwrap() + p.increment(0.4, 0.9).unwrap();
        assert!((sum - p.increment(0.1, 0.9).unwrap()).abs() < 1e-15);
        let total: f64 = p.values().windows(2).map(|w| w[1] - w[0]).sum();
        assert!((total - p.value_at(p.t1()).unwrap()).abs() < 1e-12);
        assert!(matches!(p.value_at(0.105), Err(Error::OffGrid { .. })));
        assert!(p.increment(0.5, 0.2).is_err());
    }

    #[test]
    fn size_cap_is_enforced() {
        let err = BrownianPath::generate_with_cap(0.0, 10.0, 1e-3, 1, 1000).unwrap_err();
        assert!(matches!(err, Error::PathSize { .. }));
        let mut p = BrownianPath::generate_with_cap(0.0, 1.0, 0.01, 1, 150).unwrap();
        assert!(matches!(p.refine(0.0, 1.0, 0.005), Err(Error::PathSize { .. })));
    }

    #[test]
    fn interpolation_is_linear_inside_cells() {
        let p = BrownianPath::generate(0.0, 1.0, 0.25, 9).unwrap();
        let a = p.value_at(0.25).unwrap();
        let b = p.value_at(0.5).unwrap();
        assert!((p.interp(0.3125).unwrap() - (0.75 * a + 0.25 * b)).abs() < 1e-15);
    }

    #[test]
    fn segments_tile_the_requested_window() {
        let mut p = BrownianPath::generate(0.0, 1.0, 0.1, 2).unwrap();
        p.refine(0.2, 0.4, 0.025).unwrap();
        let mut segs = Vec::new();
        p.visit_segments(0.05, 0.93, Traversal::Forward, |s| {
            segs.push(s);
            ControlFlow::<()>::Continue(())
        })
        .unwrap();
        assert_eq!(segs.first().unwrap().t_lo, 0.05);
        assert!((segs.last().unwrap().t_hi - 0.93).abs() < 1e-15);
        for w in segs.windows(2) {
            assert_eq!(w[0].t_hi, w[1].t_lo);
            assert_eq!(w[0].b_hi, w[1].b_lo);
        }
        assert_eq!(segs.len(), 1 + 1 + 8 + 5 + 1);
        let mut back = Vec::new();
        p.visit_segments(0.05, 0.93, Traversal::Backward, |s| {
            back.push(s);
            ControlFlow::<()>::Continue(())
        })
        .unwrap();
        back.reverse();
        assert_eq!(segs, back);
    }

    #[test]
    fn spec_round_trips_through_bytes() {
        let mut p = BrownianPath::generate(0.0, 4.0, 0.5, 21).unwrap();
        p.refine(1.0, 2.0, 0.125).unwrap();
        let spec = p.spec();
        let back = PathSpec::from_bytes(&spec.to_bytes()).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.materialize().unwrap(), p);
        assert!(PathSpec::from_bytes(b"nope").is_err());
    }

    #[test]
    fn zero_path_stays_zero() {
        let mut p = BrownianPath::zero(0.0, 1.0, 0.1).unwrap();
        p.refine(0.0, 1.0, 0.025).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
    }
}
