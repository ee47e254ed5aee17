//! Riccati diffusions with explosions.
//!
//! `Z = φ'/φ` solves `dZ = (a + βt/4 - Z²) dt + dB` exactly when `φ` solves
//! the linear equation `φ'' = (a + βt/4 + B') φ`. On each cell of the path
//! grid `B'` is the constant slope of the piecewise-linear interpolant, so
//! the pair `(φ, φ')` can be carried across the cell with a closed-form
//! transfer matrix. An explosion of `Z` is a zero of `φ` and is located by
//! solving the cell's closed form for its root. The projective pair passes
//! through `φ = 0` without any special handling, so the restart "from `+∞`"
//! after an explosion costs nothing and loses nothing.
//!
//! The time term `βt/4` is frozen at the cell midpoint. Every parameter `a`
//! therefore sees the same piecewise-constant potential up to the shift `a`,
//! which makes the monotone coupling exact on a shared path.
//!
//! Backward diffusions `Ẑ` solve the same equation; they are obtained by
//! running the transfer matrices in reverse from the terminal condition.
//! Their explosions (to `+∞` in reversed time) are again the zeros of `φ`.

use std::f64::consts::PI;
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::paths::{BrownianPath, Segment, Traversal};

/// Drift family `a + βt/4 - z²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSpec {
    pub a: f64,
    pub beta: f64,
    pub time_reversed: bool,
}

impl DriftSpec {
    pub fn forward(a: f64, beta: f64) -> Self {
        Self { a, beta, time_reversed: false }
    }

    pub fn reversed(a: f64, beta: f64) -> Self {
        Self { a, beta, time_reversed: true }
    }

    /// `a + βt/4`.
    pub fn level(&self, t: f64) -> f64 {
        self.a + 0.25 * self.beta * t
    }

    /// `√(a + βt/4)` where the well exists.
    pub fn well_bottom(&self, t: f64) -> Option<f64> {
        let l = self.level(t);
        (l >= 0.0).then(|| l.sqrt())
    }

    /// Drift at physical time `t`.
    ///
    /// In the reversed form this is the derivative with respect to the
    /// reversed clock `s = t0 - t`, i.e. `-a - β(t0 - s)/4 + y²`.
    pub fn drift(&self, t: f64, z: f64) -> f64 {
        let f = self.level(t) - z * z;
        if self.time_reversed {
            -f
        } else {
            f
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// One recorded node of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// `φ'/φ`; `±∞` exactly at a zero of `φ`.
    pub z: f64,
    /// `ln |φ|` up to a trajectory-wide additive constant.
    pub log_abs_phi: f64,
    /// Sign of `φ` (`0` exactly at a zero).
    pub sign: i8,
}

/// A solved Riccati path with its explosion record.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiTrajectory {
    pub direction: Direction,
    pub a: f64,
    pub beta: f64,
    /// `(time, value)` of the initial (forward) or terminal (backward) condition.
    pub start: (f64, f64),
    /// Solved interval, increasing.
    pub span: (f64, f64),
    /// Grid nodes in increasing time order.
    pub samples: Vec<Sample>,
    /// Zeros of `φ` in increasing order, excluding the starting point.
    pub explosions: Vec<f64>,
}

impl RiccatiTrajectory {
    /// Number of explosions in `(t_lo, t_hi]`.
    pub fn explosion_count(&self, t_lo: f64, t_hi: f64) -> usize {
        explosion_count(self, t_lo, t_hi)
    }

    /// Value at the sample nearest to `t`.
    pub fn z_near(&self, t: f64) -> Option<f64> {
        let i = self.samples.partition_point(|s| s.t < t);
        let cands = [i.checked_sub(1), (i < self.samples.len()).then_some(i)];
        cands
            .into_iter()
            .flatten()
            .min_by(|&x, &y| {
                (self.samples[x].t - t).abs().total_cmp(&(self.samples[y].t - t).abs())
            })
            .map(|j| self.samples[j].z)
    }
}

/// Number of recorded explosion times in `(t_lo, t_hi]`.
pub fn explosion_count(traj: &RiccatiTrajectory, t_lo: f64, t_hi: f64) -> usize {
    let lo = traj.explosions.partition_point(|&t| t <= t_lo);
    let hi = traj.explosions.partition_point(|&t| t <= t_hi);
    hi.saturating_sub(lo)
}

/// Projective state `(φ, φ')` with a separate log scale.
///
/// In backward mode `q` holds the derivative with respect to reversed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    p: f64,
    q: f64,
    log_scale: f64,
    zeros: usize,
    /// Sign of `φ` on the current nodal interval.
    lobe: f64,
}

impl State {
    fn from_value(x: f64, dir: Direction) -> Self {
        let s = match dir {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        };
        let (p, q) = if x.is_infinite() {
            // φ = 0 with φ' of the matching sign
            (0.0, 1.0)
        } else {
            (1.0, s * x)
        };
        let mut st = Self { p, q, log_scale: 0.0, zeros: 0, lobe: 1.0 };
        st.renormalize();
        st
    }

    #[inline]
    fn renormalize(&mut self) {
        let n = self.p.abs() + self.q.abs();
        if !(1e-100..=1e100).contains(&n) {
            let h = self.p.hypot(self.q);
            self.p /= h;
            self.q /= h;
            self.log_scale += h.ln();
        }
    }

    /// Zeros crossed so far.
    pub fn zeros(&self) -> usize {
        self.zeros
    }

    /// Prüfer angle in units of `π`: continuous and increasing in `-a`.
    pub fn phase_over_pi(&self) -> f64 {
        self.zeros as f64 + (self.lobe * self.p).max(0.0).atan2(self.lobe * self.q) / PI
    }

    fn z(&self, dir: Direction) -> f64 {
        let s = match dir {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        };
        if self.p == 0.0 {
            s * self.q.signum() * f64::INFINITY
        } else {
            s * self.q / self.p
        }
    }

    fn sample(&self, t: f64, dir: Direction) -> Sample {
        Sample {
            t,
            z: self.z(dir),
            log_abs_phi: self.p.abs().ln() + self.log_scale,
            sign: if self.p > 0.0 {
                1
            } else if self.p < 0.0 {
                -1
            } else {
                0
            },
        }
    }
}

/// Transfer coefficients `C(τ), S(τ)` of `φ'' = F φ`.
#[inline]
fn transfer(f: f64, tau: f64) -> (f64, f64) {
    let u = f * tau * tau;
    if u.abs() <= 0.01 {
        let c = 1.0 + u * (1.0 / 2.0 + u * (1.0 / 24.0 + u * (1.0 / 720.0 + u / 40320.0)));
        let s = tau * (1.0 + u * (1.0 / 6.0 + u * (1.0 / 120.0 + u * (1.0 / 5040.0 + u / 362880.0))));
        (c, s)
    } else if f > 0.0 {
        let w = f.sqrt();
        ((w * tau).cosh(), (w * tau).sinh() / w)
    } else {
        let w = (-f).sqrt();
        ((w * tau).cos(), (w * tau).sin() / w)
    }
}

/// First root in `(0, h]` of `C(τ) p + S(τ) q`, known to exist.
fn zero_time(f: f64, p: f64, q: f64, h: f64) -> f64 {
    let phi = |tau: f64| {
        let (c, s) = transfer(f, tau);
        c * p + s * q
    };
    let mut tau = if q == 0.0 {
        f64::NAN
    } else if (f * h * h).abs() < 1e-12 {
        -p / q
    } else if f < 0.0 {
        let w = (-f).sqrt();
        let mut x = (-p * w).atan2(q);
        if x <= 0.0 {
            x += PI;
        }
        x / w
    } else {
        let w = f.sqrt();
        (-p * w / q).atanh() / w
    };
    if !(tau > 0.0 && tau <= h) {
        // safeguard: bisection on the sign change
        let (mut lo, mut hi) = (0.0, h);
        let s0 = p.signum();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi(mid).signum() == s0 && phi(mid) != 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        tau = hi;
    } else {
        // polish
        for _ in 0..2 {
            let (c, s) = transfer(f, tau);
            let val = c * p + s * q;
            let der = f * s * p + c * q;
            if der != 0.0 {
                let next = tau - val / der;
                if next > 0.0 && next <= h {
                    tau = next;
                }
            }
        }
    }
    tau
}

/// Callback interface for [`Engine::run`].
trait Observer {
    /// A zero of `φ` at physical time `t`.
    fn zero(&mut self, _t: f64, _st: &State) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
    /// End of a path cell.
    fn node(&mut self, _t: f64, _st: &State) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

struct Engine {
    a: f64,
    quarter_beta: f64,
    dir: Direction,
}

impl Engine {
    fn new(a: f64, beta: f64, dir: Direction) -> Self {
        Self { a, quarter_beta: 0.25 * beta, dir }
    }

    /// Carries `st` across `[lo, hi]` in the engine's direction.
    fn run<O: Observer>(&self, path: &BrownianPath, lo: f64, hi: f64, st: &mut State, obs: &mut O) -> Result<bool> {
        let order = match self.dir {
            Direction::Forward => Traversal::Forward,
            Direction::Backward => Traversal::Backward,
        };
        let stopped = path.visit_segments(lo, hi, order, |seg| self.cell(&seg, st, obs))?;
        Ok(stopped.is_some())
    }

    #[inline]
    fn cell<O: Observer>(&self, seg: &Segment, st: &mut State, obs: &mut O) -> ControlFlow<()> {
        let h = seg.len();
        let f = self.a + self.quarter_beta * 0.5 * (seg.t_lo + seg.t_hi) + seg.slope();
        let n = (h * f.abs().sqrt()).ceil().max(1.0);
        let hs = h / n;
        let (c, s) = transfer(f, hs);
        let (origin, sgn) = match self.dir {
            Direction::Forward => (seg.t_lo, 1.0),
            Direction::Backward => (seg.t_hi, -1.0),
        };
        for i in 0..n as usize {
            let p1 = c * st.p + s * st.q;
            let q1 = f * s * st.p + c * st.q;
            let crossed = st.p != 0.0 && (p1 == 0.0 || (p1 > 0.0) != (st.p > 0.0));
            if crossed {
                let tau = zero_time(f, st.p, st.q, hs);
                st.zeros += 1;
                st.lobe = if p1 != 0.0 { p1.signum() } else { q1.signum() };
                let t = origin + sgn * (i as f64 * hs + tau);
                st.p = p1;
                st.q = q1;
                obs.zero(t, st)?;
            } else {
                st.p = p1;
                st.q = q1;
            }
            st.renormalize();
        }
        let t_end = match self.dir {
            Direction::Forward => seg.t_hi,
            Direction::Backward => seg.t_lo,
        };
        obs.node(t_end, st)
    }
}

struct Recorder {
    dir: Direction,
    explosions: Vec<f64>,
    samples: Vec<Sample>,
    window: (f64, f64),
    keep_samples: bool,
}

impl Observer for Recorder {
    fn zero(&mut self, t: f64, _st: &State) -> ControlFlow<()> {
        self.explosions.push(t);
        ControlFlow::Continue(())
    }
    fn node(&mut self, t: f64, st: &State) -> ControlFlow<()> {
        if self.keep_samples && t >= self.window.0 && t <= self.window.1 {
            self.samples.push(st.sample(t, self.dir));
        }
        ControlFlow::Continue(())
    }
}

/// What a trajectory integration keeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordOptions {
    /// Record grid nodes at all.
    pub samples: bool,
    /// Only nodes with time in this closed window are kept.
    pub window: (f64, f64),
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self { samples: true, window: (f64::NEG_INFINITY, f64::INFINITY) }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("tolerance must be positive, got {tol}")))
    }
}

/// Forward diffusion `Z_a^{(t0, x0)}` on `[t0, t1]`; `x0 = +∞` is allowed.
///
/// Within a cell the solution is exact for the piecewise-linear path, so
/// `tol` only has to be positive; explosion times are resolved to rounding.
pub fn integrate_forward(
    path: &BrownianPath,
    drift: &DriftSpec,
    t0: f64,
    x0: f64,
    t1: f64,
    tol: f64,
) -> Result<RiccatiTrajectory> {
    integrate_forward_with(path, drift, t0, x0, t1, tol, &RecordOptions::default())
}

pub fn integrate_forward_with(
    path: &BrownianPath,
    drift: &DriftSpec,
    t0: f64,
    x0: f64,
    t1: f64,
    tol: f64,
    rec: &RecordOptions,
) -> Result<RiccatiTrajectory> {
    check_tol(tol)?;
    if !(t0 < t1) {
        return Err(Error::Domain(format!("need t0 < t1, got {t0}, {t1}")));
    }
    if x0.is_nan() || x0 == f64::NEG_INFINITY {
        return Err(Error::Domain(format!("forward start must be real or +inf, got {x0}")));
    }
    path.check_cover(t0, t1)?;
    let dir = Direction::Forward;
    let mut st = State::from_value(x0, dir);
    let mut recorder = Recorder { dir, explosions: Vec::new(), samples: Vec::new(), window: rec.window, keep_samples: rec.samples };
    let _ = recorder.node(t0, &st);
    Engine::new(drift.a, drift.beta, dir).run(path, t0, t1, &mut st, &mut recorder)?;
    Ok(RiccatiTrajectory {
        direction: dir,
        a: drift.a,
        beta: drift.beta,
        start: (t0, x0),
        span: (t0, t1),
        samples: recorder.samples,
        explosions: recorder.explosions,
    })
}

/// Backward diffusion `Ẑ_a` with `Ẑ(t_end) = x_end`, solved down to `t0`.
/// `x_end = -∞` is allowed.
pub fn integrate_backward(
    path: &BrownianPath,
    drift: &DriftSpec,
    t_end: f64,
    x_end: f64,
    t0: f64,
    tol: f64,
) -> Result<RiccatiTrajectory> {
    integrate_backward_with(path, drift, t_end, x_end, t0, tol, &RecordOptions::default())
}

pub fn integrate_backward_with(
    path: &BrownianPath,
    drift: &DriftSpec,
    t_end: f64,
    x_end: f64,
    t0: f64,
    tol: f64,
    rec: &RecordOptions,
) -> Result<RiccatiTrajectory> {
    check_tol(tol)?;
    if !(t0 < t_end) {
        return Err(Error::Domain(format!("need t0 < t_end, got {t0}, {t_end}")));
    }
    if x_end.is_nan() || x_end == f64::INFINITY {
        return Err(Error::Domain(format!("backward terminal value must be real or -inf, got {x_end}")));
    }
    path.check_cover(t0, t_end)?;
    let dir = Direction::Backward;
    let mut st = State::from_value(x_end, dir);
    let mut recorder = Recorder { dir, explosions: Vec::new(), samples: Vec::new(), window: rec.window, keep_samples: rec.samples };
    let _ = recorder.node(t_end, &st);
    Engine::new(drift.a, drift.beta, dir).run(path, t0, t_end, &mut st, &mut recorder)?;
    recorder.samples.reverse();
    recorder.explosions.reverse();
    Ok(RiccatiTrajectory {
        direction: dir,
        a: drift.a,
        beta: drift.beta,
        start: (t_end, x_end),
        span: (t0, t_end),
        samples: recorder.samples,
        explosions: recorder.explosions,
    })
}

/// Summary of a forward shot from `+∞` without sample storage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shot {
    /// Zeros in `(t0, t_stop]`.
    pub zeros: usize,
    /// Prüfer angle over `π` at the stopping time.
    pub phase: f64,
    /// Time of the last zero, if any.
    pub last_zero: Option<f64>,
    /// Where the shot stopped: `t1`, or the zero that reached `stop_after`.
    pub t_stop: f64,
}

struct Counter {
    stop_after: Option<usize>,
    last: Option<f64>,
    t_stop: Option<f64>,
}

impl Observer for Counter {
    fn zero(&mut self, t: f64, st: &State) -> ControlFlow<()> {
        self.last = Some(t);
        match self.stop_after {
            Some(k) if st.zeros >= k => {
                self.t_stop = Some(t);
                ControlFlow::Break(())
            }
            _ => ControlFlow::Continue(()),
        }
    }
}

/// Forward shot from `(t0, +∞)` to `t1`, optionally stopping at the `k`-th zero.
pub fn shoot(path: &BrownianPath, a: f64, beta: f64, t0: f64, t1: f64, stop_after: Option<usize>) -> Result<Shot> {
    if !(t0 < t1) {
        return Err(Error::Domain(format!("need t0 < t1, got {t0}, {t1}")));
    }
    let mut st = State::from_value(f64::INFINITY, Direction::Forward);
    let mut c = Counter { stop_after, last: None, t_stop: None };
    Engine::new(a, beta, Direction::Forward).run(path, t0, t1, &mut st, &mut c)?;
    Ok(Shot { zeros: st.zeros, phase: st.phase_over_pi(), last_zero: c.last, t_stop: c.t_stop.unwrap_or(t1) })
}

/// Continues a forward run across consecutive path windows.
///
/// Long horizons are simulated window by window with independent paths;
/// the projective state carries over exactly.
#[derive(Debug, Clone)]
pub struct ForwardRunner {
    a: f64,
    beta: f64,
    state: State,
}

impl ForwardRunner {
    /// Starts from `+∞`.
    pub fn from_infinity(a: f64, beta: f64) -> Self {
        Self { a, beta, state: State::from_value(f64::INFINITY, Direction::Forward) }
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    /// Runs over the whole of `path`, appending explosion times to `out`.
    /// Stops early once `out.len()` reaches `limit`.
    pub fn advance(&mut self, path: &BrownianPath, out: &mut Vec<f64>, limit: Option<usize>) -> Result<()> {
        struct Push<'a> {
            out: &'a mut Vec<f64>,
            limit: Option<usize>,
        }
        impl Observer for Push<'_> {
            fn zero(&mut self, t: f64, _st: &State) -> ControlFlow<()> {
                self.out.push(t);
                match self.limit {
                    Some(k) if self.out.len() >= k => ControlFlow::Break(()),
                    _ => ControlFlow::Continue(()),
                }
            }
        }
        if limit.is_some_and(|k| out.len() >= k) {
            return Ok(());
        }
        let mut push = Push { out, limit };
        Engine::new(self.a, self.beta, Direction::Forward).run(path, path.t0(), path.t1(), &mut self.state, &mut push)?;
        Ok(())
    }
}

/// Wrapped distance between `atan z1` and `atan z2` on the circle of length `π`.
///
/// Finite near `±∞`, so trajectories that explode at nearly the same time
/// stay close.
pub fn projective_distance(z1: f64, z2: f64) -> f64 {
    let d = (z1.atan() - z2.atan()).abs();
    d.min(PI - d)
}

/// Result of the two-horizon check in [`hat_z_canonical`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub horizon: f64,
    /// Largest projective distance on `[0, horizon/2]` between the runs
    /// started at `horizon` and at `2·horizon`.
    pub discrepancy: f64,
    pub tol: f64,
}

/// Approximates the backward diffusion with `Ẑ_a(+∞) = -∞`.
///
/// Integrates backward from `horizon` with terminal value `-√(a + β·horizon/4)`
/// (or `-∞` where there is no well), and certifies the result by repeating
/// from `2·horizon`. The path must cover `[0, 2·horizon]`.
pub fn hat_z_canonical(
    path: &BrownianPath,
    a: f64,
    beta: f64,
    horizon: f64,
    tol: f64,
) -> Result<(RiccatiTrajectory, Certificate)> {
    check_tol(tol)?;
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let t0 = path.t0();
    path.check_cover(t0, 2.0 * horizon)?;
    let drift = DriftSpec::reversed(a, beta);
    let terminal = |t: f64| drift.well_bottom(t).map_or(f64::NEG_INFINITY, |w| -w);
    let near = integrate_backward(path, &drift, horizon, terminal(horizon), t0, tol)?;
    let far = integrate_backward_with(
        path,
        &drift,
        2.0 * horizon,
        terminal(2.0 * horizon),
        t0,
        tol,
        &RecordOptions { samples: true, window: (t0, 0.5 * horizon) },
    )?;
    let discrepancy = near
        .samples
        .iter()
        .zip(&far.samples)
        .take_while(|(s, _)| s.t <= 0.5 * horizon)
        .map(|(s, r)| projective_distance(s.z, r.z))
        .fold(0.0, f64::max);
    let cert = Certificate { horizon, discrepancy, tol };
    if discrepancy > tol {
        return Err(Error::Certificate { discrepancy, tol });
    }
    Ok((near, cert))
}

/// Integrates every `a` of an increasing grid against the same path.
pub fn coupled_sweep(
    path: &BrownianPath,
    a_grid: &[f64],
    beta: f64,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<Vec<RiccatiTrajectory>> {
    if a_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("a_grid must be strictly increasing".into()));
    }
    a_grid
        .iter()
        .map(|&a| {
            integrate_forward(path, &DriftSpec::forward(a, beta), t0, f64::INFINITY, t1, tol)
                .map_err(|e| Error::AtParameter { a, source: Box::new(e) })
        })
        .collect()
}
