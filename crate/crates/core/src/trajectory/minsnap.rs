//! Minimum-snap waypoint trajectories.
//!
//! Each segment is a 7th-order polynomial in normalised time `τ = (t − t_i)/T_i`.
//! With position fixed at every waypoint, velocity/acceleration/jerk pinned to
//! zero at both ends and derivatives 1–6 continuous at interior waypoints, the
//! linear system is square and its solution is the minimum-snap trajectory.
//!
//! Random-waypoint flights instead fix the full boundary state at every
//! waypoint, which decouples the segments so each one's peak speed can be
//! set independently.

use nalgebra::{DMatrix, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FlatPoint;
use crate::error::{Error, Result};
use crate::mathcore::Vec3;

const ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct PolySegment {
    pub start_time: f64,
    pub duration: f64,
    /// Per axis, coefficients of `τ^0 … τ^7`.
    pub coeffs: [[f64; ORDER]; 3],
}

impl PolySegment {
    /// Value of the `n`-th time derivative on axis `axis` at normalised time `tau`.
    fn derivative(&self, axis: usize, n: usize, tau: f64) -> f64 {
        let c = &self.coeffs[axis];
        let mut acc = 0.0;
        for k in (n..ORDER).rev() {
            acc = acc * tau + c[k] * falling(k, n);
        }
        acc / self.duration.powi(n as i32)
    }

    fn sample(&self, tau: f64) -> [Vec3; 5] {
        let mut out = [Vec3::ZERO; 5];
        for (n, o) in out.iter_mut().enumerate() {
            *o = Vec3::new(self.derivative(0, n, tau), self.derivative(1, n, tau), self.derivative(2, n, tau));
        }
        out
    }

    /// Peak speed over the segment, by dense sampling.
    pub fn peak_speed(&self) -> f64 {
        (0..=200).map(|i| self.sample(i as f64 / 200.0)[1].norm()).fold(0.0, f64::max)
    }

    /// Peak acceleration norm over the segment, by dense sampling.
    pub fn peak_acceleration(&self) -> f64 {
        (0..=200).map(|i| self.sample(i as f64 / 200.0)[2].norm()).fold(0.0, f64::max)
    }
}

/// `k! / (k − n)!`
fn falling(k: usize, n: usize) -> f64 {
    ((k + 1 - n)..=k).map(|v| v as f64).product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialTrajectory {
    segments: Vec<PolySegment>,
    waypoints: Vec<Vec3>,
}

impl PolynomialTrajectory {
    pub fn segments(&self) -> &[PolySegment] {
        &self.segments
    }

    pub fn waypoints(&self) -> &[Vec3] {
        &self.waypoints
    }

    pub fn duration(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.start_time + s.duration)
    }

    pub fn sample(&self, t: f64) -> FlatPoint {
        let t = t.clamp(0.0, self.duration());
        let i = self.segments.partition_point(|s| s.start_time <= t).saturating_sub(1);
        let seg = &self.segments[i];
        let tau = ((t - seg.start_time) / seg.duration).clamp(0.0, 1.0);
        let [p, v, a, j, s] = seg.sample(tau);
        FlatPoint { position: p, velocity: v, acceleration: a, jerk: j, snap: s, ..FlatPoint::default() }
    }
}

/// Solves the minimum-snap polynomials through `waypoints` with the given
/// segment durations.
pub fn solve_min_snap(waypoints: &[Vec3], durations: &[f64]) -> Result<PolynomialTrajectory> {
    let n = durations.len();
    if waypoints.len() < 2 {
        return Err(Error::InsufficientData("need at least two waypoints".into()));
    }
    if waypoints.len() != n + 1 {
        return Err(Error::LengthMismatch { expected: waypoints.len() - 1, actual: n });
    }
    if durations.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::InvalidParameter("segment durations must be positive".into()));
    }
    let size = ORDER * n;
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut b = DMatrix::<f64>::zeros(size, 3);
    let mut row = 0;
    // Row helper: n-th derivative (in normalised time) of segment `seg` at τ ∈ {0, 1}, times `scale`.
    let put = |a: &mut DMatrix<f64>, row: usize, seg: usize, n: usize, tau: f64, scale: f64| {
        for k in n..ORDER {
            let basis = if tau == 0.0 { if k == n { falling(k, n) } else { 0.0 } } else { falling(k, n) };
            a[(row, seg * ORDER + k)] += scale * basis;
        }
    };
    for i in 0..n {
        put(&mut a, row, i, 0, 0.0, 1.0);
        b.row_mut(row).copy_from_slice(&waypoints[i].to_array());
        row += 1;
        put(&mut a, row, i, 0, 1.0, 1.0);
        b.row_mut(row).copy_from_slice(&waypoints[i + 1].to_array());
        row += 1;
    }
    for d in 1..=3 {
        put(&mut a, row, 0, d, 0.0, 1.0);
        row += 1;
        put(&mut a, row, n - 1, d, 1.0, 1.0);
        row += 1;
    }
    for j in 1..n {
        let (t_prev, t_next) = (durations[j - 1], durations[j]);
        let h = t_prev.min(t_next);
        for d in 1..=6 {
            // p_{j−1}^{(d)}(1)/T_{j−1}^d = p_j^{(d)}(0)/T_j^d, scaled by h^d for conditioning.
            put(&mut a, row, j - 1, d, 1.0, (h / t_prev).powi(d as i32));
            put(&mut a, row, j, d, 0.0, -(h / t_next).powi(d as i32));
            row += 1;
        }
    }
    debug_assert_eq!(row, size);
    let x = a.lu().solve(&b).ok_or(Error::Singular("minimum-snap system"))?;
    let mut t0 = 0.0;
    let mut segments = Vec::with_capacity(n);
    for (i, &dur) in durations.iter().enumerate() {
        let mut coeffs = [[0.0; ORDER]; 3];
        for (axis, c) in coeffs.iter_mut().enumerate() {
            for (k, v) in c.iter_mut().enumerate() {
                *v = x[(i * ORDER + k, axis)];
            }
        }
        segments.push(PolySegment { start_time: t0, duration: dur, coeffs });
        t0 += dur;
    }
    if segments.iter().flat_map(|s| s.coeffs.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("minimum-snap coefficients"));
    }
    Ok(PolynomialTrajectory { segments, waypoints: waypoints.to_vec() })
}

/// Random-waypoint flight inside an axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomWaypointConfig {
    pub center: Vec3,
    /// Full box extents, m.
    pub bbox: Vec3,
    /// Per-segment peak speed is drawn uniformly from this range, m/s.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Target flight duration, s. The last segment may overshoot it.
    pub duration: f64,
    /// Minimum distance between consecutive waypoints, m.
    pub min_separation: f64,
    /// Segments whose peak acceleration exceeds this are slowed down until
    /// it holds, m/s². Infinite disables the cap.
    pub max_acceleration: f64,
}

impl Default for RandomWaypointConfig {
    fn default() -> Self {
        RandomWaypointConfig {
            center: Vec3::new(0.0, 0.0, 1.0),
            bbox: Vec3::new(1.6, 1.6, 0.4),
            speed_min: 1.0,
            speed_max: 8.0,
            duration: 10.0,
            min_separation: 0.3,
            max_acceleration: f64::INFINITY,
        }
    }
}

/// Relative tolerance for matching each segment's peak speed to its target.
const SPEED_TOLERANCE: f64 = 1e-4;

/// Fraction of the slower adjacent target speed used for the pass-through
/// velocity at interior waypoints.
const PASS_THROUGH_FRACTION: f64 = 0.6;

pub fn make_random_waypoints(cfg: &RandomWaypointConfig, seed: u64) -> Result<PolynomialTrajectory> {
    let b = cfg.bbox;
    if !(b.x > 0.0 && b.y > 0.0 && b.z > 0.0) {
        return Err(Error::InvalidParameter("bounding box must be positive".into()));
    }
    if !(cfg.speed_min > 0.0 && cfg.speed_min <= cfg.speed_max && cfg.speed_max <= 8.0) {
        return Err(Error::InvalidParameter("speed range must lie within (0, 8] m/s".into()));
    }
    if !(cfg.duration > 0.0) {
        return Err(Error::InvalidParameter("duration must be positive".into()));
    }
    if !(cfg.max_acceleration > 0.0) {
        return Err(Error::InvalidParameter("acceleration cap must be positive".into()));
    }
    let min_sep = cfg.min_separation.min(0.5 * b.norm());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut waypoints = vec![cfg.center];
    let mut speeds = Vec::new();
    loop {
        let last = *waypoints.last().unwrap();
        let next = loop {
            let p = cfg.center
                + Vec3::new(
                    (rng.random::<f64>() - 0.5) * b.x,
                    (rng.random::<f64>() - 0.5) * b.y,
                    (rng.random::<f64>() - 0.5) * b.z,
                );
            if (p - last).norm() >= min_sep {
                break p;
            }
        };
        let speed =
            if cfg.speed_max > cfg.speed_min { rng.random_range(cfg.speed_min..=cfg.speed_max) } else { cfg.speed_min };
        waypoints.push(next);
        speeds.push(speed);
        // Distance over peak speed underestimates the fitted time by roughly
        // half, so fitting is skipped while far below the target.
        let rough: f64 = waypoints.windows(2).zip(&speeds).map(|(w, s)| (w[1] - w[0]).norm() / s).sum();
        if rough < 0.3 * cfg.duration {
            continue;
        }
        let traj = fit_waypoint_segments(&waypoints, &speeds, cfg.max_acceleration)?;
        if traj.duration() >= cfg.duration {
            return Ok(traj);
        }
    }
}

/// Builds one segment per waypoint pair. Each segment is the minimum-snap
/// polynomial for its boundary states: zero acceleration and jerk at every
/// waypoint, rest at the ends, and a pass-through velocity along the bisector
/// of the adjacent legs elsewhere. Each duration is then tuned so the
/// segment's peak speed equals its target.
fn fit_waypoint_segments(waypoints: &[Vec3], targets: &[f64], max_acceleration: f64) -> Result<PolynomialTrajectory> {
    let n = targets.len();
    let mut vel = vec![Vec3::ZERO; n + 1];
    for i in 1..n {
        let (Some(a), Some(b)) = (
            (waypoints[i] - waypoints[i - 1]).try_normalize(1e-9),
            (waypoints[i + 1] - waypoints[i]).try_normalize(1e-9),
        ) else {
            continue;
        };
        vel[i] = (a + b) * (0.5 * PASS_THROUGH_FRACTION * targets[i - 1].min(targets[i]));
    }
    let mut segments = Vec::with_capacity(n);
    let mut t0 = 0.0;
    for i in 0..n {
        let seg = fit_segment(waypoints[i], waypoints[i + 1], vel[i], vel[i + 1], targets[i], t0)?;
        let seg = limit_acceleration(seg, waypoints[i], waypoints[i + 1], vel[i], vel[i + 1], max_acceleration)?;
        t0 += seg.duration;
        segments.push(seg);
    }
    Ok(PolynomialTrajectory { segments, waypoints: waypoints.to_vec() })
}

/// 7th-order segment with prescribed position and velocity at both ends and
/// zero acceleration and jerk.
fn hermite_segment(p0: Vec3, p1: Vec3, v0: Vec3, v1: Vec3, start_time: f64, duration: f64) -> Result<PolySegment> {
    let t = duration;
    let mut m = Matrix4::zeros();
    for (row, d) in (0..4).enumerate() {
        for (col, k) in (4..ORDER).enumerate() {
            m[(row, col)] = falling(k, d);
        }
    }
    let lu = m.lu();
    let mut coeffs = [[0.0; ORDER]; 3];
    for (axis, c) in coeffs.iter_mut().enumerate() {
        c[0] = p0[axis];
        c[1] = v0[axis] * t;
        // Remaining end conditions on τ^4..τ^7 after removing the fixed low-order part.
        let end = [p1[axis] - c[0] - c[1], v1[axis] * t - c[1], 0.0, 0.0];
        let x = lu.solve(&Vector4::from(end)).ok_or(Error::Singular("segment boundary system"))?;
        c[4..].copy_from_slice(x.as_slice());
    }
    if coeffs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("segment coefficients"));
    }
    Ok(PolySegment { start_time, duration, coeffs })
}

/// Stretches a segment until its peak acceleration is within `limit`.
fn limit_acceleration(seg: PolySegment, p0: Vec3, p1: Vec3, v0: Vec3, v1: Vec3, limit: f64) -> Result<PolySegment> {
    if !limit.is_finite() || seg.peak_acceleration() <= limit {
        return Ok(seg);
    }
    let start = seg.start_time;
    let make = |t: f64| hermite_segment(p0, p1, v0, v1, start, t);
    let mut lo = seg.duration;
    let mut hi = lo * 1.25;
    let mut best = make(hi)?;
    while best.peak_acceleration() > limit {
        lo = hi;
        hi *= 1.25;
        if hi > 1e3 * seg.duration {
            return Ok(best);
        }
        best = make(hi)?;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let s = make(mid)?;
        if s.peak_acceleration() > limit {
            lo = mid;
        } else {
            hi = mid;
            best = s;
        }
    }
    Ok(best)
}

/// Bisects the segment duration until its peak speed matches `target`.
fn fit_segment(p0: Vec3, p1: Vec3, v0: Vec3, v1: Vec3, target: f64, start_time: f64) -> Result<PolySegment> {
    let dist = (p1 - p0).norm().max(1e-6);
    let peak = |t: f64| hermite_segment(p0, p1, v0, v1, start_time, t).map(|s| (s.peak_speed(), s));
    let mut lo = 0.25 * dist / target;
    let mut hi = lo;
    let (mut best, mut seg) = peak(hi)?;
    // Grow until slower than the target.
    while best > target {
        lo = hi;
        hi *= 1.5;
        (best, seg) = peak(hi)?;
        if hi > 1e3 * dist / target {
            return Ok(seg);
        }
    }
    if lo == hi {
        // Even the fastest candidate is below target; shrink instead.
        while best < target && hi > 1e-3 {
            hi *= 0.5;
            (best, seg) = peak(hi)?;
        }
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let (v, s) = peak(mid)?;
        if v > target {
            lo = mid;
        } else {
            hi = mid;
            seg = s;
            best = v;
        }
        if (best - target).abs() <= SPEED_TOLERANCE * target {
            break;
        }
    }
    Ok(seg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(speed_min: f64, speed_max: f64) -> RandomWaypointConfig {
        RandomWaypointConfig { speed_min, speed_max, ..RandomWaypointConfig::default() }
    }

    #[test]
    fn single_segment_is_rest_to_rest() {
        let tr = solve_min_snap(&[Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)], &[2.0]).unwrap();
        let mid = tr.sample(1.0);
        assert!((mid.position.x - 0.5).abs() < 1e-12);
        // 7th-order rest-to-rest peak speed is 35/16 · d / T.
        assert!((mid.velocity.x - 35.0 / 32.0).abs() < 1e-12);
        for t in [0.0, 2.0] {
            let p = tr.sample(t);
            assert!(p.velocity.norm() < 1e-12 && p.acceleration.norm() < 1e-12 && p.jerk.norm() < 1e-10);
        }
    }

    #[test]
    fn passes_through_waypoints_and_is_smooth() {
        let wps = [Vec3::ZERO, Vec3::new(1.0, 0.5, 0.0), Vec3::new(0.2, 1.0, 0.3), Vec3::new(-0.5, 0.0, 0.1)];
        let tr = solve_min_snap(&wps, &[1.0, 0.6, 1.4]).unwrap();
        for (seg, wp) in tr.segments().iter().zip(&wps) {
            assert!((tr.sample(seg.start_time).position - *wp).max_abs() < 1e-10);
        }
        for seg in &tr.segments()[1..] {
            let a = tr.segments().iter().find(|s| (s.start_time + s.duration - seg.start_time).abs() < 1e-12).unwrap();
            let left = a.sample(1.0);
            let right = seg.sample(0.0);
            for k in 0..5 {
                assert!((left[k] - right[k]).max_abs() < 1e-7 * (1.0 + left[k].max_abs()), "deriv {k}");
            }
        }
    }

    #[test]
    fn waypoints_inside_bbox_and_deterministic() {
        let c = cfg(1.0, 2.5);
        let a = make_random_waypoints(&c, 42).unwrap();
        let b = make_random_waypoints(&c, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, make_random_waypoints(&c, 43).unwrap());
        for w in a.waypoints() {
            let d = *w - c.center;
            assert!(d.x.abs() <= 0.8 && d.y.abs() <= 0.8 && d.z.abs() <= 0.2);
        }
        assert!(a.duration() >= c.duration * 0.5);
    }

    #[test]
    fn degenerate_speed_range_hits_target() {
        let tr = make_random_waypoints(&cfg(1.0, 1.0), 3).unwrap();
        for s in tr.segments() {
            let v = s.peak_speed();
            assert!((v - 1.0).abs() < 0.02, "{v}");
        }
    }

    #[test]
    fn speeds_stay_below_max() {
        for seed in 0..5 {
            let c = cfg(0.5, 2.5);
            let tr = make_random_waypoints(&c, seed).unwrap();
            for i in 0..=5000 {
                let v = tr.sample(tr.duration() * i as f64 / 5000.0).velocity.norm();
                assert!(v <= 2.5 * 1.02, "seed {seed}: {v}");
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(make_random_waypoints(&cfg(0.0, 1.0), 0).is_err());
        assert!(make_random_waypoints(&cfg(1.0, 9.0), 0).is_err());
        assert!(make_random_waypoints(&RandomWaypointConfig { bbox: Vec3::new(1.0, 0.0, 1.0), ..cfg(1.0, 2.0) }, 0)
            .is_err());
    }
}
