#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rotorlab::dynamics::{rotor_forces_from_wrench, NoiseConfig, ResidualModel, Simulator, VehicleParams, VehicleState, Wrench};
use rotorlab::indi::{IndiConfig, IndiEstimator};
use rotorlab::learning::{fit_smoothing_spline, Mlp};
use rotorlab::mathcore::{Mat3, Vec3};

pub const HOVER_POINT: Vec3 = Vec3::new(0.0, 0.0, 1.0);

/// Uniform sample from the ball of radius `r`.
pub fn in_ball(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.norm() <= 1.0 {
            return v * r;
        }
    }
}

/// Attitude and rotor speeds that hold the vehicle at rest against a
/// constant residual.
pub fn trim(params: &VehicleParams, f_a: Vec3, tau_a: Vec3) -> (Mat3, [f64; 4]) {
    let force = Vec3::E_Z * (params.mass * params.gravity) - f_a;
    let z = force / force.norm();
    let y = z.cross(Vec3::E_X);
    let y = y / y.norm();
    let rotation = Mat3::from_cols(y.cross(z), y, z);
    let forces = rotor_forces_from_wrench(Wrench::new(force.norm(), -tau_a), params);
    (rotation, forces.map(|f| (f / params.kappa_f).sqrt()))
}

pub struct Recovery {
    /// Worst `|estimate − truth| / |truth|` over samples at least five
    /// filter time constants after the injection, force and torque.
    pub force_error: f64,
    pub torque_error: f64,
    /// Relative error at the last sample.
    pub final_error: f64,
    /// Largest position offset of the trimmed vehicle, m.
    pub drift: f64,
    pub time_constant: f64,
}

/// Warms the estimator on a residual-free hover, then feeds it samples
/// from a vehicle trimmed against `(f_a, tau_a)`. The estimator thus sees
/// the injection as a step while the vehicle itself stays at rest.
pub fn injection_recovery(f_a: Vec3, tau_a: Vec3, seconds: f64) -> Recovery {
    let params = VehicleParams::crazyflie();
    let config = IndiConfig::default();
    let substeps = 2;
    let mut est = IndiEstimator::new(config).unwrap();
    let mut hover = Simulator::new(params.clone(), None, ResidualModel::None, NoiseConfig::default(), 0.001, 0, HOVER_POINT).unwrap();
    for _ in 0..100 {
        let frame = hover.sense();
        let _ = est.update(&params, &frame, hover.vehicle(), None);
        hover.advance(substeps).unwrap();
    }

    let model = ResidualModel::constant(f_a, tau_a);
    let mut sim = Simulator::new(params.clone(), None, model, NoiseConfig::default(), 0.001, 0, HOVER_POINT).unwrap();
    let (rotation, speeds) = trim(&params, f_a, tau_a);
    sim.reset_to(VehicleState { rotation, ..VehicleState::at_rest(HOVER_POINT) });
    sim.set_rotor_speeds(speeds);

    let tc = est.time_constant();
    let period = 1.0 / config.sample_rate_hz;
    let mut out = Recovery { force_error: 0.0, torque_error: 0.0, final_error: 0.0, drift: 0.0, time_constant: tc };
    let ticks = (seconds / period).round() as usize;
    for k in 0..ticks {
        let frame = sim.sense();
        let e = est.update(&params, &frame, sim.vehicle(), None).unwrap();
        if k as f64 * period >= 5.0 * tc {
            let (f, t) = sim.true_residual();
            out.force_error = out.force_error.max((e.indi.force - f).norm() / f.norm());
            out.torque_error = out.torque_error.max((e.indi.torque - t).norm() / t.norm());
            out.final_error = ((e.indi.force - f).norm() / f.norm()).max((e.indi.torque - t).norm() / t.norm());
        }
        out.drift = out.drift.max((sim.vehicle().position - HOVER_POINT).norm());
        sim.advance(substeps).unwrap();
    }
    out
}

/// Least-squares residual over the truncated-power basis
/// `1, t, t², t³, (t − k)₊³`, which spans the same C² cubic splines.
pub fn truncated_power_residual(times: &[f64], values: &[f64], knots: &[f64]) -> f64 {
    let (t0, h) = (knots[0], knots[1] - knots[0]);
    let interior = &knots[1..knots.len() - 1];
    let cols = 4 + interior.len();
    let a = DMatrix::from_fn(times.len(), cols, |r, c| {
        let u = (times[r] - t0) / h;
        if c < 4 {
            u.powi(c as i32)
        } else {
            ((times[r] - interior[c - 4]) / h).max(0.0).powi(3)
        }
    });
    let y = DVector::from_column_slice(values);
    let x = a.clone().svd(true, true).solve(&y, 1e-14).unwrap();
    (a * x - y).norm_squared()
}

pub fn random_data(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut t = 0.0;
    let times: Vec<f64> = (0..n)
        .map(|_| {
            t += rng.random_range(0.002..0.02);
            t
        })
        .collect();
    let values = times.iter().map(|&t| (3.0 * t).sin() + 0.2 * rng.sample::<f64, _>(StandardNormal)).collect();
    (times, values)
}

pub fn random_batch(rng: &mut ChaCha8Rng, rows: usize, ni: usize, no: usize) -> (Vec<f64>, Vec<f64>) {
    let x = (0..rows * ni).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y = (0..rows * no).map(|_| rng.random_range(-1.0..1.0)).collect();
    (x, y)
}


/// Worst relative gap between analytic and central-difference gradients of
/// the L1 training loss, over every parameter of `batches` random networks.
pub fn worst_gradient_error(dims: &[usize], batches: u64, seed: u64) -> f64 {
    let (ni, no) = (dims[0], dims[dims.len() - 1]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for batch in 0..batches {
        let mut net = Mlp::new(dims, seed.wrapping_mul(1000) + batch).unwrap();
        let (x, y) = random_batch(&mut rng, 16, ni, no);
        let rows: Vec<usize> = (0..16).collect();
        let (_, grad) = net.loss_and_gradient(&x, &y, &rows).unwrap();
        for k in 0..net.params().len() {
            let orig = net.params()[k];
            net.params_mut()[k] = orig + eps;
            let up = net.loss(&x, &y, &rows);
            net.params_mut()[k] = orig - eps;
            let down = net.loss(&x, &y, &rows);
            net.params_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            // Central differences at ε = 1e-6 carry ~1e-10 of roundoff, so
            // gradients below 1e-5 are held to an absolute 1e-9 instead.
            let denom = grad[k].abs().max(numeric.abs()).max(1e-5);
            worst = worst.max((grad[k] - numeric).abs() / denom);
        }
    }
    worst
}

/// Worst relative gap between the fitted spline's residual and the
/// truncated-power least-squares oracle on `datasets` random series.
pub fn worst_spline_oracle_error(datasets: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..datasets {
        let n = rng.random_range(300..600);
        let (times, values) = random_data(&mut rng, n);
        let s = fit_smoothing_spline(&times, std::slice::from_ref(&values), 0.1).unwrap();
        let ours = s.residual(0, &times, &values);
        let oracle = truncated_power_residual(&times, &values, &s.knots());
        worst = worst.max(((ours - oracle) / oracle).abs());
    }
    worst
}

/// Spline residual on samples of an exact cubic.
pub fn cubic_residual() -> f64 {
    let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.005).collect();
    let values: Vec<f64> = times.iter().map(|&t| t * t * t - t).collect();
    let s = fit_smoothing_spline(&times, std::slice::from_ref(&values), 0.1).unwrap();
    s.residual(0, &times, &values)
}
