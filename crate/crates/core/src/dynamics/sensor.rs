use rand::Rng;
use rand_distr::StandardNormal;

use super::{cable_tension, wrench_from_rotor_speeds, PayloadParams, PayloadState, ResidualModel, VehicleParams, VehicleState};
use crate::mathcore::Vec3;

/// Standard deviations of additive Gaussian sensor noise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseConfig {
    /// m/s²
    pub accel_std: f64,
    /// rad/s
    pub gyro_std: f64,
    /// rad/s
    pub rpm_std: f64,
}

impl NoiseConfig {
    pub fn is_noiseless(&self) -> bool {
        self.accel_std == 0.0 && self.gyro_std == 0.0 && self.rpm_std == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SensorFrame {
    /// Specific force in the body frame, m/s².
    pub accel: Vec3,
    /// rad/s, body frame.
    pub gyro: Vec3,
    /// Measured rotor speeds, rad/s.
    pub rpm: [f64; 4],
    /// Commanded rotor speed normalised by the maximum, 0..1.
    pub pwm: [f64; 4],
    pub timestamp: f64,
}

/// First-order lag between commanded and actual rotor speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorBank {
    pub speeds: [f64; 4],
    pub time_constant: f64,
}

impl MotorBank {
    pub fn new(initial: [f64; 4], time_constant: f64) -> Self {
        MotorBank { speeds: initial, time_constant }
    }

    /// Exact zero-order-hold discretisation of `ω̇ = (ω_cmd − ω) / τ_m`.
    pub fn update(&mut self, command: [f64; 4], dt: f64) {
        let alpha = if self.time_constant > 0.0 { 1.0 - (-dt / self.time_constant).exp() } else { 1.0 };
        for (w, c) in self.speeds.iter_mut().zip(command) {
            *w += alpha * (c - *w);
        }
    }
}

fn gaussian<R: Rng>(rng: &mut R, std: f64) -> f64 {
    if std == 0.0 {
        0.0
    } else {
        std * rng.sample::<f64, _>(StandardNormal)
    }
}

fn noisy_vec<R: Rng>(rng: &mut R, std: f64) -> Vec3 {
    let x = gaussian(rng, std);
    let y = gaussian(rng, std);
    let z = gaussian(rng, std);
    Vec3::new(x, y, z)
}

/// Samples the IMU and rotor-speed sensors.
///
/// `rotor_speeds` are the actual (lagged) motor speeds, `commanded` the
/// controller's speed command that becomes the PWM signal.
#[allow(clippy::too_many_arguments)]
pub fn sense<R: Rng>(
    params: &VehicleParams,
    state: &VehicleState,
    payload: Option<(&PayloadParams, &PayloadState)>,
    rotor_speeds: [f64; 4],
    commanded: [f64; 4],
    model: &ResidualModel,
    noise: &NoiseConfig,
    rng: &mut R,
    t: f64,
) -> SensorFrame {
    let wrench = wrench_from_rotor_speeds(rotor_speeds, params);
    let (f_a, _) = model.evaluate(state, t);
    let cable = match payload {
        Some((pp, ps)) if ps.tension > 0.0 => {
            let tension = cable_tension(params, pp, state, ps.position, ps.velocity, wrench, f_a).max(0.0);
            ps.direction * tension
        }
        _ => Vec3::ZERO,
    };
    // Specific force: m (v̇ + g e_z) = f_u R e_z + f_a + T q.
    let world = state.rotation.col(2) * wrench.thrust + f_a + cable;
    let accel = state.rotation.transpose() * world / params.mass;

    let accel = accel + noisy_vec(rng, noise.accel_std);
    let gyro = state.angular_velocity + noisy_vec(rng, noise.gyro_std);
    let mut rpm = rotor_speeds;
    for w in &mut rpm {
        *w += gaussian(rng, noise.rpm_std);
    }
    let pwm = commanded.map(|c| (c / params.rotor_speed_max).clamp(0.0, 1.0));
    SensorFrame { accel, gyro, rpm, pwm, timestamp: t }
}
