//! Ground-truth rigid-body physics for the multirotor, its motors, and an
//! optional cable-suspended point-mass payload.

mod payload;
mod residual;
mod sensor;
mod sim;

pub use payload::{cable_tension, step_payload_system, PayloadParams, PayloadState};
pub use residual::{true_residual, ResidualModel, ScriptedResidual};
pub use sensor::{sense, MotorBank, NoiseConfig, SensorFrame};
pub use sim::Simulator;

use crate::error::{Error, Result};
use crate::mathcore::{hat, orthonormalize, Mat3, Vec3};

/// Largest physics step accepted by the integrators.
pub const MAX_DT: f64 = 0.01;

pub type Mat4 = [[f64; 4]; 4];

/// Collective thrust (N) and body torque (N·m).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub thrust: f64,
    pub torque: Vec3,
}

impl Wrench {
    pub fn new(thrust: f64, torque: Vec3) -> Self {
        Wrench { thrust, torque }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.thrust, self.torque.x, self.torque.y, self.torque.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Wrench::new(a[0], Vec3::new(a[1], a[2], a[3]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// Diagonal inertia, kg·m².
    pub inertia: Mat3,
    /// Propeller thrust constant, N/(rad/s)².
    pub kappa_f: f64,
    /// Rotor speed limits, rad/s.
    pub rotor_speed_min: f64,
    pub rotor_speed_max: f64,
    /// First-order motor lag time constant, s.
    pub motor_time_constant: f64,
    /// m/s²
    pub gravity: f64,
    b0: Mat4,
    b0_inv: Mat4,
}

impl VehicleParams {
    /// Crazyflie 2.1 sized vehicle: 34.7 g, 4.6 cm arm, X configuration.
    pub fn crazyflie() -> Self {
        VehicleParams::new(
            0.0347,
            Vec3::new(16.6e-6, 16.6e-6, 29.3e-6),
            2.88e-8,
            x_configuration(0.046, 0.006),
        )
        .expect("default vehicle parameters are valid")
    }

    pub fn new(mass: f64, inertia_diag: Vec3, kappa_f: f64, b0: Mat4) -> Result<Self> {
        let b0_inv = invert4(&b0).ok_or_else(|| Error::InvalidParameter("B0 is not invertible".into()))?;
        let params = VehicleParams {
            mass,
            inertia: Mat3::diag(inertia_diag),
            kappa_f,
            rotor_speed_min: 0.0,
            rotor_speed_max: 2600.0,
            motor_time_constant: 0.03,
            gravity: 9.81,
            b0,
            b0_inv,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.mass > 0.0) {
            return bad("mass must be positive");
        }
        let j = self.inertia.diagonal();
        if !(j.x > 0.0 && j.y > 0.0 && j.z > 0.0) || self.inertia != Mat3::diag(j) {
            return bad("inertia must be positive diagonal");
        }
        if !(self.kappa_f > 0.0) {
            return bad("kappa_f must be positive");
        }
        if !(self.rotor_speed_min >= 0.0 && self.rotor_speed_max > self.rotor_speed_min) {
            return bad("rotor speed limits must satisfy 0 <= min < max");
        }
        if !(self.motor_time_constant >= 0.0) {
            return bad("motor time constant must be nonnegative");
        }
        if !(self.gravity > 0.0) {
            return bad("gravity must be positive");
        }
        Ok(())
    }

    /// Actuation matrix: per-rotor forces = B0 · (f_u, τ_u).
    pub fn b0(&self) -> &Mat4 {
        &self.b0
    }

    pub fn set_b0(&mut self, b0: Mat4) -> Result<()> {
        self.b0_inv = invert4(&b0).ok_or_else(|| Error::InvalidParameter("B0 is not invertible".into()))?;
        self.b0 = b0;
        Ok(())
    }

    pub fn inertia_inv(&self) -> Mat3 {
        Mat3::diag(self.inertia.diagonal().to_array().map(|v| 1.0 / v).into())
    }

    pub fn max_rotor_force(&self) -> f64 {
        self.kappa_f * self.rotor_speed_max * self.rotor_speed_max
    }

    pub fn hover_rotor_speed(&self, total_mass: f64) -> f64 {
        (total_mass * self.gravity / (4.0 * self.kappa_f)).sqrt()
    }
}

/// Standard X-configuration actuation matrix.
///
/// Rotor order: front-right, back-right, back-left, front-left (x forward,
/// y left, z up). `torque_ratio` is κ_τ/κ_F in metres; spin alternates so
/// rotor 1 produces +z reaction torque.
pub fn x_configuration(arm_length: f64, torque_ratio: f64) -> Mat4 {
    let d = arm_length / std::f64::consts::SQRT_2;
    let x = [d, -d, -d, d];
    let y = [-d, -d, d, d];
    let s = [1.0, -1.0, 1.0, -1.0];
    let mut b0 = [[0.0; 4]; 4];
    for i in 0..4 {
        b0[i] = [0.25, y[i] / (4.0 * d * d), -x[i] / (4.0 * d * d), s[i] / (4.0 * torque_ratio)];
    }
    b0
}

pub(crate) fn invert4(m: &Mat4) -> Option<Mat4> {
    let mut a = *m;
    let mut inv = [[0.0; 4]; 4];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for j in 0..4 {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..4 {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for j in 0..4 {
                        a[r][j] -= f * a[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

pub(crate) fn mat4_mul_vec(m: &Mat4, v: [f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}

/// Per-rotor thrust `f_i = κ_F ω_i²`.
pub fn motor_forces(rotor_speeds: [f64; 4], params: &VehicleParams) -> [f64; 4] {
    rotor_speeds.map(|w| params.kappa_f * w * w)
}

/// Applies B0⁻¹ to per-rotor forces.
pub fn wrench_from_rotor_forces(forces: [f64; 4], params: &VehicleParams) -> Wrench {
    Wrench::from_array(mat4_mul_vec(&params.b0_inv, forces))
}

/// Applies B0 to a wrench.
pub fn rotor_forces_from_wrench(wrench: Wrench, params: &VehicleParams) -> [f64; 4] {
    mat4_mul_vec(&params.b0, wrench.to_array())
}

pub fn wrench_from_rotor_speeds(rotor_speeds: [f64; 4], params: &VehicleParams) -> Wrench {
    wrench_from_rotor_forces(motor_forces(rotor_speeds, params), params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Body to world.
    pub rotation: Mat3,
    /// Body frame, rad/s.
    pub angular_velocity: Vec3,
}

impl Default for VehicleState {
    fn default() -> Self {
        VehicleState::at_rest(Vec3::ZERO)
    }
}

impl VehicleState {
    pub fn at_rest(position: Vec3) -> Self {
        VehicleState {
            position,
            velocity: Vec3::ZERO,
            rotation: Mat3::IDENTITY,
            angular_velocity: Vec3::ZERO,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.velocity.is_finite()
            && self.rotation.is_finite()
            && self.angular_velocity.is_finite()
    }

    fn pack(&self) -> [f64; 18] {
        let mut x = [0.0; 18];
        x[0..3].copy_from_slice(&self.position.to_array());
        x[3..6].copy_from_slice(&self.velocity.to_array());
        x[6..15].copy_from_slice(&self.rotation.to_row_major());
        x[15..18].copy_from_slice(&self.angular_velocity.to_array());
        x
    }

    fn unpack(x: &[f64]) -> Self {
        VehicleState {
            position: Vec3::new(x[0], x[1], x[2]),
            velocity: Vec3::new(x[3], x[4], x[5]),
            rotation: Mat3::from_row_major(x[6..15].try_into().unwrap()),
            angular_velocity: Vec3::new(x[15], x[16], x[17]),
        }
    }
}

/// Classic fourth-order Runge–Kutta step on a flat state vector.
pub(crate) fn rk4<const N: usize>(
    x: &[f64; N],
    t: f64,
    dt: f64,
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
) -> [f64; N] {
    let axpy = |a: &[f64; N], s: f64, k: &[f64; N]| {
        let mut out = *a;
        out.iter_mut().zip(k).for_each(|(o, k)| *o += s * k);
        out
    };
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k1));
    let k3 = f(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k2));
    let k4 = f(t + dt, &axpy(x, dt, &k3));
    let mut out = *x;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Time derivative of the rigid body given an external world-frame force
/// (everything except gravity and rotor thrust) and body torque.
fn rigid_body_derivative(
    params: &VehicleParams,
    s: &VehicleState,
    wrench: Wrench,
    extra_force: Vec3,
    extra_torque: Vec3,
    out: &mut [f64],
) {
    let m = params.mass;
    let j = params.inertia;
    let accel = (s.rotation.col(2) * wrench.thrust - Vec3::E_Z * (m * params.gravity) + extra_force) / m;
    let r_dot = s.rotation * hat(s.angular_velocity);
    let w = s.angular_velocity;
    let w_dot = params.inertia_inv() * ((j * w).cross(w) + wrench.torque + extra_torque);
    out[0..3].copy_from_slice(&s.velocity.to_array());
    out[3..6].copy_from_slice(&accel.to_array());
    out[6..15].copy_from_slice(&r_dot.to_row_major());
    out[15..18].copy_from_slice(&w_dot.to_array());
}

pub(crate) fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt <= MAX_DT {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("physics dt must lie in (0, {MAX_DT}], got {dt}")))
    }
}

/// Advances the multirotor by one RK4 step with rotor speeds held constant.
pub fn step_multirotor(
    params: &VehicleParams,
    state: &VehicleState,
    rotor_speeds: [f64; 4],
    model: &ResidualModel,
    t: f64,
    dt: f64,
) -> Result<VehicleState> {
    check_dt(dt)?;
    let wrench = wrench_from_rotor_speeds(rotor_speeds, params);
    let x = state.pack();
    let next = rk4(&x, t, dt, |tau, x| {
        let s = VehicleState::unpack(x);
        let (fa, ta) = model.evaluate(&s, tau);
        let mut d = [0.0; 18];
        rigid_body_derivative(params, &s, wrench, fa, ta, &mut d);
        d
    });
    let mut out = VehicleState::unpack(&next);
    if !out.is_finite() {
        return Err(Error::NonFinite("vehicle state"));
    }
    out.rotation = orthonormalize(&out.rotation)?;
    Ok(out)
}
