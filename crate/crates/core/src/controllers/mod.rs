//! Geometric tracking control and wrench-to-rotor mixing.

mod payload;

pub use payload::{PayloadCommand, PayloadController};

use crate::dynamics::{VehicleParams, VehicleState, Wrench};
use crate::error::{Error, Result};
use crate::indi::ResidualEstimate;
use crate::mathcore::{Mat3, Vec3};
use crate::trajectory::FullReference;

/// Diagonal gains. Each `Vec3` is the diagonal of a gain matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSet {
    pub kp: Vec3,
    pub kv: Vec3,
    pub kr: Vec3,
    pub kw: Vec3,
    /// Payload position and velocity gains (N/m, N·s/m).
    pub kpp: Vec3,
    pub kvp: Vec3,
    /// Cable direction and direction-rate gains (N, N·s).
    pub kq: Vec3,
    pub kqd: Vec3,
}

impl GainSet {
    /// Defaults for a vehicle of `mass` kg carrying `payload_mass` kg on a
    /// cable of `cable_length` m.
    pub fn defaults(mass: f64, payload_mass: f64, cable_length: f64) -> Self {
        let ml = mass * cable_length;
        GainSet {
            kp: Vec3::splat(12.0 * mass),
            kv: Vec3::splat(6.0 * mass),
            kr: Vec3::splat(0.004),
            kw: Vec3::splat(0.001),
            kpp: Vec3::splat(payload_mass * 4.0),
            kvp: Vec3::splat(payload_mass * 3.6),
            kq: Vec3::splat(ml * 36.0),
            kqd: Vec3::splat(ml * 9.6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, g) in [
            ("kp", self.kp),
            ("kv", self.kv),
            ("kr", self.kr),
            ("kw", self.kw),
            ("kpp", self.kpp),
            ("kvp", self.kvp),
            ("kq", self.kq),
            ("kqd", self.kqd),
        ] {
            if !(g.x > 0.0 && g.y > 0.0 && g.z > 0.0) || !g.is_finite() {
                return Err(Error::InvalidParameter(format!("gain {name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Mixed command sent to the motors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    pub wrench: Wrench,
    pub rotor_speeds: [f64; 4],
}

/// Desired attitude whose body z axis is `force`'s direction and whose
/// heading follows `yaw`.
pub(crate) fn attitude_from_force(force: Vec3, yaw: f64) -> Result<Mat3> {
    let z = force.try_normalize(1e-9).ok_or(Error::SingularReference { magnitude: force.norm() })?;
    let heading = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
    let y = z.cross(heading).try_normalize(1e-9).ok_or(Error::SingularReference { magnitude: 0.0 })?;
    Ok(Mat3::from_cols(y.cross(z), y, z))
}

/// Attitude law shared by the plain and payload controllers.
pub(crate) fn attitude_control(
    params: &VehicleParams,
    state: &VehicleState,
    rd: &Mat3,
    wd: Vec3,
    wd_dot: Vec3,
    tau_a: Vec3,
    gains: &GainSet,
) -> Vec3 {
    let r = &state.rotation;
    let w = state.angular_velocity;
    let j = &params.inertia;
    let rt_rd = r.transpose() * *rd;
    let e_r = crate::mathcore::vee_unchecked(&(rd.transpose() * *r - rt_rd)) * 0.5;
    let w_d_body = rt_rd * wd;
    let e_w = w - w_d_body;
    -gains.kr.component_mul(e_r) - gains.kw.component_mul(e_w) - (*j * w).cross(w)
        - *j * (crate::mathcore::hat(w) * w_d_body - rt_rd * wd_dot)
        - tau_a
}

/// Geometric tracking law with residual compensation. The desired attitude
/// is rebuilt from the commanded force so that compensated residual forces
/// tilt the thrust vector; body-rate feed-forward comes from the reference.
pub fn lee_control(
    params: &VehicleParams,
    state: &VehicleState,
    reference: &FullReference,
    residual: &ResidualEstimate,
    gains: &GainSet,
) -> Result<Wrench> {
    let m = params.mass;
    let e_p = state.position - reference.position;
    let e_v = state.velocity - reference.velocity;
    let force = -gains.kp.component_mul(e_p) - gains.kv.component_mul(e_v)
        + Vec3::E_Z * (m * params.gravity)
        + reference.acceleration * m
        - residual.force;
    let thrust = force.dot(state.rotation.col(2));
    let rd = attitude_from_force(force, reference.yaw)?;
    let torque = attitude_control(
        params,
        state,
        &rd,
        reference.angular_velocity,
        reference.angular_acceleration,
        residual.torque,
        gains,
    );
    Ok(Wrench { thrust, torque })
}

/// Converts a wrench to rotor speeds with thrust-priority saturation: the
/// collective thrust is clamped first, then the torque is scaled down until
/// every rotor force fits in `[0, f_max]`.
pub fn mix_to_rotors(wrench: Wrench, params: &VehicleParams) -> ControlCommand {
    let b0 = params.b0();
    let f_max = params.max_rotor_force();
    let f_min = params.kappa_f * params.rotor_speed_min * params.rotor_speed_min;
    let thrust_cap: f64 = (0..4).map(|i| f_max / b0[i][0]).fold(f64::INFINITY, f64::min);
    let thrust = if wrench.thrust.is_finite() { wrench.thrust.clamp(0.0, thrust_cap) } else { 0.0 };
    let torque = if wrench.torque.is_finite() { wrench.torque } else { Vec3::ZERO };
    let mut scale: f64 = 1.0;
    for row in b0 {
        let base = row[0] * thrust;
        let delta = row[1] * torque.x + row[2] * torque.y + row[3] * torque.z;
        if delta > 0.0 {
            scale = scale.min(((f_max - base) / delta).max(0.0));
        } else if delta < 0.0 {
            scale = scale.min(((base - f_min).max(0.0)) / -delta);
        }
    }
    let wrench = Wrench { thrust, torque: torque * scale };
    let forces = crate::dynamics::rotor_forces_from_wrench(wrench, params);
    let rotor_speeds = forces.map(|f| {
        let w = (f.max(0.0) / params.kappa_f).sqrt();
        if w.is_finite() {
            w.clamp(params.rotor_speed_min, params.rotor_speed_max)
        } else {
            params.rotor_speed_min
        }
    });
    ControlCommand { wrench, rotor_speeds }
}
