use super::{attitude_control, attitude_from_force, GainSet};
use crate::dynamics::{PayloadParams, PayloadState, VehicleParams, VehicleState, Wrench};
use crate::error::{Error, Result};
use crate::mathcore::{Mat3, Vec3};
use crate::trajectory::FullReference;

/// Output of one cascade evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayloadCommand {
    pub wrench: Wrench,
    /// Desired cable direction (unit, vehicle to payload).
    pub cable_direction: Vec3,
    /// Force the vehicle is asked to produce, world frame.
    pub vehicle_force: Vec3,
    pub desired_rotation: Mat3,
}

/// Three-level cascade: payload position, cable direction, attitude.
///
/// Holds the previous desired cable direction and attitude so their rates
/// can be differenced at the control period.
#[derive(Debug, Clone)]
pub struct PayloadController {
    dt: f64,
    prev_qd: Option<Vec3>,
    prev_rd: Option<Mat3>,
    prev_wd: Vec3,
}

impl PayloadController {
    pub fn new(control_dt: f64) -> Result<Self> {
        if !(control_dt > 0.0) {
            return Err(Error::InvalidParameter("control period must be positive".into()));
        }
        Ok(PayloadController { dt: control_dt, prev_qd: None, prev_rd: None, prev_wd: Vec3::ZERO })
    }

    pub fn reset(&mut self) {
        *self = PayloadController::new(self.dt).expect("period already validated");
    }

    /// Residual compensation enters only at the attitude level through `tau_a`.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        params: &VehicleParams,
        payload_params: &PayloadParams,
        vehicle: &VehicleState,
        payload: &PayloadState,
        reference: &FullReference,
        tau_a: Vec3,
        gains: &GainSet,
    ) -> Result<PayloadCommand> {
        let m = params.mass;
        let mp = payload_params.mass;
        let g = params.gravity;
        let len = payload_params.cable_length;

        let e_pp = payload.position - reference.position;
        let e_vp = payload.velocity - reference.velocity;
        let f_d = (reference.acceleration + Vec3::E_Z * g) * mp - gains.kpp.component_mul(e_pp)
            - gains.kvp.component_mul(e_vp);
        let qd = (-f_d).try_normalize(1e-6).ok_or(Error::DegenerateCableDirection { magnitude: f_d.norm() })?;

        let dt = self.dt;
        let qd_dot = self.prev_qd.map_or(Vec3::ZERO, |p| (qd - p) / dt);

        let q = payload.direction;
        let q_dot = payload.direction_rate(vehicle, payload_params);
        let total = m + mp;
        let f_n = q * ((total / mp) * f_d.dot(q) + m * len * q_dot.norm_squared());
        let e_q = q.cross(q.cross(qd));
        let e_qd = q_dot - qd.cross(qd_dot).cross(q);
        let force = f_n + gains.kq.component_mul(e_q) + gains.kqd.component_mul(e_qd);

        let thrust = force.dot(vehicle.rotation.col(2));
        let rd = attitude_from_force(force, reference.yaw)?;
        let wd = self.prev_rd.map_or(Vec3::ZERO, |p| log_rate(&p, &rd, dt));
        let wd_dot = if self.prev_rd.is_some() { (wd - self.prev_wd) / dt } else { Vec3::ZERO };
        let torque = attitude_control(params, vehicle, &rd, wd, wd_dot, tau_a, gains);

        self.prev_qd = Some(qd);
        self.prev_rd = Some(rd);
        self.prev_wd = wd;
        Ok(PayloadCommand { wrench: Wrench { thrust, torque }, cable_direction: qd, vehicle_force: force, desired_rotation: rd })
    }
}

/// Body rate taking `from` to `to` in `dt`, via the rotation-matrix logarithm.
fn log_rate(from: &Mat3, to: &Mat3, dt: f64) -> Vec3 {
    let d = from.transpose() * *to;
    let cos = ((d.0[0][0] + d.0[1][1] + d.0[2][2] - 1.0) * 0.5).clamp(-1.0, 1.0);
    let angle = cos.acos();
    let axis = crate::mathcore::vee_unchecked(&d);
    let s = angle.sin();
    let scale = if s.abs() < 1e-9 { 1.0 } else { angle / s };
    axis * (scale / dt)
}
