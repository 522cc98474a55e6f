//! Point-mass payload on a massless, inextensible cable attached at the
//! vehicle's centre of gravity.

use super::{check_dt, rigid_body_derivative, rk4, wrench_from_rotor_speeds, ResidualModel, VehicleParams, VehicleState, Wrench};
use crate::error::{Error, Result};
use crate::mathcore::{orthonormalize, Vec3};

/// Tolerance on `|p_p − p| − ℓ` for the cable to count as taut.
pub const TAUT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayloadParams {
    /// kg
    pub mass: f64,
    /// m
    pub cable_length: f64,
}

impl Default for PayloadParams {
    /// 5 g on a 0.5 m string.
    fn default() -> Self {
        PayloadParams { mass: 0.005, cable_length: 0.5 }
    }
}

impl PayloadParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.cable_length > 0.0) {
            return Err(Error::InvalidParameter("payload mass and cable length must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayloadState {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Unit vector from the vehicle towards the payload.
    pub direction: Vec3,
    /// Cable tension, N. Zero while slack.
    pub tension: f64,
}

impl PayloadState {
    /// Payload at rest directly below a vehicle at `vehicle_position`.
    pub fn hanging(vehicle_position: Vec3, params: &PayloadParams, gravity: f64) -> Self {
        PayloadState {
            position: vehicle_position - Vec3::E_Z * params.cable_length,
            velocity: Vec3::ZERO,
            direction: -Vec3::E_Z,
            tension: params.mass * gravity,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite() && self.direction.is_finite() && self.tension.is_finite()
    }

    /// `q̇` for the taut cable.
    pub fn direction_rate(&self, vehicle: &VehicleState, params: &PayloadParams) -> Vec3 {
        let v_rel = self.velocity - vehicle.velocity;
        let q = self.direction;
        (v_rel - q * q.dot(v_rel)) / params.cable_length
    }
}

/// Tension that keeps the cable length constant, given the non-cable force
/// on the vehicle. Negative values mean the cable would go slack.
///
/// From `q·(a_p − a) = −|v_p − v|² / |p_p − p|` with both bodies' equations of motion.
pub fn cable_tension(
    params: &VehicleParams,
    payload: &PayloadParams,
    vehicle: &VehicleState,
    payload_position: Vec3,
    payload_velocity: Vec3,
    wrench: Wrench,
    f_a: Vec3,
) -> f64 {
    let m = params.mass;
    let g = params.gravity;
    let r = payload_position - vehicle.position;
    let dist = r.norm();
    let q = r / dist;
    let v_rel = payload_velocity - vehicle.velocity;
    let force = vehicle.rotation.col(2) * wrench.thrust - Vec3::E_Z * (m * g) + f_a;
    let mu = m * payload.mass / (m + payload.mass);
    mu * (v_rel.norm_squared() / dist - g * q.z - q.dot(force) / m)
}

fn pack(v: &VehicleState, pp: Vec3, vp: Vec3) -> [f64; 24] {
    let mut x = [0.0; 24];
    x[..18].copy_from_slice(&v.pack());
    x[18..21].copy_from_slice(&pp.to_array());
    x[21..24].copy_from_slice(&vp.to_array());
    x
}

fn unpack(x: &[f64; 24]) -> (VehicleState, Vec3, Vec3) {
    (
        VehicleState::unpack(&x[..18]),
        Vec3::new(x[18], x[19], x[20]),
        Vec3::new(x[21], x[22], x[23]),
    )
}

/// Restores `|p_p − p| = ℓ` about the common centre of mass and removes the
/// radial relative velocity (only the outward part when `outward_only`).
/// Total linear momentum is unchanged.
fn project_cable(
    m: f64,
    mp: f64,
    len: f64,
    vehicle: &mut VehicleState,
    pp: &mut Vec3,
    vp: &mut Vec3,
    outward_only: bool,
) {
    let total = m + mp;
    let com = (vehicle.position * m + *pp * mp) / total;
    let r = *pp - vehicle.position;
    let q = r / r.norm();
    let r_new = q * len;
    vehicle.position = com - r_new * (mp / total);
    *pp = com + r_new * (m / total);

    let v_com = (vehicle.velocity * m + *vp * mp) / total;
    let mut v_rel = *vp - vehicle.velocity;
    let radial = q.dot(v_rel);
    if !outward_only || radial > 0.0 {
        v_rel -= q * radial;
    }
    vehicle.velocity = v_com - v_rel * (mp / total);
    *vp = v_com + v_rel * (m / total);
}

/// Advances vehicle and payload by one RK4 step.
///
/// While the cable is taut the two bodies are coupled through the tension
/// that preserves the cable length; if that tension comes out negative at the
/// start of the step, the step is taken with two free bodies instead.
pub fn step_payload_system(
    params: &VehicleParams,
    payload_params: &PayloadParams,
    vehicle: &VehicleState,
    payload: &PayloadState,
    rotor_speeds: [f64; 4],
    model: &ResidualModel,
    t: f64,
    dt: f64,
) -> Result<(VehicleState, PayloadState)> {
    check_dt(dt)?;
    let len = payload_params.cable_length;
    let m = params.mass;
    let mp = payload_params.mass;
    let g = params.gravity;
    let dist = (payload.position - vehicle.position).norm();
    if dist > len + TAUT_TOLERANCE {
        return Err(Error::InvalidParameter(format!(
            "cable stretched beyond its length ({dist} > {len})"
        )));
    }
    let wrench = wrench_from_rotor_speeds(rotor_speeds, params);
    let (fa0, _) = model.evaluate(vehicle, t);
    let taut = dist >= len - TAUT_TOLERANCE
        && cable_tension(params, payload_params, vehicle, payload.position, payload.velocity, wrench, fa0) >= 0.0;

    let x = pack(vehicle, payload.position, payload.velocity);
    let next = rk4(&x, t, dt, |tau, x| {
        let (s, pp, vp) = unpack(x);
        let (fa, ta) = model.evaluate(&s, tau);
        let (tension, q) = if taut {
            let r = pp - s.position;
            (cable_tension(params, payload_params, &s, pp, vp, wrench, fa), r / r.norm())
        } else {
            (0.0, Vec3::ZERO)
        };
        let mut d = [0.0; 24];
        rigid_body_derivative(params, &s, wrench, fa + q * tension, ta, &mut d[..18]);
        let ap = -(q * (tension / mp)) - Vec3::E_Z * g;
        d[18..21].copy_from_slice(&vp.to_array());
        d[21..24].copy_from_slice(&ap.to_array());
        d
    });
    let (mut s, mut pp, mut vp) = unpack(&next);
    if !(s.is_finite() && pp.is_finite() && vp.is_finite()) {
        return Err(Error::NonFinite("vehicle/payload state"));
    }
    s.rotation = orthonormalize(&s.rotation)?;

    let new_dist = (pp - s.position).norm();
    let now_taut = if taut {
        project_cable(m, mp, len, &mut s, &mut pp, &mut vp, false);
        true
    } else if new_dist >= len {
        project_cable(m, mp, len, &mut s, &mut pp, &mut vp, true);
        true
    } else {
        false
    };

    let r = pp - s.position;
    let q = r / r.norm();
    let tension = if now_taut {
        let (fa, _) = model.evaluate(&s, t + dt);
        cable_tension(params, payload_params, &s, pp, vp, wrench, fa).max(0.0)
    } else {
        0.0
    };
    Ok((s, PayloadState { position: pp, velocity: vp, direction: q, tension }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (VehicleParams, PayloadParams, VehicleState, PayloadState) {
        let p = VehicleParams::crazyflie();
        let pp = PayloadParams::default();
        let v = VehicleState::at_rest(Vec3::new(0.0, 0.0, 1.0));
        let l = PayloadState::hanging(v.position, &pp, p.gravity);
        (p, pp, v, l)
    }

    #[test]
    fn hanging_tension_is_weight() {
        let (p, pp, v, l) = setup();
        let w = p.hover_rotor_speed(p.mass + pp.mass);
        let wrench = wrench_from_rotor_speeds([w; 4], &p);
        let t = cable_tension(&p, &pp, &v, l.position, l.velocity, wrench, Vec3::ZERO);
        assert!((t - 0.04905).abs() < 1e-9, "{t}");
    }

    #[test]
    fn hover_with_payload_is_equilibrium() {
        let (p, pp, v, l) = setup();
        let w = p.hover_rotor_speed(p.mass + pp.mass);
        let (v1, l1) = step_payload_system(&p, &pp, &v, &l, [w; 4], &ResidualModel::None, 0.0, 0.001).unwrap();
        assert!((v1.position - v.position).max_abs() < 1e-9);
        assert!(v1.velocity.max_abs() < 1e-9);
        assert!((l1.position - l.position).max_abs() < 1e-9);
        assert!(l1.velocity.max_abs() < 1e-9);
        assert!((l1.tension - pp.mass * p.gravity).abs() < 1e-9);
    }

    #[test]
    fn free_fall_has_zero_tension() {
        let (p, pp, v, l) = setup();
        let (v1, l1) = step_payload_system(&p, &pp, &v, &l, [0.0; 4], &ResidualModel::None, 0.0, 0.001).unwrap();
        assert!(l1.tension.abs() < 1e-12);
        assert!((v1.velocity.z + p.gravity * 0.001).abs() < 1e-12);
        assert!((l1.velocity.z + p.gravity * 0.001).abs() < 1e-12);
    }

    #[test]
    fn stretched_cable_is_rejected() {
        let (p, pp, v, mut l) = setup();
        l.position.z -= 0.01;
        assert!(step_payload_system(&p, &pp, &v, &l, [0.0; 4], &ResidualModel::None, 0.0, 0.001).is_err());
    }

    #[test]
    fn slack_cable_moves_bodies_independently() {
        let (p, pp, v, mut l) = setup();
        l.position.z += 0.2;
        l.velocity = Vec3::new(0.1, 0.0, 0.0);
        let (_, l1) = step_payload_system(&p, &pp, &v, &l, [0.0; 4], &ResidualModel::None, 0.0, 0.001).unwrap();
        assert_eq!(l1.tension, 0.0);
        assert!((l1.position.x - 1e-4).abs() < 1e-15);
    }
}
