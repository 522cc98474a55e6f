use super::VehicleState;
use crate::error::{Error, Result};
use crate::mathcore::{Mat3, Vec3};

/// Ground-truth source of the unmodelled force `f_a` (world, N) and torque
/// `τ_a` (body, N·m).
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ResidualModel {
    #[default]
    None,
    /// `f_a = −D v`, `τ_a = −C ω`.
    LinearDrag { force: Mat3, torque: Mat3 },
    /// `f_a = −D |v| v`, `τ_a = −C |ω| ω`.
    QuadraticDrag { force: Mat3, torque: Mat3 },
    Scripted(ScriptedResidual),
}

/// Piecewise-linear time series of residuals, held constant outside its range.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedResidual {
    times: Vec<f64>,
    forces: Vec<Vec3>,
    torques: Vec<Vec3>,
}

impl ScriptedResidual {
    pub fn new(times: Vec<f64>, forces: Vec<Vec3>, torques: Vec<Vec3>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Empty("scripted residual"));
        }
        if forces.len() != times.len() || torques.len() != times.len() {
            return Err(Error::LengthMismatch { expected: times.len(), actual: forces.len().min(torques.len()) });
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::UnsortedTimes { index: i + 1 });
        }
        if !forces.iter().chain(&torques).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("scripted residual"));
        }
        Ok(ScriptedResidual { times, forces, torques })
    }

    pub fn at(&self, t: f64) -> (Vec3, Vec3) {
        let n = self.times.len();
        if t <= self.times[0] {
            return (self.forces[0], self.torques[0]);
        }
        if t >= self.times[n - 1] {
            return (self.forces[n - 1], self.torques[n - 1]);
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let a = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        let lerp = |v: &[Vec3]| v[i] * (1.0 - a) + v[i + 1] * a;
        (lerp(&self.forces), lerp(&self.torques))
    }
}

impl ResidualModel {
    /// Constant residual, as a single-sample script.
    pub fn constant(force: Vec3, torque: Vec3) -> Self {
        ResidualModel::Scripted(ScriptedResidual {
            times: vec![0.0],
            forces: vec![force],
            torques: vec![torque],
        })
    }

    pub fn evaluate(&self, state: &VehicleState, t: f64) -> (Vec3, Vec3) {
        let v = state.velocity;
        let w = state.angular_velocity;
        match self {
            ResidualModel::None => (Vec3::ZERO, Vec3::ZERO),
            ResidualModel::LinearDrag { force, torque } => (-(*force * v), -(*torque * w)),
            ResidualModel::QuadraticDrag { force, torque } => (-(*force * v) * v.norm(), -(*torque * w) * w.norm()),
            ResidualModel::Scripted(s) => s.at(t),
        }
    }
}

pub fn true_residual(model: &ResidualModel, state: &VehicleState, t: f64) -> (Vec3, Vec3) {
    model.evaluate(state, t)
}
