//! Scenario configuration file (TOML). Every field has a default, so an
//! empty file is a valid configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controllers::GainSet;
use crate::dynamics::{x_configuration, NoiseConfig, PayloadParams, ResidualModel, VehicleParams};
use crate::error::{Error, Result};
use crate::indi::IndiConfig;
use crate::learning::TrainConfig;
use crate::mathcore::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleSection {
    pub mass: f64,
    pub inertia: [f64; 3],
    pub kappa_f: f64,
    pub arm_length: f64,
    pub torque_ratio: f64,
    pub rotor_speed_max: f64,
    pub motor_time_constant: f64,
    pub gravity: f64,
}

impl Default for VehicleSection {
    fn default() -> Self {
        VehicleSection {
            mass: 0.0347,
            inertia: [16.6e-6, 16.6e-6, 29.3e-6],
            kappa_f: 2.88e-8,
            arm_length: 0.046,
            torque_ratio: 0.006,
            rotor_speed_max: 2600.0,
            motor_time_constant: 0.03,
            gravity: 9.81,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PayloadSection {
    pub mass: f64,
    pub cable_length: f64,
}

impl Default for PayloadSection {
    fn default() -> Self {
        let p = PayloadParams::default();
        PayloadSection { mass: p.mass, cable_length: p.cable_length }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    None,
    LinearDrag,
    QuadraticDrag,
}

/// Synthetic residual: diagonal force and torque coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualSection {
    pub kind: ResidualKind,
    pub force: [f64; 3],
    pub torque: [f64; 3],
}

impl Default for ResidualSection {
    fn default() -> Self {
        ResidualSection { kind: ResidualKind::QuadraticDrag, force: [0.02, 0.02, 0.01], torque: [2e-7, 2e-7, 1e-7] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub accel_std: f64,
    pub gyro_std: f64,
    pub rpm_std: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { accel_std: 0.3, gyro_std: 0.02, rpm_std: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub physics_dt: f64,
    pub control_rate_hz: f64,
    /// Tracking error beyond which a trial counts as crashed, m.
    pub crash_distance: f64,
    /// Half-width of the uniform start-position perturbation, m.
    pub start_jitter: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection { physics_dt: 0.001, control_rate_hz: 500.0, crash_distance: 2.0, start_jitter: 0.005 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub cutoff_hz: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection { cutoff_hz: IndiConfig::default().cutoff_hz }
    }
}

/// Gain overrides; unset entries use the mass-scaled defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsSection {
    pub kp: Option<[f64; 3]>,
    pub kv: Option<[f64; 3]>,
    pub kr: Option<[f64; 3]>,
    pub kw: Option<[f64; 3]>,
    pub kpp: Option<[f64; 3]>,
    pub kvp: Option<[f64; 3]>,
    pub kq: Option<[f64; 3]>,
    pub kqd: Option<[f64; 3]>,
}

/// Test-shape settings. Unset speeds use the per-shape defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySection {
    pub duration: f64,
    pub speed: Option<f64>,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        TrajectorySection { duration: 16.0, speed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectSection {
    pub flights: usize,
    pub flight_duration: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub payload_speed_min: f64,
    pub payload_speed_max: f64,
    pub bbox: [f64; 3],
    pub center: [f64; 3],
    /// Peak acceleration per segment, m/s².
    pub max_acceleration: f64,
    pub payload_max_acceleration: f64,
}

impl Default for CollectSection {
    fn default() -> Self {
        CollectSection {
            flights: 12,
            flight_duration: 10.0,
            speed_min: 0.5,
            speed_max: 2.5,
            payload_speed_min: 0.5,
            payload_speed_max: 1.5,
            bbox: [1.6, 1.6, 0.4],
            center: [0.0, 0.0, 1.0],
            max_acceleration: 4.0,
            payload_max_acceleration: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub decay: f64,
    pub decay_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub knot_spacing: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            decay: t.decay,
            decay_every: t.decay_every,
            epochs: t.epochs,
            batch_size: t.batch_size,
            validation_fraction: t.validation_fraction,
            knot_spacing: crate::learning::DEFAULT_KNOT_SPACING,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub trials: usize,
    pub controllers: Vec<String>,
    pub trajectories: Vec<String>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            trials: 10,
            controllers: ["lee", "indi", "indi_pwm", "ilndi", "na_indi"].map(String::from).to_vec(),
            trajectories: ["circle", "figure8", "helix"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub vehicle: VehicleSection,
    pub payload: PayloadSection,
    pub residual: ResidualSection,
    pub noise: NoiseSection,
    pub sim: SimSection,
    pub filter: FilterSection,
    pub gains: GainsSection,
    pub trajectory: TrajectorySection,
    pub collect: CollectSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

/// Validated, ready-to-use scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub vehicle: VehicleParams,
    pub payload: PayloadParams,
    pub residual: ResidualModel,
    pub noise: NoiseConfig,
    pub physics_dt: f64,
    pub control_dt: f64,
    /// Physics steps per control tick.
    pub substeps: usize,
    pub crash_distance: f64,
    pub start_jitter: f64,
    pub indi: IndiConfig,
    pub gains: GainSet,
    pub config: ScenarioConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            decay: t.decay,
            decay_every: t.decay_every,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed,
            validation_fraction: t.validation_fraction,
            ..TrainConfig::default()
        }
    }

    pub fn build(&self) -> Result<Scenario> {
        let v = &self.vehicle;
        let mut vehicle = VehicleParams::new(
            v.mass,
            Vec3::from(v.inertia),
            v.kappa_f,
            x_configuration(v.arm_length, v.torque_ratio),
        )?;
        vehicle.rotor_speed_max = v.rotor_speed_max;
        vehicle.motor_time_constant = v.motor_time_constant;
        vehicle.gravity = v.gravity;
        vehicle.validate()?;

        let payload = PayloadParams { mass: self.payload.mass, cable_length: self.payload.cable_length };
        payload.validate()?;

        let r = &self.residual;
        let (f, t) = (Mat3::diag(Vec3::from(r.force)), Mat3::diag(Vec3::from(r.torque)));
        let residual = match r.kind {
            ResidualKind::None => ResidualModel::None,
            ResidualKind::LinearDrag => ResidualModel::LinearDrag { force: f, torque: t },
            ResidualKind::QuadraticDrag => ResidualModel::QuadraticDrag { force: f, torque: t },
        };

        let n = &self.noise;
        if !(n.accel_std >= 0.0 && n.gyro_std >= 0.0 && n.rpm_std >= 0.0) {
            return Err(Error::InvalidParameter("noise standard deviations must be nonnegative".into()));
        }
        let noise = NoiseConfig { accel_std: n.accel_std, gyro_std: n.gyro_std, rpm_std: n.rpm_std };

        let s = &self.sim;
        if !(s.physics_dt > 0.0 && s.control_rate_hz > 0.0) {
            return Err(Error::InvalidParameter("physics step and control rate must be positive".into()));
        }
        let control_dt = 1.0 / s.control_rate_hz;
        let ratio = control_dt / s.physics_dt;
        let substeps = ratio.round() as usize;
        if substeps == 0 || (ratio - substeps as f64).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "control period {control_dt} s must be a whole multiple of the physics step {} s",
                s.physics_dt
            )));
        }
        if !(s.crash_distance > 0.0 && s.start_jitter >= 0.0) {
            return Err(Error::InvalidParameter("crash distance must be positive, jitter nonnegative".into()));
        }

        let indi = IndiConfig { cutoff_hz: self.filter.cutoff_hz, sample_rate_hz: s.control_rate_hz };
        crate::indi::ButterworthFilter::<1>::new(indi.cutoff_hz, indi.sample_rate_hz)?;

        let mut gains = GainSet::defaults(vehicle.mass, payload.mass, payload.cable_length);
        let g = &self.gains;
        for (slot, value) in [
            (&mut gains.kp, g.kp),
            (&mut gains.kv, g.kv),
            (&mut gains.kr, g.kr),
            (&mut gains.kw, g.kw),
            (&mut gains.kpp, g.kpp),
            (&mut gains.kvp, g.kvp),
            (&mut gains.kq, g.kq),
            (&mut gains.kqd, g.kqd),
        ] {
            if let Some(v) = value {
                *slot = Vec3::from(v);
            }
        }
        gains.validate()?;

        if self.trajectory.duration <= 0.0 || self.trajectory.speed.is_some_and(|v| v <= 0.0) {
            return Err(Error::InvalidParameter("trajectory duration and speed must be positive".into()));
        }
        if self.eval.trials == 0 {
            return Err(Error::InvalidParameter("trial count must be at least 1".into()));
        }

        Ok(Scenario {
            vehicle,
            payload,
            residual,
            noise,
            physics_dt: s.physics_dt,
            control_dt,
            substeps,
            crash_distance: s.crash_distance,
            start_jitter: s.start_jitter,
            indi,
            gains,
            config: self.clone(),
        })
    }
}
