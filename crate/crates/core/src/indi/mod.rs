//! Online residual estimation by incremental nonlinear dynamic inversion.

mod filter;

pub use filter::ButterworthFilter;

use std::fmt;
use std::str::FromStr;

use crate::dynamics::{wrench_from_rotor_speeds, PayloadParams, SensorFrame, VehicleParams, VehicleState, Wrench};
use crate::error::{Error, Result};
use crate::mathcore::Vec3;

/// Minimum number of samples before an estimate is available.
pub const WARMUP_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum ResidualSource {
    /// No estimate; the controller runs uncompensated.
    #[default]
    None,
    True,
    Indi,
    IndiPwm,
    Nn,
    NaIndi,
}

impl ResidualSource {
    pub const ALL: [ResidualSource; 6] = [
        ResidualSource::None,
        ResidualSource::True,
        ResidualSource::Indi,
        ResidualSource::IndiPwm,
        ResidualSource::Nn,
        ResidualSource::NaIndi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ResidualSource::None => "none",
            ResidualSource::True => "true",
            ResidualSource::Indi => "indi",
            ResidualSource::IndiPwm => "indi_pwm",
            ResidualSource::Nn => "nn",
            ResidualSource::NaIndi => "na_indi",
        }
    }
}

impl fmt::Display for ResidualSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ResidualSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ResidualSource::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown residual source '{s}'")))
    }
}

/// Residual force (N, world frame) and torque (N·m, body frame).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualEstimate {
    pub force: Vec3,
    pub torque: Vec3,
    pub source: ResidualSource,
    pub timestamp: f64,
}

impl ResidualEstimate {
    pub fn new(force: Vec3, torque: Vec3) -> Self {
        ResidualEstimate { force, torque, ..Default::default() }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn tagged(mut self, source: ResidualSource, timestamp: f64) -> Self {
        self.source = source;
        self.timestamp = timestamp;
        self
    }

    pub fn to_array(&self) -> [f64; 6] {
        let [a, b, c] = self.force.to_array();
        let [d, e, f] = self.torque.to_array();
        [a, b, c, d, e, f]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self::new(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5]))
    }

    pub fn is_finite(&self) -> bool {
        self.force.is_finite() && self.torque.is_finite()
    }
}

/// Filter settings shared by every channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndiConfig {
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
}

impl Default for IndiConfig {
    fn default() -> Self {
        IndiConfig { cutoff_hz: 8.0, sample_rate_hz: 500.0 }
    }
}

/// Estimates from one sensor sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndiEstimates {
    /// Wrench from measured rotor speeds.
    pub indi: ResidualEstimate,
    /// Wrench from commanded PWM through the static motor map.
    pub indi_pwm: ResidualEstimate,
    /// Filtered specific force (body frame), reused as a learning feature.
    pub accel_filtered: Vec3,
    pub gyro_filtered: Vec3,
}

/// Filter bank and differencing memory for one vehicle.
#[derive(Debug, Clone)]
pub struct IndiEstimator {
    dt: f64,
    accel: ButterworthFilter<3>,
    gyro: ButterworthFilter<3>,
    wrench_rpm: ButterworthFilter<4>,
    wrench_pwm: ButterworthFilter<4>,
    payload_position: ButterworthFilter<3>,
    nn: ButterworthFilter<6>,
    prev_gyro: Option<Vec3>,
    payload_history: [Option<Vec3>; 2],
    samples: usize,
}

impl IndiEstimator {
    pub fn new(config: IndiConfig) -> Result<Self> {
        let (fc, fs) = (config.cutoff_hz, config.sample_rate_hz);
        Ok(IndiEstimator {
            dt: 1.0 / fs,
            accel: ButterworthFilter::new(fc, fs)?,
            gyro: ButterworthFilter::new(fc, fs)?,
            wrench_rpm: ButterworthFilter::new(fc, fs)?,
            wrench_pwm: ButterworthFilter::new(fc, fs)?,
            payload_position: ButterworthFilter::new(fc, fs)?,
            nn: ButterworthFilter::new(fc, fs)?,
            prev_gyro: None,
            payload_history: [None; 2],
            samples: 0,
        })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn time_constant(&self) -> f64 {
        self.accel.time_constant()
    }

    /// Feeds one sensor sample. `vehicle` supplies the attitude (and the
    /// position used for the cable direction); `payload` is the measured
    /// payload position in payload mode.
    pub fn update(
        &mut self,
        params: &VehicleParams,
        frame: &SensorFrame,
        vehicle: &VehicleState,
        payload: Option<(&PayloadParams, Vec3)>,
    ) -> Result<IndiEstimates> {
        if !(frame.accel.is_finite() && frame.gyro.is_finite() && frame.rpm.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite("sensor frame"));
        }
        let m = params.mass;
        let g = params.gravity;
        let r = vehicle.rotation;

        let accel_f = self.accel.step_vec3(frame.accel);
        let gyro_f = self.gyro.step_vec3(frame.gyro);
        let rpm_f = Wrench::from_array(self.wrench_rpm.step(wrench_from_rotor_speeds(frame.rpm, params).to_array()));
        let pwm_speeds = frame.pwm.map(|p| p * params.rotor_speed_max);
        let pwm_f = Wrench::from_array(self.wrench_pwm.step(wrench_from_rotor_speeds(pwm_speeds, params).to_array()));

        let omega_dot = self.prev_gyro.map_or(Vec3::ZERO, |p| (gyro_f - p) / self.dt);
        self.prev_gyro = Some(gyro_f);

        let cable = match payload {
            Some((pp, position)) => {
                let pf = self.payload_position.step_vec3(position);
                let [h1, h2] = self.payload_history;
                self.payload_history = [Some(pf), h1];
                match (h1, h2) {
                    (Some(p1), Some(p2)) => {
                        let a_p = (pf - p1 * 2.0 + p2) / (self.dt * self.dt);
                        let q = (position - vehicle.position).try_normalize(1e-9).unwrap_or(-Vec3::E_Z);
                        let tension = pp.mass * q.dot(-a_p - Vec3::E_Z * g);
                        q * tension
                    }
                    _ => Vec3::ZERO,
                }
            }
            None => Vec3::ZERO,
        };

        self.samples += 1;
        if self.samples < WARMUP_SAMPLES {
            return Err(Error::FilterNotWarm { samples: self.samples, required: WARMUP_SAMPLES });
        }

        let j = params.inertia;
        let specific = r * accel_f * m;
        let invert = |w: Wrench| {
            let force = specific - r.col(2) * w.thrust - cable;
            let torque = j * omega_dot - (j * gyro_f).cross(gyro_f) - w.torque;
            ResidualEstimate::new(force, torque)
        };
        let t = frame.timestamp;
        let indi = invert(rpm_f).tagged(ResidualSource::Indi, t);
        let indi_pwm = invert(pwm_f).tagged(ResidualSource::IndiPwm, t);
        Ok(IndiEstimates { indi, indi_pwm, accel_filtered: accel_f, gyro_filtered: gyro_f })
    }

    /// Splits the residual into a network part and an estimated remainder.
    ///
    /// Subtracting the prediction inside the inversion and filtering the
    /// difference equals `filter(indi) − filter(nn)` because the filter is
    /// linear, so the total is `nn + indi − filter(nn)` with `indi` the
    /// filtered estimate from [`update`](Self::update) for the same sample.
    /// Call once per sample, after `update`.
    pub fn na_indi_residual(&mut self, nn: &ResidualEstimate, indi: &ResidualEstimate) -> ResidualEstimate {
        let filtered = ResidualEstimate::from_array(self.nn.step(nn.to_array()));
        ResidualEstimate::new(nn.force + indi.force - filtered.force, nn.torque + indi.torque - filtered.torque)
            .tagged(ResidualSource::NaIndi, indi.timestamp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{NoiseConfig, ResidualModel, Simulator};

    fn hover_sim(residual: ResidualModel) -> Simulator {
        Simulator::new(
            VehicleParams::crazyflie(),
            None,
            residual,
            NoiseConfig::default(),
            0.001,
            0,
            Vec3::new(0.0, 0.0, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn not_warm_is_reported() {
        let mut sim = hover_sim(ResidualModel::None);
        let mut est = IndiEstimator::new(IndiConfig::default()).unwrap();
        let p = sim.params().clone();
        let frame = sim.sense();
        let err = est.update(&p, &frame, sim.vehicle(), None).unwrap_err();
        assert!(matches!(err, Error::FilterNotWarm { samples: 1, required: 5 }));
    }

    #[test]
    fn hover_estimate_is_zero() {
        let mut sim = hover_sim(ResidualModel::None);
        let mut est = IndiEstimator::new(IndiConfig::default()).unwrap();
        let p = sim.params().clone();
        let mut last = None;
        for _ in 0..500 {
            let frame = sim.sense();
            last = est.update(&p, &frame, sim.vehicle(), None).ok();
            sim.advance(2).unwrap();
        }
        let e = last.unwrap();
        assert!(e.indi.force.max_abs() < 1e-6 && e.indi.torque.max_abs() < 1e-6);
        assert!((e.indi_pwm.force - e.indi.force).max_abs() < 1e-6);
    }

    #[test]
    fn na_indi_with_zero_network_equals_indi() {
        let mut sim = hover_sim(ResidualModel::constant(Vec3::new(0.01, 0.0, 0.0), Vec3::ZERO));
        let mut est = IndiEstimator::new(IndiConfig::default()).unwrap();
        let p = sim.params().clone();
        let zero = ResidualEstimate::zero();
        for _ in 0..50 {
            let frame = sim.sense();
            if let Ok(e) = est.update(&p, &frame, sim.vehicle(), None) {
                let na = est.na_indi_residual(&zero, &e.indi);
                assert_eq!(na.force, e.indi.force);
                assert_eq!(na.torque, e.indi.torque);
            }
            sim.advance(2).unwrap();
        }
    }

    #[test]
    fn source_names_roundtrip() {
        for s in ResidualSource::ALL {
            assert_eq!(s.name().parse::<ResidualSource>().unwrap(), s);
        }
        assert!("bogus".parse::<ResidualSource>().is_err());
    }
}
