use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::Scenario;
use crate::controllers::{lee_control, mix_to_rotors, PayloadController};
use crate::dynamics::{PayloadState, SensorFrame, Simulator, VehicleState, Wrench};
use crate::error::{Error, Result};
use crate::indi::{IndiEstimator, ResidualEstimate, ResidualSource};
use crate::learning::{build_features, FlightRecord, MlpModel};
use crate::mathcore::{Mat3, Vec3};
use crate::trajectory::{flat_expand, make_shape, FlatTrajectory, ShapeKind, ShapeSize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerKind {
    Lee,
    Indi,
    IndiPwm,
    Ilndi,
    NaIndi,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 5] =
        [ControllerKind::Lee, ControllerKind::Indi, ControllerKind::IndiPwm, ControllerKind::Ilndi, ControllerKind::NaIndi];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Lee => "lee",
            ControllerKind::Indi => "indi",
            ControllerKind::IndiPwm => "indi_pwm",
            ControllerKind::Ilndi => "ilndi",
            ControllerKind::NaIndi => "na_indi",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, ControllerKind::Ilndi | ControllerKind::NaIndi)
    }

    /// Residual stream fed to the controller.
    pub fn source(self) -> ResidualSource {
        match self {
            ControllerKind::Lee => ResidualSource::None,
            ControllerKind::Indi => ResidualSource::Indi,
            ControllerKind::IndiPwm => ResidualSource::IndiPwm,
            ControllerKind::Ilndi => ResidualSource::Nn,
            ControllerKind::NaIndi => ResidualSource::NaIndi,
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ControllerKind::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown controller '{s}'")))
    }
}

/// Source of the learned residual prediction.
#[derive(Debug, Clone, Default)]
pub enum Predictor {
    #[default]
    None,
    Model(Arc<MlpModel>),
    /// Ground-truth residual of the simulator, for oracle comparisons.
    Oracle,
}

#[derive(Debug, Clone)]
pub enum TrajectoryChoice {
    Hover { duration: f64 },
    Shape(ShapeKind),
    Custom { name: String, trajectory: Arc<FlatTrajectory> },
}

impl TrajectoryChoice {
    pub fn name(&self) -> String {
        match self {
            TrajectoryChoice::Hover { .. } => "hover".into(),
            TrajectoryChoice::Shape(k) => k.name().into(),
            TrajectoryChoice::Custom { name, .. } => name.clone(),
        }
    }

    pub fn parse(s: &str, hover_duration: f64) -> Result<Self> {
        if s == "hover" {
            Ok(TrajectoryChoice::Hover { duration: hover_duration })
        } else {
            s.parse().map(TrajectoryChoice::Shape)
        }
    }

    /// Reference for the tracked point (payload in payload mode).
    pub fn build(&self, scenario: &Scenario, payload: bool) -> Result<Arc<FlatTrajectory>> {
        match self {
            TrajectoryChoice::Hover { duration } => {
                Ok(Arc::new(FlatTrajectory::Hover { position: Vec3::new(0.0, 0.0, 1.0), duration: *duration }))
            }
            TrajectoryChoice::Shape(kind) => {
                let speed = scenario.config.trajectory.speed.unwrap_or_else(|| kind.default_speed(payload));
                Ok(Arc::new(make_shape(*kind, ShapeSize::default_for(*kind), speed, scenario.config.trajectory.duration)?))
            }
            TrajectoryChoice::Custom { trajectory, .. } => Ok(trajectory.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialSpec {
    pub controller: ControllerKind,
    pub trajectory: TrajectoryChoice,
    pub payload: bool,
}

/// One control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub vehicle: VehicleState,
    pub payload: Option<PayloadState>,
    /// Reference for the tracked point.
    pub reference: Vec3,
    pub frame: SensorFrame,
    /// Filtered specific force, NaN until the filters are warm.
    pub accel_filtered: Vec3,
    pub wrench: Wrench,
    pub rotor_command: [f64; 4],
    pub true_residual: ResidualEstimate,
    pub indi: Option<ResidualEstimate>,
    pub indi_pwm: Option<ResidualEstimate>,
    pub nn: Option<ResidualEstimate>,
    pub na_indi: Option<ResidualEstimate>,
    /// Estimate the controller used at this tick.
    pub applied: ResidualEstimate,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightLog {
    pub controller: ControllerKind,
    pub trajectory: String,
    pub payload: bool,
    pub seed: u64,
    pub crashed: bool,
    pub rows: Vec<LogRow>,
}

/// Mean Euclidean distance between tracked point and reference over all ticks.
pub fn tracking_error(rows: &[LogRow]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::Empty("flight log"));
    }
    Ok(rows.iter().map(|r| r.error).sum::<f64>() / rows.len() as f64)
}

impl FlightLog {
    pub fn tracking_error(&self) -> Result<f64> {
        tracking_error(&self.rows)
    }

    /// Labelling input: features and raw INDI estimates at every warm tick.
    pub fn flight_record(&self, id: u32, gravity: f64) -> FlightRecord {
        let mut rec = FlightRecord { id, ..FlightRecord::default() };
        for r in &self.rows {
            if let Some(e) = r.indi {
                rec.times.push(r.t);
                rec.features.push(build_features(&r.vehicle, &r.frame, r.accel_filtered, gravity));
                rec.raw_labels.push(e.to_array());
            }
        }
        rec
    }
}

fn tracked_error(vehicle: &VehicleState, payload: Option<&PayloadState>, reference: Vec3) -> f64 {
    let p = payload.map_or(vehicle.position, |l| l.position);
    (p - reference).norm()
}

/// Runs one closed-loop flight. Numerical failure of the simulation or a
/// tracking error beyond the crash distance ends the flight early and is
/// recorded as a crash.
pub fn run_trial(scenario: &Scenario, spec: &TrialSpec, predictor: &Predictor, seed: u64) -> Result<FlightLog> {
    if spec.controller.needs_model() && matches!(predictor, Predictor::None) {
        return Err(Error::InvalidParameter(format!("controller {} needs a residual model", spec.controller)));
    }
    let trajectory = spec.trajectory.build(scenario, spec.payload)?;
    let params = &scenario.vehicle;
    let g = params.gravity;
    let len = scenario.payload.cable_length;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = scenario.start_jitter;
    let offset = if jitter > 0.0 {
        Vec3::new(
            rng.random_range(-jitter..=jitter),
            rng.random_range(-jitter..=jitter),
            rng.random_range(-jitter..=jitter),
        )
    } else {
        Vec3::ZERO
    };
    let start_ref = trajectory.sample(0.0).position;
    let start = start_ref + offset + if spec.payload { Vec3::E_Z * len } else { Vec3::ZERO };
    let mut sim = Simulator::new(
        params.clone(),
        spec.payload.then_some(scenario.payload),
        scenario.residual.clone(),
        scenario.noise,
        scenario.physics_dt,
        rng.random(),
        start,
    )?;
    let mut indi = IndiEstimator::new(scenario.indi)?;
    let mut cascade = PayloadController::new(scenario.control_dt)?;

    let ticks = (trajectory.duration() / scenario.control_dt).round() as usize + 1;
    let mut rows = Vec::with_capacity(ticks);
    let mut pending = ResidualEstimate::zero();
    let mut crashed = false;

    for k in 0..ticks {
        let t = (k as f64 * scenario.control_dt).min(trajectory.duration());
        let frame = sim.sense();
        let vehicle = *sim.vehicle();
        let payload = sim.payload().copied();
        let (f_true, tau_true) = sim.true_residual();
        let true_residual = ResidualEstimate::new(f_true, tau_true).tagged(ResidualSource::True, t);

        let est = indi.update(params, &frame, &vehicle, payload.map(|p| (&scenario.payload, p.position))).ok();
        let accel_filtered = est.map_or(Vec3::splat(f64::NAN), |e| e.accel_filtered);
        let nn = match (predictor, &est) {
            (Predictor::Model(m), Some(e)) => {
                Some(m.predict_residual(&build_features(&vehicle, &frame, e.accel_filtered, g), t)?)
            }
            (Predictor::Oracle, Some(_)) => Some(true_residual.tagged(ResidualSource::Nn, t)),
            _ => None,
        };
        let na_indi = nn.zip(est).map(|(n, e)| indi.na_indi_residual(&n, &e.indi));

        let applied = pending;
        let reference = flat_expand(&trajectory, t, g)?;
        let wrench = match payload {
            Some(ref load) if spec.payload => {
                cascade
                    .update(params, &scenario.payload, &vehicle, load, &reference, applied.torque, &scenario.gains)
                    .map(|c| c.wrench)
            }
            _ => lee_control(params, &vehicle, &reference, &applied, &scenario.gains),
        };
        // A degenerate command direction leaves the vehicle uncommanded.
        let wrench = wrench.unwrap_or(Wrench { thrust: 0.0, torque: Vec3::ZERO });
        let command = mix_to_rotors(wrench, params);
        sim.set_command(command.rotor_speeds);

        let error = tracked_error(&vehicle, payload.as_ref(), reference.position);
        rows.push(LogRow {
            t,
            vehicle,
            payload,
            reference: reference.position,
            frame,
            accel_filtered,
            wrench: command.wrench,
            rotor_command: command.rotor_speeds,
            true_residual,
            indi: est.map(|e| e.indi),
            indi_pwm: est.map(|e| e.indi_pwm),
            nn,
            na_indi,
            applied,
            error,
        });

        pending = match spec.controller.source() {
            ResidualSource::Indi => est.map(|e| e.indi),
            ResidualSource::IndiPwm => est.map(|e| e.indi_pwm),
            ResidualSource::Nn => nn,
            ResidualSource::NaIndi => na_indi,
            _ => None,
        }
        .filter(ResidualEstimate::is_finite)
        .unwrap_or_default();

        if !(error <= scenario.crash_distance) || !vehicle.is_finite() {
            crashed = true;
            break;
        }
        if k + 1 < ticks && sim.advance(scenario.substeps).is_err() {
            crashed = true;
            break;
        }
    }
    Ok(FlightLog {
        controller: spec.controller,
        trajectory: spec.trajectory.name(),
        payload: spec.payload,
        seed,
        crashed,
        rows,
    })
}

// ---------------------------------------------------------------------------
// CSV

fn vec_cols(prefix: &str) -> [String; 3] {
    ["x", "y", "z"].map(|a| format!("{prefix}{a}"))
}

fn residual_cols(prefix: &str) -> [String; 6] {
    ["fx", "fy", "fz", "tx", "ty", "tz"].map(|a| format!("{prefix}_{a}"))
}

pub fn flight_log_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(vec_cols("p"));
    h.extend(vec_cols("v"));
    h.extend((0..3).flat_map(|i| (0..3).map(move |j| format!("r{i}{j}"))));
    h.extend(vec_cols("w"));
    h.extend(vec_cols("pp"));
    h.extend(vec_cols("pv"));
    h.push("tension".into());
    h.extend(vec_cols("ref_"));
    h.extend(vec_cols("acc_"));
    h.extend(vec_cols("gyro_"));
    h.extend((1..=4).map(|i| format!("rpm{i}")));
    h.extend((1..=4).map(|i| format!("pwm{i}")));
    h.extend(vec_cols("accf_"));
    h.push("thrust".into());
    h.extend(vec_cols("torque_"));
    h.extend((1..=4).map(|i| format!("cmd{i}")));
    for s in ["true", "indi", "indi_pwm", "nn", "na_indi", "applied"] {
        h.extend(residual_cols(s));
    }
    h.push("applied_source".into());
    h.push("error".into());
    h.push("crashed".into());
    h
}

fn push3(row: &mut Vec<f64>, v: Vec3) {
    row.extend(v.to_array());
}

fn push_opt(row: &mut Vec<f64>, e: Option<ResidualEstimate>) {
    match e {
        Some(e) => row.extend(e.to_array()),
        None => row.extend([f64::NAN; 6]),
    }
}

impl FlightLog {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(flight_log_header()).map_err(|e| Error::csv(path, e))?;
        let mut row: Vec<f64> = Vec::new();
        for r in &self.rows {
            row.clear();
            row.push(r.t);
            push3(&mut row, r.vehicle.position);
            push3(&mut row, r.vehicle.velocity);
            row.extend(r.vehicle.rotation.to_row_major());
            push3(&mut row, r.vehicle.angular_velocity);
            match r.payload {
                Some(p) => {
                    push3(&mut row, p.position);
                    push3(&mut row, p.velocity);
                    row.push(p.tension);
                }
                None => row.extend([f64::NAN; 7]),
            }
            push3(&mut row, r.reference);
            push3(&mut row, r.frame.accel);
            push3(&mut row, r.frame.gyro);
            row.extend(r.frame.rpm);
            row.extend(r.frame.pwm);
            push3(&mut row, r.accel_filtered);
            row.push(r.wrench.thrust);
            push3(&mut row, r.wrench.torque);
            row.extend(r.rotor_command);
            push_opt(&mut row, Some(r.true_residual));
            push_opt(&mut row, r.indi);
            push_opt(&mut row, r.indi_pwm);
            push_opt(&mut row, r.nn);
            push_opt(&mut row, r.na_indi);
            push_opt(&mut row, Some(r.applied));
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(r.applied.source.name().to_string());
            rec.push(r.error.to_string());
            rec.push(u8::from(self.crashed).to_string());
            w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a log written by [`write_csv`](Self::write_csv). Run metadata
    /// other than the crash flag is not stored in the file and is taken from
    /// the arguments.
    pub fn read_csv(path: &Path, controller: ControllerKind, trajectory: &str, seed: u64) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let header: Vec<String> = r.headers().map_err(|e| Error::csv(path, e))?.iter().map(str::to_string).collect();
        if header != flight_log_header() {
            return Err(Error::parse(path, "unexpected flight-log header"));
        }
        let mut rows = Vec::new();
        let mut crashed = false;
        let mut payload_mode = false;
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let n = rec.len();
            let v: Vec<f64> = rec
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != n - 3)
                .map(|(_, s)| s.parse::<f64>().map_err(|e| Error::parse(path, e.to_string())))
                .collect::<Result<_>>()?;
            let source: ResidualSource = rec[n - 3].parse()?;
            crashed = v[v.len() - 1] != 0.0;
            let mut i = 0;
            let mut take = |k: usize| {
                let s = &v[i..i + k];
                i += k;
                s
            };
            let t = take(1)[0];
            let v3 = |s: &[f64]| Vec3::new(s[0], s[1], s[2]);
            let position = v3(take(3));
            let velocity = v3(take(3));
            let rotation = Mat3::from_row_major(take(9).try_into().unwrap());
            let angular_velocity = v3(take(3));
            let vehicle = VehicleState { position, velocity, rotation, angular_velocity };
            let pp = v3(take(3));
            let pv = v3(take(3));
            let tension = take(1)[0];
            let payload = pp.is_finite().then(|| {
                let direction = (pp - position).try_normalize(1e-12).unwrap_or(-Vec3::E_Z);
                PayloadState { position: pp, velocity: pv, direction, tension }
            });
            payload_mode |= payload.is_some();
            let reference = v3(take(3));
            let accel = v3(take(3));
            let gyro = v3(take(3));
            let rpm: [f64; 4] = take(4).try_into().unwrap();
            let pwm: [f64; 4] = take(4).try_into().unwrap();
            let accel_filtered = v3(take(3));
            let thrust = take(1)[0];
            let torque = v3(take(3));
            let rotor_command: [f64; 4] = take(4).try_into().unwrap();
            let mut est = |source: ResidualSource| {
                let a: [f64; 6] = take(6).try_into().unwrap();
                let e = ResidualEstimate::from_array(a).tagged(source, t);
                e.is_finite().then_some(e)
            };
            let true_residual = est(ResidualSource::True).unwrap_or_default();
            let indi = est(ResidualSource::Indi);
            let indi_pwm = est(ResidualSource::IndiPwm);
            let nn = est(ResidualSource::Nn);
            let na_indi = est(ResidualSource::NaIndi);
            let applied_values = est(source).unwrap_or_default();
            let applied = if source == ResidualSource::None {
                ResidualEstimate { source, ..applied_values }
            } else {
                applied_values
            };
            let error = take(1)[0];
            rows.push(LogRow {
                t,
                vehicle,
                payload,
                reference,
                frame: SensorFrame { accel, gyro, rpm, pwm, timestamp: t },
                accel_filtered,
                wrench: Wrench { thrust, torque },
                rotor_command,
                true_residual,
                indi,
                indi_pwm,
                nn,
                na_indi,
                applied,
                error,
            });
        }
        Ok(FlightLog { controller, trajectory: trajectory.to_string(), payload: payload_mode, seed, crashed, rows })
    }
}
