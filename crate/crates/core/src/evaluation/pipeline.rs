use std::sync::Arc;

use rayon::prelude::*;

use super::config::Scenario;
use super::trial::{run_trial, ControllerKind, FlightLog, Predictor, TrajectoryChoice, TrialSpec};
use crate::error::Result;
use crate::learning::{build_features, make_dataset, train, Dataset, FlightRecord, LabelMode, MlpModel, TrainReport};
use crate::mathcore::Vec3;
use crate::trajectory::{make_random_waypoints, FlatTrajectory, RandomWaypointConfig};

/// Seed of flight `index` in a collection run.
pub fn flight_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(index as u64)
}

/// Random-waypoint flights flown with the INDI controller.
pub fn collect(scenario: &Scenario, payload: bool, seed: u64) -> Result<Vec<FlightLog>> {
    let c = &scenario.config.collect;
    let (speed_min, speed_max, max_acceleration) = if payload {
        (c.payload_speed_min, c.payload_speed_max, c.payload_max_acceleration)
    } else {
        (c.speed_min, c.speed_max, c.max_acceleration)
    };
    let cfg = RandomWaypointConfig {
        center: Vec3::from(c.center),
        bbox: Vec3::from(c.bbox),
        speed_min,
        speed_max,
        duration: c.flight_duration,
        max_acceleration,
        ..RandomWaypointConfig::default()
    };
    (0..c.flights)
        .into_par_iter()
        .map(|i| {
            let s = flight_seed(seed, i);
            let trajectory = Arc::new(FlatTrajectory::Polynomial(make_random_waypoints(&cfg, s)?));
            let spec = TrialSpec {
                controller: ControllerKind::Indi,
                trajectory: TrajectoryChoice::Custom { name: format!("waypoints_{i:03}"), trajectory },
                payload,
            };
            run_trial(scenario, &spec, &Predictor::None, s)
        })
        .collect()
}

/// Labelling inputs; crashed flights are kept up to the crash.
pub fn flight_records(scenario: &Scenario, logs: &[FlightLog]) -> Vec<FlightRecord> {
    logs.iter().enumerate().map(|(i, l)| l.flight_record(i as u32, scenario.vehicle.gravity)).collect()
}

pub fn label(scenario: &Scenario, logs: &[FlightLog], mode: LabelMode) -> Result<Dataset> {
    make_dataset(&flight_records(scenario, logs), mode)
}

pub fn spline_mode(scenario: &Scenario) -> LabelMode {
    LabelMode::Spline { spacing: scenario.config.train.knot_spacing }
}

pub fn train_model(scenario: &Scenario, dataset: &Dataset, seed: u64) -> Result<(MlpModel, TrainReport)> {
    train(dataset, &scenario.config.train_config(seed))
}

/// Model output along a logged flight, at every tick with a warm estimator.
pub fn replay(model: &MlpModel, log: &FlightLog, gravity: f64) -> Result<Vec<[f64; 6]>> {
    log.rows
        .iter()
        .filter(|r| r.indi.is_some())
        .map(|r| {
            let f = build_features(&r.vehicle, &r.frame, r.accel_filtered, gravity);
            model.predict_residual(&f, r.t).map(|e| e.to_array())
        })
        .collect()
}

/// Raw INDI estimates along a logged flight.
pub fn indi_trace(log: &FlightLog) -> Vec<[f64; 6]> {
    log.rows.iter().filter_map(|r| r.indi.map(|e| e.to_array())).collect()
}

/// Sum over channels of `Σ|x[k+1] − x[k]| / scale`.
pub fn total_variation(trace: &[[f64; 6]], scale: &[f64; 6]) -> f64 {
    trace
        .windows(2)
        .map(|w| (0..6).map(|c| (w[1][c] - w[0][c]).abs() / scale[c]).sum::<f64>())
        .sum()
}
