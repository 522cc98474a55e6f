use std::sync::Arc;

use rayon::prelude::*;

use super::config::Scenario;
use super::trial::{run_trial, ControllerKind, FlightLog, Predictor, TrialSpec};
use crate::error::{Error, Result};
use crate::learning::MlpModel;

/// Trained models per payload mode.
#[derive(Debug, Clone, Default)]
pub struct Models {
    pub no_payload: Option<Arc<MlpModel>>,
    pub payload: Option<Arc<MlpModel>>,
}

impl Models {
    pub fn predictor(&self, spec: &TrialSpec) -> Result<Predictor> {
        if !spec.controller.needs_model() {
            return Ok(Predictor::None);
        }
        let m = if spec.payload { &self.payload } else { &self.no_payload };
        m.clone().map(Predictor::Model).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "controller {} needs a {} model",
                spec.controller,
                if spec.payload { "payload" } else { "no-payload" }
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub error: f64,
    pub crashed: bool,
}

/// Aggregate over the trials of one controller × trajectory × payload cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub controller: ControllerKind,
    pub trajectory: String,
    pub payload: bool,
    /// Sorted by seed.
    pub trials: Vec<TrialResult>,
}

impl CellReport {
    pub fn new(controller: ControllerKind, trajectory: String, payload: bool, mut trials: Vec<TrialResult>) -> Self {
        trials.sort_by_key(|t| t.seed);
        CellReport { controller, trajectory, payload, trials }
    }

    pub fn crashed(&self) -> bool {
        self.trials.iter().any(|t| t.crashed)
    }

    /// Mean tracking error; infinite if any trial crashed.
    pub fn mean(&self) -> f64 {
        if self.crashed() || self.trials.is_empty() {
            return f64::INFINITY;
        }
        self.trials.iter().map(|t| t.error).sum::<f64>() / self.trials.len() as f64
    }

    /// Sample standard deviation; 0 for a single trial.
    pub fn std(&self) -> f64 {
        let n = self.trials.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.trials.iter().map(|t| t.error).sum::<f64>() / n as f64;
        (self.trials.iter().map(|t| (t.error - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    pub cells: Vec<CellReport>,
}

impl ErrorReport {
    pub fn cell(&self, controller: ControllerKind, trajectory: &str, payload: bool) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.controller == controller && c.trajectory == trajectory && c.payload == payload)
    }

    pub fn any_crash(&self) -> bool {
        self.cells.iter().any(CellReport::crashed)
    }

    /// Distinct controllers in first-appearance order.
    pub fn controllers(&self, payload: bool) -> Vec<ControllerKind> {
        let mut out = Vec::new();
        for c in self.cells.iter().filter(|c| c.payload == payload) {
            if !out.contains(&c.controller) {
                out.push(c.controller);
            }
        }
        out
    }

    pub fn trajectories(&self, payload: bool) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in self.cells.iter().filter(|c| c.payload == payload) {
            if !out.contains(&c.trajectory) {
                out.push(c.trajectory.clone());
            }
        }
        out
    }
}

/// Seeds shared by every cell, so cells are compared on paired trials.
pub fn trial_seeds(base: u64, trials: usize) -> Vec<u64> {
    (0..trials as u64).map(|k| base.wrapping_add(k)).collect()
}

#[derive(Debug, Clone)]
pub struct GridOutput {
    pub report: ErrorReport,
    /// Log of the first seed of every cell, in cell order.
    pub logs: Vec<FlightLog>,
}

/// Runs every spec for every seed in parallel. Results do not depend on the
/// thread count.
pub fn run_grid(scenario: &Scenario, specs: &[TrialSpec], models: &Models, seeds: &[u64]) -> Result<GridOutput> {
    if seeds.is_empty() {
        return Err(Error::Empty("seed list"));
    }
    let predictors = specs.iter().map(|s| models.predictor(s)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..specs.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let results: Vec<(usize, u64, TrialResult, Option<FlightLog>)> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let log = run_trial(scenario, &specs[i], &predictors[i], seed)?;
            let error = log.tracking_error()?;
            let result = TrialResult { seed, error, crashed: log.crashed };
            Ok((i, seed, result, (seed == seeds[0]).then_some(log)))
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(specs.len());
    let mut logs = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let mut trials = Vec::with_capacity(seeds.len());
        for (j, _, r, log) in &results {
            if *j == i {
                trials.push(*r);
                if let Some(l) = log {
                    logs.push(l.clone());
                }
            }
        }
        cells.push(CellReport::new(spec.controller, spec.trajectory.name(), spec.payload, trials));
    }
    Ok(GridOutput { report: ErrorReport { cells }, logs })
}
