use std::path::Path;

use super::features::{NormStats, FEATURE_DIM, FEATURE_NAMES, LABEL_DIM, LABEL_NAMES};
use super::spline::fit_smoothing_spline;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSample {
    pub t: f64,
    pub features: [f64; FEATURE_DIM],
    pub label: [f64; LABEL_DIM],
    /// Identifier of the flight the sample came from.
    pub flight: u32,
}

/// Per-flight inputs for labelling: aligned timestamps, features and raw
/// estimator outputs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlightRecord {
    pub id: u32,
    pub times: Vec<f64>,
    pub features: Vec<[f64; FEATURE_DIM]>,
    pub raw_labels: Vec<[f64; LABEL_DIM]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelMode {
    /// Least-squares spline through the raw estimates, knots every `spacing` s.
    Spline { spacing: f64 },
    /// Raw estimator outputs.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<TrainingSample>,
}

/// Labels each flight and concatenates the results.
pub fn make_dataset(flights: &[FlightRecord], mode: LabelMode) -> Result<Dataset> {
    if flights.is_empty() {
        return Err(Error::Empty("flight records"));
    }
    let mut samples = Vec::new();
    for f in flights {
        let n = f.times.len();
        if f.features.len() != n || f.raw_labels.len() != n {
            return Err(Error::Misaligned(format!(
                "flight {}: {n} timestamps, {} feature rows, {} label rows",
                f.id,
                f.features.len(),
                f.raw_labels.len()
            )));
        }
        if n == 0 {
            continue;
        }
        let labels: Vec<[f64; LABEL_DIM]> = match mode {
            LabelMode::Raw => f.raw_labels.clone(),
            LabelMode::Spline { spacing } => {
                let channels: Vec<Vec<f64>> = (0..LABEL_DIM).map(|c| f.raw_labels.iter().map(|l| l[c]).collect()).collect();
                let spline = fit_smoothing_spline(&f.times, &channels, spacing)?;
                f.times.iter().map(|&t| std::array::from_fn(|c| spline.evaluate(c, t))).collect()
            }
        };
        for ((&t, x), y) in f.times.iter().zip(&f.features).zip(labels) {
            if x.iter().chain(&y).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("training sample"));
            }
            samples.push(TrainingSample { t, features: *x, label: y, flight: f.id });
        }
    }
    if samples.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    Ok(Dataset { samples })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn norm_stats(&self) -> Result<NormStats> {
        NormStats::from_data(
            self.samples.iter().map(|s| &s.features[..]),
            self.samples.iter().map(|s| &s.label[..]),
            FEATURE_DIM,
            LABEL_DIM,
        )
    }

    pub fn header() -> Vec<String> {
        std::iter::once("t")
            .chain(FEATURE_NAMES)
            .chain(LABEL_NAMES)
            .chain(std::iter::once("flight"))
            .map(str::to_string)
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(Self::header()).map_err(|e| Error::csv(path, e))?;
        let mut row = Vec::with_capacity(2 + FEATURE_DIM + LABEL_DIM);
        for s in &self.samples {
            row.clear();
            row.push(s.t.to_string());
            row.extend(s.features.iter().chain(&s.label).map(|v| v.to_string()));
            row.push(s.flight.to_string());
            w.write_record(&row).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let header: Vec<String> = r.headers().map_err(|e| Error::csv(path, e))?.iter().map(str::to_string).collect();
        if header != Self::header() {
            return Err(Error::parse(path, "unexpected dataset header"));
        }
        let mut samples = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::parse(path, "short row"))?
                    .parse::<f64>()
                    .map_err(|e| Error::parse(path, e.to_string()))
            };
            let t = num(0)?;
            let mut features = [0.0; FEATURE_DIM];
            for (i, f) in features.iter_mut().enumerate() {
                *f = num(1 + i)?;
            }
            let mut label = [0.0; LABEL_DIM];
            for (i, l) in label.iter_mut().enumerate() {
                *l = num(1 + FEATURE_DIM + i)?;
            }
            let flight = rec
                .get(1 + FEATURE_DIM + LABEL_DIM)
                .ok_or_else(|| Error::parse(path, "short row"))?
                .parse::<u32>()
                .map_err(|e| Error::parse(path, e.to_string()))?;
            samples.push(TrainingSample { t, features, label, flight });
        }
        Ok(Dataset { samples })
    }
}
