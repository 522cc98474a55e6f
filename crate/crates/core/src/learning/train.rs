use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Dataset;
use super::features::{FEATURE_DIM, LABEL_DIM};
use super::mlp::{Adam, Mlp};
use super::model::MlpModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Multiplicative decay applied every `decay_every` epochs.
    pub decay: f64,
    pub decay_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Share of samples held out, taken as contiguous blocks.
    pub validation_fraction: f64,
    /// Samples per validation block.
    pub block_size: usize,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-4,
            decay: 0.92,
            decay_every: 10,
            epochs: 128,
            batch_size: 512,
            seed: 0,
            validation_fraction: 0.1,
            block_size: 500,
            hidden: vec![24, 24, 24],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::InvalidParameter("decay factor must lie in (0, 1)".into()));
        }
        if self.decay_every == 0 || self.epochs == 0 || self.batch_size == 0 || self.block_size == 0 {
            return Err(Error::InvalidParameter("epochs, batch size, decay period and block size must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.validation_fraction) {
            return Err(Error::InvalidParameter("validation fraction must lie in [0, 0.5)".into()));
        }
        Ok(())
    }

    /// Step schedule: `lr₀ · decay^⌊epoch / decay_every⌋`.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.decay.powi((epoch / self.decay_every) as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    /// NaN when nothing is held out.
    pub validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["epoch", "lr", "train_loss", "val_loss"]).map_err(|e| Error::csv(path, e))?;
        for r in &self.epochs {
            w.write_record([
                r.epoch.to_string(),
                r.learning_rate.to_string(),
                r.train_loss.to_string(),
                r.validation_loss.to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Splits `0..n` into training and validation rows; every `round(1/f)`-th
/// block of `block` consecutive rows is held out.
pub fn split_rows(n: usize, fraction: f64, block: usize) -> (Vec<usize>, Vec<usize>) {
    if fraction <= 0.0 {
        return ((0..n).collect(), Vec::new());
    }
    let period = (1.0 / fraction).round().max(2.0) as usize;
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for i in 0..n {
        if (i / block) % period == period - 1 {
            val.push(i);
        } else {
            train.push(i);
        }
    }
    (train, val)
}

/// Trains `network` in place on already-normalised row-major data.
pub fn train_network(
    network: &mut Mlp,
    inputs: &[f64],
    targets: &[f64],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    let (ni, no) = (network.input_dim(), network.output_dim());
    let n = inputs.len() / ni;
    if n == 0 || inputs.len() != n * ni || targets.len() != n * no {
        return Err(Error::LengthMismatch { expected: n * no, actual: targets.len() });
    }
    let (mut train_rows, val_rows) = split_rows(n, config.validation_fraction, config.block_size);
    if train_rows.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x005e_ed0f_7a1e);
    let mut adam = Adam::new(network.params().len());
    let mut report = TrainReport::default();
    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        train_rows.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in train_rows.chunks(config.batch_size) {
            let (loss, grad) = network.loss_and_gradient(inputs, targets, batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch });
            }
            adam.step(network.params_mut(), &grad, lr);
            total += loss * batch.len() as f64;
        }
        let train_loss = total / train_rows.len() as f64;
        let validation_loss = if val_rows.is_empty() { f64::NAN } else { network.loss(inputs, targets, &val_rows) };
        report.epochs.push(EpochRecord { epoch, learning_rate: lr, train_loss, validation_loss });
    }
    Ok(report)
}

/// Normalises the dataset, initialises a 19 → hidden → 6 network and runs
/// the full schedule.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let stats = dataset.norm_stats()?;
    let mut inputs = vec![0.0; dataset.len() * FEATURE_DIM];
    let mut targets = vec![0.0; dataset.len() * LABEL_DIM];
    for (i, s) in dataset.samples.iter().enumerate() {
        stats.normalize_input(&s.features, &mut inputs[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]);
        stats.normalize_output(&s.label, &mut targets[i * LABEL_DIM..(i + 1) * LABEL_DIM]);
    }
    let mut dims = vec![FEATURE_DIM];
    dims.extend(&config.hidden);
    dims.push(LABEL_DIM);
    let mut network = Mlp::new(&dims, config.seed)?;
    let report = train_network(&mut network, &inputs, &targets, config)?;
    Ok((MlpModel::new(network, stats)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate_at(0), 3e-4);
        assert_eq!(c.learning_rate_at(9), 3e-4);
        assert!((c.learning_rate_at(10) - 2.76e-4).abs() < 1e-18);
        assert!((c.learning_rate_at(120) - 3e-4 * 0.92f64.powi(12)).abs() < 1e-18);
        assert!((c.learning_rate_at(127) - 3e-4 * 0.92f64.powi(12)).abs() < 1e-18);
    }

    #[test]
    fn split_holds_out_blocks() {
        let (train, val) = split_rows(10_000, 0.1, 500);
        assert_eq!(val.len(), 1000);
        assert_eq!(train.len(), 9000);
        assert_eq!(val[0], 4500);
        assert!(val.windows(2).take(499).all(|w| w[1] == w[0] + 1));
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = TrainConfig { decay: 1.0, ..TrainConfig::default() };
        assert!(c.validate().is_err());
        c.decay = 0.9;
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn non_finite_data_aborts() {
        let mut net = Mlp::new(&[2, 3, 1], 0).unwrap();
        let x = vec![f64::NAN, 0.0, 1.0, 1.0];
        let y = vec![0.0, 1.0];
        let c = TrainConfig { epochs: 2, batch_size: 2, validation_fraction: 0.0, ..TrainConfig::default() };
        assert!(matches!(train_network(&mut net, &x, &y, &c), Err(Error::NonFiniteLoss { epoch: 0 })));
    }
}
