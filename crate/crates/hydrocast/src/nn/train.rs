//! Mini-batch SGD with inverse-time learning-rate decay, L2 regularization
//! on weights (not biases), and best-validation checkpointing.

use crate::error::{Error, Result};
use crate::window::WindowDataset;

use super::blstm::{BlstmGradients, BlstmModel};

/// Optimizer and schedule settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Initial learning rate.
    pub learning_rate: f64,
    /// Inverse-time decay constant: `lr(epoch) = lr0 / (1 + decay * epoch)`.
    pub lr_decay: f64,
    /// L2 regularization strength, applied to weight matrices only.
    pub l2: f64,
    /// Seed for parameter initialization and batch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        // The reference training regime: 50 epochs of mini-batch SGD with
        // batch size 128, lr 0.01, decay 0.001, l2 0.001.
        Self {
            epochs: 50,
            batch_size: 128,
            learning_rate: 0.01,
            lr_decay: 0.001,
            l2: 0.001,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.lr_decay < 0.0 || self.l2 < 0.0 {
            return Err(Error::InvalidConfig("decay and l2 must be non-negative".into()));
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate / (1.0 + self.lr_decay * epoch as f64)
    }
}

/// One SGD update: `theta <- theta - lr * (grad + l2 * theta)`, with the L2
/// term skipped for biases.
pub fn sgd_step(
    model: &mut BlstmModel,
    grads: &BlstmGradients,
    epoch: usize,
    config: &TrainConfig,
) {
    let lr = config.learning_rate_at(epoch);
    let l2 = config.l2;
    for (param, grad) in model.param_entries_mut().iter_mut().zip(grads.param_entries()) {
        debug_assert_eq!(param.name, grad.name);
        if param.is_bias || l2 == 0.0 {
            for (p, g) in param.values.iter_mut().zip(grad.values) {
                *p -= lr * g;
            }
        } else {
            for (p, g) in param.values.iter_mut().zip(grad.values) {
                *p -= lr * (g + l2 * *p);
            }
        }
    }
}

/// Loss statistics for one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub learning_rate: f64,
}

/// Result of a training run: the best snapshot and the full loss history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameter snapshot with the minimum validation MSE.
    pub model: BlstmModel,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub history: Vec<EpochStats>,
}

/// Mean validation/test MSE of a model over a whole dataset.
pub fn dataset_mse(model: &BlstmModel, dataset: &WindowDataset) -> Result<f64> {
    let inputs: Vec<&[f64]> = (0..dataset.len()).map(|n| dataset.input(n)).collect();
    let targets: Vec<&[f64]> = (0..dataset.len()).map(|n| dataset.target(n)).collect();
    model.batch_loss(&inputs, &targets)
}

/// Train with shuffled mini-batches for `config.epochs` epochs, evaluating
/// the full validation set after each epoch and returning the snapshot with
/// minimum validation MSE (earliest epoch wins ties). Deterministic in
/// `config.seed`.
pub fn train(
    model: BlstmModel,
    train_data: &WindowDataset,
    val_data: &WindowDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_data.is_empty() || val_data.is_empty() {
        return Err(Error::InvalidConfig("training and validation sets must be nonempty".into()));
    }

    let mut model = model;
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_val_mse = f64::INFINITY;
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let shuffle_seed = config.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut loss_weighted = 0.0;
        for batch in train_data.batches(config.batch_size, shuffle_seed)? {
            let inputs: Vec<&[f64]> = batch.iter().map(|&n| train_data.input(n)).collect();
            let targets: Vec<&[f64]> = batch.iter().map(|&n| train_data.target(n)).collect();
            let (grads, loss) = model.backward(&inputs, &targets)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            loss_weighted += loss * batch.len() as f64;
            sgd_step(&mut model, &grads, epoch, config);
        }
        let train_mse = loss_weighted / train_data.len() as f64;
        let val_mse = dataset_mse(&model, val_data)?;
        if !val_mse.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push(EpochStats {
            epoch,
            train_mse,
            val_mse,
            learning_rate: config.learning_rate_at(epoch),
        });
        log::debug!("epoch {epoch}: train mse {train_mse:.6}, val mse {val_mse:.6}");
        if val_mse < best_val_mse {
            best_val_mse = val_mse;
            best_epoch = epoch;
            best = model.clone();
        }
    }

    Ok(TrainOutcome { model: best, best_epoch, best_val_mse, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::blstm::BlstmConfig;
    use crate::reduce::{reduce, ReductionConfig};
    use crate::series::SpatioTemporalSeries;
    use crate::window::{extract_windows, WindowSpec};
    use chrono::NaiveDate;

    fn dataset(days: usize, value: impl Fn(usize) -> f64) -> WindowDataset {
        let values: Vec<f64> = (0..days).map(value).collect();
        let series = SpatioTemporalSeries::new(
            NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
            vec![1],
            vec!["x".into()],
            values,
        )
        .unwrap();
        let channels = reduce(&series, &ReductionConfig::new(1, 1).unwrap()).unwrap();
        let spec = WindowSpec::new(6, 2, vec!["x".into()], vec!["x".into()]).unwrap();
        extract_windows(&channels, &spec).unwrap()
    }

    fn small_model() -> BlstmModel {
        BlstmModel::init(
            BlstmConfig {
                num_predictors: 1,
                hidden: 4,
                input_steps: 6,
                output_steps: 2,
                num_responses: 1,
            },
            7,
        )
        .unwrap()
    }

    #[test]
    fn learning_rate_schedule() {
        let config = TrainConfig::default();
        assert_eq!(config.learning_rate_at(0), 0.01);
        let lr49 = config.learning_rate_at(49);
        assert!((lr49 - 0.0095329).abs() < 1e-7, "{lr49}");
    }

    #[test]
    fn zero_gradients_leave_model_unchanged() {
        let mut model = small_model();
        let before = model.clone();
        let x: Vec<f64> = (0..6).map(|k| k as f64 * 0.1).collect();
        let target = model.forward(&x).unwrap();
        let (grads, _) = model.backward(&[&x], &[&target]).unwrap();
        // Perfect prediction: every gradient is zero; with l2 = 0 the step is
        // a no-op.
        let mut config = TrainConfig::default();
        config.l2 = 0.0;
        sgd_step(&mut model, &grads, 0, &config);
        assert_eq!(model, before);
    }

    #[test]
    fn single_step_descends() {
        let model = small_model();
        let x: Vec<f64> = (0..6).map(|k| (k as f64 * 0.9).sin()).collect();
        let target = vec![0.4, -0.3];
        let (grads, loss_before) = model.backward(&[&x], &[&target]).unwrap();
        let mut stepped = model.clone();
        let config = TrainConfig {
            learning_rate: 1e-4,
            l2: 0.0,
            ..TrainConfig::default()
        };
        sgd_step(&mut stepped, &grads, 0, &config);
        let loss_after = stepped.batch_loss(&[&x], &[&target]).unwrap();
        assert!(loss_after < loss_before, "{loss_after} !< {loss_before}");
    }

    #[test]
    fn l2_skips_biases() {
        let mut model = small_model();
        model.output_bias = vec![5.0];
        let zero_grads = {
            let x: Vec<f64> = vec![0.0; 6];
            let target = model.forward(&x).unwrap();
            model.backward(&[&x], &[&target]).unwrap().0
        };
        let weight_before = model.output_weights.get(0, 0);
        let config = TrainConfig { l2: 0.5, learning_rate: 0.1, ..TrainConfig::default() };
        sgd_step(&mut model, &zero_grads, 0, &config);
        assert_eq!(model.output_bias[0], 5.0);
        let expected = weight_before - 0.1 * 0.5 * weight_before;
        assert!((model.output_weights.get(0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn constant_target_converges() {
        // Constant response: representable by the output bias alone, so
        // validation MSE must fall below 1e-3 within 50 epochs.
        let train_data = dataset(60, |_| 0.7);
        let val_data = dataset(20, |_| 0.7);
        let config = TrainConfig { batch_size: 16, seed: 3, ..TrainConfig::default() };
        let outcome = train(small_model(), &train_data, &val_data, &config).unwrap();
        assert!(
            outcome.best_val_mse < 1e-3,
            "best val mse {} after {} epochs",
            outcome.best_val_mse,
            config.epochs
        );
    }

    #[test]
    fn best_model_matches_history_minimum() {
        let train_data = dataset(80, |t| (t as f64 * 0.23).sin());
        let val_data = dataset(30, |t| (t as f64 * 0.23 + 0.5).sin());
        let config =
            TrainConfig { epochs: 8, batch_size: 16, seed: 5, ..TrainConfig::default() };
        let outcome = train(small_model(), &train_data, &val_data, &config).unwrap();
        let min_val = outcome
            .history
            .iter()
            .map(|e| e.val_mse)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(outcome.best_val_mse, min_val);
        let returned_val = dataset_mse(&outcome.model, &val_data).unwrap();
        assert!((returned_val - min_val).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_history() {
        let train_data = dataset(70, |t| (t as f64 * 0.31).cos());
        let val_data = dataset(25, |t| (t as f64 * 0.31).cos());
        let config =
            TrainConfig { epochs: 4, batch_size: 8, seed: 11, ..TrainConfig::default() };
        let a = train(small_model(), &train_data, &val_data, &config).unwrap();
        let b = train(small_model(), &train_data, &val_data, &config).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
    }
}
