use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, batch_gradient, evaluate, AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::network::{Network, Sample};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Epochs without a new strict validation minimum before stopping.
    pub patience: usize,
    pub minibatch_size: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 3000,
            patience: 100,
            minibatch_size: 128,
            seed: 0,
            validation_fraction: 0.1,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument("max_epochs must be at least 1".into()));
        }
        if self.minibatch_size == 0 {
            return Err(Error::InvalidArgument("minibatch_size must be at least 1".into()));
        }
        if self.patience > self.max_epochs {
            return Err(Error::InvalidArgument(format!(
                "patience ({}) exceeds max_epochs ({})",
                self.patience, self.max_epochs
            )));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.adam.learning_rate.is_nan() || self.adam.learning_rate <= 0.0 {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }

    /// Number of held-out samples for a dataset of `len` samples; at least
    /// one sample always stays in the training split.
    pub fn validation_count(&self, len: usize) -> usize {
        ((self.validation_fraction * len as f64).floor() as usize).min(len.saturating_sub(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation MSE.
    pub network: Network,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub stopped_early: bool,
}

/// Minibatch Adam with validation-based early stopping.
///
/// The validation split is drawn once from `config.seed`; the training split
/// is reshuffled every epoch from the same stream. If the split would leave
/// no validation samples, validation MSE is measured on the training split.
pub fn train(mut net: Network, dataset: &[Sample], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for s in dataset {
        net.check_input(&s.input.view())?;
        net.check_target(&s.target.view())?;
    }
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let n_val = config.validation_count(dataset.len());
    let val: Vec<&Sample> = order[..n_val].iter().map(|&i| &dataset[i]).collect();
    let mut train_idx: Vec<usize> = order[n_val..].to_vec();
    train_idx.sort_unstable();

    let mut state = AdamState::new(&net, config.adam);
    let mut history = Vec::new();
    let mut best = (net.clone(), f64::INFINITY, 0usize);
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        train_idx.shuffle(&mut rng);
        for batch in train_idx.chunks(config.minibatch_size) {
            let refs: Vec<&Sample> = batch.iter().map(|&i| &dataset[i]).collect();
            let (loss, grads) = match batch_gradient(&net, &refs) {
                Ok(v) => v,
                Err(Error::NumericOverflow { .. }) => return Err(Error::Diverged { epoch, history }),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged { epoch, history });
            }
            adam_step(&mut net, &grads, &mut state)?;
        }
        let train_refs: Vec<&Sample> = train_idx.iter().map(|&i| &dataset[i]).collect();
        let (train_mse, val_mse) = match (
            evaluate(&net, &train_refs),
            if val.is_empty() { evaluate(&net, &train_refs) } else { evaluate(&net, &val) },
        ) {
            (Ok(t), Ok(v)) if t.is_finite() && v.is_finite() => (t, v),
            (Err(e), _) | (_, Err(e)) if !matches!(e, Error::NumericOverflow { .. }) => return Err(e),
            _ => return Err(Error::Diverged { epoch, history }),
        };
        history.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        if val_mse < best.1 {
            best = (net.clone(), val_mse, epoch);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= config.patience {
            stopped_early = epoch < config.max_epochs;
            break;
        }
    }

    Ok(TrainOutcome {
        network: best.0,
        best_val_mse: best.1,
        best_epoch: best.2,
        history,
        stopped_early,
    })
}
