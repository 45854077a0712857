use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grad::{backward_with, bce_from_logit};
use super::model::{LstmModel, DEFAULT_HIDDEN};
use super::LabeledSequence;
use crate::exec::{self, Exec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Global L2 gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub hidden_dim: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            learning_rate: 0.05,
            momentum: 0.9,
            clip_norm: Some(5.0),
            hidden_dim: DEFAULT_HIDDEN,
            validation_fraction: 0.1,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return bad("clip_norm must be positive");
            }
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be at least 1");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must be in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: LstmModel,
    pub best_epoch: usize,
    pub trace: Vec<EpochStats>,
    pub train_size: usize,
    pub val_size: usize,
}

/// Mini-batch SGD with momentum over a seeded 90/10 train/validation split.
pub fn train(dataset: &[LabeledSequence], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let drowsy = dataset.iter().filter(|s| s.drowsy).count();
    if drowsy == 0 || drowsy == dataset.len() {
        return Err(Error::Dataset(
            "training data must contain both classes".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((dataset.len() as f64 * config.validation_fraction).round() as usize)
        .clamp(1, dataset.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let val: Vec<LabeledSequence> = val_idx.iter().map(|&i| dataset[i].clone()).collect();
    let mut train_idx = train_idx.to_vec();

    let mut model = LstmModel::init(config.hidden_dim, config.seed);
    let mut velocity = vec![0.0; model.params().len()];
    let mut best = (f64::INFINITY, model.clone(), 0);
    let mut trace = Vec::with_capacity(config.epochs);
    let mut batch = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut grad_norm_sum = 0.0;
        let mut n_batches = 0;
        for chunk in train_idx.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| dataset[i].clone()));
            let (mut grads, loss) = backward_with(&model, &batch, config.exec)?;
            grad_norm_sum += grads.norm();
            if let Some(c) = config.clip_norm {
                grads.clip_norm(c);
            }
            for ((p, v), g) in model
                .params_mut()
                .iter_mut()
                .zip(&mut velocity)
                .zip(&grads.values)
            {
                *v = config.momentum * *v - config.learning_rate * g;
                *p += *v;
            }
            loss_sum += loss;
            n_batches += 1;
        }
        if !model.is_finite() {
            return Err(Error::NonFinite("model parameters after update"));
        }
        let (val_loss, val_accuracy) = evaluate_loss(&model, &val, config.exec)?;
        trace.push(EpochStats {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            val_loss,
            val_accuracy,
            grad_norm: grad_norm_sum / n_batches as f64,
        });
        if val_loss < best.0 {
            best = (val_loss, model.clone(), epoch);
        }
    }

    Ok(TrainOutcome {
        model: best.1,
        best_epoch: best.2,
        trace,
        train_size: train_idx.len(),
        val_size: val.len(),
    })
}

/// Mean BCE and accuracy at the 0.5 cut-off.
fn evaluate_loss(model: &LstmModel, data: &[LabeledSequence], exec: Exec) -> Result<(f64, f64)> {
    let logits: Vec<f64> = exec::map_ordered(exec, data, |_, s| model.forward_logit(&s.inputs))
        .into_iter()
        .collect::<Result<_>>()?;
    let mut loss = 0.0;
    let mut correct = 0;
    for (z, s) in logits.iter().zip(data) {
        loss += bce_from_logit(*z, s.target());
        if (*z >= 0.0) == s.drowsy {
            correct += 1;
        }
    }
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}
