//! Single-layer LSTM sequence classifier, written from scratch.
//!
//! The network reads a sequence of normalized behavior samples from a zero
//! initial state and maps the final hidden state through a logistic readout to a
//! drowsiness probability. Gradients come from full backpropagation through time
//! and training is mini-batch SGD with momentum and gradient-norm clipping.

mod checkpoint;
mod grad;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use grad::{backward, backward_with, Gradients};
pub use model::{
    predict_batch, predict_batch_with, sigmoid, AlarmThreshold, Gate, LstmModel, DEFAULT_HIDDEN,
    INPUT_DIM,
};
pub use train::{train, EpochStats, TrainConfig, TrainOutcome};

use crate::features::Window;

/// A normalized input sequence with its binary label (`true` = drowsy).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub inputs: Vec<[f64; INPUT_DIM]>,
    pub drowsy: bool,
}

impl LabeledSequence {
    pub fn new(inputs: Vec<[f64; INPUT_DIM]>, drowsy: bool) -> Self {
        Self { inputs, drowsy }
    }

    pub fn from_window(window: &Window, drowsy: bool) -> Self {
        Self::new(window.inputs(), drowsy)
    }

    pub fn target(&self) -> f64 {
        if self.drowsy {
            1.0
        } else {
            0.0
        }
    }
}
