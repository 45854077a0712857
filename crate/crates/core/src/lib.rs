//! Drowsiness detection from temporal facial behavior.
//!
//! Per-frame detections (eyes, mouth, yawn, ...) from any external detector are
//! folded into a two-dimensional signal sampled every 100 ms: the duration of the
//! current eye closure and the time elapsed since the last yawn. Five-second
//! sliding windows of that signal are classified by a small LSTM, and the result is
//! reported next to a threshold-only baseline. The [`pipeline`] module runs signal
//! extraction and classification on two threads joined by a bounded queue.
//!
//! Batch workloads (training gradients, batch inference, dataset generation) fan
//! out over rayon when the `parallel` feature is enabled (the default) and run
//! sequentially otherwise. Results are identical in both modes.

pub mod baseline;
pub mod error;
pub mod eval;
pub mod exec;
pub mod features;
pub mod ingest;
pub mod lstm;
pub mod pipeline;
pub mod simulator;

pub use error::{Error, Result};
