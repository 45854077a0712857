//! Two-stage streaming runtime.
//!
//! The producer thread owns signal extraction: it reads frames, folds them into
//! [`ExtractorState`](crate::features::ExtractorState) and emits one
//! [`BehaviorSample`] per 100 ms tick. The consumer thread owns window assembly,
//! the LSTM and the baseline, and writes one [`DrowsinessEvent`] per sample to
//! an [`EventSink`]. The stages are joined by a bounded FIFO.
//!
//! In [`Mode::Replay`] the producer blocks while the queue is full, so no
//! sample is ever lost. In [`Mode::Realtime`] the producer is paced by sample
//! timestamps and, when the consumer falls behind, discards the oldest queued
//! sample and counts it in [`RunSummary::drops`]. A discarded sample breaks
//! window continuity, so the consumer restarts its warm-up after a gap.

use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, SendTimeoutError, Sender, TrySendError};
use serde::{Deserialize, Serialize};

use crate::baseline::{BaselineConfig, BaselineState};
use crate::features::{BehaviorSample, Sampler, SlidingWindow, SAMPLE_PERIOD_MS, WINDOW_LEN};
use crate::ingest::FrameDetection;
use crate::lstm::{AlarmThreshold, LstmModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// As fast as possible, blocking on a full queue.
    Replay,
    /// Paced by sample timestamps, dropping the oldest sample on a full queue.
    Realtime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub sample_period_ms: u64,
    pub window_len: usize,
    /// Run the LSTM on every `stride`-th full window; in between the latest
    /// probability is carried forward.
    pub stride: usize,
    pub queue_capacity: usize,
    pub probability_threshold: f64,
    pub mode: Mode,
    pub baseline: BaselineConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sample_period_ms: SAMPLE_PERIOD_MS,
            window_len: WINDOW_LEN,
            stride: 1,
            queue_capacity: 256,
            probability_threshold: 0.5,
            mode: Mode::Replay,
            baseline: BaselineConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<AlarmThreshold> {
        if self.sample_period_ms != SAMPLE_PERIOD_MS || self.window_len != WINDOW_LEN {
            return Err(Error::Config(format!(
                "the model expects {WINDOW_LEN} samples at {SAMPLE_PERIOD_MS} ms"
            )));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if self.queue_capacity < self.window_len {
            return Err(Error::Config(format!(
                "queue_capacity {} is smaller than the window length",
                self.queue_capacity
            )));
        }
        AlarmThreshold::new(self.probability_threshold)
    }
}

/// Per-sample timings in microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageLatency {
    /// Frame reading and feature extraction for this sample.
    pub produce_us: u64,
    /// Time spent in the queue.
    pub queue_us: u64,
    /// Windowing, LSTM and baseline.
    pub consume_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrowsinessEvent {
    pub index: u64,
    #[serde(flatten)]
    pub sample: BehaviorSample,
    pub lstm_probability: Option<f64>,
    pub lstm_alarm: bool,
    pub baseline_alarm: bool,
    pub latency: StageLatency,
}

impl DrowsinessEvent {
    pub fn t_ms(&self) -> u64 {
        self.sample.t_ms
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serialization is infallible")
    }
}

/// Receives events on the consumer thread.
pub trait EventSink: Send {
    fn emit(&mut self, event: &DrowsinessEvent) -> Result<()>;

    fn flush(&mut self) -> Result<()> {
        Ok(())
    }
}

impl EventSink for Vec<DrowsinessEvent> {
    fn emit(&mut self, event: &DrowsinessEvent) -> Result<()> {
        self.push(event.clone());
        Ok(())
    }
}

/// Adapts a closure into a sink.
pub struct FnSink<F>(pub F);

impl<F> EventSink for FnSink<F>
where
    F: FnMut(&DrowsinessEvent) -> Result<()> + Send,
{
    fn emit(&mut self, event: &DrowsinessEvent) -> Result<()> {
        (self.0)(event)
    }
}

/// Writes one JSON record per event.
pub struct JsonLinesSink<W: Write + Send> {
    out: W,
}

impl<W: Write + Send> JsonLinesSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write + Send> EventSink for JsonLinesSink<W> {
    fn emit(&mut self, event: &DrowsinessEvent) -> Result<()> {
        writeln!(self.out, "{}", event.to_json_line()).map_err(|e| Error::Sink(e.to_string()))
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::Sink(e.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Option<Mode>,
    pub samples_produced: u64,
    /// Samples taken off the queue, including any drained after an abort.
    pub samples_consumed: u64,
    pub events_emitted: u64,
    /// Samples discarded by the realtime overflow policy. Always 0 in replay.
    pub drops: u64,
    /// Samples received after a sink failure and discarded unprocessed.
    pub drained_after_abort: u64,
    pub wall_ms: f64,
    pub throughput_samples_per_s: f64,
    pub mean_consume_us: f64,
    pub max_consume_us: u64,
    pub mean_queue_us: f64,
    pub max_queue_us: u64,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("summary serialization is infallible")
    }
}

/// A failed run, with the accounting gathered up to the failure.
#[derive(Debug, thiserror::Error)]
#[error("pipeline aborted: {error}")]
pub struct PipelineError {
    pub summary: RunSummary,
    #[source]
    pub error: Error,
}

struct Queued {
    index: u64,
    sample: BehaviorSample,
    produce_us: u64,
    enqueued: Instant,
}

struct ProducerReport {
    produced: u64,
    drops: u64,
    error: Option<Error>,
}

struct ConsumerReport {
    consumed: u64,
    emitted: u64,
    drained: u64,
    consume_us_sum: u64,
    consume_us_max: u64,
    queue_us_sum: u64,
    queue_us_max: u64,
    error: Option<Error>,
}

/// Runs detection source → extraction → queue → classification → sink.
pub fn run<I>(
    config: &PipelineConfig,
    source: I,
    model: &LstmModel,
    sink: &mut dyn EventSink,
) -> Result<RunSummary, PipelineError>
where
    I: Iterator<Item = Result<FrameDetection>> + Send,
{
    let threshold = config.validate().map_err(|error| PipelineError {
        summary: RunSummary::default(),
        error,
    })?;
    let (tx, rx) = bounded::<Queued>(config.queue_capacity);
    let abort = AtomicBool::new(false);
    let started = Instant::now();

    let (producer, consumer) = std::thread::scope(|scope| {
        let overflow_rx = rx.clone();
        let abort_ref = &abort;
        let producer =
            scope.spawn(move || produce(config, source, tx, overflow_rx, abort_ref, started));
        let consumer = scope.spawn(|| consume(config, threshold, model, rx, sink, &abort));
        (
            producer.join().expect("producer thread panicked"),
            consumer.join().expect("consumer thread panicked"),
        )
    });

    let wall = started.elapsed();
    let wall_s = wall.as_secs_f64();
    let processed = consumer.consumed - consumer.drained;
    let summary = RunSummary {
        mode: Some(config.mode),
        samples_produced: producer.produced,
        samples_consumed: consumer.consumed,
        events_emitted: consumer.emitted,
        drops: producer.drops,
        drained_after_abort: consumer.drained,
        wall_ms: wall_s * 1e3,
        throughput_samples_per_s: if wall_s > 0.0 {
            processed as f64 / wall_s
        } else {
            0.0
        },
        mean_consume_us: mean(consumer.consume_us_sum, processed),
        max_consume_us: consumer.consume_us_max,
        mean_queue_us: mean(consumer.queue_us_sum, processed),
        max_queue_us: consumer.queue_us_max,
    };
    match consumer.error.or(producer.error) {
        Some(error) => Err(PipelineError { summary, error }),
        None => Ok(summary),
    }
}

fn mean(sum: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

fn micros(d: Duration) -> u64 {
    d.as_micros().min(u128::from(u64::MAX)) as u64
}

fn produce<I>(
    config: &PipelineConfig,
    source: I,
    tx: Sender<Queued>,
    overflow_rx: Receiver<Queued>,
    abort: &AtomicBool,
    started: Instant,
) -> ProducerReport
where
    I: Iterator<Item = Result<FrameDetection>>,
{
    let mut report = ProducerReport {
        produced: 0,
        drops: 0,
        error: None,
    };
    let mut samples = Sampler::new(source);
    loop {
        if abort.load(Ordering::Acquire) {
            break;
        }
        let work_started = Instant::now();
        let sample = match samples.next() {
            None => break,
            Some(Ok(s)) => s,
            Some(Err(e)) => {
                report.error = Some(e);
                break;
            }
        };
        let produce_us = micros(work_started.elapsed());
        if config.mode == Mode::Realtime {
            let due = started + Duration::from_millis(sample.t_ms);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
        let mut item = Queued {
            index: report.produced,
            sample,
            produce_us,
            enqueued: Instant::now(),
        };
        report.produced += 1;
        match config.mode {
            Mode::Replay => {
                // wake up periodically so an aborted consumer cannot wedge us
                loop {
                    match tx.send_timeout(item, Duration::from_millis(50)) {
                        Ok(()) => break,
                        Err(SendTimeoutError::Timeout(back)) if !abort.load(Ordering::Acquire) => {
                            item = back
                        }
                        Err(_) => return report,
                    }
                }
            }
            Mode::Realtime => loop {
                match tx.try_send(item) {
                    Ok(()) => break,
                    Err(TrySendError::Full(back)) => {
                        item = back;
                        if overflow_rx.try_recv().is_ok() {
                            report.drops += 1;
                        }
                    }
                    Err(TrySendError::Disconnected(_)) => return report,
                }
            },
        }
    }
    report
}

fn consume(
    config: &PipelineConfig,
    threshold: AlarmThreshold,
    model: &LstmModel,
    rx: Receiver<Queued>,
    sink: &mut dyn EventSink,
    abort: &AtomicBool,
) -> ConsumerReport {
    let mut report = ConsumerReport {
        consumed: 0,
        emitted: 0,
        drained: 0,
        consume_us_sum: 0,
        consume_us_max: 0,
        queue_us_sum: 0,
        queue_us_max: 0,
        error: None,
    };
    let mut window = SlidingWindow::new();
    let mut baseline = BaselineState::new(config.baseline);
    let mut probability: Option<f64> = None;
    let mut full_windows: u64 = 0;

    for item in rx.iter() {
        report.consumed += 1;
        if report.error.is_some() {
            report.drained += 1;
            continue;
        }
        let dequeued = Instant::now();
        let queue_us = micros(dequeued.duration_since(item.enqueued));

        let step = (|| -> Result<DrowsinessEvent> {
            let full = match window.push(item.sample) {
                Ok(w) => w,
                Err(Error::SampleGap { .. }) if config.mode == Mode::Realtime => {
                    window.clear();
                    probability = None;
                    full_windows = 0;
                    window.push(item.sample)?
                }
                Err(e) => return Err(e),
            };
            if let Some(w) = full {
                if full_windows.is_multiple_of(config.stride as u64) {
                    probability = Some(model.predict(&w)?);
                }
                full_windows += 1;
            }
            let baseline_alarm = baseline.advance(&item.sample)?;
            Ok(DrowsinessEvent {
                index: item.index,
                sample: item.sample,
                lstm_probability: probability,
                lstm_alarm: probability.is_some_and(|p| threshold.alarm(p)),
                baseline_alarm,
                latency: StageLatency {
                    produce_us: item.produce_us,
                    queue_us,
                    consume_us: 0,
                },
            })
        })();

        let result = step.and_then(|mut event| {
            let consume_us = micros(dequeued.elapsed());
            event.latency.consume_us = consume_us;
            report.consume_us_sum += consume_us;
            report.consume_us_max = report.consume_us_max.max(consume_us);
            report.queue_us_sum += queue_us;
            report.queue_us_max = report.queue_us_max.max(queue_us);
            sink.emit(&event)
        });
        match result {
            Ok(()) => report.emitted += 1,
            Err(e) => {
                abort.store(true, Ordering::Release);
                report.error = Some(e);
            }
        }
    }
    if report.error.is_none() {
        if let Err(e) = sink.flush() {
            report.error = Some(e);
        }
    }
    report
}

/// Probability present iff `index` (0-based) completes a first full window.
pub fn warmup_semantics(event: &DrowsinessEvent) -> Option<f64> {
    event.lstm_probability
}
