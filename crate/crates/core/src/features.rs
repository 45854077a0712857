//! Temporal behavior signal.
//!
//! A frame stream is folded into [`ExtractorState`], which is sampled every
//! 100 ms into a [`BehaviorSample`]: how long the eyes have been continuously
//! closed and how long ago the last yawn was seen. Consecutive samples are cut
//! into 50-sample [`Window`]s with stride 1.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ingest::{DetectionLabel, FrameDetection};
use crate::{Error, Result};

pub const SAMPLE_PERIOD_MS: u64 = 100;
pub const WINDOW_LEN: usize = 50;
pub const CLOSURE_CAP_MS: u32 = 10_000;
pub const YAWN_MEMORY_MS: u32 = 120_000;

/// One 100 ms sample of the two-dimensional behavior signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorSample {
    pub t_ms: u64,
    /// Current contiguous closure, 0 while open, clipped at [`CLOSURE_CAP_MS`].
    pub eye_closure_ms: u32,
    /// Time since the last yawn, saturated at [`YAWN_MEMORY_MS`]. Saturated
    /// before any yawn has been seen.
    pub since_yawn_ms: u32,
}

impl BehaviorSample {
    /// Network input: both channels scaled into `[0, 1]`.
    pub fn normalized(&self) -> [f64; 2] {
        [
            f64::from(self.eye_closure_ms) / f64::from(CLOSURE_CAP_MS),
            f64::from(self.since_yawn_ms) / f64::from(YAWN_MEMORY_MS),
        ]
    }
}

/// Running quantities behind the behavior signal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractorState {
    pub eye_closed_since: Option<u64>,
    pub last_yawn_at: Option<u64>,
    pub last_frame_ms: Option<u64>,
}

impl ExtractorState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies one frame.
    ///
    /// A frame counts as closed when it has at least one `closed_eye` and no
    /// `opened_eye` detection; any `opened_eye` ends a closure. Frames without
    /// eye detections keep the current eye state.
    pub fn update(&mut self, frame: &FrameDetection) -> Result<()> {
        if let Some(prev) = self.last_frame_ms {
            if frame.timestamp_ms <= prev {
                return Err(Error::OutOfOrder {
                    previous: prev,
                    got: frame.timestamp_ms,
                });
            }
        }
        let opened = frame.has(DetectionLabel::OpenedEye);
        let closed = frame.has(DetectionLabel::ClosedEye);
        if opened {
            self.eye_closed_since = None;
        } else if closed && self.eye_closed_since.is_none() {
            self.eye_closed_since = Some(frame.timestamp_ms);
        }
        if frame.has(DetectionLabel::Yawn) {
            self.last_yawn_at = Some(frame.timestamp_ms);
        }
        self.last_frame_ms = Some(frame.timestamp_ms);
        Ok(())
    }

    /// Reads the signal at `t_ms`. The state must already reflect every frame
    /// with timestamp `<= t_ms`.
    pub fn sample(&self, t_ms: u64) -> BehaviorSample {
        debug_assert_eq!(t_ms % SAMPLE_PERIOD_MS, 0);
        let eye_closure_ms = self.eye_closed_since.map_or(0, |since| {
            t_ms.saturating_sub(since).min(u64::from(CLOSURE_CAP_MS)) as u32
        });
        let since_yawn_ms = self.last_yawn_at.map_or(YAWN_MEMORY_MS, |y| {
            t_ms.saturating_sub(y).min(u64::from(YAWN_MEMORY_MS)) as u32
        });
        BehaviorSample {
            t_ms,
            eye_closure_ms,
            since_yawn_ms,
        }
    }
}

/// Turns a frame stream into samples at 0, 100, 200, ... ms.
///
/// Ticks are emitted up to and including the last tick not later than the
/// final frame. An empty stream yields no samples.
pub struct Sampler<I> {
    frames: I,
    state: ExtractorState,
    pending: Option<FrameDetection>,
    next_tick: u64,
    exhausted: bool,
    failed: bool,
}

impl<I> Sampler<I>
where
    I: Iterator<Item = Result<FrameDetection>>,
{
    pub fn new(frames: I) -> Self {
        Self {
            frames,
            state: ExtractorState::new(),
            pending: None,
            next_tick: 0,
            exhausted: false,
            failed: false,
        }
    }

    pub fn state(&self) -> &ExtractorState {
        &self.state
    }

    fn fail(&mut self, e: Error) -> Option<Result<BehaviorSample>> {
        self.failed = true;
        Some(Err(e))
    }
}

impl<I> Iterator for Sampler<I>
where
    I: Iterator<Item = Result<FrameDetection>>,
{
    type Item = Result<BehaviorSample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            if self.pending.is_none() && !self.exhausted {
                match self.frames.next() {
                    Some(Ok(f)) => self.pending = Some(f),
                    Some(Err(e)) => return self.fail(e),
                    None => self.exhausted = true,
                }
            }
            match self.pending.take() {
                Some(f) if f.timestamp_ms <= self.next_tick => {
                    if let Err(e) = self.state.update(&f) {
                        return self.fail(e);
                    }
                }
                other => {
                    self.pending = other;
                    break;
                }
            }
        }
        let covered = self.pending.is_some()
            || self
                .state
                .last_frame_ms
                .is_some_and(|t| t >= self.next_tick);
        if !covered {
            return None;
        }
        let s = self.state.sample(self.next_tick);
        self.next_tick += SAMPLE_PERIOD_MS;
        Some(Ok(s))
    }
}

/// Samples an in-memory frame sequence.
pub fn extract_samples(frames: &[FrameDetection]) -> Result<Vec<BehaviorSample>> {
    Sampler::new(frames.iter().cloned().map(Ok)).collect()
}

/// Exactly [`WINDOW_LEN`] consecutive samples, 100 ms apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    samples: Vec<BehaviorSample>,
}

impl Window {
    pub fn new(samples: Vec<BehaviorSample>) -> Result<Self> {
        if samples.len() != WINDOW_LEN {
            return Err(Error::Window(format!(
                "expected {WINDOW_LEN} samples, got {}",
                samples.len()
            )));
        }
        check_spacing(&samples)?;
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[BehaviorSample] {
        &self.samples
    }

    pub fn start_ms(&self) -> u64 {
        self.samples[0].t_ms
    }

    pub fn end_ms(&self) -> u64 {
        self.samples[WINDOW_LEN - 1].t_ms
    }

    /// The normalized input sequence fed to the classifier.
    pub fn inputs(&self) -> Vec<[f64; 2]> {
        self.samples
            .iter()
            .map(BehaviorSample::normalized)
            .collect()
    }
}

fn check_spacing(samples: &[BehaviorSample]) -> Result<()> {
    for pair in samples.windows(2) {
        let expected = pair[0].t_ms + SAMPLE_PERIOD_MS;
        if pair[1].t_ms != expected {
            return Err(Error::SampleGap {
                expected,
                got: pair[1].t_ms,
            });
        }
    }
    Ok(())
}

/// Cuts stride-1 windows: window `k` holds samples `k..k + 50`.
pub fn windows(samples: &[BehaviorSample]) -> Result<Vec<Window>> {
    check_spacing(samples)?;
    Ok(samples
        .windows(WINDOW_LEN)
        .map(|w| Window {
            samples: w.to_vec(),
        })
        .collect())
}

/// Incremental stride-1 window assembly over a live sample stream.
#[derive(Debug, Clone, Default)]
pub struct SlidingWindow {
    buf: VecDeque<BehaviorSample>,
}

impl SlidingWindow {
    pub fn new() -> Self {
        Self {
            buf: VecDeque::with_capacity(WINDOW_LEN),
        }
    }

    /// Adds a sample; returns the full window ending at it, if one exists.
    pub fn push(&mut self, sample: BehaviorSample) -> Result<Option<Window>> {
        if let Some(last) = self.buf.back() {
            let expected = last.t_ms + SAMPLE_PERIOD_MS;
            if sample.t_ms != expected {
                return Err(Error::SampleGap {
                    expected,
                    got: sample.t_ms,
                });
            }
        }
        if self.buf.len() == WINDOW_LEN {
            self.buf.pop_front();
        }
        self.buf.push_back(sample);
        Ok((self.buf.len() == WINDOW_LEN).then(|| Window {
            samples: self.buf.iter().copied().collect(),
        }))
    }

    pub fn clear(&mut self) {
        self.buf.clear();
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

/// Writes the `.txt` series: `eye_closure_ms since_yawn_ms` per line.
pub fn export_series(samples: &[BehaviorSample]) -> String {
    let mut out = String::with_capacity(samples.len() * 12);
    for s in samples {
        writeln!(out, "{} {}", s.eye_closure_ms, s.since_yawn_ms).unwrap();
    }
    out
}

/// Reads a `.txt` series. Timestamps are reconstructed as `100 * line index`.
pub fn import_series(text: &str) -> Result<Vec<BehaviorSample>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let line_no = i + 1;
            let err = |msg: String| Error::Record { line: line_no, msg };
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(err(format!("expected 2 columns, found {}", cols.len())));
            }
            let parse = |tok: &str| {
                tok.parse::<u32>()
                    .map_err(|_| err(format!("`{tok}` is not a non-negative integer")))
            };
            let eye_closure_ms = parse(cols[0])?;
            let since_yawn_ms = parse(cols[1])?;
            if eye_closure_ms > CLOSURE_CAP_MS || since_yawn_ms > YAWN_MEMORY_MS {
                return Err(err("value above its cap".into()));
            }
            Ok(BehaviorSample {
                t_ms: i as u64 * SAMPLE_PERIOD_MS,
                eye_closure_ms,
                since_yawn_ms,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{BoundingBox, Detection};
    use proptest::prelude::*;

    fn frame(t: u64, labels: &[DetectionLabel]) -> FrameDetection {
        let bbox = BoundingBox::new(0, 0, 10, 10).unwrap();
        FrameDetection::new(
            t,
            labels
                .iter()
                .map(|&l| Detection::new(l, bbox, 0.9).unwrap())
                .collect(),
        )
    }

    use DetectionLabel::*;

    #[test]
    fn closure_transitions() {
        let mut s = ExtractorState::new();
        s.update(&frame(900, &[OpenedEye, OpenedEye])).unwrap();
        s.update(&frame(1000, &[ClosedEye])).unwrap();
        assert_eq!(s.eye_closed_since, Some(1000));
        s.update(&frame(1100, &[ClosedEye, ClosedEye])).unwrap();
        assert_eq!(s.eye_closed_since, Some(1000));
        assert_eq!(s.sample(1600).eye_closure_ms, 600);
        s.update(&frame(1200, &[OpenedEye])).unwrap();
        assert_eq!(s.eye_closed_since, None);
        assert_eq!(s.sample(1200).eye_closure_ms, 0);
    }

    #[test]
    fn mixed_eyes_and_missing_eyes() {
        let mut s = ExtractorState::new();
        s.update(&frame(0, &[ClosedEye, OpenedEye])).unwrap();
        assert_eq!(s.eye_closed_since, None);
        s.update(&frame(100, &[ClosedEye])).unwrap();
        s.update(&frame(200, &[Face])).unwrap();
        assert_eq!(s.eye_closed_since, Some(100));
        s.update(&frame(300, &[Face, ClosedEye, OpenedEye]))
            .unwrap();
        assert_eq!(s.eye_closed_since, None);
        s.update(&frame(400, &[Face])).unwrap();
        assert_eq!(s.eye_closed_since, None);
    }

    #[test]
    fn yawn_and_saturation() {
        let mut s = ExtractorState::new();
        assert_eq!(s.sample(3000).since_yawn_ms, YAWN_MEMORY_MS);
        s.update(&frame(5000, &[Yawn])).unwrap();
        assert_eq!(s.last_yawn_at, Some(5000));
        assert_eq!(s.sample(5000).since_yawn_ms, 0);
        assert_eq!(s.sample(6500).since_yawn_ms, 1500);
        assert_eq!(s.sample(5000 + 200_000).since_yawn_ms, YAWN_MEMORY_MS);
    }

    #[test]
    fn closure_clips_at_cap() {
        let mut s = ExtractorState::new();
        s.update(&frame(0, &[ClosedEye])).unwrap();
        assert_eq!(s.sample(25_000).eye_closure_ms, CLOSURE_CAP_MS);
    }

    #[test]
    fn out_of_order_frame() {
        let mut s = ExtractorState::new();
        s.update(&frame(500, &[])).unwrap();
        assert!(matches!(
            s.update(&frame(500, &[])),
            Err(Error::OutOfOrder {
                previous: 500,
                got: 500
            })
        ));
    }

    #[test]
    fn yawn_free_replay_is_saturated() {
        let frames: Vec<_> = (0..100)
            .map(|i| frame(i * 33, &[Face, OpenedEye]))
            .collect();
        let samples = extract_samples(&frames).unwrap();
        assert_eq!(samples.len(), 33);
        assert!(samples.iter().all(|s| s.since_yawn_ms == YAWN_MEMORY_MS));
        assert!(samples.iter().all(|s| s.eye_closure_ms == 0));
    }

    #[test]
    fn short_closure_at_30fps() {
        // frames every 1000/30 ms; frames 30..36 closed (about 200 ms)
        let frames: Vec<_> = (0..60u64)
            .map(|i| {
                let t = i * 1000 / 30;
                if (30..36).contains(&i) {
                    frame(t, &[ClosedEye, ClosedEye])
                } else {
                    frame(t, &[OpenedEye, OpenedEye])
                }
            })
            .collect();
        let samples = extract_samples(&frames).unwrap();
        let peak = samples.iter().map(|s| s.eye_closure_ms).max().unwrap();
        assert!((100..=300).contains(&peak), "peak {peak}");
    }

    #[test]
    fn sampler_tick_coverage() {
        assert!(extract_samples(&[]).unwrap().is_empty());
        let samples = extract_samples(&[frame(0, &[])]).unwrap();
        assert_eq!(samples.len(), 1);
        let samples = extract_samples(&[frame(250, &[ClosedEye])]).unwrap();
        // ticks 0, 100, 200 precede the only frame
        assert_eq!(
            samples.iter().map(|s| s.t_ms).collect::<Vec<_>>(),
            vec![0, 100, 200]
        );
        assert!(samples.iter().all(|s| s.eye_closure_ms == 0));
    }

    #[test]
    fn sampler_propagates_source_errors() {
        let src = vec![
            Ok(frame(0, &[])),
            Err(Error::Sink("boom".into())),
            Ok(frame(500, &[])),
        ];
        let out: Vec<_> = Sampler::new(src.into_iter()).collect();
        // the error surfaces while looking ahead for tick 0, and ends the stream
        assert_eq!(out.len(), 1);
        assert!(matches!(out[0], Err(Error::Sink(_))));
    }

    fn seq(n: usize) -> Vec<BehaviorSample> {
        (0..n)
            .map(|i| BehaviorSample {
                t_ms: i as u64 * 100,
                eye_closure_ms: i as u32,
                since_yawn_ms: YAWN_MEMORY_MS,
            })
            .collect()
    }

    #[test]
    fn window_counts() {
        assert_eq!(windows(&seq(50)).unwrap().len(), 1);
        assert_eq!(windows(&seq(49)).unwrap().len(), 0);
        let w = windows(&seq(120)).unwrap();
        assert_eq!(w.len(), 71);
        assert_eq!(w[0].samples(), &seq(120)[0..50]);
        assert_eq!(w[70].samples(), &seq(120)[70..120]);
    }

    #[test]
    fn window_gap_is_error() {
        let mut s = seq(60);
        s[30].t_ms += 1;
        assert!(matches!(
            windows(&s),
            Err(Error::SampleGap {
                expected: 3000,
                got: 3001
            })
        ));
        assert!(Window::new(seq(49)).is_err());
    }

    #[test]
    fn sliding_window_matches_batch() {
        let s = seq(80);
        let batch = windows(&s).unwrap();
        let mut sw = SlidingWindow::new();
        let live: Vec<_> = s.iter().filter_map(|&x| sw.push(x).unwrap()).collect();
        assert_eq!(live, batch);
        let mut gap = s[79];
        gap.t_ms += 200;
        assert!(sw.push(gap).is_err());
    }

    #[test]
    fn series_format() {
        let s = [BehaviorSample {
            t_ms: 0,
            eye_closure_ms: 0,
            since_yawn_ms: 120_000,
        }];
        assert_eq!(export_series(&s), "0 120000\n");
        assert!(matches!(
            import_series("12 abc\n"),
            Err(Error::Record { line: 1, .. })
        ));
        assert!(matches!(
            import_series("1 2\n3\n"),
            Err(Error::Record { line: 2, .. })
        ));
        assert!(matches!(
            import_series("1 2 3\n"),
            Err(Error::Record { .. })
        ));
        assert!(matches!(import_series("-1 2\n"), Err(Error::Record { .. })));
        assert!(import_series("").unwrap().is_empty());
    }

    fn sample_seq() -> impl Strategy<Value = Vec<BehaviorSample>> {
        proptest::collection::vec((0..=CLOSURE_CAP_MS, 0..=YAWN_MEMORY_MS), 0..200).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (c, y))| BehaviorSample {
                    t_ms: i as u64 * SAMPLE_PERIOD_MS,
                    eye_closure_ms: c,
                    since_yawn_ms: y,
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn series_round_trip(s in sample_seq()) {
            prop_assert_eq!(import_series(&export_series(&s)).unwrap(), s);
        }

        #[test]
        fn adjacent_windows_overlap_by_49(s in sample_seq()) {
            let w = windows(&s).unwrap();
            prop_assert_eq!(w.len(), s.len().saturating_sub(WINDOW_LEN - 1));
            for pair in w.windows(2) {
                prop_assert_eq!(&pair[0].samples()[1..], &pair[1].samples()[..WINDOW_LEN - 1]);
            }
        }

        #[test]
        fn since_yawn_law(
            events in proptest::collection::vec((1u64..60, any::<bool>(), any::<bool>()), 1..300)
        ) {
            // random frame stream; since_yawn either resets at a yawn or grows by exactly 100
            let mut t = 0;
            let frames: Vec<_> = events.iter().map(|&(dt, yawn, closed)| {
                t += dt;
                let mut l = vec![if closed { ClosedEye } else { OpenedEye }];
                if yawn { l.push(Yawn); }
                frame(t, &l)
            }).collect();
            let samples = extract_samples(&frames).unwrap();
            for pair in samples.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                let yawned = frames.iter().any(|f| f.has(Yawn) && f.timestamp_ms > a.t_ms && f.timestamp_ms <= b.t_ms);
                if yawned {
                    prop_assert!(b.since_yawn_ms < 100);
                } else {
                    prop_assert_eq!(b.since_yawn_ms, (a.since_yawn_ms + 100).min(YAWN_MEMORY_MS));
                }
                prop_assert!(b.eye_closure_ms <= CLOSURE_CAP_MS);
            }
        }
    }
}
