//! Offline evaluation of the LSTM against the threshold baseline.
//!
//! Both methods always see the same sample sequence. Window-level metrics use
//! the majority regime of each window as ground truth; the baseline's window
//! decision is its alarm at the window's last sample.

use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::baseline::{baseline_trace, BaselineConfig, BaselineState};
use crate::features::{windows, BehaviorSample, SlidingWindow, Window, WINDOW_LEN};
use crate::lstm::{AlarmThreshold, LstmModel};
use crate::simulator::{majority_label, Regime};
use crate::{Error, Result};

/// Anything that maps a window to a drowsiness probability.
pub trait WindowScorer: Sync {
    fn score(&self, window: &Window) -> Result<f64>;
}

impl WindowScorer for LstmModel {
    fn score(&self, window: &Window) -> Result<f64> {
        self.predict(window)
    }
}

/// How far before an episode onset an alarm may count towards it.
pub const PRE_ONSET_SLACK_MS: u64 = 5_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

/// `num / den`, or 0 when the denominator is 0.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub confusion: Confusion,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<Confusion> for Metrics {
    fn from(c: Confusion) -> Self {
        Self {
            confusion: c,
            accuracy: c.accuracy(),
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
        }
    }
}

/// First alarms of both methods around one drowsy episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EpisodeLead {
    pub onset_ms: u64,
    /// Timestamp of the episode's last sample.
    pub end_ms: u64,
    pub lstm_first_alarm_ms: Option<u64>,
    pub baseline_first_alarm_ms: Option<u64>,
}

impl EpisodeLead {
    /// Signed ms by which the LSTM's first alarm precedes the onset.
    pub fn lstm_onset_lead_ms(&self) -> Option<i64> {
        self.lstm_first_alarm_ms
            .map(|a| self.onset_ms as i64 - a as i64)
    }

    pub fn baseline_onset_lead_ms(&self) -> Option<i64> {
        self.baseline_first_alarm_ms
            .map(|a| self.onset_ms as i64 - a as i64)
    }

    /// Ms by which the LSTM alarm precedes the baseline alarm. When the
    /// baseline stays silent for the whole episode the lead is measured to the
    /// episode end, which makes it a lower bound.
    pub fn lead_over_baseline_ms(&self) -> Option<i64> {
        let l = self.lstm_first_alarm_ms? as i64;
        let b = self.baseline_first_alarm_ms.unwrap_or(self.end_ms) as i64;
        Some(b - l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub samples: usize,
    pub windows: usize,
    pub drowsy_windows: usize,
    pub lstm: Metrics,
    pub baseline: Metrics,
    pub episodes: Vec<EpisodeLead>,
    /// LSTM probability per sample; absent before the first full window.
    pub lstm_probability: Vec<Option<f64>>,
    pub lstm_alarm: Vec<bool>,
    pub baseline_alarm: Vec<bool>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "samples {}  windows {}  drowsy windows {}",
            self.samples, self.windows, self.drowsy_windows
        )?;
        writeln!(
            f,
            "method    accuracy precision recall   f1       tp     fp     tn     fn"
        )?;
        for (name, m) in [("lstm", &self.lstm), ("baseline", &self.baseline)] {
            let c = m.confusion;
            writeln!(
                f,
                "{name:<9} {:.4}   {:.4}    {:.4}   {:.4}   {:<6} {:<6} {:<6} {}",
                m.accuracy, m.precision, m.recall, m.f1, c.tp, c.fp, c.tn, c.fn_
            )?;
        }
        writeln!(
            f,
            "episode onset_ms  lstm_alarm_ms  baseline_alarm_ms  lead_over_baseline_ms"
        )?;
        let opt = |v: Option<u64>| v.map_or("-".to_string(), |x| x.to_string());
        for (i, e) in self.episodes.iter().enumerate() {
            writeln!(
                f,
                "{:<7} {:<9} {:<14} {:<18} {}",
                i,
                e.onset_ms,
                opt(e.lstm_first_alarm_ms),
                opt(e.baseline_first_alarm_ms),
                e.lead_over_baseline_ms()
                    .map_or("-".to_string(), |x| x.to_string())
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalOptions {
    pub threshold: AlarmThreshold,
    pub baseline: BaselineConfig,
}

fn check_stream(samples: &[BehaviorSample], labels: &[Regime]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Dataset("empty stream".into()));
    }
    if samples.len() != labels.len() {
        return Err(Error::Dataset(format!(
            "{} samples but {} ground-truth labels",
            samples.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Scores every full window of `samples` and runs the baseline over the same samples.
pub fn evaluate(
    scorer: &impl WindowScorer,
    samples: &[BehaviorSample],
    labels: &[Regime],
    options: &EvalOptions,
) -> Result<EvalReport> {
    check_stream(samples, labels)?;
    let wins = windows(samples)?;
    let baseline_alarm = baseline_trace(options.baseline, samples)?;

    let mut lstm_probability = vec![None; samples.len()];
    let mut lstm = Confusion::default();
    let mut base = Confusion::default();
    let mut drowsy_windows = 0;
    for (k, w) in wins.iter().enumerate() {
        let p = scorer.score(w)?;
        let last = k + WINDOW_LEN - 1;
        lstm_probability[last] = Some(p);
        let actual = majority_label(&labels[k..=last]).is_drowsy();
        drowsy_windows += usize::from(actual);
        lstm.record(options.threshold.alarm(p), actual);
        base.record(baseline_alarm[last], actual);
    }
    let lstm_alarm: Vec<bool> = lstm_probability
        .iter()
        .map(|p| p.is_some_and(|p| options.threshold.alarm(p)))
        .collect();
    let episodes = episode_leads(samples, labels, &lstm_alarm, &baseline_alarm);

    Ok(EvalReport {
        samples: samples.len(),
        windows: wins.len(),
        drowsy_windows,
        lstm: lstm.into(),
        baseline: base.into(),
        episodes,
        lstm_probability,
        lstm_alarm,
        baseline_alarm,
    })
}

/// Maximal runs of drowsy labels as `(first, last)` sample indices.
pub fn drowsy_episodes(labels: &[Regime]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, r) in labels.iter().enumerate() {
        match (r.is_drowsy(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, labels.len() - 1));
    }
    out
}

fn episode_leads(
    samples: &[BehaviorSample],
    labels: &[Regime],
    lstm_alarm: &[bool],
    baseline_alarm: &[bool],
) -> Vec<EpisodeLead> {
    let mut out = Vec::new();
    let mut prev_end: Option<usize> = None;
    for (first, last) in drowsy_episodes(labels) {
        let onset_ms = samples[first].t_ms;
        let slack_start = samples[..first]
            .iter()
            .position(|s| s.t_ms + PRE_ONSET_SLACK_MS >= onset_ms)
            .unwrap_or(first);
        let from = prev_end.map_or(slack_start, |e| slack_start.max(e + 1));
        let first_alarm =
            |alarms: &[bool]| (from..=last).find(|&i| alarms[i]).map(|i| samples[i].t_ms);
        out.push(EpisodeLead {
            onset_ms,
            end_ms: samples[last].t_ms,
            lstm_first_alarm_ms: first_alarm(lstm_alarm),
            baseline_first_alarm_ms: first_alarm(baseline_alarm),
        });
        prev_end = Some(last);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    /// LSTM alarms while the baseline has not alarmed yet in this alarm run.
    EarlyWarning,
    /// LSTM still alarms after the baseline cleared.
    LstmPersists,
    /// Baseline alarms, LSTM does not.
    BaselineOnly,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Divergence::EarlyWarning => "early_warning",
            Divergence::LstmPersists => "lstm_persists",
            Divergence::BaselineOnly => "baseline_only",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    #[serde(flatten)]
    pub sample: BehaviorSample,
    pub lstm_probability: Option<f64>,
    pub lstm_alarm: bool,
    pub baseline_alarm: bool,
    pub divergence: Option<Divergence>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn divergences(&self) -> impl Iterator<Item = (usize, Divergence)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.divergence.map(|d| (i, d)))
    }

    pub fn count(&self, kind: Divergence) -> usize {
        self.divergences().filter(|(_, d)| *d == kind).count()
    }

    /// Tab-separated columns for an external plotting tool.
    pub fn to_tsv(&self, truth: Option<&[Regime]>) -> String {
        let mut out = String::from(
            "t_ms\teye_closure_ms\tsince_yawn_ms\tlstm_probability\tlstm_alarm\tbaseline_alarm\tdivergence",
        );
        if truth.is_some() {
            out.push_str("\ttruth");
        }
        out.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.sample.t_ms,
                r.sample.eye_closure_ms,
                r.sample.since_yawn_ms,
                r.lstm_probability
                    .map_or("nan".to_string(), |p| format!("{p:.6}")),
                u8::from(r.lstm_alarm),
                u8::from(r.baseline_alarm),
                r.divergence.map_or("-".to_string(), |d| d.to_string())
            );
            if let Some(t) = truth {
                let _ = write!(
                    out,
                    "\t{}",
                    t.get(i).map_or("-".to_string(), |r| r.to_string())
                );
            }
            out.push('\n');
        }
        out
    }
}

/// Runs both methods sample by sample and flags where they disagree.
pub fn compare_traces(
    scorer: &impl WindowScorer,
    samples: &[BehaviorSample],
    options: &EvalOptions,
) -> Result<Comparison> {
    let mut window = SlidingWindow::new();
    let mut baseline = BaselineState::new(options.baseline);
    let mut rows = Vec::with_capacity(samples.len());
    let mut baseline_seen_in_run = false;
    for s in samples {
        let lstm_probability = match window.push(*s)? {
            Some(w) => Some(scorer.score(&w)?),
            None => None,
        };
        let baseline_alarm = baseline.advance(s)?;
        let lstm_alarm = lstm_probability.is_some_and(|p| options.threshold.alarm(p));
        if !lstm_alarm {
            baseline_seen_in_run = false;
        } else if baseline_alarm {
            baseline_seen_in_run = true;
        }
        let divergence = match (lstm_alarm, baseline_alarm) {
            (true, false) if baseline_seen_in_run => Some(Divergence::LstmPersists),
            (true, false) => Some(Divergence::EarlyWarning),
            (false, true) => Some(Divergence::BaselineOnly),
            _ => None,
        };
        rows.push(ComparisonRow {
            sample: *s,
            lstm_probability,
            lstm_alarm,
            baseline_alarm,
            divergence,
        });
    }
    Ok(Comparison { rows })
}
