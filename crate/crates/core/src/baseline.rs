//! Threshold-only decision strategy used as the comparison baseline.
//!
//! The alarm fires while the current eye closure reaches the active threshold:
//! 5 s normally, lowered to 3 s for two minutes after each yawn. Only the
//! current sample matters, so the alarm drops as soon as the eyes reopen.

use serde::{Deserialize, Serialize};

use crate::features::{BehaviorSample, YAWN_MEMORY_MS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub default_threshold_ms: u32,
    pub sensitized_threshold_ms: u32,
    /// How long a yawn keeps the lowered threshold active (inclusive).
    pub yawn_memory_ms: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            default_threshold_ms: 5_000,
            sensitized_threshold_ms: 3_000,
            yawn_memory_ms: 120_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BaselineState {
    pub config: BaselineConfig,
    pub last_yawn_at: Option<u64>,
    pub alarm: bool,
    last_t: Option<u64>,
}

impl BaselineState {
    pub fn new(config: BaselineConfig) -> Self {
        Self {
            config,
            ..Self::default()
        }
    }

    /// Threshold in force at `now_ms`.
    pub fn active_threshold(&self, now_ms: u64) -> u32 {
        match self.last_yawn_at {
            Some(y) if now_ms.saturating_sub(y) <= self.config.yawn_memory_ms => {
                self.config.sensitized_threshold_ms
            }
            _ => self.config.default_threshold_ms,
        }
    }

    /// Pure transition: the next state and its alarm flag.
    pub fn step(&self, sample: &BehaviorSample) -> Result<(BaselineState, bool)> {
        let mut next = *self;
        let alarm = next.advance(sample)?;
        Ok((next, alarm))
    }

    /// In-place transition.
    ///
    /// The yawn time is recovered from the sample: an unsaturated
    /// `since_yawn_ms` pins the latest yawn at `t_ms - since_yawn_ms`, which also
    /// restarts the memory on every new yawn.
    pub fn advance(&mut self, sample: &BehaviorSample) -> Result<bool> {
        if let Some(prev) = self.last_t {
            if sample.t_ms <= prev {
                return Err(Error::OutOfOrder {
                    previous: prev,
                    got: sample.t_ms,
                });
            }
        }
        self.last_t = Some(sample.t_ms);
        if sample.since_yawn_ms < YAWN_MEMORY_MS {
            self.last_yawn_at = Some(sample.t_ms.saturating_sub(u64::from(sample.since_yawn_ms)));
        }
        self.alarm = sample.eye_closure_ms >= self.active_threshold(sample.t_ms);
        Ok(self.alarm)
    }
}

/// Runs the baseline over a whole sample sequence.
pub fn baseline_trace(config: BaselineConfig, samples: &[BehaviorSample]) -> Result<Vec<bool>> {
    let mut state = BaselineState::new(config);
    samples.iter().map(|s| state.advance(s)).collect()
}
