use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{DEFAULT_TAU_EARLY, DEFAULT_TAU_LATE};
use crate::detector::{DecisionMode, DEFAULT_MERGE_THRESHOLD, DEFAULT_QUEUE};
use crate::stream::DEFAULT_CAPACITY;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Pipeline parameters. TOML keys match the field names; every key is
/// optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub detector_depth: usize,
    pub detector_queue: usize,
    pub detector_stride: usize,
    pub detector_mode: DecisionMode,
    pub classifier_depth: usize,
    pub n_windows: usize,
    pub classifier_stride: usize,
    pub tau_early: f64,
    pub tau_late: f64,
    /// Frames to sit out after an event. Defaults to `classifier_depth`.
    pub cooldown_frames: Option<usize>,
    /// Require a "no_gesture" detector window after an event before the
    /// classifier can be activated again.
    pub rearm_on_negative: bool,
    pub merge_threshold: u64,
    /// Offline proposals shorter than `classifier_depth - proposal_slack`
    /// are dropped.
    pub proposal_slack: usize,
    pub fps_assumed: f64,
    pub buffer_capacity: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            detector_depth: 8,
            detector_queue: DEFAULT_QUEUE,
            detector_stride: 1,
            detector_mode: DecisionMode::Unanimous,
            classifier_depth: 16,
            n_windows: 1,
            classifier_stride: 1,
            tau_early: DEFAULT_TAU_EARLY,
            tau_late: DEFAULT_TAU_LATE,
            cooldown_frames: None,
            rearm_on_negative: true,
            merge_threshold: DEFAULT_MERGE_THRESHOLD,
            proposal_slack: 8,
            fps_assumed: 30.0,
            buffer_capacity: DEFAULT_CAPACITY,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn cooldown(&self) -> usize {
        self.cooldown_frames.unwrap_or(self.classifier_depth)
    }

    /// Frames of history the classifier windows need.
    pub fn classifier_span(&self) -> usize {
        self.classifier_depth + (self.n_windows - 1) * self.classifier_stride
    }

    pub fn detector_span(&self) -> usize {
        self.detector_depth + (self.detector_queue - 1) * self.detector_stride
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        let counts = [
            ("detector_queue", self.detector_queue),
            ("detector_stride", self.detector_stride),
            ("classifier_stride", self.classifier_stride),
            ("buffer_capacity", self.buffer_capacity),
            ("cooldown_frames", self.cooldown()),
        ];
        for (name, value) in counts {
            if value == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if ![8, 16, 32].contains(&self.detector_depth) {
            return bad(format!("detector_depth {} not in {{8, 16, 32}}", self.detector_depth));
        }
        if ![16, 32].contains(&self.classifier_depth) {
            return bad(format!("classifier_depth {} not in {{16, 32}}", self.classifier_depth));
        }
        if ![1, 3, 5].contains(&self.n_windows) {
            return bad(format!("n_windows {} not in {{1, 3, 5}}", self.n_windows));
        }
        for (name, tau) in [("tau_early", self.tau_early), ("tau_late", self.tau_late)] {
            if !(tau > 0.0 && tau < 1.0) {
                return bad(format!("{name} {tau} outside (0, 1)"));
            }
        }
        if self.tau_late >= self.tau_early {
            return bad(format!(
                "tau_late {} must be below tau_early {}",
                self.tau_late, self.tau_early
            ));
        }
        if !(self.fps_assumed > 0.0 && self.fps_assumed.is_finite()) {
            return bad(format!("fps_assumed {} must be positive", self.fps_assumed));
        }
        let needed = self.classifier_span().max(self.detector_span());
        if self.buffer_capacity < needed {
            return bad(format!(
                "buffer_capacity {} below the {needed} frames the windows need",
                self.buffer_capacity
            ));
        }
        Ok(())
    }
}
