use std::time::Duration;

use super::{Backend, BackendError, BackendInfo, LabelSet, ProbabilityVector};
use crate::stream::Clip;
use crate::Scalar;

/// What a [`StubBackend`] pretends to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StubRole {
    /// Alternates `period`-frame stretches of "no_gesture" and "gesture",
    /// keyed on the clip's last frame.
    Detector { period: u64 },
    /// Confident on one class, cycling classes every `period` frames.
    Classifier { period: u64 },
}

/// Fixed-latency backend for benchmarking the pipeline without a model.
#[derive(Debug, Clone)]
pub struct StubBackend {
    info: BackendInfo,
    role: StubRole,
    latency: Duration,
}

impl StubBackend {
    pub fn detector(depth: usize, period: u64, latency: Duration) -> Result<Self, BackendError> {
        Ok(Self {
            info: BackendInfo::new(depth, LabelSet::detector())?,
            role: StubRole::Detector { period: period.max(1) },
            latency,
        })
    }

    pub fn classifier(depth: usize, labels: LabelSet, period: u64, latency: Duration) -> Result<Self, BackendError> {
        Ok(Self {
            info: BackendInfo::new(depth, labels)?,
            role: StubRole::Classifier { period: period.max(1) },
            latency,
        })
    }
}

impl<T: Scalar> Backend<T> for StubBackend {
    fn info(&self) -> &BackendInfo {
        &self.info
    }

    fn infer(&self, clip: &Clip) -> Result<ProbabilityVector<T>, BackendError> {
        self.info.check_clip(clip)?;
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        let n = self.info.num_classes;
        let (hot, confidence) = match self.role {
            StubRole::Detector { period } => {
                let active = (clip.end_index() / period) % 2 == 1;
                (if active { 0 } else { 1 }, 0.9)
            }
            StubRole::Classifier { period } => (((clip.end_index() / period) as usize) % n, 0.9),
        };
        let rest = T::of((1.0 - confidence) / (n - 1).max(1) as f64);
        let mut values = vec![rest; n];
        values[hot] = T::of(confidence);
        ProbabilityVector::normalized(values, self.info.label_set.shared_id())
    }
}
