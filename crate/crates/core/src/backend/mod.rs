//! Inference contract shared by every model backend.

mod labels;
mod oracle;
mod remote;
mod stub;
pub mod wire;

use std::sync::Arc;
use std::time::Duration;

pub use labels::{LabelSet, DETECTOR_LABELS, JESTER_LABELS};
pub use oracle::{oracle_infer, segment_coverage, OracleBackend, OracleScript, Segment};
pub use remote::{RemoteBackend, DEFAULT_TIMEOUT};
pub use stub::{StubBackend, StubRole};

use crate::stream::{Clip, INPUT_SIZE};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend timed out after {0:?}")]
    Timeout(Duration),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("backend reported error for request {id:?}: {message}")]
    Remote { id: Option<u64>, message: String },
    #[error("invalid probability vector: {0}")]
    InvalidOutput(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
}

/// Per-class scores for one clip.
///
/// Every value lies in `[0, 1]` and the sum is within `1e-5` of one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector<T> {
    values: Vec<T>,
    label_set_id: Arc<str>,
}

impl<T: Scalar> ProbabilityVector<T> {
    pub fn new(values: Vec<T>, label_set_id: impl Into<Arc<str>>) -> Result<Self, BackendError> {
        if values.is_empty() {
            return Err(BackendError::InvalidOutput("empty probability vector".into()));
        }
        let mut sum = T::zero();
        for (i, &v) in values.iter().enumerate() {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(BackendError::InvalidOutput(format!("class {i} has probability {v}")));
            }
            sum += v;
        }
        if (sum - T::one()).abs() > T::sum_tolerance() {
            return Err(BackendError::InvalidOutput(format!("probabilities sum to {sum}")));
        }
        Ok(Self {
            values,
            label_set_id: label_set_id.into(),
        })
    }

    /// Clamps to `[0, 1]` and rescales to unit sum. An all-zero vector
    /// becomes uniform.
    pub fn normalized(mut values: Vec<T>, label_set_id: impl Into<Arc<str>>) -> Result<Self, BackendError> {
        let mut sum = T::zero();
        for v in values.iter_mut() {
            *v = if v.is_nan() {
                T::zero()
            } else {
                v.max(T::zero()).min(T::one())
            };
            sum += *v;
        }
        if sum > T::zero() {
            values.iter_mut().for_each(|v| *v /= sum);
        } else if !values.is_empty() {
            let uniform = T::one() / T::of_usize(values.len());
            values.iter_mut().for_each(|v| *v = uniform);
        }
        Self::new(values, label_set_id)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn label_set_id(&self) -> &str {
        &self.label_set_id
    }

    /// Index of the largest value, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Handshake metadata advertised by a backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendInfo {
    pub num_classes: usize,
    pub clip_depth: usize,
    pub input_size: usize,
    pub label_set: LabelSet,
}

impl BackendInfo {
    pub fn new(clip_depth: usize, label_set: LabelSet) -> Result<Self, BackendError> {
        let info = Self {
            num_classes: label_set.len(),
            clip_depth,
            input_size: INPUT_SIZE,
            label_set,
        };
        info.validate()?;
        Ok(info)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if ![8, 16, 32].contains(&self.clip_depth) {
            return Err(BackendError::InvalidConfig(format!(
                "clip depth {} not in {{8, 16, 32}}",
                self.clip_depth
            )));
        }
        if self.input_size != INPUT_SIZE {
            return Err(BackendError::InvalidConfig(format!(
                "input size {} != {INPUT_SIZE}",
                self.input_size
            )));
        }
        if self.num_classes != self.label_set.len() {
            return Err(BackendError::InvalidConfig(format!(
                "num_classes {} but {} labels",
                self.num_classes,
                self.label_set.len()
            )));
        }
        Ok(())
    }

    /// Rejects clips whose shape differs from what the model expects.
    pub fn check_clip(&self, clip: &Clip) -> Result<(), BackendError> {
        let expected = [3, self.clip_depth, self.input_size, self.input_size];
        if clip.shape() != expected {
            return Err(BackendError::ShapeMismatch {
                expected: format!("{expected:?}"),
                got: format!("{:?}", clip.shape()),
            });
        }
        Ok(())
    }
}

/// A model that maps clips to class probabilities.
///
/// Implementations must tolerate concurrent `infer` calls.
pub trait Backend<T: Scalar>: Send + Sync {
    fn info(&self) -> &BackendInfo;

    fn infer(&self, clip: &Clip) -> Result<ProbabilityVector<T>, BackendError>;

    /// Scores several clips; results come back in input order.
    fn infer_batch(&self, clips: &[Clip]) -> Result<Vec<ProbabilityVector<T>>, BackendError> {
        clips.iter().map(|clip| self.infer(clip)).collect()
    }
}

impl<T: Scalar, B: Backend<T> + ?Sized> Backend<T> for Box<B> {
    fn info(&self) -> &BackendInfo {
        (**self).info()
    }

    fn infer(&self, clip: &Clip) -> Result<ProbabilityVector<T>, BackendError> {
        (**self).infer(clip)
    }

    fn infer_batch(&self, clips: &[Clip]) -> Result<Vec<ProbabilityVector<T>>, BackendError> {
        (**self).infer_batch(clips)
    }
}

impl<T: Scalar, B: Backend<T> + ?Sized> Backend<T> for Arc<B> {
    fn info(&self) -> &BackendInfo {
        (**self).info()
    }

    fn infer(&self, clip: &Clip) -> Result<ProbabilityVector<T>, BackendError> {
        (**self).infer(clip)
    }

    fn infer_batch(&self, clips: &[Clip]) -> Result<Vec<ProbabilityVector<T>>, BackendError> {
        (**self).infer_batch(clips)
    }
}
