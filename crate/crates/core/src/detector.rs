//! Turns raw gesture/no-gesture scores into activation decisions (online)
//! and gesture proposals (offline).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::backend::ProbabilityVector;
use crate::Scalar;

/// Number of detector windows voted over.
pub const DEFAULT_QUEUE: usize = 4;
/// Largest gap (exclusive) bridged when merging proposals.
pub const DEFAULT_MERGE_THRESHOLD: u64 = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DetectorError {
    #[error("detection queue holds {held} of {capacity} entries")]
    QueueNotFull { held: usize, capacity: usize },
    #[error("expected {expected} labels, got {got}")]
    WrongCount { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionLabel {
    Gesture,
    NoGesture,
}

impl DetectionLabel {
    /// Per-clip label: "gesture" only when it strictly outscores "no_gesture".
    pub fn of<T: Scalar>(probs: &ProbabilityVector<T>) -> Self {
        let v = probs.values();
        if v.len() >= 2 && v[0] > v[1] {
            DetectionLabel::Gesture
        } else {
            DetectionLabel::NoGesture
        }
    }

    pub fn is_gesture(self) -> bool {
        self == DetectionLabel::Gesture
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DetectionLabel::Gesture => "gesture",
            DetectionLabel::NoGesture => "no_gesture",
        }
    }
}

/// How a full queue is turned into one decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionMode {
    /// Average the probabilities and take the larger class.
    Mean,
    /// Every window must individually say "gesture".
    #[default]
    Unanimous,
}

/// FIFO of the most recent detector outputs.
#[derive(Debug, Clone)]
pub struct DetectionQueue<T> {
    capacity: usize,
    entries: VecDeque<ProbabilityVector<T>>,
}

impl<T: Scalar> DetectionQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn push(&mut self, probs: ProbabilityVector<T>) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(probs);
    }

    pub fn entries(&self) -> impl Iterator<Item = &ProbabilityVector<T>> {
        self.entries.iter()
    }

    pub fn decide(&self, mode: DecisionMode) -> Result<DetectionLabel, DetectorError> {
        self.require_full()?;
        match mode {
            DecisionMode::Mean => decide_mean(self.entries.iter()),
            DecisionMode::Unanimous => {
                let labels: Vec<_> = self.entries.iter().map(DetectionLabel::of).collect();
                decide_unanimous(&labels, self.capacity).map(|all| {
                    if all {
                        DetectionLabel::Gesture
                    } else {
                        DetectionLabel::NoGesture
                    }
                })
            }
        }
    }

    pub fn decide_mean(&self) -> Result<DetectionLabel, DetectorError> {
        self.decide(DecisionMode::Mean)
    }

    fn require_full(&self) -> Result<(), DetectorError> {
        if self.is_full() {
            Ok(())
        } else {
            Err(DetectorError::QueueNotFull {
                held: self.entries.len(),
                capacity: self.capacity,
            })
        }
    }
}

/// Element-wise mean of the entries, then argmax. A tie goes to "no_gesture".
pub fn decide_mean<'a, T: Scalar>(
    entries: impl IntoIterator<Item = &'a ProbabilityVector<T>>,
) -> Result<DetectionLabel, DetectorError> {
    let mut sums = [T::zero(); 2];
    let mut count = 0usize;
    for entry in entries {
        let v = entry.values();
        if v.len() != 2 {
            return Err(DetectorError::InvalidInput(format!(
                "detector vector has {} classes",
                v.len()
            )));
        }
        sums[0] += v[0];
        sums[1] += v[1];
        count += 1;
    }
    if count == 0 {
        return Err(DetectorError::QueueNotFull { held: 0, capacity: 1 });
    }
    let n = T::of_usize(count);
    Ok(if sums[0] / n > sums[1] / n {
        DetectionLabel::Gesture
    } else {
        DetectionLabel::NoGesture
    })
}

/// True iff all `expected` labels are "gesture".
pub fn decide_unanimous(labels: &[DetectionLabel], expected: usize) -> Result<bool, DetectorError> {
    if labels.len() != expected {
        return Err(DetectorError::WrongCount {
            expected,
            got: labels.len(),
        });
    }
    Ok(labels.iter().all(|l| l.is_gesture()))
}

/// An inclusive frame interval believed to contain a gesture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Proposal {
    #[serde(rename = "start")]
    pub start_frame: u64,
    #[serde(rename = "end")]
    pub end_frame: u64,
}

impl Proposal {
    pub fn new(start_frame: u64, end_frame: u64) -> Result<Self, DetectorError> {
        if start_frame > end_frame {
            return Err(DetectorError::InvalidInput(format!(
                "proposal starts at {start_frame} after it ends at {end_frame}"
            )));
        }
        Ok(Self { start_frame, end_frame })
    }

    pub fn len(&self) -> u64 {
        self.end_frame - self.start_frame + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn midpoint(&self) -> u64 {
        self.start_frame + (self.end_frame - self.start_frame) / 2
    }

    /// `{"start":S,"end":E}`
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("proposal serializes")
    }
}

/// Maximal runs of consecutive "gesture" decisions.
pub fn propose_offline(decisions: &[(u64, DetectionLabel)]) -> Result<Vec<Proposal>, DetectorError> {
    for pair in decisions.windows(2) {
        if pair[1].0 != pair[0].0 + 1 {
            return Err(DetectorError::InvalidInput(format!(
                "decisions must be sorted and contiguous: frame {} follows {}",
                pair[1].0, pair[0].0
            )));
        }
    }
    let mut proposals = Vec::new();
    let mut run: Option<(u64, u64)> = None;
    for &(frame, label) in decisions {
        match (label.is_gesture(), run) {
            (true, Some((start, _))) => run = Some((start, frame)),
            (true, None) => run = Some((frame, frame)),
            (false, Some((start, end))) => {
                proposals.push(Proposal::new(start, end)?);
                run = None;
            }
            (false, None) => {}
        }
    }
    if let Some((start, end)) = run {
        proposals.push(Proposal::new(start, end)?);
    }
    Ok(proposals)
}

/// Merges neighbours whose gap `next.start - prev.end - 1` is below
/// `threshold`. One left-to-right pass reaches the fixpoint: a merge only
/// extends the current region's end, so earlier gaps never change.
pub fn merge_proposals(proposals: &[Proposal], threshold: u64) -> Result<Vec<Proposal>, DetectorError> {
    for pair in proposals.windows(2) {
        if pair[1].start_frame <= pair[0].end_frame {
            return Err(DetectorError::InvalidInput(format!(
                "proposals ({}, {}) and ({}, {}) overlap or are unsorted",
                pair[0].start_frame, pair[0].end_frame, pair[1].start_frame, pair[1].end_frame
            )));
        }
    }
    let mut merged: Vec<Proposal> = Vec::with_capacity(proposals.len());
    for &p in proposals {
        if p.start_frame > p.end_frame {
            return Err(DetectorError::InvalidInput("proposal with start after end".into()));
        }
        match merged.last_mut() {
            Some(last) if p.start_frame - last.end_frame - 1 < threshold => last.end_frame = p.end_frame,
            _ => merged.push(p),
        }
    }
    Ok(merged)
}

/// Clamps proposals to `[0, video_len)` and drops any shorter than
/// `min_len` frames.
pub fn amend_proposals(proposals: &[Proposal], video_len: u64, min_len: u64) -> Vec<Proposal> {
    if video_len == 0 {
        return Vec::new();
    }
    proposals
        .iter()
        .filter(|p| p.start_frame < video_len)
        .map(|p| Proposal {
            start_frame: p.start_frame,
            end_frame: p.end_frame.min(video_len - 1),
        })
        .filter(|p| p.len() >= min_len)
        .collect()
}
