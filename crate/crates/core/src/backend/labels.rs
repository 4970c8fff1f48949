use std::collections::HashSet;
use std::sync::Arc;

use super::BackendError;

/// Binary detector classes, gesture first.
pub const DETECTOR_LABELS: [&str; 2] = ["gesture", "no_gesture"];

/// The 27 Jester classes in the dataset's canonical order.
pub const JESTER_LABELS: [&str; 27] = [
    "Doing other things",
    "Drumming Fingers",
    "No gesture",
    "Pulling Hand In",
    "Pulling Two Fingers In",
    "Pushing Hand Away",
    "Pushing Two Fingers Away",
    "Rolling Hand Backward",
    "Rolling Hand Forward",
    "Shaking Hand",
    "Sliding Two Fingers Down",
    "Sliding Two Fingers Left",
    "Sliding Two Fingers Right",
    "Sliding Two Fingers Up",
    "Stop Sign",
    "Swiping Down",
    "Swiping Left",
    "Swiping Right",
    "Swiping Up",
    "Thumb Down",
    "Thumb Up",
    "Turning Hand Clockwise",
    "Turning Hand Counterclockwise",
    "Zooming In With Full Hand",
    "Zooming In With Two Fingers",
    "Zooming Out With Full Hand",
    "Zooming Out With Two Fingers",
];

/// Ordered class names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    id: Arc<str>,
    labels: Vec<String>,
}

impl LabelSet {
    pub fn new(id: impl Into<Arc<str>>, labels: Vec<String>) -> Result<Self, BackendError> {
        if labels.is_empty() {
            return Err(BackendError::InvalidConfig("empty label set".into()));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(BackendError::InvalidConfig(format!("duplicate label {label:?}")));
            }
        }
        Ok(Self { id: id.into(), labels })
    }

    pub fn detector() -> Self {
        Self::new("detector", DETECTOR_LABELS.iter().map(|s| s.to_string()).collect()).expect("static labels")
    }

    pub fn jester() -> Self {
        Self::new("jester27", JESTER_LABELS.iter().map(|s| s.to_string()).collect()).expect("static labels")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn shared_id(&self) -> Arc<str> {
        Arc::clone(&self.id)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    /// True for exactly `["gesture", "no_gesture"]`.
    pub fn is_detector(&self) -> bool {
        self.labels.len() == 2 && self.labels[0] == DETECTOR_LABELS[0] && self.labels[1] == DETECTOR_LABELS[1]
    }
}
