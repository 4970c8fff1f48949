//! Sequence-level scoring of recognized gestures against ground truth.

mod io;
mod levenshtein;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

pub use io::{parse_events_jsonl, parse_truth_csv, write_truth_csv, EventRecord};
pub use levenshtein::{levenshtein_accuracy, levenshtein_distance};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("accuracy is undefined for an empty target sequence")]
    UndefinedMetric,
    #[error("duplicate ground-truth video id {0:?}")]
    DuplicateVideo(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(String),
}

/// Ordered gesture names for one video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelSequence {
    pub video_id: String,
    pub labels: Vec<String>,
}

impl LabelSequence {
    pub fn new(video_id: impl Into<String>, labels: Vec<String>) -> Self {
        Self {
            video_id: video_id.into(),
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Anything that names a recognized gesture at a frame.
pub trait Prediction {
    fn label(&self) -> &str;
    fn frame(&self) -> u64;
}

impl<T> Prediction for crate::pipeline::GestureEvent<T> {
    fn label(&self) -> &str {
        &self.label
    }

    fn frame(&self) -> u64 {
        self.trigger_frame
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoScore {
    pub video_id: String,
    pub target_len: usize,
    pub predicted_len: usize,
    pub distance: usize,
    /// `None` for an empty target.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Sorted by video id.
    pub per_video: Vec<VideoScore>,
    pub total_targets: usize,
    pub total_distance: usize,
    /// `(1 - Σ distance / Σ target length) * 100`.
    pub pooled_accuracy: f64,
    /// Unweighted mean of per-video accuracies.
    pub macro_accuracy: Option<f64>,
    /// Prediction video ids with no ground truth; excluded from scoring.
    pub orphans: Vec<String>,
}

/// Scores predictions per video. Each video's prediction sequence is its
/// events' labels ordered by trigger frame; a video with no events counts
/// every target as a deletion.
pub fn evaluate<P: Prediction>(
    predictions: &BTreeMap<String, Vec<P>>,
    truth: &[LabelSequence],
) -> Result<EvalReport, EvalError> {
    let mut seen = HashSet::new();
    for seq in truth {
        if !seen.insert(seq.video_id.as_str()) {
            return Err(EvalError::DuplicateVideo(seq.video_id.clone()));
        }
    }

    let mut per_video = Vec::with_capacity(truth.len());
    for seq in truth {
        let predicted: Vec<&str> = match predictions.get(&seq.video_id) {
            Some(events) => {
                let mut ordered: Vec<&P> = events.iter().collect();
                ordered.sort_by_key(|e| e.frame());
                ordered.into_iter().map(Prediction::label).collect()
            }
            None => Vec::new(),
        };
        let target: Vec<&str> = seq.labels.iter().map(String::as_str).collect();
        let distance = levenshtein_distance(&target, &predicted);
        per_video.push(VideoScore {
            video_id: seq.video_id.clone(),
            target_len: target.len(),
            predicted_len: predicted.len(),
            distance,
            accuracy: (!target.is_empty()).then(|| levenshtein::accuracy_from::<f64>(distance, target.len())),
        });
    }
    per_video.sort_by(|a, b| a.video_id.cmp(&b.video_id));

    let total_targets: usize = per_video.iter().map(|v| v.target_len).sum();
    let total_distance: usize = per_video.iter().map(|v| v.distance).sum();
    if total_targets == 0 {
        return Err(EvalError::UndefinedMetric);
    }
    let scored: Vec<f64> = per_video.iter().filter_map(|v| v.accuracy).collect();
    let macro_accuracy = (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64);

    let known: BTreeSet<&str> = truth.iter().map(|s| s.video_id.as_str()).collect();
    let orphans = predictions
        .keys()
        .filter(|k| !known.contains(k.as_str()))
        .cloned()
        .collect();

    Ok(EvalReport {
        per_video,
        total_targets,
        total_distance,
        pooled_accuracy: levenshtein::accuracy_from(total_distance, total_targets),
        macro_accuracy,
        orphans,
    })
}

/// Formats an accuracy the way result tables print it, e.g. `37.50%`.
pub fn format_percent(value: f64) -> String {
    format!("{value:.2}%")
}

impl EvalReport {
    /// Human-readable per-video table followed by pooled figures.
    pub fn to_table(&self) -> String {
        let width = self
            .per_video
            .iter()
            .map(|v| v.video_id.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = format!(
            "{:<width$}  {:>6}  {:>9}  {:>8}  {:>9}\n",
            "video", "target", "predicted", "distance", "accuracy"
        );
        for v in &self.per_video {
            out.push_str(&format!(
                "{:<width$}  {:>6}  {:>9}  {:>8}  {:>9}\n",
                v.video_id,
                v.target_len,
                v.predicted_len,
                v.distance,
                v.accuracy.map_or_else(|| "n/a".to_string(), format_percent),
            ));
        }
        out.push_str(&format!(
            "pooled Levenshtein accuracy: {} ({} gestures, distance {})\n",
            format_percent(self.pooled_accuracy),
            self.total_targets,
            self.total_distance
        ));
        if let Some(m) = self.macro_accuracy {
            out.push_str(&format!("per-video mean accuracy:     {}\n", format_percent(m)));
        }
        if !self.orphans.is_empty() {
            out.push_str(&format!(
                "orphan predictions (no ground truth, not scored): {}\n",
                self.orphans.join(", ")
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
