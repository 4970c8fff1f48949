use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::{EvalError, LabelSequence, Prediction};

/// One line of the pipeline's event output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub video: String,
    pub frame: u64,
    pub label: String,
    pub kind: String,
    pub max1: f64,
    pub margin: f64,
}

impl Prediction for EventRecord {
    fn label(&self) -> &str {
        &self.label
    }

    fn frame(&self) -> u64 {
        self.frame
    }
}

/// Reads event JSON lines, grouped by video. Blank lines are skipped.
pub fn parse_events_jsonl<R: BufRead>(reader: R) -> Result<BTreeMap<String, Vec<EventRecord>>, EvalError> {
    let mut by_video: BTreeMap<String, Vec<EventRecord>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| EvalError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EventRecord = serde_json::from_str(&line).map_err(|e| EvalError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        by_video.entry(record.video.clone()).or_default().push(record);
    }
    Ok(by_video)
}

/// Parses `video_id;label1,label2,...` rows.
pub fn parse_truth_csv(text: &str) -> Result<Vec<LabelSequence>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (id, labels) = line.split_once(';').ok_or_else(|| EvalError::Parse {
            line: i + 1,
            message: "expected `video_id;label1,label2,...`".into(),
        })?;
        let id = id.trim();
        if id.is_empty() {
            return Err(EvalError::Parse {
                line: i + 1,
                message: "empty video id".into(),
            });
        }
        let labels = labels
            .split(',')
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect();
        out.push(LabelSequence::new(id, labels));
    }
    Ok(out)
}

pub fn write_truth_csv(truth: &[LabelSequence]) -> String {
    truth
        .iter()
        .map(|s| format!("{};{}\n", s.video_id, s.labels.join(",")))
        .collect()
}
