use crate::backend::Backend;
use crate::classifier::{classify, FusionWeights};
use crate::detector::{amend_proposals, merge_proposals, propose_offline, DetectionLabel, Proposal};
use crate::stream::{Clip, Frame};
use crate::Scalar;

use super::{GestureEvent, PipelineConfig, PipelineError};

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineResult<T> {
    /// Proposals after merging and amendment, in frame order.
    pub proposals: Vec<Proposal>,
    /// At most one event per proposal.
    pub events: Vec<GestureEvent<T>>,
}

/// Proposal-based recognition over a complete video.
///
/// Every frame with enough history gets a detector decision (the clip ending
/// at that frame). Runs of "gesture" become proposals, which are merged
/// across small gaps, clamped to the video and filtered by length. Each
/// surviving proposal is classified with windows centred on its midpoint.
pub fn run_offline<T: Scalar>(
    config: &PipelineConfig,
    frames: &[Frame],
    detector: &dyn Backend<T>,
    classifier: &dyn Backend<T>,
) -> Result<OfflineResult<T>, PipelineError> {
    config.validate()?;
    let empty = OfflineResult {
        proposals: Vec::new(),
        events: Vec::new(),
    };
    let dd = config.detector_depth;
    if frames.len() < dd {
        return Ok(empty);
    }
    let base = frames[0].index;
    let clip_at = |start: usize, depth: usize| Clip::from_frames(frames[start..start + depth].to_vec());

    let mut decisions = Vec::with_capacity(frames.len() - dd + 1);
    for end in dd - 1..frames.len() {
        let probs = detector.infer(&clip_at(end + 1 - dd, dd)?)?;
        decisions.push((base + end as u64, DetectionLabel::of(&probs)));
    }
    let raw = propose_offline(&decisions)?;
    let merged = merge_proposals(&raw, config.merge_threshold)?;
    let min_len = config.classifier_depth.saturating_sub(config.proposal_slack).max(1) as u64;
    let relative: Vec<Proposal> = merged
        .iter()
        .map(|p| Proposal {
            start_frame: p.start_frame - base,
            end_frame: p.end_frame - base,
        })
        .collect();
    let proposals: Vec<Proposal> = amend_proposals(&relative, frames.len() as u64, min_len)
        .into_iter()
        .map(|p| Proposal {
            start_frame: p.start_frame + base,
            end_frame: p.end_frame + base,
        })
        .collect();

    let cd = config.classifier_depth;
    let n = config.n_windows;
    let stride = config.classifier_stride;
    let weights = FusionWeights::<T>::for_windows(n)?;
    let mut events = Vec::new();
    if frames.len() >= cd {
        let last_start = (frames.len() - cd) as i64;
        for p in &proposals {
            let mid = (p.midpoint() - base) as i64;
            let clips = (0..n)
                .map(|i| {
                    let centre = mid + (i as i64 - (n / 2) as i64) * stride as i64;
                    let start = (centre - (cd / 2) as i64).clamp(0, last_start) as usize;
                    clip_at(start, cd)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let trigger = clips.iter().map(Clip::end_index).max().unwrap_or(p.end_frame);
            let probs = classifier.infer_batch(&clips)?;
            let outcome = classify(&probs, &weights, T::of(config.tau_early), T::of(config.tau_late))?;
            if let Some(event) = GestureEvent::from_outcome(&outcome, &classifier.info().label_set, trigger, n) {
                events.push(event);
            }
        }
    }
    Ok(OfflineResult { proposals, events })
}
