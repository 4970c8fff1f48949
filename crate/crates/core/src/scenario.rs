//! Scripted gesture timelines that drive the oracle backends and double as
//! ground truth.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, BackendInfo, LabelSet, OracleBackend, OracleScript, Segment, JESTER_LABELS};
use crate::eval::LabelSequence;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("scenario i/o: {0}")]
    Io(String),
}

/// One scripted gesture, inclusive frame range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedGesture {
    pub start_frame: u64,
    pub end_frame: u64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub duration_frames: u64,
    pub fps: f64,
    pub seed: u64,
    pub gestures: Vec<ScriptedGesture>,
    pub detector_script: OracleScript,
    pub classifier_script: OracleScript,
}

/// Knobs for [`generate`]. The defaults mirror a 20 s, 30 fps recording
/// holding four gestures of roughly 36 frames each.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub gesture_count: usize,
    pub duration_frames: u64,
    pub fps: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Gesture lengths are drawn uniformly from this inclusive range.
    pub span_min: u64,
    pub span_max: u64,
    /// Minimum quiet frames between gestures: cooldown plus the frames the
    /// detector queue needs to refill.
    pub min_gap: u64,
    /// Quiet frames before the first gesture.
    pub lead_in: u64,
    /// Quiet frames after the last gesture.
    pub tail: u64,
    pub detector_peak: f64,
    pub classifier_peak: f64,
    pub detector_ramp: u64,
    pub classifier_ramp: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            gesture_count: 4,
            duration_frames: 600,
            fps: 30.0,
            noise_sigma: 0.0,
            seed: 0,
            span_min: 30,
            span_max: 42,
            // cooldown (16) + detector refill (8 + 4 - 1)
            min_gap: 27,
            lead_in: 20,
            tail: 10,
            detector_peak: 1.0,
            classifier_peak: 1.0,
            detector_ramp: 0,
            classifier_ramp: 4,
        }
    }
}

impl ScenarioParams {
    pub fn new(gesture_count: usize, duration_frames: u64, noise_sigma: f64, seed: u64) -> Self {
        Self {
            gesture_count,
            duration_frames,
            noise_sigma,
            seed,
            ..Self::default()
        }
    }
}

/// Gesture classes a scenario draws from: everything except the two
/// background classes.
pub fn gesture_classes() -> Vec<&'static str> {
    JESTER_LABELS
        .iter()
        .copied()
        .filter(|l| *l != "Doing other things" && *l != "No gesture")
        .collect()
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Places `gesture_count` gestures with seeded random spacing.
pub fn generate(params: &ScenarioParams) -> Result<Scenario, ScenarioError> {
    if params.span_min == 0 || params.span_min > params.span_max {
        return Err(ScenarioError::Invalid(format!(
            "span range {}..={} is empty",
            params.span_min, params.span_max
        )));
    }
    if !(params.noise_sigma >= 0.0 && params.noise_sigma.is_finite()) {
        return Err(ScenarioError::Invalid(format!(
            "noise {} must be non-negative",
            params.noise_sigma
        )));
    }
    let n = params.gesture_count as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let worst_case = if n == 0 {
        0
    } else {
        params.lead_in + n * params.span_max + (n - 1) * params.min_gap + params.tail
    };
    if worst_case > params.duration_frames {
        return Err(ScenarioError::Infeasible(format!(
            "{n} gestures need up to {worst_case} frames, duration is {}",
            params.duration_frames
        )));
    }

    let spans: Vec<u64> = (0..n)
        .map(|_| rng.random_range(params.span_min..=params.span_max))
        .collect();
    let used = if n == 0 {
        0
    } else {
        params.lead_in + spans.iter().sum::<u64>() + (n - 1) * params.min_gap + params.tail
    };
    let slack = params.duration_frames.saturating_sub(used);
    // Split the slack into n + 1 random shares.
    let mut cuts: Vec<u64> = (0..n).map(|_| rng.random_range(0..=slack)).collect();
    cuts.sort_unstable();

    let classes = gesture_classes();
    let jester = LabelSet::jester();
    let mut gestures = Vec::with_capacity(n as usize);
    let mut cursor = params.lead_in;
    let mut previous_cut = 0;
    for (i, (&span, &cut)) in spans.iter().zip(&cuts).enumerate() {
        cursor += cut - previous_cut;
        previous_cut = cut;
        if i > 0 {
            cursor += params.min_gap;
        }
        let label = classes[rng.random_range(0..classes.len())].to_string();
        gestures.push(ScriptedGesture {
            start_frame: cursor,
            end_frame: cursor + span - 1,
            label,
        });
        cursor += span;
    }

    let script = |peak: f64, ramp: u64, stream: u64, class_of: &dyn Fn(&ScriptedGesture) -> usize| OracleScript {
        segments: gestures
            .iter()
            .map(|g| Segment {
                start_frame: g.start_frame,
                end_frame: g.end_frame,
                class_index: class_of(g),
                peak_confidence: peak,
            })
            .collect(),
        noise_sigma: params.noise_sigma,
        seed: derive_seed(params.seed, stream),
        envelope_ramp: ramp,
    };
    let detector_script = script(params.detector_peak, params.detector_ramp, 1, &|_| 0);
    let classifier_script = script(params.classifier_peak, params.classifier_ramp, 2, &|g| {
        jester.index_of(&g.label).expect("label drawn from the jester set")
    });

    let scenario = Scenario {
        duration_frames: params.duration_frames,
        fps: params.fps,
        seed: params.seed,
        gestures,
        detector_script,
        classifier_script,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Gesture names in temporal order.
pub fn ground_truth(scenario: &Scenario, video_id: &str) -> LabelSequence {
    LabelSequence::new(video_id, scenario.gestures.iter().map(|g| g.label.clone()).collect())
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.fps > 0.0) {
            return invalid(format!("fps {} must be positive", self.fps));
        }
        let jester = LabelSet::jester();
        for (i, g) in self.gestures.iter().enumerate() {
            if g.start_frame > g.end_frame {
                return invalid(format!("gesture {i} ends before it starts"));
            }
            if g.end_frame >= self.duration_frames {
                return invalid(format!("gesture {i} runs past the end of the stream"));
            }
            if i > 0 && g.start_frame <= self.gestures[i - 1].end_frame {
                return invalid(format!("gesture {i} overlaps gesture {}", i - 1));
            }
            if jester.index_of(&g.label).is_none() {
                return invalid(format!("gesture {i} has unknown label {:?}", g.label));
            }
        }
        let spans_match = self.detector_script.segments.len() == self.gestures.len()
            && self
                .detector_script
                .segments
                .iter()
                .zip(&self.gestures)
                .all(|(s, g)| s.start_frame == g.start_frame && s.end_frame == g.end_frame && s.class_index == 0);
        if !spans_match {
            return invalid("detector script segments must coincide with gesture spans".into());
        }
        self.detector_script
            .validate(2)
            .and_then(|_| self.classifier_script.validate(jester.len()))
            .map_err(|e| ScenarioError::Invalid(e.to_string()))
    }

    pub fn detector_backend(&self, depth: usize) -> Result<OracleBackend, BackendError> {
        OracleBackend::new(
            BackendInfo::new(depth, LabelSet::detector())?,
            self.detector_script.clone(),
        )
    }

    pub fn classifier_backend(&self, depth: usize) -> Result<OracleBackend, BackendError> {
        OracleBackend::new(
            BackendInfo::new(depth, LabelSet::jester())?,
            self.classifier_script.clone(),
        )
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Self = toml::from_str(text).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}
