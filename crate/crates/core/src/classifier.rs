//! Multi-window fusion of classifier scores and the early/late decision.

use crate::backend::{argmax, ProbabilityVector};
use crate::Scalar;

pub const DEFAULT_TAU_EARLY: f64 = 0.6;
pub const DEFAULT_TAU_LATE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifierError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Center-peaked weight for window `x` of five: `0.11 * cos(π/4 · x − π/2) + 0.15`.
pub fn cosine_weight<T: Scalar>(x: usize) -> Result<T, ClassifierError> {
    if x > 4 {
        return Err(ClassifierError::InvalidInput(format!(
            "window identifier {x} outside 0..=4"
        )));
    }
    let angle = T::FRAC_PI_4() * T::of_usize(x) - T::FRAC_PI_2();
    Ok(T::of(0.11) * angle.cos() + T::of(0.15))
}

/// Per-window weights, oldest window first.
///
/// Five-window weights sum to about 1.0155635 and are deliberately left
/// unnormalized so thresholds apply to the weighted sum as defined.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights<T> {
    weights: Vec<T>,
}

impl<T: Scalar> FusionWeights<T> {
    pub fn for_windows(n_windows: usize) -> Result<Self, ClassifierError> {
        let weights = match n_windows {
            1 => vec![T::one()],
            3 => vec![T::of(0.3), T::of(0.4), T::of(0.3)],
            5 => (0..5).map(cosine_weight).collect::<Result<_, _>>()?,
            n => {
                return Err(ClassifierError::InvalidInput(format!(
                    "{n} windows unsupported, expected 1, 3 or 5"
                )))
            }
        };
        Ok(Self { weights })
    }

    /// Arbitrary weights; must be non-negative, symmetric and peak in the middle.
    pub fn custom(weights: Vec<T>) -> Result<Self, ClassifierError> {
        let n = weights.len();
        if n == 0 {
            return Err(ClassifierError::InvalidInput("no weights".into()));
        }
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(ClassifierError::InvalidInput(
                "weights must be finite and non-negative".into(),
            ));
        }
        for i in 0..n / 2 {
            if weights[i] != weights[n - 1 - i] {
                return Err(ClassifierError::InvalidInput("weights must be symmetric".into()));
            }
        }
        let center = weights[n / 2];
        if weights.iter().any(|&w| w > center) {
            return Err(ClassifierError::InvalidInput(
                "center weight must be the largest".into(),
            ));
        }
        Ok(Self { weights })
    }

    pub fn n_windows(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn sum(&self) -> T {
        self.weights.iter().fold(T::zero(), |acc, &w| acc + w)
    }
}

pub fn fusion_weights<T: Scalar>(n_windows: usize) -> Result<FusionWeights<T>, ClassifierError> {
    FusionWeights::for_windows(n_windows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeKind {
    /// Top-two margin reached the early threshold.
    Early,
    /// Only the top score reached the late threshold.
    Late,
    None,
}

impl OutcomeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Early => "early",
            OutcomeKind::Late => "late",
            OutcomeKind::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationOutcome<T> {
    pub kind: OutcomeKind,
    /// Winning class index; `None` when no decision was reached.
    pub class_index: Option<usize>,
    pub max1: T,
    pub max2: T,
    pub margin: T,
}

impl<T: Scalar> ClassificationOutcome<T> {
    pub fn is_decision(&self) -> bool {
        self.kind != OutcomeKind::None
    }
}

/// Fused scores `Σ_i weight_i · probs_i`.
pub fn fuse<T: Scalar>(
    window_probs: &[ProbabilityVector<T>],
    weights: &FusionWeights<T>,
) -> Result<Vec<T>, ClassifierError> {
    if window_probs.len() != weights.n_windows() {
        return Err(ClassifierError::ShapeMismatch(format!(
            "{} windows for {} weights",
            window_probs.len(),
            weights.n_windows()
        )));
    }
    let classes = window_probs[0].len();
    let label_set = window_probs[0].label_set_id();
    let mut fused = vec![T::zero(); classes];
    for (probs, &w) in window_probs.iter().zip(weights.weights()) {
        if probs.len() != classes {
            return Err(ClassifierError::ShapeMismatch(format!(
                "window has {} classes, expected {classes}",
                probs.len()
            )));
        }
        if probs.label_set_id() != label_set {
            return Err(ClassifierError::ShapeMismatch(format!(
                "label set {} mixed with {label_set}",
                probs.label_set_id()
            )));
        }
        for (acc, &p) in fused.iter_mut().zip(probs.values()) {
            *acc += w * p;
        }
    }
    Ok(fused)
}

/// Applies the early/late thresholds to already fused scores.
///
/// Early when `max1 - max2 >= tau_early`, otherwise late when
/// `max1 >= tau_late`, otherwise no decision. A tied top pair has margin
/// zero, so it can never be early.
pub fn decide<T: Scalar>(fused: &[T], tau_early: T, tau_late: T) -> ClassificationOutcome<T> {
    let best = argmax(fused);
    let max1 = fused[best];
    let max2 = fused
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &v)| v)
        .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))))
        .unwrap_or(T::zero());
    let margin = max1 - max2;
    let kind = if margin >= tau_early {
        OutcomeKind::Early
    } else if max1 >= tau_late {
        OutcomeKind::Late
    } else {
        OutcomeKind::None
    };
    ClassificationOutcome {
        kind,
        class_index: (kind != OutcomeKind::None).then_some(best),
        max1,
        max2,
        margin,
    }
}

/// Weighted multi-window classification.
pub fn classify<T: Scalar>(
    window_probs: &[ProbabilityVector<T>],
    weights: &FusionWeights<T>,
    tau_early: T,
    tau_late: T,
) -> Result<ClassificationOutcome<T>, ClassifierError> {
    let fused = fuse(window_probs, weights)?;
    Ok(decide(&fused, tau_early, tau_late))
}
