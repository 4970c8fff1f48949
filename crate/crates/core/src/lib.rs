//! Online hand-gesture recognition engine.
//!
//! A frame stream flows through a lightweight binary detector (8-frame
//! clips, a queue of four overlapping windows) that gates a multi-class
//! classifier (16- or 32-frame clips fused over 1, 3 or 5 sliding windows).
//! The classifier decision fires either early, when the top-two margin of the
//! fused scores is large, or late, when only the top score clears a lower bar.
//! Recognized gesture sequences are scored with Levenshtein accuracy.
//!
//! Neural inference sits behind the [`backend::Backend`] trait. The crate
//! ships a deterministic synthetic oracle and a newline-delimited JSON client
//! for external model servers.
//!
//! The math is generic over [`Scalar`]; the aliases below fix it to `f64`,
//! which is what the CLI uses.

pub mod backend;
pub mod classifier;
pub mod cli;
pub mod detector;
pub mod eval;
pub mod pipeline;
pub mod scalar;
pub mod scenario;
pub mod stream;

pub use scalar::Scalar;

/// Per-class scores in double precision.
pub type Probs = backend::ProbabilityVector<f64>;
/// Per-class scores in single precision.
pub type Probs32 = backend::ProbabilityVector<f32>;
pub type Weights = classifier::FusionWeights<f64>;
pub type Weights32 = classifier::FusionWeights<f32>;
pub type Outcome = classifier::ClassificationOutcome<f64>;
pub type Event = pipeline::GestureEvent<f64>;
pub type Pipeline = pipeline::Pipeline<f64>;
pub type Summary = pipeline::RunSummary<f64>;
