//! Deterministic synthetic backend driven by a scripted gesture timeline.
//!
//! A clip's score for a segment's class grows with how much of the clip the
//! segment covers. Frames near a segment edge count for less than frames deep
//! inside it, so the middle of a gesture is the most convincing part.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendInfo, ProbabilityVector};
use crate::stream::Clip;
use crate::Scalar;

/// One scripted gesture: frames `start_frame..=end_frame` belong to `class_index`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_frame: u64,
    pub end_frame: u64,
    pub class_index: usize,
    pub peak_confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleScript {
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub envelope_ramp: u64,
}

impl OracleScript {
    pub fn silent() -> Self {
        Self {
            segments: Vec::new(),
            noise_sigma: 0.0,
            seed: 0,
            envelope_ramp: 0,
        }
    }

    pub fn validate(&self, num_classes: usize) -> Result<(), BackendError> {
        let bad = |msg: String| Err(BackendError::InvalidConfig(msg));
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!(
                "noise_sigma {} must be finite and non-negative",
                self.noise_sigma
            ));
        }
        let floor = 1.0 / num_classes as f64;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.start_frame > seg.end_frame {
                return bad(format!("segment {i} ends before it starts"));
            }
            if seg.class_index >= num_classes {
                return bad(format!("segment {i} class {} out of range", seg.class_index));
            }
            if !(seg.peak_confidence >= floor && seg.peak_confidence <= 1.0) {
                return bad(format!(
                    "segment {i} peak confidence {} outside [{floor}, 1]",
                    seg.peak_confidence
                ));
            }
            if i > 0 && seg.start_frame <= self.segments[i - 1].end_frame {
                return bad(format!("segment {i} overlaps or precedes segment {}", i - 1));
            }
        }
        Ok(())
    }
}

/// Envelope-weighted fraction of the clip `[start, start + depth)` covered by
/// `seg`. A frame `d` frames from the nearer segment edge (0 at the edge)
/// weighs `min(1, (d + 1) / (ramp + 1))`.
pub fn segment_coverage(seg: &Segment, ramp: u64, start: u64, depth: usize) -> f64 {
    if depth == 0 {
        return 0.0;
    }
    let end = start + depth as u64 - 1;
    let lo = seg.start_frame.max(start);
    let hi = seg.end_frame.min(end);
    if lo > hi {
        return 0.0;
    }
    let total: f64 = (lo..=hi)
        .map(|f| {
            let d = (f - seg.start_frame).min(seg.end_frame - f);
            ((d + 1) as f64 / (ramp + 1) as f64).min(1.0)
        })
        .sum();
    total / depth as f64
}

/// Scores the clip starting at `start_index` with `depth` frames.
///
/// The best-covering segment's class receives
/// `coverage * peak + (1 - coverage * peak) / num_classes`, every other class
/// `(1 - coverage * peak) / num_classes`. Gaussian noise seeded by
/// `seed ^ start_index` is then added, values clamped to `[0, 1]` and
/// renormalized.
pub fn oracle_infer<T: Scalar>(
    script: &OracleScript,
    num_classes: usize,
    label_set_id: &str,
    start_index: u64,
    depth: usize,
) -> ProbabilityVector<T> {
    let n = T::of_usize(num_classes);
    let mut best: Option<(usize, f64)> = None;
    for seg in &script.segments {
        if seg.start_frame > start_index + depth as u64 {
            break;
        }
        let coverage = segment_coverage(seg, script.envelope_ramp, start_index, depth);
        if coverage > 0.0 && best.is_none_or(|(_, c)| coverage * seg.peak_confidence > c) {
            best = Some((seg.class_index, coverage * seg.peak_confidence));
        }
    }

    let (target, strength) = best.map_or((None, T::zero()), |(c, s)| (Some(c), T::of(s)));
    let share = (T::one() - strength) / n;
    let mut values = vec![share; num_classes];
    if let Some(target) = target {
        values[target] = strength + share;
    }

    if script.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(script.seed ^ start_index);
        let normal = Normal::new(0.0, script.noise_sigma).expect("validated sigma");
        for v in values.iter_mut() {
            *v += T::of(normal.sample(&mut rng));
        }
    }
    ProbabilityVector::normalized(values, label_set_id).expect("normalized oracle output is valid")
}

/// Backend that answers from an [`OracleScript`] instead of pixels.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    info: BackendInfo,
    script: OracleScript,
}

impl OracleBackend {
    pub fn new(info: BackendInfo, script: OracleScript) -> Result<Self, BackendError> {
        info.validate()?;
        script.validate(info.num_classes)?;
        Ok(Self { info, script })
    }

    pub fn script(&self) -> &OracleScript {
        &self.script
    }
}

impl<T: Scalar> Backend<T> for OracleBackend {
    fn info(&self) -> &BackendInfo {
        &self.info
    }

    fn infer(&self, clip: &Clip) -> Result<ProbabilityVector<T>, BackendError> {
        self.info.check_clip(clip)?;
        Ok(oracle_infer(
            &self.script,
            self.info.num_classes,
            self.info.label_set.id(),
            clip.start_index,
            clip.depth(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::LabelSet;
    use crate::stream::{Frame, FrameBuffer};

    fn seg(start: u64, end: u64, class: usize, peak: f64) -> Segment {
        Segment {
            start_frame: start,
            end_frame: end,
            class_index: class,
            peak_confidence: peak,
        }
    }

    fn script(segments: Vec<Segment>, noise: f64, ramp: u64) -> OracleScript {
        OracleScript {
            segments,
            noise_sigma: noise,
            seed: 11,
            envelope_ramp: ramp,
        }
    }

    #[test]
    fn fully_inside_is_one_hot() {
        let s = script(vec![seg(0, 100, 4, 1.0)], 0.0, 0);
        let p: ProbabilityVector<f64> = oracle_infer(&s, 27, "j", 10, 16);
        assert_eq!(p.values()[4], 1.0);
        assert!(p.values().iter().enumerate().all(|(i, &v)| i == 4 || v == 0.0));
    }

    #[test]
    fn outside_is_uniform() {
        let s = script(vec![seg(100, 200, 4, 1.0)], 0.0, 0);
        let p: ProbabilityVector<f64> = oracle_infer(&s, 27, "j", 10, 16);
        for &v in p.values() {
            assert!((v - 1.0 / 27.0).abs() < 1e-15);
        }
    }

    #[test]
    fn half_covered_matches_formula() {
        // Frames 8..=15 of a 16-frame clip starting at 0 lie in the segment.
        let s = script(vec![seg(8, 100, 2, 0.9)], 0.0, 0);
        let p: ProbabilityVector<f64> = oracle_infer(&s, 27, "j", 0, 16);
        let expected_target = 0.5 * 0.9 + (1.0 - 0.45) / 27.0;
        let expected_other = 0.55 / 27.0;
        assert!((p.values()[2] - expected_target).abs() < 1e-12);
        assert!((p.values()[2] - 0.470).abs() < 5e-4);
        assert!((p.values()[0] - expected_other).abs() < 1e-12);
        assert!((p.values()[0] - 0.0204).abs() < 5e-5);
    }

    #[test]
    fn ramp_attenuates_edges() {
        let s = seg(10, 40, 0, 1.0);
        // Edge frame weighs 1/(ramp+1).
        assert!((segment_coverage(&s, 3, 10, 1) - 0.25).abs() < 1e-15);
        assert!((segment_coverage(&s, 3, 13, 1) - 1.0).abs() < 1e-15);
        assert!((segment_coverage(&s, 0, 10, 1) - 1.0).abs() < 1e-15);
        // Frames 10..=13 of clip 6..=13: weights 1/4, 2/4, 3/4, 1.
        assert!((segment_coverage(&s, 3, 6, 8) - 2.5 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn nucleus_reaches_peak_without_noise() {
        let depth = 16usize;
        let ramp = 4;
        let s = script(vec![seg(50, 50 + depth as u64 + 2 * ramp, 5, 0.8)], 0.0, ramp);
        let best = (0..120u64)
            .map(|start| oracle_infer::<f64>(&s, 27, "j", start, depth).values()[5])
            .fold(0.0f64, f64::max);
        assert!(best >= 0.8);
    }

    #[test]
    fn noise_is_deterministic_per_start_index() {
        let s = script(vec![seg(0, 50, 1, 0.9)], 0.1, 2);
        let a: ProbabilityVector<f64> = oracle_infer(&s, 27, "j", 20, 16);
        let b: ProbabilityVector<f64> = oracle_infer(&s, 27, "j", 20, 16);
        let c: ProbabilityVector<f64> = oracle_infer(&s, 27, "j", 21, 16);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn script_validation() {
        assert!(script(vec![seg(0, 10, 0, 1.0), seg(10, 20, 0, 1.0)], 0.0, 0)
            .validate(2)
            .is_err());
        assert!(script(vec![seg(20, 10, 0, 1.0)], 0.0, 0).validate(2).is_err());
        assert!(script(vec![seg(0, 10, 2, 1.0)], 0.0, 0).validate(2).is_err());
        assert!(script(vec![seg(0, 10, 0, 0.3)], 0.0, 0).validate(2).is_err());
        assert!(script(vec![seg(0, 10, 0, 0.5)], -1.0, 0).validate(2).is_err());
        assert!(script(vec![seg(0, 10, 0, 0.5), seg(11, 12, 1, 1.0)], 0.0, 0)
            .validate(2)
            .is_ok());
    }

    #[test]
    fn backend_checks_depth() {
        let backend = OracleBackend::new(
            BackendInfo::new(8, LabelSet::detector()).unwrap(),
            script(vec![], 0.0, 0),
        )
        .unwrap();
        let mut buffer = FrameBuffer::new(20);
        for i in 0..20 {
            buffer.push(Frame::blank(i, 0)).unwrap();
        }
        let ok: Result<ProbabilityVector<f32>, _> = backend.infer(&buffer.extract_clip(19, 8).unwrap());
        assert!(ok.is_ok());
        let err: Result<ProbabilityVector<f32>, _> = backend.infer(&buffer.extract_clip(19, 16).unwrap());
        assert!(matches!(err, Err(BackendError::ShapeMismatch { .. })));
    }
}
