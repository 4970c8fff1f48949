mod common;

use std::collections::BTreeMap;

use handgest::backend::wire::{Request, Response};
use handgest::backend::{oracle_infer, OracleScript, ProbabilityVector, Segment};
use handgest::classifier::{classify, decide, FusionWeights, OutcomeKind};
use handgest::detector::{merge_proposals, propose_offline, DetectionLabel, Proposal};
use handgest::eval::{evaluate, levenshtein_accuracy, levenshtein_distance, EventRecord, LabelSequence};
use handgest::scenario::{generate, ground_truth, ScenarioError, ScenarioParams};
use proptest::prelude::*;

use common::{brute_force_merge, naive_distance, recursive_distance};

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_map(|raw| {
        let sum: f64 = raw.iter().sum();
        if sum == 0.0 {
            vec![1.0 / raw.len() as f64; raw.len()]
        } else {
            raw.iter().map(|v| v / sum).collect()
        }
    })
}

fn pv(values: Vec<f64>) -> ProbabilityVector<f64> {
    ProbabilityVector::new(values, "jester27").unwrap()
}

fn sorted_proposals() -> impl Strategy<Value = Vec<Proposal>> {
    prop::collection::vec((0u64..8, 0u64..10), 0..20).prop_map(|parts| {
        let mut at = 0;
        parts
            .into_iter()
            .map(|(gap, len)| {
                let start = at + gap;
                at = start + len + 1;
                Proposal::new(start, start + len).unwrap()
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn normalized_vectors_satisfy_invariants(raw in prop::collection::vec(prop_oneof![
        -2.0f64..3.0, Just(0.0), Just(f64::NAN), Just(1.0)], 1..40)) {
        let v = ProbabilityVector::normalized(raw, "x").unwrap();
        prop_assert!(v.values().iter().all(|&p| (0.0..=1.0).contains(&p)));
        prop_assert!((v.values().iter().sum::<f64>() - 1.0).abs() <= 1e-5);
    }

    #[test]
    fn oracle_output_is_valid_and_pure(
        start in 0u64..400, depth in prop::sample::select(vec![8usize, 16, 32]),
        noise in prop::sample::select(vec![0.0, 0.05, 0.3, 1.0]), seed in any::<u64>(),
        spans in prop::collection::vec((0u64..30, 1u64..60, 0usize..27, 0.1f64..1.0), 0..5),
        ramp in 0u64..6,
    ) {
        let mut at = 0;
        let segments: Vec<Segment> = spans.into_iter().map(|(gap, len, class, peak)| {
            let s = at + gap;
            at = s + len + 1;
            Segment { start_frame: s, end_frame: s + len - 1, class_index: class, peak_confidence: peak }
        }).collect();
        let script = OracleScript { segments, noise_sigma: noise, seed, envelope_ramp: ramp };
        script.validate(27).unwrap();
        let a: ProbabilityVector<f64> = oracle_infer(&script, 27, "jester27", start, depth);
        let b: ProbabilityVector<f64> = oracle_infer(&script, 27, "jester27", start, depth);
        prop_assert_eq!(&a, &b);
        prop_assert!(ProbabilityVector::new(a.values().to_vec(), "jester27").is_ok());
        let single: ProbabilityVector<f32> = oracle_infer(&script, 27, "jester27", start, depth);
        prop_assert_eq!(single.len(), 27);
    }

    #[test]
    fn classification_is_permutation_equivariant(probs in simplex(27), shift in 1usize..27) {
        let weights = FusionWeights::<f64>::for_windows(1).unwrap();
        let base = classify(&[pv(probs.clone())], &weights, 0.6, 0.2).unwrap();
        let mut rotated = probs.clone();
        rotated.rotate_right(shift);
        let moved = classify(&[pv(rotated)], &weights, 0.6, 0.2).unwrap();
        prop_assert_eq!(base.kind, moved.kind);
        prop_assert_eq!(base.max1, moved.max1);
        prop_assert_eq!(base.max2, moved.max2);
        // Ties resolve by index, so compare the class only when the top is unique.
        if base.max1 > base.max2 {
            prop_assert_eq!(base.class_index.map(|c| (c + shift) % 27), moved.class_index);
        }
    }

    #[test]
    fn margin_and_kind_are_consistent(windows in prop::sample::select(vec![1usize, 3, 5]),
                                      probs in prop::collection::vec(simplex(27), 5)) {
        let weights = FusionWeights::<f64>::for_windows(windows).unwrap();
        let vectors: Vec<_> = probs.into_iter().take(windows).map(pv).collect();
        let out = classify(&vectors, &weights, 0.6, 0.2).unwrap();
        prop_assert!(out.margin >= 0.0);
        prop_assert!(out.max1 >= out.max2);
        match out.kind {
            OutcomeKind::Early => prop_assert!(out.margin >= 0.6),
            OutcomeKind::Late => prop_assert!(out.max1 >= 0.2 && out.margin < 0.6),
            OutcomeKind::None => prop_assert!(out.max1 < 0.2 && out.margin < 0.6),
        }
        prop_assert_eq!(out.class_index.is_some(), out.kind != OutcomeKind::None);
    }

    #[test]
    fn lowering_thresholds_never_loses_a_decision(fused in prop::collection::vec(0.0f64..1.0, 2..30),
                                                  te in 0.3f64..0.9, tl in 0.05f64..0.3, d in 0.0f64..0.2) {
        let strict = decide(&fused, te, tl);
        let loose = decide(&fused, te - d, (tl - d).max(0.001));
        if strict.kind == OutcomeKind::Early {
            prop_assert_eq!(loose.kind, OutcomeKind::Early);
        }
        if strict.kind != OutcomeKind::None {
            prop_assert!(loose.kind != OutcomeKind::None);
        }
    }

    #[test]
    fn merging_is_idempotent_and_matches_brute_force(proposals in sorted_proposals(), threshold in 0u64..8) {
        let once = merge_proposals(&proposals, threshold).unwrap();
        prop_assert_eq!(&merge_proposals(&once, threshold).unwrap(), &once);
        prop_assert_eq!(&once, &brute_force_merge(&proposals, threshold));
        let covered: u64 = proposals.iter().map(|p| p.len()).sum();
        prop_assert!(once.iter().map(|p| p.len()).sum::<u64>() >= covered);
    }

    #[test]
    fn offline_proposals_are_the_gesture_runs(labels in prop::collection::vec(prop::bool::ANY, 0..80), first in 0u64..50) {
        let decisions: Vec<_> = labels.iter().enumerate().map(|(i, &g)| {
            (first + i as u64, if g { DetectionLabel::Gesture } else { DetectionLabel::NoGesture })
        }).collect();
        let proposals = propose_offline(&decisions).unwrap();
        let mut marked = vec![false; labels.len()];
        for p in &proposals {
            for f in p.start_frame..=p.end_frame {
                marked[(f - first) as usize] = true;
            }
        }
        prop_assert_eq!(marked, labels);
        for pair in proposals.windows(2) {
            prop_assert!(pair[1].start_frame > pair[0].end_frame + 1);
        }
    }

    #[test]
    fn levenshtein_matches_recursive_oracle(a in prop::collection::vec(0u8..27, 0..12),
                                            b in prop::collection::vec(0u8..27, 0..12)) {
        prop_assert_eq!(levenshtein_distance(&a, &b), recursive_distance(&a, &b));
    }

    #[test]
    fn levenshtein_matches_unmemoized_recursion(a in prop::collection::vec(0u8..4, 0..6),
                                                b in prop::collection::vec(0u8..4, 0..6)) {
        prop_assert_eq!(levenshtein_distance(&a, &b), naive_distance(&a, &b));
    }

    #[test]
    fn levenshtein_axioms(a in prop::collection::vec(0u8..5, 0..10), b in prop::collection::vec(0u8..5, 0..10),
                          c in prop::collection::vec(0u8..5, 0..10)) {
        let d = |x: &[u8], y: &[u8]| levenshtein_distance(x, y);
        prop_assert_eq!(d(&a, &a), 0);
        prop_assert_eq!(d(&a, &b) == 0, a == b);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        prop_assert!(d(&a, &b) >= a.len().abs_diff(b.len()));
        prop_assert!(d(&a, &b) <= a.len().max(b.len()));
        if !a.is_empty() {
            let acc: f64 = levenshtein_accuracy(&a, &b).unwrap();
            prop_assert!(acc <= 100.0);
            prop_assert_eq!(acc == 100.0, a == b);
        }
    }

    #[test]
    fn evaluation_ignores_event_and_video_order(
        videos in prop::collection::vec((prop::collection::vec(0u8..6, 1..6), prop::collection::vec(0u8..6, 0..6)), 1..8),
        rotate in 0usize..8,
    ) {
        let name = |c: u8| format!("class{c}");
        let truth: Vec<LabelSequence> = videos.iter().enumerate()
            .map(|(i, (t, _))| LabelSequence::new(format!("v{i}"), t.iter().map(|&c| name(c)).collect()))
            .collect();
        let record = |i: usize, k: usize, c: u8| EventRecord {
            video: format!("v{i}"), frame: 10 * k as u64, label: name(c), kind: "late".into(), max1: 0.5, margin: 0.1,
        };
        let mut ordered = BTreeMap::new();
        let mut shuffled = BTreeMap::new();
        for (i, (_, p)) in videos.iter().enumerate() {
            let events: Vec<_> = p.iter().enumerate().map(|(k, &c)| record(i, k, c)).collect();
            let mut reversed = events.clone();
            reversed.reverse();
            ordered.insert(format!("v{i}"), events);
            shuffled.insert(format!("v{i}"), reversed);
        }
        let mut truth_rotated = truth.clone();
        let len = truth_rotated.len();
        truth_rotated.rotate_left(rotate % len);
        let a = evaluate(&ordered, &truth).unwrap();
        let b = evaluate(&shuffled, &truth_rotated).unwrap();
        prop_assert_eq!(&a, &b);
        let expected_distance: usize = videos.iter().map(|(t, p)| levenshtein_distance(t, p)).sum();
        prop_assert_eq!(a.total_distance, expected_distance);
    }

    #[test]
    fn wire_messages_round_trip(id in any::<u64>(), probs in prop::collection::vec(0.0f64..1.0, 0..30),
                                message in "[ -~]{0,40}") {
        for response in [
            Response::Infer { id, probs: probs.clone() },
            Response::Error { id: Some(id), message: message.clone() },
            Response::Error { id: None, message: message.clone() },
        ] {
            let line = response.to_line();
            prop_assert!(line.ends_with('\n'));
            prop_assert_eq!(line.matches('\n').count(), 1);
            prop_assert_eq!(Response::parse(&line).unwrap(), response);
        }
        let hello = Request::Hello.to_line();
        prop_assert_eq!(hello, "{\"op\":\"hello\"}\n");
    }

    #[test]
    fn generated_scenarios_are_valid(count in 0usize..8, duration in 100u64..1500, noise in 0.0f64..0.5, seed in any::<u64>()) {
        match generate(&ScenarioParams::new(count, duration, noise, seed)) {
            Ok(s) => {
                s.validate().unwrap();
                prop_assert_eq!(s.gestures.len(), count);
                prop_assert_eq!(ground_truth(&s, "v").labels.len(), count);
                for pair in s.gestures.windows(2) {
                    prop_assert!(pair[1].start_frame - pair[0].end_frame - 1 >= 27);
                }
                for g in &s.gestures {
                    prop_assert!((30..=42).contains(&(g.end_frame - g.start_frame + 1)));
                }
            }
            Err(ScenarioError::Infeasible(_)) => {
                prop_assert!(20 + 42 * count as u64 + 27 * (count as u64).saturating_sub(1) + 10 > duration);
            }
            Err(other) => prop_assert!(false, "unexpected {other:?}"),
        }
    }
}
