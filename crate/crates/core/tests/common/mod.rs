//! Test oracles written independently of the library code paths they check.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use handgest::backend::Segment;
use handgest::detector::{DecisionMode, Proposal};
use handgest::eval::{evaluate, LabelSequence};
use handgest::pipeline::{Pipeline, PipelineConfig};
use handgest::scenario::{ground_truth, Scenario};
use handgest::stream::source::SyntheticSource;
use handgest::Event;

/// The cosine window weight written out directly from its closed form.
pub fn cosine_weight(x: usize) -> f64 {
    0.11 * (std::f64::consts::PI / 4.0 * x as f64 - std::f64::consts::PI / 2.0).cos() + 0.15
}

pub fn reference_weights(n: usize) -> Vec<f64> {
    match n {
        1 => vec![1.0],
        3 => vec![0.3, 0.4, 0.3],
        5 => (0..5).map(cosine_weight).collect(),
        _ => panic!("no weights for {n} windows"),
    }
}

/// Zero-noise oracle scores computed straight from the coverage formula.
pub fn reference_probs(segments: &[Segment], ramp: u64, classes: usize, start: u64, depth: usize) -> Vec<f64> {
    let end = start + depth as u64 - 1;
    let mut best: Option<(usize, f64)> = None;
    for seg in segments {
        let mut weight = 0.0;
        for f in start..=end {
            if f < seg.start_frame || f > seg.end_frame {
                continue;
            }
            let edge = (f - seg.start_frame).min(seg.end_frame - f);
            weight += f64::min(1.0, (edge + 1) as f64 / (ramp + 1) as f64);
        }
        let strength = weight / depth as f64 * seg.peak_confidence;
        if strength > 0.0 && best.is_none_or(|(_, s)| strength > s) {
            best = Some((seg.class_index, strength));
        }
    }
    let strength = best.map_or(0.0, |(_, s)| s);
    let mut probs = vec![(1.0 - strength) / classes as f64; classes];
    if let Some((class, _)) = best {
        probs[class] += strength;
    }
    probs
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefEvent {
    pub frame: u64,
    pub class: usize,
    pub early: bool,
    pub max1: f64,
    pub margin: f64,
}

fn top_two(v: &[f64]) -> (usize, f64, f64) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    let second = v
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &x)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    (best, v[best], second)
}

/// Straightforward frame-by-frame simulation of the online state machine
/// with zero-noise oracle backends. Recomputes every window from scratch.
pub fn reference_run(config: &PipelineConfig, scenario: &Scenario) -> Vec<RefEvent> {
    assert_eq!(config.detector_stride, 1, "reference handles stride 1 only");
    let det = &scenario.detector_script;
    let cls = &scenario.classifier_script;
    let (dd, k) = (config.detector_depth as u64, config.detector_queue as u64);
    let (cd, n, cs) = (
        config.classifier_depth as u64,
        config.n_windows as u64,
        config.classifier_stride as u64,
    );
    let weights = reference_weights(config.n_windows);
    let detector_says_gesture = |end: u64| {
        let p = reference_probs(&det.segments, det.envelope_ramp, 2, end + 1 - dd, dd as usize);
        p[0] > p[1]
    };

    enum Phase {
        Detecting,
        Classifying,
        Cooldown(u64),
    }
    let mut phase = Phase::Detecting;
    let mut pushes_since_clear = 0u64;
    let mut armed = true;
    let mut negatives = 0u64;
    let mut events = Vec::new();

    for t in 0..scenario.duration_frames {
        if let Phase::Cooldown(left) = phase {
            phase = if left <= 1 {
                Phase::Detecting
            } else {
                Phase::Cooldown(left - 1)
            };
            continue;
        }
        if t + 1 < dd + k - 1 {
            continue;
        }
        if !detector_says_gesture(t) {
            armed = true;
        }
        pushes_since_clear += 1;
        if pushes_since_clear < k {
            continue;
        }
        let positive = match config.detector_mode {
            DecisionMode::Unanimous => (t + 1 - k..=t).all(detector_says_gesture),
            DecisionMode::Mean => {
                let (mut g, mut ng) = (0.0, 0.0);
                for end in t + 1 - k..=t {
                    let p = reference_probs(&det.segments, det.envelope_ramp, 2, end + 1 - dd, dd as usize);
                    g += p[0];
                    ng += p[1];
                }
                g > ng
            }
        };
        match phase {
            Phase::Detecting => {
                if positive && (armed || !config.rearm_on_negative) {
                    negatives = 0;
                    phase = Phase::Classifying;
                } else {
                    continue;
                }
            }
            Phase::Classifying => {
                negatives = if positive { 0 } else { negatives + 1 };
            }
            Phase::Cooldown(_) => unreachable!(),
        }
        if t + 1 < cd + (n - 1) * cs {
            continue;
        }
        let classes = 27;
        let mut fused = vec![0.0; classes];
        for i in 0..n {
            let end = t - (n - 1 - i) * cs;
            let p = reference_probs(&cls.segments, cls.envelope_ramp, classes, end + 1 - cd, cd as usize);
            for c in 0..classes {
                fused[c] += weights[i as usize] * p[c];
            }
        }
        let (class, max1, max2) = top_two(&fused);
        let margin = max1 - max2;
        let early = margin >= config.tau_early;
        if early || max1 >= config.tau_late {
            events.push(RefEvent {
                frame: t,
                class,
                early,
                max1,
                margin,
            });
            pushes_since_clear = 0;
            armed = false;
            negatives = 0;
            phase = Phase::Cooldown(config.cooldown() as u64);
        } else if negatives >= k {
            negatives = 0;
            phase = Phase::Detecting;
        }
    }
    events
}

/// Runs the library pipeline over a scenario with oracle backends.
pub fn run_scenario(config: &PipelineConfig, scenario: &Scenario) -> Vec<Event> {
    let det = scenario.detector_backend(config.detector_depth).unwrap();
    let cls = scenario.classifier_backend(config.classifier_depth).unwrap();
    let mut events = Vec::new();
    Pipeline::new(config.clone())
        .unwrap()
        .run(
            SyntheticSource::new(scenario.duration_frames, scenario.fps),
            &det,
            &cls,
            &mut events,
        )
        .unwrap();
    events
}

/// Pooled accuracy of running every scenario once.
pub fn pooled_accuracy(config: &PipelineConfig, scenarios: &[Scenario]) -> f64 {
    let mut predictions = BTreeMap::new();
    let mut truth = Vec::new();
    for (i, s) in scenarios.iter().enumerate() {
        let id = format!("v{i:02}");
        predictions.insert(id.clone(), run_scenario(config, s));
        truth.push(ground_truth(s, &id));
    }
    evaluate(&predictions, &truth).unwrap().pooled_accuracy
}

/// Merges any adjacent pair with a small gap until nothing changes.
pub fn brute_force_merge(proposals: &[Proposal], threshold: u64) -> Vec<Proposal> {
    let mut current: Vec<(u64, u64)> = proposals.iter().map(|p| (p.start_frame, p.end_frame)).collect();
    loop {
        let mut changed = false;
        'scan: for i in 0..current.len() {
            for j in 0..current.len() {
                if i == j {
                    continue;
                }
                let (a, b) = (current[i], current[j]);
                if a.1 < b.0 && b.0 - a.1 - 1 < threshold {
                    current[i] = (a.0, b.1);
                    current.remove(j);
                    changed = true;
                    break 'scan;
                }
            }
        }
        if !changed {
            break;
        }
    }
    current.sort();
    current.into_iter().map(|(s, e)| Proposal::new(s, e).unwrap()).collect()
}

/// Edit distance by exhaustive recursion over the three edit choices, with
/// a memo keyed on suffix positions.
pub fn recursive_distance<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    fn go<S: PartialEq>(a: &[S], b: &[S], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&d) = memo.get(&(i, j)) {
            return d;
        }
        let substitute = usize::from(a[i] != b[j]) + go(a, b, i + 1, j + 1, memo);
        let delete = 1 + go(a, b, i + 1, j, memo);
        let insert = 1 + go(a, b, i, j + 1, memo);
        let d = substitute.min(delete).min(insert);
        memo.insert((i, j), d);
        d
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

/// The same recursion without memoization; only for short inputs.
pub fn naive_distance<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => (usize::from(x != y) + naive_distance(ra, rb))
            .min(1 + naive_distance(ra, b))
            .min(1 + naive_distance(a, rb)),
    }
}

pub fn truth_of(scenario: &Scenario) -> LabelSequence {
    ground_truth(scenario, "v")
}
