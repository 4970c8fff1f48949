use crate::Scalar;

use super::EvalError;

/// Minimum number of single-symbol insertions, deletions and substitutions
/// turning `a` into `b`.
pub fn levenshtein_distance<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }

    let mut prev_row: Vec<usize> = (0..=b.len()).collect();
    let mut cur_row = vec![0; b.len() + 1];

    for (i, ac) in a.iter().enumerate() {
        cur_row[0] = i + 1;
        for (j, bc) in b.iter().enumerate() {
            let cost = usize::from(ac != bc);
            cur_row[j + 1] = (cur_row[j] + 1).min(prev_row[j + 1] + 1).min(prev_row[j] + cost);
        }
        std::mem::swap(&mut prev_row, &mut cur_row);
    }

    prev_row[b.len()]
}

/// `(1 - LD(target, prediction) / |target|) * 100`. Not clamped, so heavy
/// over-prediction goes negative.
pub fn levenshtein_accuracy<T: Scalar, S: PartialEq>(target: &[S], prediction: &[S]) -> Result<T, EvalError> {
    if target.is_empty() {
        return Err(EvalError::UndefinedMetric);
    }
    let distance = levenshtein_distance(target, prediction);
    Ok(accuracy_from(distance, target.len()))
}

pub(crate) fn accuracy_from<T: Scalar>(distance: usize, target_len: usize) -> T {
    (T::one() - T::of_usize(distance) / T::of_usize(target_len)) * T::of(100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn kitten_sitting() {
        assert_eq!(levenshtein_distance(&chars("kitten"), &chars("sitting")), 3);
    }

    #[test]
    fn identity_and_insertions() {
        assert_eq!(levenshtein_distance(&chars("gesture"), &chars("gesture")), 0);
        assert_eq!(levenshtein_distance::<&str>(&[], &["a", "b"]), 2);
        assert_eq!(levenshtein_distance(&["a", "b"], &[]), 2);
    }

    #[test]
    fn accuracy_examples() {
        let t = ["a", "b", "c", "d"];
        assert_eq!(levenshtein_accuracy::<f64, _>(&t, &t).unwrap(), 100.0);
        assert_eq!(levenshtein_accuracy::<f64, _>(&t, &["a", "x", "c", "d"]).unwrap(), 75.0);
        assert_eq!(
            levenshtein_accuracy::<f64, _>(&["a", "b"], &["p", "q", "r", "s", "t"]).unwrap(),
            -150.0
        );
        assert_eq!(accuracy_from::<f64>(50, 80), 37.5);
        assert_eq!(
            levenshtein_accuracy::<f32, &str>(&[], &["a"]),
            Err(EvalError::UndefinedMetric)
        );
    }
}
