use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cannot score an empty prediction set")]
    EmptySet,
    #[error("k={k} is out of range for n={n} attempts")]
    KOutOfRange { n: u64, k: u64 },
    #[error("success count c={c} exceeds attempt count n={n}")]
    CountOutOfRange { n: u64, c: u64 },
}

/// Canonical answer normalization: trim surrounding whitespace, case-fold.
pub fn normalize_answer(answer: &str) -> String {
    answer.trim().to_lowercase()
}

/// Fraction of predictions whose answer exactly matches the gold answer
/// after normalization.
pub fn exact_match_accuracy<S, T>(predictions: &[(S, T)]) -> Result<f64, MetricsError>
where
    S: AsRef<str>,
    T: AsRef<str>,
{
    if predictions.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let matches = predictions
        .iter()
        .filter(|(pred, gold)| normalize_answer(pred.as_ref()) == normalize_answer(gold.as_ref()))
        .count();
    Ok(matches as f64 / predictions.len() as f64)
}

/// Unbiased pass@k estimator: the probability that a uniformly random
/// size-`k` subset of `n` attempts with `c` successes contains at least one
/// success, computed as `1 - C(n-c, k) / C(n, k)`.
///
/// ```
/// use agentforge::trajectory::pass_at_k;
/// assert_eq!(pass_at_k(4, 4, 1).unwrap(), 1.0);
/// assert_eq!(pass_at_k(4, 0, 2).unwrap(), 0.0);
/// ```
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, MetricsError> {
    if c > n {
        return Err(MetricsError::CountOutOfRange { n, c });
    }
    if k < 1 || k > n {
        return Err(MetricsError::KOutOfRange { n, k });
    }
    if c == 0 {
        return Ok(0.0);
    }
    if n - c < k {
        // every size-k subset must include a success
        return Ok(1.0);
    }
    // C(n-c, k) / C(n, k) as a stable running product
    let mut miss_prob = 1.0_f64;
    for i in 0..k {
        miss_prob *= (n - c - i) as f64 / (n - i) as f64;
    }
    Ok(1.0 - miss_prob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive oracle: enumerate all size-k subsets of n attempts where
    /// the first c attempts are successes; count subsets hitting >= 1.
    fn pass_at_k_oracle(n: u64, c: u64, k: u64) -> f64 {
        assert!(n <= 20);
        let mut total = 0u64;
        let mut hits = 0u64;
        for mask in 0u32..(1u32 << n) {
            if u64::from(mask.count_ones()) != k {
                continue;
            }
            total += 1;
            if u64::from(mask) & ((1u64 << c) - 1) != 0 {
                hits += 1;
            }
        }
        hits as f64 / total as f64
    }

    #[test]
    fn hand_counted_examples() {
        assert_eq!(pass_at_k(4, 0, 2).unwrap(), 0.0);
        assert_eq!(pass_at_k(4, 4, 1).unwrap(), 1.0);
        // n=5, c=2, k=2: 7 of the 10 pairs contain a success
        assert!((pass_at_k(5, 2, 2).unwrap() - 0.7).abs() < 1e-12);
        assert!((pass_at_k(5, 2, 2).unwrap() - pass_at_k_oracle(5, 2, 2)).abs() < 1e-12);
    }

    #[test]
    fn matches_enumeration_for_all_small_cases() {
        for n in 1..=12u64 {
            for c in 0..=n {
                for k in 1..=n {
                    let est = pass_at_k(n, c, k).unwrap();
                    let oracle = pass_at_k_oracle(n, c, k);
                    assert!(
                        (est - oracle).abs() < 1e-12,
                        "n={n} c={c} k={k}: {est} vs {oracle}"
                    );
                }
            }
        }
    }

    #[test]
    fn error_cases() {
        assert_eq!(
            pass_at_k(4, 1, 0),
            Err(MetricsError::KOutOfRange { n: 4, k: 0 })
        );
        assert_eq!(
            pass_at_k(4, 1, 5),
            Err(MetricsError::KOutOfRange { n: 4, k: 5 })
        );
        assert_eq!(
            pass_at_k(4, 5, 1),
            Err(MetricsError::CountOutOfRange { n: 4, c: 5 })
        );
    }

    #[test]
    fn accuracy_hand_counts() {
        assert_eq!(exact_match_accuracy(&[("x", "x"), ("y", "y")]).unwrap(), 1.0);
        assert_eq!(
            exact_match_accuracy(&[("x", "y"), ("y", "y"), ("a", "b"), ("c", "c")]).unwrap(),
            0.5
        );
        let empty: Vec<(&str, &str)> = vec![];
        assert_eq!(exact_match_accuracy(&empty), Err(MetricsError::EmptySet));
    }

    #[test]
    fn accuracy_normalizes_whitespace_and_case() {
        assert_eq!(exact_match_accuracy(&[("  Paris \n", "paris")]).unwrap(), 1.0);
        // no further normalization: punctuation matters
        assert_eq!(exact_match_accuracy(&[("paris.", "paris")]).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn monotone_in_k(n in 1u64..40, c_frac in 0.0f64..1.0) {
            let c = (c_frac * n as f64).floor() as u64;
            let mut prev = 0.0;
            for k in 1..=n {
                let v = pass_at_k(n, c, k).unwrap();
                prop_assert!(v + 1e-12 >= prev, "k={k}: {v} < {prev}");
                prev = v;
            }
            // endpoints
            prop_assert!((pass_at_k(n, c, 1).unwrap() - c as f64 / n as f64).abs() < 1e-12);
            let full = pass_at_k(n, c, n).unwrap();
            if c >= 1 {
                prop_assert_eq!(full, 1.0);
            } else {
                prop_assert_eq!(full, 0.0);
            }
        }

        #[test]
        fn accuracy_permutation_invariant(pairs in proptest::collection::vec(("[a-c]{1,2}", "[a-c]{1,2}"), 1..20), seed in 0u64..1000) {
            let base = exact_match_accuracy(&pairs).unwrap();
            let mut shuffled = pairs.clone();
            let mut rng = crate::rng::DeterministicRng::new(seed);
            for i in (1..shuffled.len()).rev() {
                let j = rng.below(i as u64 + 1) as usize;
                shuffled.swap(i, j);
            }
            prop_assert_eq!(base, exact_match_accuracy(&shuffled).unwrap());
        }
    }
}
