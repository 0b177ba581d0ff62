use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tensor::{Checkpoint, DeltaSet, MergeError, Tensor};
use crate::rng::keyed_unit;

/// Which way deltas point.
///
/// `TaskVector` is tuned − base (inject target-domain modifications onto
/// the base); `BaseMinusTuned` is base − tuned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    #[default]
    TaskVector,
    BaseMinusTuned,
}

/// Merge hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeConfig {
    /// Global step size of the merged update relative to the base.
    pub lambda: f64,
    /// Per-source mixing weights; length must equal the source count.
    pub weights: Vec<f64>,
    /// Keep fraction in (0, 1]; drop probability ramps up as magnitude
    /// rank falls, with mean drop rate 1 − density.
    pub density: f64,
    pub epsilon: f64,
    pub sign_convention: SignConvention,
    pub seed: u64,
}

impl MergeConfig {
    /// Published defaults: lambda 0.9, density 1.0, unit weights.
    pub fn with_sources(n_sources: usize) -> Self {
        Self {
            lambda: 0.9,
            weights: vec![1.0; n_sources],
            density: 1.0,
            epsilon: 1e-8,
            sign_convention: SignConvention::default(),
            seed: 0,
        }
    }
}

/// Elementwise delta between a tuned checkpoint and the base.
pub fn compute_delta(
    base: &Checkpoint,
    tuned: &Checkpoint,
    convention: SignConvention,
    source_index: usize,
) -> Result<DeltaSet, MergeError> {
    base.check_compatible(tuned)?;
    let mut tensors = BTreeMap::new();
    for (name, base_tensor) in &base.tensors {
        let tuned_tensor = &tuned.tensors[name];
        let data: Vec<f32> = base_tensor
            .data
            .iter()
            .zip(&tuned_tensor.data)
            .map(|(&b, &t)| {
                let (b, t) = (f64::from(b), f64::from(t));
                let d = match convention {
                    SignConvention::TaskVector => t - b,
                    SignConvention::BaseMinusTuned => b - t,
                };
                d as f32
            })
            .collect();
        tensors.insert(
            name.clone(),
            Tensor {
                shape: base_tensor.shape.clone(),
                data,
            },
        );
    }
    Ok(DeltaSet {
        source_index,
        tensors,
    })
}

/// MagPrune probabilities for one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct MagpruneProbs {
    pub probs: Vec<f64>,
    /// Set for single-element tensors, where the rank convention forces
    /// the maximal drop probability.
    pub degenerate: bool,
}

/// Assign drop probabilities by magnitude rank: smaller |delta| means a
/// higher drop chance.
///
/// With normalized rank `r` in [0, 1] (0 = smallest, ties by element
/// index), `p = clamp(2 (1-d) (1-r), 0, 1)`; the unclamped ramp has mean
/// drop rate `1 - d`.
pub fn magprune_probs(delta: &Tensor, density: f64) -> Result<MagpruneProbs, MergeError> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(MergeError::DensityOutOfRange(density));
    }
    let n = delta.data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        delta.data[a]
            .abs()
            .partial_cmp(&delta.data[b].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut probs = vec![0.0; n];
    for (rank, &idx) in order.iter().enumerate() {
        let r = if n > 1 {
            rank as f64 / (n - 1) as f64
        } else {
            0.0
        };
        probs[idx] = (2.0 * (1.0 - density) * (1.0 - r)).clamp(0.0, 1.0);
    }
    Ok(MagpruneProbs {
        probs,
        degenerate: n == 1 && density < 1.0,
    })
}

/// Stochastically drop delta elements and rescale survivors by 1/(1-p).
///
/// The Bernoulli draw for element `k` is keyed on `(seed, tensor name, k)`
/// so results are independent of iteration order and parallel schedule.
/// Elements with `p = 1` are dropped deterministically.
pub fn drop_and_rescale(delta: &Tensor, probs: &[f64], seed: u64, tensor_name: &str) -> Tensor {
    assert_eq!(delta.data.len(), probs.len());
    let data: Vec<f32> = delta
        .data
        .iter()
        .zip(probs)
        .enumerate()
        .map(|(k, (&d, &p))| {
            if p >= 1.0 {
                return 0.0;
            }
            let dropped = keyed_unit(seed, tensor_name, k as u64) < p;
            if dropped {
                0.0
            } else {
                (f64::from(d) / (1.0 - p)) as f32
            }
        })
        .collect();
    Tensor {
        shape: delta.shape.clone(),
        data,
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Sign-elected weighted merge of rescaled deltas onto the base.
///
/// Per element: the elected sign is the sign of the summed deltas; only
/// same-signed contributions enter the weighted average; the base moves by
/// `lambda` times that average. Zero deltas never agree with a nonzero
/// elected sign; when everything is zero the base passes through.
pub fn sign_elect_merge(
    base: &Checkpoint,
    deltas: &[DeltaSet],
    config: &MergeConfig,
) -> Result<Checkpoint, MergeError> {
    if config.weights.len() != deltas.len() {
        return Err(MergeError::WeightCountMismatch {
            expected: deltas.len(),
            got: config.weights.len(),
        });
    }
    for delta in deltas {
        for (name, base_tensor) in &base.tensors {
            let tensor = delta
                .tensors
                .get(name)
                .ok_or_else(|| MergeError::NameMismatch(format!("delta missing {name:?}")))?;
            if tensor.shape != base_tensor.shape {
                return Err(MergeError::ShapeMismatch {
                    name: name.clone(),
                    expected: base_tensor.shape.clone(),
                    got: tensor.shape.clone(),
                });
            }
        }
    }

    let mut merged = Checkpoint::new();
    for (name, base_tensor) in &base.tensors {
        let n = base_tensor.data.len();
        let mut data = Vec::with_capacity(n);
        for k in 0..n {
            let theta0 = f64::from(base_tensor.data[k]);
            let values: Vec<f64> = deltas
                .iter()
                .map(|d| f64::from(d.tensors[name].data[k]))
                .collect();
            let elected = sgn(values.iter().sum());
            let mut numerator = 0.0;
            let mut denominator = 0.0;
            if elected != 0.0 {
                for (i, &v) in values.iter().enumerate() {
                    if sgn(v) == elected {
                        numerator += config.weights[i] * v;
                        denominator += config.weights[i];
                    }
                }
            }
            denominator += config.epsilon;
            let update = if denominator > 0.0 {
                config.lambda * numerator / denominator
            } else {
                0.0
            };
            data.push((theta0 + update) as f32);
        }
        merged.insert(
            name.clone(),
            Tensor {
                shape: base_tensor.shape.clone(),
                data,
            },
        );
    }
    Ok(merged)
}

/// Full pipeline: deltas, MagPrune, drop-and-rescale, sign-elected merge.
pub fn merge_checkpoints(
    base: &Checkpoint,
    tuned: &[Checkpoint],
    config: &MergeConfig,
) -> Result<Checkpoint, MergeError> {
    if config.weights.len() != tuned.len() {
        return Err(MergeError::WeightCountMismatch {
            expected: tuned.len(),
            got: config.weights.len(),
        });
    }
    let mut rescaled = Vec::with_capacity(tuned.len());
    for (i, tuned_ckpt) in tuned.iter().enumerate() {
        let delta = compute_delta(base, tuned_ckpt, config.sign_convention, i)?;
        let mut tensors = BTreeMap::new();
        for (name, tensor) in &delta.tensors {
            let probs = magprune_probs(tensor, config.density)?;
            // Per-source key so sources draw independent masks.
            let label = format!("{i}:{name}");
            tensors.insert(
                name.clone(),
                drop_and_rescale(tensor, &probs.probs, config.seed, &label),
            );
        }
        rescaled.push(DeltaSet {
            source_index: i,
            tensors,
        });
    }
    sign_elect_merge(base, &rescaled, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkpoint(pairs: &[(&str, Vec<f32>)]) -> Checkpoint {
        let mut c = Checkpoint::new();
        for (name, data) in pairs {
            c.insert(*name, Tensor::vector(data.clone()));
        }
        c
    }

    #[test]
    fn delta_task_vector_and_base_minus_tuned() {
        let base = checkpoint(&[("w", vec![1.0, 2.0])]);
        let tuned = checkpoint(&[("w", vec![2.0, 1.0])]);
        let tv = compute_delta(&base, &tuned, SignConvention::TaskVector, 0).unwrap();
        assert_eq!(tv.tensors["w"].data, vec![1.0, -1.0]);
        let pl = compute_delta(&base, &tuned, SignConvention::BaseMinusTuned, 0).unwrap();
        assert_eq!(pl.tensors["w"].data, vec![-1.0, 1.0]);
    }

    #[test]
    fn identical_checkpoints_give_zero_delta() {
        let base = checkpoint(&[("w", vec![1.5, -0.5])]);
        let d = compute_delta(&base, &base, SignConvention::TaskVector, 0).unwrap();
        assert_eq!(d.tensors["w"].data, vec![0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let base = checkpoint(&[("w", vec![1.0, 2.0])]);
        let tuned = checkpoint(&[("w", vec![1.0, 2.0, 3.0])]);
        assert!(matches!(
            compute_delta(&base, &tuned, SignConvention::TaskVector, 0),
            Err(MergeError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn name_mismatch_is_rejected() {
        let base = checkpoint(&[("w", vec![1.0])]);
        let tuned = checkpoint(&[("v", vec![1.0])]);
        assert!(matches!(
            compute_delta(&base, &tuned, SignConvention::TaskVector, 0),
            Err(MergeError::NameMismatch(_))
        ));
    }

    #[test]
    fn magprune_full_density_disables_dropping() {
        let t = Tensor::vector(vec![0.1, -3.0, 2.0]);
        let result = magprune_probs(&t, 1.0).unwrap();
        assert_eq!(result.probs, vec![0.0, 0.0, 0.0]);
        assert!(!result.degenerate);
    }

    #[test]
    fn magprune_half_density_linear_ramp() {
        let t = Tensor::vector(vec![1.0, 2.0, 3.0, 4.0]);
        let result = magprune_probs(&t, 0.5).unwrap();
        let expected = [1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0];
        for (p, e) in result.probs.iter().zip(expected) {
            assert!((p - e).abs() < 1e-12, "{p} vs {e}");
        }
        // mean of the (here unclamped) ramp is 1 - d
        let mean: f64 = result.probs.iter().sum::<f64>() / 4.0;
        assert!((mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn magprune_single_element_is_degenerate() {
        let t = Tensor::vector(vec![2.0]);
        let result = magprune_probs(&t, 0.5).unwrap();
        assert_eq!(result.probs, vec![1.0]);
        assert!(result.degenerate);
    }

    #[test]
    fn magprune_rejects_bad_density() {
        let t = Tensor::vector(vec![1.0]);
        assert_eq!(
            magprune_probs(&t, 0.0),
            Err(MergeError::DensityOutOfRange(0.0))
        );
        assert_eq!(
            magprune_probs(&t, 1.5),
            Err(MergeError::DensityOutOfRange(1.5))
        );
    }

    #[test]
    fn drop_and_rescale_identity_at_p_zero() {
        let t = Tensor::vector(vec![1.0, -2.0, 3.0]);
        let out = drop_and_rescale(&t, &[0.0, 0.0, 0.0], 7, "w");
        assert_eq!(out.data, t.data);
    }

    #[test]
    fn drop_and_rescale_survivor_scaling_and_deterministic_drop() {
        // find a key where the draw survives p=0.5 and one where it drops
        let t = Tensor::vector(vec![2.0]);
        let mut saw_survivor = false;
        let mut saw_drop = false;
        for seed in 0..100 {
            let out = drop_and_rescale(&t, &[0.5], seed, "w");
            match out.data[0] {
                v if v == 4.0 => saw_survivor = true,
                v if v == 0.0 => saw_drop = true,
                v => panic!("unexpected value {v}"),
            }
        }
        assert!(saw_survivor && saw_drop);
        // p = 1 drops deterministically
        let out = drop_and_rescale(&t, &[1.0], 0, "w");
        assert_eq!(out.data, vec![0.0]);
    }

    #[test]
    fn expected_value_is_preserved_under_dropping() {
        // mean of rescaled delta over the drop randomness equals the delta
        let delta = 2.0_f64;
        let p = 0.4;
        let t = Tensor::vector(vec![delta as f32]);
        let n = 10_000;
        let sum: f64 = (0..n)
            .map(|seed| f64::from(drop_and_rescale(&t, &[p], seed, "w").data[0]))
            .sum();
        let mean = sum / n as f64;
        assert!(
            (mean - delta).abs() / delta < 0.02,
            "mean {mean} vs {delta}"
        );
    }

    fn delta_set(index: usize, name: &str, data: Vec<f32>) -> DeltaSet {
        let mut tensors = BTreeMap::new();
        tensors.insert(name.to_string(), Tensor::vector(data));
        DeltaSet {
            source_index: index,
            tensors,
        }
    }

    #[test]
    fn sign_elect_agreeing_sources_average() {
        // theta0 = 0, deltas (1, 3), unit weights, lambda 0.9, eps 0
        let base = checkpoint(&[("w", vec![0.0])]);
        let deltas = vec![delta_set(0, "w", vec![1.0]), delta_set(1, "w", vec![3.0])];
        let mut config = MergeConfig::with_sources(2);
        config.epsilon = 0.0;
        let merged = sign_elect_merge(&base, &deltas, &config).unwrap();
        assert!((f64::from(merged.tensors["w"].data[0]) - 1.8).abs() < 1e-7);
    }

    #[test]
    fn sign_elect_excludes_disagreeing_source() {
        // deltas (2, -1): sum 1, elected +, only the 2 agrees -> 0.9*2/1
        let base = checkpoint(&[("w", vec![0.0])]);
        let deltas = vec![delta_set(0, "w", vec![2.0]), delta_set(1, "w", vec![-1.0])];
        let mut config = MergeConfig::with_sources(2);
        config.epsilon = 0.0;
        let merged = sign_elect_merge(&base, &deltas, &config).unwrap();
        assert!((f64::from(merged.tensors["w"].data[0]) - 1.8).abs() < 1e-7);
    }

    #[test]
    fn sign_elect_single_source_is_scaled_delta() {
        let base = checkpoint(&[("w", vec![1.0, -2.0])]);
        let deltas = vec![delta_set(0, "w", vec![0.5, 1.0])];
        let mut config = MergeConfig::with_sources(1);
        config.epsilon = 0.0;
        let merged = sign_elect_merge(&base, &deltas, &config).unwrap();
        assert!((f64::from(merged.tensors["w"].data[0]) - (1.0 + 0.9 * 0.5)).abs() < 1e-7);
        assert!((f64::from(merged.tensors["w"].data[1]) - (-2.0 + 0.9)).abs() < 1e-7);
    }

    #[test]
    fn all_zero_deltas_pass_base_through() {
        let base = checkpoint(&[("w", vec![3.25])]);
        let deltas = vec![delta_set(0, "w", vec![0.0]), delta_set(1, "w", vec![0.0])];
        let config = MergeConfig::with_sources(2);
        let merged = sign_elect_merge(&base, &deltas, &config).unwrap();
        assert_eq!(merged.tensors["w"].data[0], 3.25);
    }

    #[test]
    fn weight_count_mismatch_is_rejected() {
        let base = checkpoint(&[("w", vec![0.0])]);
        let deltas = vec![delta_set(0, "w", vec![1.0])];
        let config = MergeConfig::with_sources(2);
        assert!(matches!(
            sign_elect_merge(&base, &deltas, &config),
            Err(MergeError::WeightCountMismatch { .. })
        ));
    }

    #[test]
    fn lambda_zero_merge_equals_base_bit_exact() {
        let base = checkpoint(&[("w", vec![0.1, -0.7, 3.0])]);
        let tuned = checkpoint(&[("w", vec![1.0, 2.0, -3.0])]);
        let mut config = MergeConfig::with_sources(1);
        config.lambda = 0.0;
        let merged = merge_checkpoints(&base, &[tuned], &config).unwrap();
        assert_eq!(merged, base);
    }

    #[test]
    fn single_source_full_density_is_base_plus_lambda_delta() {
        let base = checkpoint(&[("w", vec![0.5, -1.0])]);
        let tuned = checkpoint(&[("w", vec![1.5, 1.0])]);
        let mut config = MergeConfig::with_sources(1);
        config.epsilon = 0.0;
        let merged = merge_checkpoints(&base, &[tuned.clone()], &config).unwrap();
        for k in 0..2 {
            let expected = f64::from(base.tensors["w"].data[k])
                + 0.9 * (f64::from(tuned.tensors["w"].data[k]) - f64::from(base.tensors["w"].data[k]));
            assert!((f64::from(merged.tensors["w"].data[k]) - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn merge_is_deterministic_for_fixed_seed() {
        let base = checkpoint(&[("w", vec![0.1, 0.2, 0.3, 0.4])]);
        let tuned = checkpoint(&[("w", vec![1.0, -1.0, 2.0, -2.0])]);
        let mut config = MergeConfig::with_sources(1);
        config.density = 0.6;
        config.seed = 42;
        let a = merge_checkpoints(&base, &[tuned.clone()], &config).unwrap();
        let b = merge_checkpoints(&base, &[tuned], &config).unwrap();
        assert_eq!(a, b);
    }
}
