//! Prefix merging for batched forward passes.
//!
//! Sequences that share a prefix share trie nodes, so the per-token work for
//! the shared part is done once. The scorer here is a deterministic
//! hash-based stand-in for a model forward pass; what matters is that
//! scoring a sequence through its trie path reproduces standalone scoring
//! bit for bit (same values added in the same order).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::rng::{splitmix64, to_unit};

#[derive(Debug, Error, PartialEq)]
pub enum PrefixError {
    #[error("prefix plan requires at least one sequence")]
    EmptyInput,
}

const ROOT_STATE: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone)]
struct TrieNode {
    /// Scorer state after consuming this node's token.
    state: u64,
    /// Per-token score contribution, fixed at node creation.
    score: f64,
    children: BTreeMap<u64, usize>,
}

/// A trie over token sequences plus the bookkeeping needed to compare
/// merged and naive forward costs.
#[derive(Debug, Clone)]
pub struct PrefixPlan {
    nodes: Vec<TrieNode>,
    /// For each input sequence, its node path through the trie (one node per
    /// token, root excluded).
    pub sequence_paths: Vec<Vec<usize>>,
    /// Σ sequence lengths: tokens a merge-free batch would process.
    pub naive_tokens: usize,
    /// Tokens actually stored in the trie.
    pub unique_tokens: usize,
}

fn step_state(state: u64, token: u64) -> u64 {
    splitmix64(state ^ token.wrapping_mul(0xff51_afd7_ed55_8ccd))
}

fn token_score(state: u64) -> f64 {
    to_unit(state)
}

/// Build the merged forward plan for a batch of token sequences.
pub fn build_prefix_plan(sequences: &[Vec<u64>]) -> Result<PrefixPlan, PrefixError> {
    if sequences.is_empty() {
        return Err(PrefixError::EmptyInput);
    }
    let mut nodes = vec![TrieNode {
        state: ROOT_STATE,
        score: 0.0,
        children: BTreeMap::new(),
    }];
    let mut sequence_paths = Vec::with_capacity(sequences.len());
    let mut naive_tokens = 0;
    for sequence in sequences {
        naive_tokens += sequence.len();
        let mut cursor = 0usize;
        let mut path = Vec::with_capacity(sequence.len());
        for &token in sequence {
            cursor = match nodes[cursor].children.get(&token) {
                Some(&child) => child,
                None => {
                    let state = step_state(nodes[cursor].state, token);
                    let child = nodes.len();
                    nodes.push(TrieNode {
                        state,
                        score: token_score(state),
                        children: BTreeMap::new(),
                    });
                    nodes[cursor].children.insert(token, child);
                    child
                }
            };
            path.push(cursor);
        }
        sequence_paths.push(path);
    }
    let unique_tokens = nodes.len() - 1;
    Ok(PrefixPlan {
        nodes,
        sequence_paths,
        naive_tokens,
        unique_tokens,
    })
}

impl PrefixPlan {
    /// Number of non-root trie nodes.
    pub fn trie_nodes(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Tokens saved relative to the merge-free batch.
    pub fn saved_tokens(&self) -> usize {
        self.naive_tokens - self.unique_tokens
    }

    /// Score sequence `i` by walking its trie path.
    pub fn score_sequence(&self, i: usize) -> f64 {
        self.sequence_paths[i]
            .iter()
            .fold(0.0, |acc, &node| acc + self.nodes[node].score)
    }

    /// Reconstruct sequence `i`'s tokens from its path (paths alone must
    /// carry enough information to rebuild every input).
    pub fn reconstruct(&self, i: usize) -> Vec<u64> {
        let mut tokens = Vec::with_capacity(self.sequence_paths[i].len());
        let mut parent = 0usize;
        for &node in &self.sequence_paths[i] {
            let (&token, _) = self.nodes[parent]
                .children
                .iter()
                .find(|(_, &child)| child == node)
                .expect("path nodes are children of their predecessors");
            tokens.push(token);
            parent = node;
        }
        tokens
    }
}

/// Score a sequence without any merging; the reference for soundness tests.
pub fn score_standalone(sequence: &[u64]) -> f64 {
    let mut state = ROOT_STATE;
    let mut acc = 0.0;
    for &token in sequence {
        state = step_state(state, token);
        acc += token_score(state);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::DeterministicRng;

    #[test]
    fn identical_sequences_fully_merge() {
        let seq: Vec<u64> = (0..10).collect();
        let plan = build_prefix_plan(&[seq.clone(), seq]).unwrap();
        assert_eq!(plan.naive_tokens, 20);
        assert_eq!(plan.unique_tokens, 10);
        assert_eq!(plan.saved_tokens(), 10);
    }

    #[test]
    fn disjoint_sequences_share_nothing() {
        let a: Vec<u64> = (0..10).collect();
        let b: Vec<u64> = (100..112).collect();
        let plan = build_prefix_plan(&[a, b]).unwrap();
        assert_eq!(plan.naive_tokens, 22);
        assert_eq!(plan.unique_tokens, 22);
    }

    #[test]
    fn shared_prefix_counts_once() {
        // 6 shared tokens, then 4 and 6 distinct suffix tokens: 6+4+6 = 16.
        let mut a: Vec<u64> = (0..6).collect();
        let mut b = a.clone();
        a.extend(10..14);
        b.extend(20..26);
        let plan = build_prefix_plan(&[a, b]).unwrap();
        assert_eq!(plan.naive_tokens, 22);
        assert_eq!(plan.unique_tokens, 16);
    }

    #[test]
    fn empty_batch_is_rejected() {
        assert!(matches!(build_prefix_plan(&[]), Err(PrefixError::EmptyInput)));
    }

    #[test]
    fn merged_scoring_matches_standalone_exactly() {
        let mut rng = DeterministicRng::new(7);
        for _ in 0..200 {
            let batch_size = 1 + rng.below(6) as usize;
            // Draw tokens from a small alphabet so prefixes collide often.
            let sequences: Vec<Vec<u64>> = (0..batch_size)
                .map(|_| {
                    let len = 1 + rng.below(30) as usize;
                    (0..len).map(|_| rng.below(4)).collect()
                })
                .collect();
            let plan = build_prefix_plan(&sequences).unwrap();
            assert!(plan.unique_tokens <= plan.naive_tokens);
            for (i, seq) in sequences.iter().enumerate() {
                assert_eq!(plan.score_sequence(i), score_standalone(seq), "sequence {i}");
                assert_eq!(plan.reconstruct(i), *seq);
            }
        }
    }

    #[test]
    fn shared_nonempty_prefix_forces_strict_saving() {
        let mut rng = DeterministicRng::new(11);
        for _ in 0..100 {
            let first = rng.below(4);
            let a: Vec<u64> = std::iter::once(first)
                .chain((0..rng.below(10)).map(|_| rng.below(4)))
                .collect();
            let b: Vec<u64> = std::iter::once(first)
                .chain((0..rng.below(10)).map(|_| rng.below(4)))
                .collect();
            let plan = build_prefix_plan(&[a, b]).unwrap();
            assert!(plan.unique_tokens < plan.naive_tokens);
        }
    }
}
