use serde::{Deserialize, Serialize};

use super::{Edge, InteractionGraph};
use crate::numerics::RandomSource;

/// Train / validation / test fractions.
pub const SPLIT_RATIOS: (f64, f64, f64) = (0.7, 0.1, 0.2);

/// Number of independently drawn test sets.
pub const TEST_DRAWS: usize = 10;

/// Per-user 7:1:2 split with ten test draws.
///
/// The training edges are fixed. Each draw `j` (seed `seed + j`) partitions
/// the held-out edges of every user into that draw's validation and test
/// edges; draw 0's validation set drives early stopping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSplit {
    pub seed: u64,
    pub train: Vec<Edge>,
    pub validation: Vec<Edge>,
    pub holdout: Vec<Edge>,
    pub test_sets: Vec<Vec<Edge>>,
    pub test_seeds: Vec<u64>,
}

impl DataSplit {
    /// Held-out edges of draw `j` that are not in its test set.
    pub fn validation_for(&self, draw: usize) -> Vec<Edge> {
        let test = &self.test_sets[draw];
        self.holdout
            .iter()
            .filter(|e| test.binary_search(e).is_err())
            .copied()
            .collect()
    }

    pub fn num_draws(&self) -> usize {
        self.test_sets.len()
    }
}

/// `(train, validation, test)` counts for a user with `n` interactions.
/// At least one edge always stays in training.
pub(crate) fn per_user_counts(n: usize) -> (usize, usize, usize) {
    let mut test = (n as f64 * SPLIT_RATIOS.2).round() as usize;
    let mut val = (n as f64 * SPLIT_RATIOS.1).round() as usize;
    while n > 0 && test + val >= n {
        if val > 0 {
            val -= 1;
        } else {
            test -= 1;
        }
    }
    (n - val - test, val, test)
}

pub fn split(g: &InteractionGraph, seed: u64) -> DataSplit {
    let per_user = g.user_items();
    let mut base = RandomSource::new(seed);
    let mut train = Vec::new();
    let mut heldout_by_user: Vec<Vec<usize>> = Vec::with_capacity(per_user.len());
    let mut test_sizes = Vec::with_capacity(per_user.len());

    for (u, items) in per_user.iter().enumerate() {
        let mut items = items.clone();
        base.shuffle(&mut items);
        let (n_train, _, n_test) = per_user_counts(items.len());
        train.extend(items[..n_train].iter().map(|&i| (u, i)));
        let mut rest = items[n_train..].to_vec();
        rest.sort_unstable();
        heldout_by_user.push(rest);
        test_sizes.push(n_test);
    }

    let mut test_sets = Vec::with_capacity(TEST_DRAWS);
    let mut test_seeds = Vec::with_capacity(TEST_DRAWS);
    for j in 0..TEST_DRAWS as u64 {
        let draw_seed = seed.wrapping_add(j);
        let mut rng = RandomSource::new(draw_seed).derive(1);
        let mut test = Vec::new();
        for (u, held) in heldout_by_user.iter().enumerate() {
            let mut held = held.clone();
            rng.shuffle(&mut held);
            test.extend(held[..test_sizes[u]].iter().map(|&i| (u, i)));
        }
        test.sort_unstable();
        test_sets.push(test);
        test_seeds.push(draw_seed);
    }

    let holdout: Vec<Edge> = heldout_by_user
        .iter()
        .enumerate()
        .flat_map(|(u, held)| held.iter().map(move |&i| (u, i)))
        .collect();
    train.sort_unstable();

    let mut out = DataSplit {
        seed,
        train,
        validation: Vec::new(),
        holdout,
        test_sets,
        test_seeds,
    };
    out.validation = out.validation_for(0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_edges_split_seven_one_two() {
        assert_eq!(per_user_counts(10), (7, 1, 2));
        let g = InteractionGraph::new(1, 10, (0..10).map(|i| (0, i)).collect()).unwrap();
        let s = split(&g, 3);
        assert_eq!(s.train.len(), 7);
        assert_eq!(s.validation.len(), 1);
        assert!(s.test_sets.iter().all(|t| t.len() == 2));
    }

    #[test]
    fn single_edge_stays_in_train() {
        let g = InteractionGraph::new(1, 1, vec![(0, 0)]).unwrap();
        let s = split(&g, 0);
        assert_eq!(s.train, vec![(0, 0)]);
        assert!(s.validation.is_empty());
        assert!(s.test_sets.iter().all(Vec::is_empty));
    }

    #[test]
    fn small_users_keep_a_training_edge() {
        for n in 1..40 {
            let (tr, va, te) = per_user_counts(n);
            assert!(tr >= 1);
            assert_eq!(tr + va + te, n);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let g = InteractionGraph::new(3, 12, (0..36).map(|k| (k % 3, k % 12)).collect()).unwrap();
        assert_eq!(split(&g, 5), split(&g, 5));
        assert_ne!(split(&g, 5), split(&g, 6));
    }

    #[test]
    fn draws_use_consecutive_seeds() {
        let g = InteractionGraph::new(1, 20, (0..20).map(|i| (0, i)).collect()).unwrap();
        let s = split(&g, 100);
        assert_eq!(s.test_seeds, (100..110).collect::<Vec<_>>());
        assert_eq!(s.num_draws(), TEST_DRAWS);
    }
}
