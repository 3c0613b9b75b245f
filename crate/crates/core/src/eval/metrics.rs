use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::graph::{DataSplit, Edge};
use crate::model::{mask_items, score, top_k};
use crate::numerics::DenseMatrix;

/// |top-k ∩ relevant| / |relevant|; `None` when nothing is relevant.
pub fn recall_at_k(ranked: &[usize], relevant: &[usize], k: usize) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let hits = ranked.iter().take(k).filter(|i| relevant.contains(i)).count();
    Some(hits as f64 / relevant.len() as f64)
}

/// DCG of the top-k with gain 1/log₂(rank + 1), over the DCG of an ideal
/// ranking; `None` when nothing is relevant.
pub fn ndcg_at_k(ranked: &[usize], relevant: &[usize], k: usize) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let gain = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| relevant.contains(i))
        .map(|(r, _)| gain(r + 1))
        .sum();
    let ideal: f64 = (1..=relevant.len().min(k)).map(gain).sum();
    Some(if ideal > 0.0 { dcg / ideal } else { 0.0 })
}

/// Recall@k and NDCG@k on each test draw, with their mean and spread.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub k: usize,
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
    /// Users with at least one test item, per draw.
    pub users: Vec<usize>,
    pub recall_mean: f64,
    pub recall_std: f64,
    pub ndcg_mean: f64,
    pub ndcg_std: f64,
}

impl MetricReport {
    pub fn from_draws(k: usize, recall: Vec<f64>, ndcg: Vec<f64>, users: Vec<usize>) -> Self {
        let (recall_mean, recall_std) = mean_std(&recall);
        let (ndcg_mean, ndcg_std) = mean_std(&ndcg);
        Self {
            k,
            recall,
            ndcg,
            users,
            recall_mean,
            recall_std,
            ndcg_mean,
            ndcg_std,
        }
    }

    pub fn per_set_csv(&self, seeds: &[u64]) -> String {
        let k = self.k;
        let mut out = format!("test_set,seed,users,recall@{k},ndcg@{k}\n");
        for (j, (r, n)) in self.recall.iter().zip(&self.ndcg).enumerate() {
            let seed = seeds.get(j).map_or(String::new(), |s| s.to_string());
            let _ = writeln!(out, "{j},{seed},{},{r},{n}", self.users[j]);
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let k = self.k;
        format!(
            "metric,mean,std\nrecall@{k},{},{}\nndcg@{k},{},{}\n",
            self.recall_mean, self.recall_std, self.ndcg_mean, self.ndcg_std
        )
    }
}

/// Arithmetic mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn by_user(edges: &[Edge], num_users: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); num_users];
    for &(u, i) in edges {
        out[u].push(i);
    }
    out
}

/// Full-catalogue ranking for every user and draw. Training items and the
/// draw's validation items are masked; users without test items are skipped.
pub fn evaluate_scores(
    num_users: usize,
    split: &DataSplit,
    k: usize,
    mut score_user: impl FnMut(usize) -> Vec<f64>,
) -> MetricReport {
    let train = by_user(&split.train, num_users);
    let draws = split.num_draws();
    let validation: Vec<Vec<Vec<usize>>> = (0..draws).map(|j| by_user(&split.validation_for(j), num_users)).collect();
    let tests: Vec<Vec<Vec<usize>>> = split.test_sets.iter().map(|t| by_user(t, num_users)).collect();
    let mut recall_sum = vec![0.0; draws];
    let mut ndcg_sum = vec![0.0; draws];
    let mut users = vec![0usize; draws];
    for u in 0..num_users {
        if tests.iter().all(|t| t[u].is_empty()) {
            continue;
        }
        let base = score_user(u);
        for j in 0..draws {
            let relevant = &tests[j][u];
            if relevant.is_empty() {
                continue;
            }
            let mut s = base.clone();
            mask_items(&mut s, &train[u]);
            mask_items(&mut s, &validation[j][u]);
            let ranked = top_k(&s, k);
            recall_sum[j] += recall_at_k(&ranked, relevant, k).unwrap_or(0.0);
            ndcg_sum[j] += ndcg_at_k(&ranked, relevant, k).unwrap_or(0.0);
            users[j] += 1;
        }
    }
    let avg = |sums: Vec<f64>| -> Vec<f64> {
        sums.iter()
            .zip(&users)
            .map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
            .collect()
    };
    MetricReport::from_draws(k, avg(recall_sum), avg(ndcg_sum), users)
}

/// [`evaluate_scores`] with inner-product scores from final embeddings
/// (users first, then items).
pub fn evaluate_embeddings(x: &DenseMatrix, num_users: usize, split: &DataSplit, k: usize) -> MetricReport {
    let all: Vec<usize> = (0..num_users).collect();
    let scores = score(&all, x, num_users);
    evaluate_scores(num_users, split, k, |u| scores.row(u).to_vec())
}
