use std::sync::Arc;

use crate::error::Result;
use crate::graph::Edge;
use crate::numerics::{CsrMatrix, DenseMatrix, GradientTape, Var};

/// Linear map from node embeddings to per-token condition rows.
///
/// User row u is the mean of the item rows u interacted with in training;
/// every item row, and every user without training items, gets the global
/// item mean.
#[derive(Clone, Debug)]
pub struct ConditionOperator {
    users: Arc<CsrMatrix>,
    item_mean: Arc<CsrMatrix>,
    num_users: usize,
    num_items: usize,
}

impl ConditionOperator {
    pub fn new(num_users: usize, num_items: usize, train_edges: &[Edge]) -> Self {
        let n = num_users + num_items;
        let mut per_user = vec![Vec::new(); num_users];
        for &(u, i) in train_edges {
            per_user[u].push(num_users + i);
        }
        let global = 1.0 / num_items as f64;
        let mut triplets = Vec::new();
        for (u, items) in per_user.iter().enumerate() {
            if items.is_empty() {
                triplets.extend((0..num_items).map(|i| (u, num_users + i, global)));
            } else {
                let w = 1.0 / items.len() as f64;
                triplets.extend(items.iter().map(|&node| (u, node, w)));
            }
        }
        let mean_row = (0..num_items).map(|i| (0, num_users + i, global)).collect();
        Self {
            users: Arc::new(CsrMatrix::from_triplets(num_users, n, triplets)),
            item_mean: Arc::new(CsrMatrix::from_triplets(1, n, mean_row)),
            num_users,
            num_items,
        }
    }

    /// Condition rows for every node, users first.
    pub fn apply(&self, x_g: &DenseMatrix) -> DenseMatrix {
        let users = self.users.mul_dense(x_g);
        let mean = self.item_mean.mul_dense(x_g);
        let d = x_g.cols();
        let mut data = users.into_vec();
        data.reserve(self.num_items * d);
        for _ in 0..self.num_items {
            data.extend_from_slice(mean.row(0));
        }
        DenseMatrix::from_vec(self.num_users + self.num_items, d, data).expect("sizes agree")
    }

    pub fn apply_on_tape(&self, tape: &mut GradientTape, x_g: Var) -> Result<Var> {
        let users = tape.spmm(&self.users, x_g)?;
        let mean = tape.spmm(&self.item_mean, x_g)?;
        let items = tape.repeat_row(mean, self.num_items)?;
        tape.concat_rows(users, items)
    }
}

/// Per-user mean of training-item rows of `x_g` (N_u × d).
pub fn build_condition(num_users: usize, num_items: usize, train_edges: &[Edge], x_g: &DenseMatrix) -> DenseMatrix {
    let op = ConditionOperator::new(num_users, num_items, train_edges);
    op.users.mul_dense(x_g)
}
