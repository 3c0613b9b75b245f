use crate::numerics::{DenseMatrix, Trans};

/// Inner products of the given user rows with every item row. Items follow
/// users in `x_final`.
pub fn score(users: &[usize], x_final: &DenseMatrix, num_users: usize) -> DenseMatrix {
    let d = x_final.cols();
    let num_items = x_final.rows() - num_users;
    let user_rows = x_final.select_rows(users);
    let items = DenseMatrix::from_vec(num_items, d, x_final.data()[num_users * d..].to_vec()).expect("item block");
    user_rows.matmul_t(Trans::No, &items, Trans::Yes).expect("same width")
}

/// Sets the listed item scores to −∞.
pub fn mask_items(scores: &mut [f64], items: &[usize]) {
    for &i in items {
        scores[i] = f64::NEG_INFINITY;
    }
}

/// Indices of the `k` highest finite scores, best first; ties go to the
/// lower index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > f64::NEG_INFINITY).collect();
    let order = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k, order);
        idx.truncate(k);
    }
    idx.sort_unstable_by(order);
    idx
}
