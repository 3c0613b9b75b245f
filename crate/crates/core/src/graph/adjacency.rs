use super::{FeatureTable, InteractionGraph, SideFeatures};
use crate::numerics::CsrMatrix;

/// Symmetric normalisation `D^-1/2 A D^-1/2`. Isolated nodes keep empty rows.
pub fn normalize_adjacency(adj: &CsrMatrix) -> CsrMatrix {
    let degree: Vec<f64> = (0..adj.rows())
        .map(|r| adj.row_entries(r).map(|(_, v)| v).sum())
        .collect();
    let inv_sqrt: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let triplets = (0..adj.rows())
        .flat_map(|r| {
            let inv_sqrt = &inv_sqrt;
            adj.row_entries(r)
                .map(move |(c, v)| (r, c, inv_sqrt[r] * v * inv_sqrt[c]))
        })
        .collect();
    CsrMatrix::from_triplets(adj.rows(), adj.cols(), triplets)
}

/// Links each user (item) to its `top_n` most cosine-similar users (items).
///
/// Candidates exclude the entity itself and need strictly positive
/// similarity; ties go to the lower index. A link chosen by either endpoint
/// becomes one symmetric entry. Interaction edges are untouched.
pub fn enrich_with_side_info(g: &InteractionGraph, side: &SideFeatures, top_n: usize) -> InteractionGraph {
    let mut pairs = Vec::new();
    if top_n > 0 {
        if let Some(users) = &side.users {
            pairs.extend(similar_pairs(users, top_n, 0, "user"));
        }
        if let Some(items) = &side.items {
            pairs.extend(similar_pairs(items, top_n, g.num_users(), "item"));
        }
    }
    let mut out = g.clone();
    out.set_similarity_edges(pairs);
    out
}

fn similar_pairs(table: &FeatureTable, top_n: usize, offset: usize, class: &str) -> Vec<(usize, usize)> {
    let n = table.vectors.len();
    let norms: Vec<f64> = table
        .vectors
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let zero = norms.iter().filter(|&&z| z == 0.0).count();
    if zero > 0 {
        log::info!("{zero} {class}(s) have empty side features and get no similarity links");
    }

    let mut pairs = Vec::new();
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(n);
    for a in 0..n {
        if norms[a] == 0.0 {
            continue;
        }
        scored.clear();
        for b in 0..n {
            if b == a || norms[b] == 0.0 {
                continue;
            }
            let dot: f64 = table.vectors[a]
                .iter()
                .zip(&table.vectors[b])
                .map(|(x, y)| x * y)
                .sum();
            let cos = dot / (norms[a] * norms[b]);
            if cos > 0.0 {
                scored.push((cos, b));
            }
        }
        let k = top_n.min(scored.len());
        if k == 0 {
            continue;
        }
        let order = |x: &(f64, usize), y: &(f64, usize)| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, order);
        }
        for &(_, b) in &scored[..k] {
            pairs.push((offset + a.min(b), offset + a.max(b)));
        }
    }
    pairs
}
