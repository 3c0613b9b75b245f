use std::collections::BTreeSet;

use diffgt::graph::{enrich_with_side_info, FeatureTable, InteractionGraph, SideFeatures};
use diffgt::numerics::{svd_top2, thin_svd, DenseMatrix, RandomSource};

fn to_nalgebra(m: &DenseMatrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

#[test]
fn top_two_reconstruction_error_matches_full_svd() {
    let mut rng = RandomSource::new(50);
    let m = rng.standard_normal(50, 8);
    let full = to_nalgebra(&m).svd(false, false).singular_values;
    let mut sigma: Vec<f64> = full.iter().copied().collect();
    sigma.sort_by(|a, b| b.total_cmp(a));

    let top = svd_top2(&m).unwrap();
    assert!((top.singular_values[0] - sigma[0]).abs() < 1e-9 * sigma[0]);
    assert!((top.singular_values[1] - sigma[1]).abs() < 1e-9 * sigma[0]);

    let ours = thin_svd(&m).singular_values;
    for (a, b) in ours.iter().zip(&sigma) {
        assert!((a - b).abs() < 1e-9 * sigma[0], "{ours:?} vs {sigma:?}");
    }

    // rank-2 reconstruction P·V₂ᵀ, with V₂ recovered from the projection
    let v = thin_svd(&m).right;
    let mut v2 = DenseMatrix::zeros(8, 2);
    for i in 0..8 {
        v2.set(i, 0, v.get(i, 0));
        v2.set(i, 1, v.get(i, 1));
    }
    let approx = top.projection.matmul(&v2.transpose()).unwrap();
    let err = m.sub(&approx).unwrap().frobenius_norm();
    let tail = sigma[2..].iter().map(|s| s * s).sum::<f64>().sqrt();
    assert!((err - tail).abs() < 1e-9 * tail, "{err} vs {tail}");
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Every entity ranks all others by cosine, lower index first on ties, and
/// links its best `top_n` positive ones.
fn brute_force_links(vectors: &[Vec<f64>], top_n: usize, offset: usize) -> BTreeSet<(usize, usize)> {
    let mut links = BTreeSet::new();
    for a in 0..vectors.len() {
        let mut ranked: Vec<(f64, usize)> = (0..vectors.len())
            .filter(|&b| b != a)
            .map(|b| (cosine(&vectors[a], &vectors[b]), b))
            .filter(|&(c, _)| c > 0.0)
            .collect();
        ranked.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        for &(_, b) in ranked.iter().take(top_n) {
            links.insert((offset + a.min(b), offset + a.max(b)));
        }
    }
    links
}

#[test]
fn five_item_enrichment_matches_pairwise_oracle() {
    let vectors = vec![
        vec![1.0, 0.0, 0.0, 1.0],
        vec![1.0, 1.0, 0.0, 0.0],
        vec![0.0, 1.0, 1.0, 0.0],
        vec![1.0, 1.0, 1.0, 1.0],
        vec![0.0, 0.0, 1.0, 1.0],
    ];
    let g = InteractionGraph::new(2, 5, vec![(0, 0), (0, 3), (1, 1), (1, 4)]).unwrap();
    let side = SideFeatures {
        users: None,
        items: Some(FeatureTable {
            attributes: ["drama", "comedy", "horror", "noir"].map(String::from).to_vec(),
            vectors: vectors.clone(),
        }),
    };
    for top_n in 0..=5 {
        let enriched = enrich_with_side_info(&g, &side, top_n);
        let got: BTreeSet<_> = enriched.similarity_edges().iter().copied().collect();
        assert_eq!(got, brute_force_links(&vectors, top_n, 2), "top_n = {top_n}");
        assert_eq!(enriched.edges(), g.edges());
    }
    // item 3 shares half its mass with every other item, so with top_n = 2
    // it picks items 0 and 1 on the lower-index tie-break
    let two: BTreeSet<_> = enrich_with_side_info(&g, &side, 2).similarity_edges().iter().copied().collect();
    assert!(two.contains(&(2, 5)) && two.contains(&(3, 5)));
}
