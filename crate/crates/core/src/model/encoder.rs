use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{CsrMatrix, DenseMatrix, GradientTape, Var};

/// X_G = (1/(1+ℓ)) Σ_{k=0..ℓ} Āᵏ X⁰ by repeated propagation.
pub fn encode(adj: &CsrMatrix, x0: &DenseMatrix, layers: usize) -> Result<DenseMatrix> {
    check(adj, x0.shape())?;
    let mut acc = x0.clone();
    let mut cur = x0.clone();
    for _ in 0..layers {
        cur = adj.mul_dense(&cur);
        acc.axpy(1.0, &cur);
    }
    Ok(acc.scale(1.0 / (1 + layers) as f64))
}

pub fn encode_on_tape(tape: &mut GradientTape, adj: &Arc<CsrMatrix>, x0: Var, layers: usize) -> Result<Var> {
    check(adj, tape.shape(x0))?;
    let mut acc = x0;
    let mut cur = x0;
    for _ in 0..layers {
        cur = tape.spmm(adj, cur)?;
        acc = tape.add(acc, cur)?;
    }
    Ok(tape.scale(acc, 1.0 / (1 + layers) as f64))
}

fn check(adj: &CsrMatrix, x0: (usize, usize)) -> Result<()> {
    if adj.rows() != adj.cols() || adj.cols() != x0.0 {
        return Err(Error::shape("encode", (adj.rows(), adj.cols()), x0));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, InteractionGraph};
    use crate::numerics::RandomSource;

    #[test]
    fn zero_layers_is_identity() {
        let g = InteractionGraph::new(2, 2, vec![(0, 0), (1, 1)]).unwrap();
        let x = RandomSource::new(1).standard_normal(4, 3);
        let out = encode(&normalize_adjacency(&g.base_adjacency()), &x, 0).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn single_pair_averages() {
        let g = InteractionGraph::new(1, 1, vec![(0, 0)]).unwrap();
        let x = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, -4.0]]);
        let out = encode(&normalize_adjacency(&g.base_adjacency()), &x, 1).unwrap();
        assert_eq!(out.row(0), &[2.0, -1.0]);
        assert_eq!(out.row(1), &[2.0, -1.0]);
    }

    #[test]
    fn path_graph_matches_dense_polynomial() {
        // user0 – item0 – user1
        let g = InteractionGraph::new(2, 1, vec![(0, 0), (1, 0)]).unwrap();
        let a = normalize_adjacency(&g.base_adjacency());
        let x = RandomSource::new(5).standard_normal(3, 4);
        let dense = a.to_dense();
        let a2 = dense.matmul(&dense).unwrap();
        let poly = DenseMatrix::identity(3).add(&dense).unwrap().add(&a2).unwrap().scale(1.0 / 3.0);
        let expected = poly.matmul(&x).unwrap();
        let out = encode(&a, &x, 2).unwrap();
        assert!(out.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn isolated_node_is_scaled_copy() {
        let g = InteractionGraph::new(2, 2, vec![(0, 0)]).unwrap();
        let a = normalize_adjacency(&g.base_adjacency());
        let x = RandomSource::new(3).standard_normal(4, 2);
        for layers in 1..4 {
            let out = encode(&a, &x, layers).unwrap();
            let scale = 1.0 / (1 + layers) as f64;
            for (o, v) in out.row(1).iter().zip(x.row(1)) {
                assert_eq!(*o, v * scale);
            }
        }
    }

    #[test]
    fn tape_matches_plain() {
        let g = InteractionGraph::new(3, 4, vec![(0, 0), (0, 3), (1, 1), (2, 2), (2, 0)]).unwrap();
        let a = Arc::new(normalize_adjacency(&g.base_adjacency()));
        let x = RandomSource::new(9).standard_normal(7, 3);
        let mut tape = GradientTape::new();
        let v = tape.constant(x.clone());
        let out = encode_on_tape(&mut tape, &a, v, 3).unwrap();
        assert!(tape.value(out).max_abs_diff(&encode(&a, &x, 3).unwrap()) < 1e-14);
    }

    #[test]
    fn shape_mismatch() {
        let g = InteractionGraph::new(1, 1, vec![(0, 0)]).unwrap();
        assert!(encode(&g.base_adjacency(), &DenseMatrix::zeros(3, 2), 1).is_err());
    }
}
