use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Singular values (descending) and the matching right singular vectors
/// stored as columns of `right`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub singular_values: Vec<f64>,
    pub right: DenseMatrix,
}

/// One-sided Jacobi SVD. Accurate for small singular values, which is what
/// the rank-deficiency checks rely on.
pub fn thin_svd(m: &DenseMatrix) -> Svd {
    let (rows, n) = m.shape();
    // Column-major working copy: cols[j] is column j of m.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..rows).map(|i| m.get(i, j)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (dot(c, c).sqrt(), j))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut right = DenseMatrix::zeros(n, n);
    for (k, &(_, j)) in order.iter().enumerate() {
        for i in 0..n {
            right.set(i, k, v[j][i]);
        }
    }
    Svd {
        singular_values: order.into_iter().map(|(s, _)| s).collect(),
        right,
    }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Projection of the rows of `m` onto its top two right singular directions.
#[derive(Clone, Debug)]
pub struct TopTwo {
    pub projection: DenseMatrix,
    pub singular_values: [f64; 2],
}

pub fn svd_top2(m: &DenseMatrix) -> Result<TopTwo> {
    if m.cols() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 columns, got {}",
            m.cols()
        )));
    }
    let svd = thin_svd(m);
    if svd.singular_values[0] == 0.0 {
        return Err(Error::Degenerate("rank-0 matrix has no principal directions".into()));
    }
    let n = m.cols();
    let mut basis = DenseMatrix::zeros(n, 2);
    for i in 0..n {
        basis.set(i, 0, svd.right.get(i, 0));
        basis.set(i, 1, svd.right.get(i, 1));
    }
    Ok(TopTwo {
        projection: m.matmul(&basis)?,
        singular_values: [svd.singular_values[0], svd.singular_values[1]],
    })
}
