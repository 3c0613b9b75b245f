use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{svd_top2, DenseMatrix};

/// Rows projected on the top two right singular vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvdExport {
    pub points: DenseMatrix,
    pub labels: Vec<String>,
    pub sigma: [f64; 2],
    /// σ₁/σ₂; infinite for rank-one input.
    pub anisotropy: f64,
}

pub fn svd_export(embeddings: &DenseMatrix, labels: &[String]) -> Result<SvdExport> {
    if labels.len() != embeddings.rows() {
        return Err(Error::shape("svd_export", embeddings.shape(), (labels.len(), 1)));
    }
    let top = svd_top2(embeddings)?;
    let [s1, s2] = top.singular_values;
    Ok(SvdExport {
        points: top.projection,
        labels: labels.to_vec(),
        sigma: [s1, s2],
        anisotropy: if s2 > 0.0 { s1 / s2 } else { f64::INFINITY },
    })
}

impl SvdExport {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# sigma1={},sigma2={},anisotropy={}\nx,y,label\n",
            self.sigma[0], self.sigma[1], self.anisotropy
        );
        for (r, label) in self.labels.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", self.points.get(r, 0), self.points.get(r, 1), label);
        }
        out
    }
}
