use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diffusion::{forward_diffuse, NoiseKind, NoiseMode, NoiseSchedule};
use crate::error::{Error, Result};
use crate::numerics::{thin_svd, DenseMatrix, RandomSource, Trans};

/// Ridge added to a singular within-class scatter.
pub const SCATTER_RIDGE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FisherRatio {
    pub value: f64,
    /// The within-class scatter was singular and received the ridge.
    pub ridge: bool,
}

/// trace(S_b) / trace(S_w) of the rows of `x` grouped by `labels`.
pub fn fisher_ratio(x: &DenseMatrix, labels: &[usize]) -> Result<FisherRatio> {
    if labels.len() != x.rows() {
        return Err(Error::shape("fisher_ratio", x.shape(), (labels.len(), 1)));
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (r, &c) in labels.iter().enumerate() {
        groups.entry(c).or_default().push(r);
    }
    if groups.len() < 2 || groups.values().any(|g| g.len() < 2) {
        return Err(Error::Degenerate(
            "class separability needs at least two classes with two rows each".into(),
        ));
    }
    let d = x.cols();
    let overall = x.column_means();
    let mut centred = DenseMatrix::zeros(x.rows(), d);
    let mut between = 0.0;
    for rows in groups.values() {
        let mean = x.select_rows(rows).column_means();
        between += rows.len() as f64 * mean.iter().zip(&overall).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        for &r in rows {
            for ((o, v), m) in centred.row_mut(r).iter_mut().zip(x.row(r)).zip(&mean) {
                *o = v - m;
            }
        }
    }
    let scatter = centred.matmul_t(Trans::Yes, &centred, Trans::No)?;
    let within: f64 = (0..d).map(|c| scatter.get(c, c)).sum();
    let sv = thin_svd(&scatter).singular_values;
    let largest = sv.first().copied().unwrap_or(0.0);
    let smallest = sv.last().copied().unwrap_or(0.0);
    let ridge = largest <= 0.0 || smallest <= 1e-12 * largest;
    let denom = if ridge { within + SCATTER_RIDGE * d as f64 } else { within };
    Ok(FisherRatio {
        value: between / denom,
        ridge,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrCurve {
    pub mode: NoiseMode,
    pub steps: Vec<usize>,
    pub snr: Vec<f64>,
    pub ridge: Vec<bool>,
}

/// Class separability of x_t at each requested step.
pub fn snr_curve(
    x0: &DenseMatrix,
    labels: &[usize],
    sched: &NoiseSchedule,
    mode: NoiseMode,
    steps: &[usize],
    rng: &mut RandomSource,
) -> Result<SnrCurve> {
    let kind = NoiseKind::new(mode, x0);
    let mut snr = Vec::with_capacity(steps.len());
    let mut ridge = Vec::with_capacity(steps.len());
    for &t in steps {
        let noisy = forward_diffuse(x0, t, sched, &kind, rng)?.x_t;
        let f = fisher_ratio(&noisy, labels)?;
        snr.push(f.value);
        ridge.push(f.ridge);
    }
    Ok(SnrCurve {
        mode,
        steps: steps.to_vec(),
        snr,
        ridge,
    })
}

/// `step,<mode>...` table for curves measured on the same steps.
pub fn snr_csv(curves: &[SnrCurve]) -> String {
    let mut out = String::from("step");
    for c in curves {
        out.push(',');
        out.push_str(c.mode.label());
    }
    out.push('\n');
    if let Some(first) = curves.first() {
        for (j, t) in first.steps.iter().enumerate() {
            out.push_str(&t.to_string());
            for c in curves {
                out.push(',');
                out.push_str(&c.snr[j].to_string());
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::make_schedule;

    fn clusters(rng: &mut RandomSource, centres: &[[f64; 2]], per: usize, spread: f64) -> (DenseMatrix, Vec<usize>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for _ in 0..per {
                rows.push([centre[0] + spread * rng.normal(), centre[1] + spread * rng.normal()]);
                labels.push(c);
            }
        }
        (DenseMatrix::from_rows(&rows), labels)
    }

    #[test]
    fn hand_ratio() {
        // class means ±1 on one axis, within deviations ±0.5: S_b = 4, S_w = 1
        let x = DenseMatrix::from_rows(&[[0.5, 0.0], [1.5, 0.0], [-0.5, 0.0], [-1.5, 0.0]]);
        let f = fisher_ratio(&x, &[0, 0, 1, 1]).unwrap();
        assert!(f.ridge, "second axis has no spread");
        assert!((f.value - 4.0 / (1.0 + 2.0 * SCATTER_RIDGE)).abs() < 1e-12);
        let full = DenseMatrix::from_rows(&[[0.5, 0.5], [1.5, -0.5], [-0.5, 0.5], [-1.5, -0.5]]);
        let g = fisher_ratio(&full, &[0, 0, 1, 1]).unwrap();
        assert!(!g.ridge);
        assert!((g.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn needs_two_classes_of_two() {
        let x = DenseMatrix::zeros(3, 2);
        assert!(fisher_ratio(&x, &[0, 0, 1]).is_err());
        assert!(fisher_ratio(&x, &[0, 0, 0]).is_err());
    }

    #[test]
    fn zero_noise_limit() {
        let sched = NoiseSchedule::from_betas(vec![1e-17]).unwrap();
        let mut rng = RandomSource::new(1);
        let (x, labels) = clusters(&mut rng, &[[0.0, 0.0], [3.0, 1.0]], 20, 0.5);
        let clean = fisher_ratio(&x, &labels).unwrap().value;
        let curve = snr_curve(&x, &labels, &sched, NoiseMode::Isotropic, &[1], &mut rng).unwrap();
        assert_eq!(curve.snr[0], clean);
    }

    #[test]
    fn heavy_noise_destroys_separation() {
        let mut rng = RandomSource::new(2);
        let (x, labels) = clusters(&mut rng, &[[0.0, 0.0], [10.0, 0.0]], 50, 0.1);
        let light = make_schedule(1, 1e-4, 1e-4).unwrap();
        // √(1−ᾱ) ≈ 10 times the unit noise equals the separation; the
        // signal is scaled by √ᾱ as well, so compare the ratio directly.
        let clean = snr_curve(&x, &labels, &light, NoiseMode::Isotropic, &[1], &mut rng).unwrap().snr[0];
        let heavy_noise = x.zip_map(&rng.standard_normal(100, 2), |v, e| v + 10.0 * e).unwrap();
        let noisy = fisher_ratio(&heavy_noise, &labels).unwrap().value;
        assert!(clean > 10.0 * noisy);
    }

    #[test]
    fn csv_layout() {
        let a = SnrCurve {
            mode: NoiseMode::Isotropic,
            steps: vec![1, 5],
            snr: vec![2.0, 1.0],
            ridge: vec![false, false],
        };
        let b = SnrCurve {
            mode: NoiseMode::Directional,
            snr: vec![3.0, 2.5],
            ..a.clone()
        };
        assert_eq!(snr_csv(&[a, b]), "step,isotropic,directional\n1,2,3\n5,1,2.5\n");
    }
}
