use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-step β_t with α_t = 1 − β_t and ᾱ_t = ∏ α. Steps are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

/// Linear β from `beta_start` to `beta_end` over `steps` steps.
pub fn make_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::Config("diffusion needs at least one step".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::Config(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start}..{beta_end}"
        )));
    }
    let betas: Vec<f64> = (0..steps)
        .map(|k| {
            if steps == 1 {
                beta_start
            } else {
                beta_start + (beta_end - beta_start) * k as f64 / (steps - 1) as f64
            }
        })
        .collect();
    NoiseSchedule::from_betas(betas)
}

impl NoiseSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() || betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::Config("every beta must lie in (0, 1)".into()));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(alphas.len());
        let mut running = 1.0;
        for a in &alphas {
            running *= a;
            alpha_bars.push(running);
        }
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
        })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            Err(Error::Step {
                step: t,
                max: self.steps(),
            })
        } else {
            Ok(())
        }
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// ᾱ_t, with ᾱ_0 ≡ 1.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step() {
        let s = make_schedule(1, 0.1, 0.1).unwrap();
        assert_eq!(s.alpha_bars(), &[0.9]);
    }

    #[test]
    fn constant_beta_products() {
        let s = make_schedule(3, 0.1, 0.1).unwrap();
        let expected = [0.9, 0.81, 0.729];
        for (a, e) in s.alpha_bars().iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_endpoints() {
        let s = make_schedule(5, 0.1, 0.5).unwrap();
        assert_eq!(s.beta(1), 0.1);
        assert!((s.beta(5) - 0.5).abs() < 1e-15);
        assert!((s.beta(3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn bounds_are_validated() {
        assert!(make_schedule(0, 0.1, 0.2).is_err());
        assert!(make_schedule(3, 0.0, 0.2).is_err());
        assert!(make_schedule(3, 0.3, 0.2).is_err());
        assert!(make_schedule(3, 0.1, 1.0).is_err());
    }

    #[test]
    fn steps_outside_range() {
        let s = make_schedule(4, 1e-4, 0.02).unwrap();
        assert!(s.check_step(0).is_err());
        assert!(s.check_step(5).is_err());
        assert!(s.check_step(4).is_ok());
    }
}
