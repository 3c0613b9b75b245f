use super::NoiseSchedule;
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Coefficients of q(x_s | x_t, x₀) for s < t:
/// mean = `x0` · x̂₀ + `xt` · x_t, variance `variance`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PosteriorCoefficients {
    pub x0: f64,
    pub xt: f64,
    pub variance: f64,
}

impl NoiseSchedule {
    /// One-step posterior from t to t − 1. At t = 1 the chain ends and the
    /// mean is x̂₀ itself with zero variance.
    pub fn posterior(&self, t: usize) -> Result<PosteriorCoefficients> {
        self.check_step(t)?;
        if t == 1 {
            return Ok(PosteriorCoefficients {
                x0: 1.0,
                xt: 0.0,
                variance: 0.0,
            });
        }
        let (ab_prev, ab) = (self.alpha_bar(t - 1), self.alpha_bar(t));
        let beta = self.beta(t);
        let denom = 1.0 - ab;
        Ok(PosteriorCoefficients {
            x0: ab_prev.sqrt() * beta / denom,
            xt: self.alpha(t).sqrt() * (1.0 - ab_prev) / denom,
            variance: (1.0 - ab_prev) / denom * beta,
        })
    }

    /// Posterior jumping from step t straight to an earlier step s (s = 0
    /// means the clean sample). Reduces to [`NoiseSchedule::posterior`] when
    /// s = t − 1.
    pub fn posterior_between(&self, s: usize, t: usize) -> Result<PosteriorCoefficients> {
        self.check_step(t)?;
        if s >= t {
            return Err(Error::Config(format!("posterior needs s < t, got s={s}, t={t}")));
        }
        if s + 1 == t {
            return self.posterior(t);
        }
        if s == 0 {
            return Ok(PosteriorCoefficients {
                x0: 1.0,
                xt: 0.0,
                variance: 0.0,
            });
        }
        let (ab_s, ab_t) = (self.alpha_bar(s), self.alpha_bar(t));
        let alpha_ts = ab_t / ab_s;
        let beta_ts = 1.0 - alpha_ts;
        let denom = 1.0 - ab_t;
        Ok(PosteriorCoefficients {
            x0: ab_s.sqrt() * beta_ts / denom,
            xt: alpha_ts.sqrt() * (1.0 - ab_s) / denom,
            variance: (1.0 - ab_s) / denom * beta_ts,
        })
    }
}

/// μ̃_t(x_t, x̂₀) and β̃_t for one reverse step.
pub fn reverse_posterior_mean(
    x_t: &DenseMatrix,
    x0_hat: &DenseMatrix,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<(DenseMatrix, f64)> {
    let coef = sched.posterior(t)?;
    combine(x_t, x0_hat, coef)
}

pub(crate) fn combine(
    x_t: &DenseMatrix,
    x0_hat: &DenseMatrix,
    coef: PosteriorCoefficients,
) -> Result<(DenseMatrix, f64)> {
    if x_t.shape() != x0_hat.shape() {
        return Err(Error::shape("reverse_posterior_mean", x_t.shape(), x0_hat.shape()));
    }
    if coef.xt == 0.0 {
        return Ok((x0_hat.clone(), coef.variance));
    }
    let mean = x0_hat.zip_map(x_t, |a, b| coef.x0 * a + coef.xt * b)?;
    Ok((mean, coef.variance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::make_schedule;
    use crate::numerics::RandomSource;

    #[test]
    fn terminal_step_returns_prediction() {
        let sched = make_schedule(10, 1e-4, 0.02).unwrap();
        let mut rng = RandomSource::new(2);
        let (xt, x0) = (rng.standard_normal(3, 4), rng.standard_normal(3, 4));
        let (mean, var) = reverse_posterior_mean(&xt, &x0, 1, &sched).unwrap();
        assert_eq!(mean, x0);
        assert_eq!(var, 0.0);
    }

    #[test]
    fn noise_free_input_maps_to_previous_mean() {
        // With x_t = √ᾱ_t x₀ the posterior mean is √ᾱ_{t−1} x₀.
        let sched = make_schedule(20, 1e-3, 0.3).unwrap();
        for t in 2..=20 {
            let c = sched.posterior(t).unwrap();
            let lhs = c.x0 + c.xt * sched.alpha_bar(t).sqrt();
            assert!((lhs - sched.alpha_bar(t - 1).sqrt()).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn jump_matches_single_step() {
        let sched = make_schedule(8, 0.01, 0.2).unwrap();
        for t in 2..=8 {
            assert_eq!(sched.posterior_between(t - 1, t).unwrap(), sched.posterior(t).unwrap());
        }
        let c = sched.posterior_between(2, 6).unwrap();
        let lhs = c.x0 + c.xt * sched.alpha_bar(6).sqrt();
        assert!((lhs - sched.alpha_bar(2).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn variance_is_between_zero_and_beta() {
        let sched = make_schedule(30, 1e-4, 0.05).unwrap();
        for t in 2..=30 {
            let v = sched.posterior(t).unwrap().variance;
            assert!(v > 0.0 && v < sched.beta(t));
        }
    }

    #[test]
    fn shape_and_step_errors() {
        let sched = make_schedule(3, 0.1, 0.2).unwrap();
        let a = DenseMatrix::zeros(2, 2);
        let b = DenseMatrix::zeros(2, 3);
        assert!(reverse_posterior_mean(&a, &b, 2, &sched).is_err());
        assert!(reverse_posterior_mean(&a, &a, 4, &sched).is_err());
    }
}
