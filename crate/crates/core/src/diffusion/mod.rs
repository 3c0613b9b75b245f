//! Noise schedules, forward corruption and reverse-process helpers.

mod discrete;
mod noise;
mod posterior;
mod schedule;

pub use discrete::{compose_transitions, discrete_forward, BinaryMatrix, DiscreteTransition};
pub use noise::{
    align_noise, diffuse_with, directional_noise, forward_diffuse, sign, DiffusionBatch, NoiseKind,
    NoiseMode, NoiseStats,
};
pub(crate) use posterior::combine;
pub use posterior::{reverse_posterior_mean, PosteriorCoefficients};
pub use schedule::{make_schedule, NoiseSchedule};

use crate::error::{Error, Result};
use crate::numerics::RandomSource;

/// `k` distinct steps drawn uniformly from `1..=steps`, largest first.
pub fn sample_reverse_steps(steps: usize, k: usize, rng: &mut RandomSource) -> Result<Vec<usize>> {
    if k == 0 || k > steps {
        return Err(Error::Config(format!(
            "reverse sample count must be in 1..={steps}, got {k}"
        )));
    }
    let mut pool: Vec<usize> = (1..=steps).collect();
    for i in 0..k {
        let j = i + rng.below(steps - i);
        pool.swap(i, j);
    }
    let mut chosen = pool[..k].to_vec();
    chosen.sort_unstable_by(|a, b| b.cmp(a));
    Ok(chosen)
}
