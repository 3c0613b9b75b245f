use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::DenseMatrix;

/// Seeded, counter-tracked random stream.
///
/// Normals come from Box–Muller over the ChaCha8 stream, so a given seed and
/// call sequence yields bit-identical draws on every platform.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
    draws: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
            draws: 0,
        }
    }

    /// An independent stream keyed by `(seed, stream)`, unaffected by how far
    /// this source has advanced.
    pub fn derive(&self, stream: u64) -> RandomSource {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream.wrapping_add(1));
        Self {
            seed: self.seed,
            rng,
            spare_normal: None,
            draws: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of values handed out so far.
    pub fn position(&self) -> u64 {
        self.draws
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.draws += 1;
        self.rng.gen_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            self.draws += 1;
            return z;
        }
        // 1 - u keeps the log argument in (0, 1].
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        self.draws -= 1;
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// `rows × cols` i.i.d. standard normal draws.
    pub fn standard_normal(&mut self, rows: usize, cols: usize) -> DenseMatrix {
        let data = (0..rows * cols).map(|_| self.normal()).collect();
        DenseMatrix::from_vec(rows, cols, data).expect("length matches by construction")
    }

    pub fn uniform_matrix(&mut self, rows: usize, cols: usize, low: f64, high: f64) -> DenseMatrix {
        let data = (0..rows * cols)
            .map(|_| low + (high - low) * self.uniform())
            .collect();
        DenseMatrix::from_vec(rows, cols, data).expect("length matches by construction")
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        let a = RandomSource::new(42).standard_normal(7, 5);
        let b = RandomSource::new(42).standard_normal(7, 5);
        assert_eq!(a, b);
        assert_ne!(a, RandomSource::new(43).standard_normal(7, 5));
    }

    #[test]
    fn normal_moments_over_a_million_draws() {
        let m = RandomSource::new(7).standard_normal(1000, 1000);
        let mean = m.mean();
        let var = m.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
    }

    #[test]
    fn derived_streams_are_independent_of_parent_position() {
        let mut parent = RandomSource::new(9);
        let before = parent.derive(3).standard_normal(2, 2);
        parent.standard_normal(10, 10);
        assert_eq!(before, parent.derive(3).standard_normal(2, 2));
        assert_ne!(before, parent.derive(4).standard_normal(2, 2));
    }

    #[test]
    fn position_counts_draws() {
        let mut rng = RandomSource::new(1);
        rng.standard_normal(3, 1);
        rng.uniform();
        assert_eq!(rng.position(), 4);
    }
}
