use crate::error::{Error, Result};
use crate::graph::InteractionGraph;
use crate::numerics::{CsrMatrix, RandomSource};

/// Two-state edge chain with flip probability `alpha`:
/// `[[1 − α, α], [α, 1 − α]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscreteTransition {
    pub alpha: f64,
}

impl DiscreteTransition {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!("flip probability {alpha} outside [0, 1]")));
        }
        Ok(Self { alpha })
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let a = self.alpha;
        [[1.0 - a, a], [a, 1.0 - a]]
    }
}

/// Dense symmetric 0/1 matrix without self-loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMatrix {
    n: usize,
    bits: Vec<bool>,
}

impl BinaryMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            bits: vec![false; n * n],
        }
    }

    pub fn from_graph(g: &InteractionGraph) -> Self {
        let mut m = Self::zeros(g.num_nodes());
        for &(u, i) in g.edges() {
            m.set(u, g.item_node(i), true);
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.n + c]
    }

    /// Sets both (r, c) and (c, r).
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.bits[r * self.n + c] = value;
        self.bits[c * self.n + r] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|r| (0..r).all(|c| self.get(r, c) == self.get(c, r)))
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut triplets = Vec::new();
        for r in 0..self.n {
            for c in 0..self.n {
                if self.get(r, c) {
                    triplets.push((r, c, 1.0));
                }
            }
        }
        CsrMatrix::from_triplets(self.n, self.n, triplets)
    }
}

/// Runs the edge chain for steps `1..=t`, step `s` flipping each
/// strictly-upper-triangular entry with probability `flips[s − 1]`, then
/// mirrors the result.
pub fn discrete_forward(
    adjacency: &BinaryMatrix,
    t: usize,
    flips: &[f64],
    rng: &mut RandomSource,
) -> Result<BinaryMatrix> {
    if t > flips.len() {
        return Err(Error::Step {
            step: t,
            max: flips.len(),
        });
    }
    let transitions = flips[..t]
        .iter()
        .map(|&a| DiscreteTransition::new(a))
        .collect::<Result<Vec<_>>>()?;
    let mut out = adjacency.clone();
    let n = out.n;
    for step in transitions {
        if step.alpha == 0.0 {
            continue;
        }
        for r in 0..n {
            for c in r + 1..n {
                if rng.bernoulli(step.alpha) {
                    let v = out.get(r, c);
                    out.set(r, c, !v);
                }
            }
        }
    }
    Ok(out)
}

/// Product Q¹ Q² ⋯ of the per-step transition matrices.
pub fn compose_transitions(flips: &[f64]) -> Result<[[f64; 2]; 2]> {
    let mut acc = [[1.0, 0.0], [0.0, 1.0]];
    for &a in flips {
        let q = DiscreteTransition::new(a)?.matrix();
        let mut next = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                next[i][j] = acc[i][0] * q[0][j] + acc[i][1] * q[1][j];
            }
        }
        acc = next;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_graph() -> BinaryMatrix {
        let g = InteractionGraph::new(3, 4, vec![(0, 0), (0, 3), (1, 1), (2, 2), (2, 0)]).unwrap();
        BinaryMatrix::from_graph(&g)
    }

    #[test]
    fn zero_flip_probability_is_identity() {
        let a = sample_graph();
        let mut rng = RandomSource::new(1);
        assert_eq!(discrete_forward(&a, 5, &[0.0; 5], &mut rng).unwrap(), a);
    }

    #[test]
    fn rows_are_stochastic() {
        for a in [0.0, 0.3, 1.0] {
            let q = DiscreteTransition::new(a).unwrap().matrix();
            for row in q {
                assert_eq!(row.iter().sum::<f64>(), 1.0);
                assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
        assert!(DiscreteTransition::new(1.5).is_err());
    }

    #[test]
    fn two_step_composition() {
        let (a, b) = (0.2, 0.35);
        let q = compose_transitions(&[a, b]).unwrap();
        let expected = a * (1.0 - b) + b * (1.0 - a);
        assert!((q[0][1] - expected).abs() < 1e-15);
        assert!((q[1][0] - expected).abs() < 1e-15);
    }

    #[test]
    fn output_stays_symmetric() {
        let mut rng = RandomSource::new(4);
        let out = discrete_forward(&sample_graph(), 3, &[0.3, 0.1, 0.4], &mut rng).unwrap();
        assert!(out.is_symmetric());
        assert!((0..out.size()).all(|k| !out.get(k, k)));
    }

    #[test]
    fn too_many_steps() {
        let mut rng = RandomSource::new(4);
        assert!(discrete_forward(&sample_graph(), 3, &[0.1], &mut rng).is_err());
    }
}
