use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, ParamId, RandomSource};

/// Named trainable matrices; a parameter's [`ParamId`] is its insertion index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    entries: Vec<(String, DenseMatrix)>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: DenseMatrix) -> ParamId {
        let name = name.into();
        debug_assert!(self.find(&name).is_none(), "duplicate parameter {name}");
        self.entries.push((name, value));
        ParamId(self.entries.len() - 1)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|(n, _)| n == name).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.find(name)
            .ok_or_else(|| Error::Config(format!("checkpoint has no parameter named {name}")))
    }

    pub fn get(&self, id: ParamId) -> &DenseMatrix {
        &self.entries[id.0].1
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut DenseMatrix {
        &mut self.entries[id.0].1
    }

    pub fn by_name(&self, name: &str) -> Option<&DenseMatrix> {
        self.find(name).map(|id| self.get(id))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].0
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|(_, m)| m.is_finite())
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|(_, m)| m.len()).sum()
    }
}

/// U(−a, a) with a = √(6 / (rows + cols)).
pub fn xavier_uniform(rows: usize, cols: usize, rng: &mut RandomSource) -> DenseMatrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    rng.uniform_matrix(rows, cols, -a, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_follow_insertion_order() {
        let mut p = ParamStore::new();
        let a = p.insert("a", DenseMatrix::zeros(1, 2));
        let b = p.insert("b", DenseMatrix::identity(2));
        assert_eq!((a, b), (ParamId(0), ParamId(1)));
        assert_eq!(p.id("b").unwrap(), b);
        assert!(p.id("c").is_err());
        assert_eq!(p.num_scalars(), 6);
    }

    #[test]
    fn xavier_range() {
        let mut rng = RandomSource::new(1);
        let m = xavier_uniform(40, 24, &mut rng);
        let a = (6.0f64 / 64.0).sqrt();
        assert!(m.data().iter().all(|v| v.abs() <= a));
        assert!(m.data().iter().any(|v| v.abs() > 0.9 * a));
    }
}
