//! Bipartite interaction graph, side information and data splits.

mod adjacency;
mod ingest;
mod split;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::CsrMatrix;

pub use adjacency::{enrich_with_side_info, normalize_adjacency};
pub use ingest::{ingest, parse_interactions, parse_side_features, DatasetStats};
pub use split::{split, DataSplit, SPLIT_RATIOS, TEST_DRAWS};

/// A `(user, item)` pair with the item indexed locally in `0..num_items`.
pub type Edge = (usize, usize);

/// Users occupy node indices `0..num_users`; item `i` is node `num_users + i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionGraph {
    num_users: usize,
    num_items: usize,
    edges: Vec<Edge>,
    /// Same-class similarity links as node pairs `(a, b)` with `a < b`.
    #[serde(default)]
    similarity_edges: Vec<(usize, usize)>,
    #[serde(default)]
    user_ids: Vec<String>,
    #[serde(default)]
    item_ids: Vec<String>,
}

impl InteractionGraph {
    pub fn new(num_users: usize, num_items: usize, mut edges: Vec<Edge>) -> Result<Self> {
        if let Some(&(u, i)) = edges.iter().find(|&&(u, i)| u >= num_users || i >= num_items) {
            return Err(Error::Config(format!(
                "edge ({u},{i}) outside {num_users} users x {num_items} items"
            )));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self {
            num_users,
            num_items,
            edges,
            similarity_edges: Vec::new(),
            user_ids: (0..num_users).map(|u| u.to_string()).collect(),
            item_ids: (0..num_items).map(|i| i.to_string()).collect(),
        })
    }

    pub(crate) fn with_raw_ids(mut self, user_ids: Vec<String>, item_ids: Vec<String>) -> Self {
        debug_assert_eq!(user_ids.len(), self.num_users);
        debug_assert_eq!(item_ids.len(), self.num_items);
        self.user_ids = user_ids;
        self.item_ids = item_ids;
        self
    }

    /// Same node set and raw ids, different interaction edges, no similarity links.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Self> {
        Ok(Self::new(self.num_users, self.num_items, edges)?
            .with_raw_ids(self.user_ids.clone(), self.item_ids.clone()))
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_nodes(&self) -> usize {
        self.num_users + self.num_items
    }

    pub fn item_node(&self, item: usize) -> usize {
        self.num_users + item
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn similarity_edges(&self) -> &[(usize, usize)] {
        &self.similarity_edges
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    /// Items per user, each list sorted.
    pub fn user_items(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_users];
        for &(u, i) in &self.edges {
            out[u].push(i);
        }
        out
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats::new(self.num_users, self.num_items, self.edges.len())
    }

    /// Symmetric 0/1 adjacency over interaction edges only.
    pub fn base_adjacency(&self) -> CsrMatrix {
        self.adjacency(false)
    }

    /// Interaction edges plus similarity links, every entry weighted 1.
    pub fn enriched_adjacency(&self) -> CsrMatrix {
        self.adjacency(true)
    }

    fn adjacency(&self, enriched: bool) -> CsrMatrix {
        let n = self.num_nodes();
        let mut triplets = Vec::with_capacity(2 * self.edges.len());
        for &(u, i) in &self.edges {
            let item = self.item_node(i);
            triplets.push((u, item, 1.0));
            triplets.push((item, u, 1.0));
        }
        if enriched {
            for &(a, b) in &self.similarity_edges {
                triplets.push((a, b, 1.0));
                triplets.push((b, a, 1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, triplets)
    }

    pub(crate) fn set_similarity_edges(&mut self, mut pairs: Vec<(usize, usize)>) {
        pairs.sort_unstable();
        pairs.dedup();
        self.similarity_edges = pairs;
    }
}

/// Multi-hot attribute vectors for one entity class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub attributes: Vec<String>,
    /// One vector per entity, each of length `attributes.len()`.
    pub vectors: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn dim(&self) -> usize {
        self.attributes.len()
    }

    /// Index of the highest-weighted attribute, `None` for an all-zero vector.
    /// Ties go to the lower attribute index.
    pub fn dominant(&self, entity: usize) -> Option<usize> {
        let v = &self.vectors[entity];
        let mut best: Option<usize> = None;
        for (k, &w) in v.iter().enumerate() {
            if w > 0.0 && best.map_or(true, |b| w > v[b]) {
                best = Some(k);
            }
        }
        best
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SideFeatures {
    pub users: Option<FeatureTable>,
    pub items: Option<FeatureTable>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edges_are_bipartite_and_symmetric() {
        let g = InteractionGraph::new(2, 3, vec![(0, 0), (1, 2), (0, 0), (1, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 0), (1, 1), (1, 2)]);
        let a = g.base_adjacency();
        assert!(a.is_symmetric());
        for n in 0..g.num_nodes() {
            assert_eq!(a.get(n, n), 0.0);
        }
        for r in 0..g.num_users() {
            assert!(a.row_entries(r).all(|(c, _)| c >= g.num_users()));
        }
    }

    #[test]
    fn out_of_range_edge_rejected() {
        assert!(InteractionGraph::new(1, 1, vec![(0, 1)]).is_err());
    }

    #[test]
    fn dominant_attribute() {
        let t = FeatureTable {
            attributes: vec!["a".into(), "b".into(), "c".into()],
            vectors: vec![vec![0.0, 1.0, 1.0], vec![0.0; 3], vec![0.5, 2.0, 0.0]],
        };
        assert_eq!(t.dominant(0), Some(1));
        assert_eq!(t.dominant(1), None);
        assert_eq!(t.dominant(2), Some(1));
    }
}
