use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureTable, InteractionGraph, SideFeatures};
use crate::error::{Error, Result};

/// Size and sparsity summary written by `ingest`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub num_users: usize,
    pub num_items: usize,
    pub num_edges: usize,
    /// `edges / (users * items)`.
    pub density: f64,
    /// `density` in percent, rounded to two decimals.
    pub density_percent: f64,
}

impl DatasetStats {
    pub fn new(num_users: usize, num_items: usize, num_edges: usize) -> Self {
        let cells = (num_users * num_items).max(1) as f64;
        let density = num_edges as f64 / cells;
        Self {
            num_users,
            num_items,
            num_edges,
            density,
            density_percent: (density * 10_000.0).round() / 100.0,
        }
    }
}

/// Reads a TSV interaction file plus optional item and user side-info files.
pub fn ingest(
    path: &Path,
    item_side: Option<&Path>,
    user_side: Option<&Path>,
) -> Result<(InteractionGraph, SideFeatures)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let graph = parse_interactions(&text, path)?;

    let mut side = SideFeatures::default();
    if let Some(p) = item_side {
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        side.items = Some(parse_side_features(&text, p, graph.item_ids())?);
    }
    if let Some(p) = user_side {
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        side.users = Some(parse_side_features(&text, p, graph.user_ids())?);
    }
    Ok((graph, side))
}

/// `user_id \t item_id [\t ...]` rows; ids are reindexed by first appearance.
pub fn parse_interactions(text: &str, origin: &Path) -> Result<InteractionGraph> {
    let mut users: HashMap<&str, usize> = HashMap::new();
    let mut items: HashMap<&str, usize> = HashMap::new();
    let mut user_ids = Vec::new();
    let mut item_ids = Vec::new();
    let mut edges = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let user = cols.next().unwrap_or("").trim();
        let item = cols.next().unwrap_or("").trim();
        if user.is_empty() || item.is_empty() {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: lineno + 1,
                msg: format!("expected `user_id<TAB>item_id`, got {line:?}"),
            });
        }
        let u = *users.entry(user).or_insert_with(|| {
            user_ids.push(user.to_string());
            user_ids.len() - 1
        });
        let i = *items.entry(item).or_insert_with(|| {
            item_ids.push(item.to_string());
            item_ids.len() - 1
        });
        edges.push((u, i));
    }

    if edges.is_empty() {
        return Err(Error::EmptyDataset(origin.to_path_buf()));
    }
    Ok(InteractionGraph::new(user_ids.len(), item_ids.len(), edges)?.with_raw_ids(user_ids, item_ids))
}

/// `entity_id \t attr1|attr2|...` rows mapped onto `known_ids`. Entities
/// missing from the file, or listed without attributes, get a zero vector.
pub fn parse_side_features(text: &str, origin: &Path, known_ids: &[String]) -> Result<FeatureTable> {
    let index: HashMap<&str, usize> = known_ids
        .iter()
        .enumerate()
        .map(|(k, id)| (id.as_str(), k))
        .collect();

    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
    let mut vocab = BTreeSet::new();
    let mut unknown = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (id, attrs) = line.split_once('\t').unwrap_or((line, ""));
        let id = id.trim();
        if id.is_empty() {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: lineno + 1,
                msg: "missing entity id".into(),
            });
        }
        let Some(&entity) = index.get(id) else {
            unknown += 1;
            continue;
        };
        let attrs: Vec<&str> = attrs
            .split('|')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .collect();
        vocab.extend(attrs.iter().copied());
        rows.push((entity, attrs));
    }
    if unknown > 0 {
        log::info!("{}: skipped {unknown} rows for ids absent from the interactions", origin.display());
    }

    let attributes: Vec<String> = vocab.into_iter().map(str::to_string).collect();
    let slot: HashMap<&str, usize> = attributes
        .iter()
        .enumerate()
        .map(|(k, a)| (a.as_str(), k))
        .collect();
    let mut vectors = vec![vec![0.0; attributes.len()]; known_ids.len()];
    for (entity, attrs) in rows {
        for a in attrs {
            vectors[entity][slot[a]] = 1.0;
        }
    }
    Ok(FeatureTable {
        attributes,
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> &'static Path {
        Path::new("test.tsv")
    }

    #[test]
    fn single_edge_is_fully_dense() {
        let g = parse_interactions("0\t0\n", origin()).unwrap();
        let s = g.stats();
        assert_eq!((s.num_users, s.num_items, s.num_edges), (1, 1, 1));
        assert_eq!(s.density, 1.0);
        assert_eq!(s.density_percent, 100.0);
    }

    #[test]
    fn duplicates_collapse_and_extra_columns_are_ignored() {
        let g = parse_interactions("u1\ti9\t5\t881250949\nu2\ti9\nu1\ti9\t3\t1\n", origin()).unwrap();
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.user_ids(), &["u1", "u2"]);
        assert_eq!(g.item_ids(), &["i9"]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse_interactions("1\t2\n\n3\n", origin()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(
            parse_interactions("\n \n", origin()),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn side_features_multi_hot() {
        let ids: Vec<String> = ["10", "11", "12"].iter().map(|s| s.to_string()).collect();
        let t = parse_side_features("11\tDrama|Comedy\n10\tComedy\n99\tWar\n", origin(), &ids).unwrap();
        assert_eq!(t.attributes, vec!["Comedy", "Drama"]);
        assert_eq!(t.vectors, vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn foursquare_density() {
        let s = DatasetStats::new(2060, 2876, 27149);
        assert_eq!(s.density_percent, 0.46);
    }
}
