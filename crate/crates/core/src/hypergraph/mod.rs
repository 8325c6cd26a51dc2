//! Hypergraph over news nodes and its construction from a [`Dataset`].
//!
//! [`Dataset`]: crate::data::Dataset

mod build;
mod clique;
mod io;
mod stats;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use build::{
    build_entity_hyperedges, build_hypergraph, build_time_hyperedges, build_user_hyperedges, extract_entities,
    normalize_entity,
};
pub use clique::{clique_expansion, PlainGraph};
pub use io::{read_hypergraph, write_hypergraph};
pub use stats::{stats, HypergraphStats, KindStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HyperedgeKind {
    User,
    Time,
    Entity,
}

impl HyperedgeKind {
    pub const ALL: [HyperedgeKind; 3] = [HyperedgeKind::User, HyperedgeKind::Time, HyperedgeKind::Entity];

    pub fn as_str(self) -> &'static str {
        match self {
            HyperedgeKind::User => "user",
            HyperedgeKind::Time => "time",
            HyperedgeKind::Entity => "entity",
        }
    }

    pub fn letter(self) -> char {
        match self {
            HyperedgeKind::User => 'U',
            HyperedgeKind::Time => 'T',
            HyperedgeKind::Entity => 'E',
        }
    }
}

impl fmt::Display for HyperedgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HyperedgeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "user" | "u" => Ok(HyperedgeKind::User),
            "time" | "t" => Ok(HyperedgeKind::Time),
            "entity" | "e" => Ok(HyperedgeKind::Entity),
            other => Err(Error::Format(format!("unknown hyperedge kind `{other}`"))),
        }
    }
}

/// Bucket width for Time hyperedges. Timestamps are floored to UTC
/// boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeGranularity {
    #[default]
    Day,
    Hour,
}

impl TimeGranularity {
    pub fn seconds(self) -> i64 {
        match self {
            TimeGranularity::Day => 86_400,
            TimeGranularity::Hour => 3_600,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TimeGranularity::Day => "day",
            TimeGranularity::Hour => "hour",
        }
    }
}

impl FromStr for TimeGranularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "day" => Ok(TimeGranularity::Day),
            "hour" => Ok(TimeGranularity::Hour),
            other => Err(Error::Format(format!("unknown time granularity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hyperedge {
    pub id: usize,
    pub kind: HyperedgeKind,
    /// User id, time bucket token or normalised entity string.
    pub key: String,
    /// Sorted, duplicate-free news indices; at least two.
    pub members: Vec<usize>,
}

/// Binary incidence structure `H` (`N x M`), stored both as per-hyperedge
/// member lists and per-node incident-hyperedge lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    n_nodes: usize,
    hyperedges: Vec<Hyperedge>,
    incident: Vec<Vec<usize>>,
}

impl Hypergraph {
    /// Builds the incidence structure. Hyperedge ids are reassigned to
    /// positions; members are sorted and deduplicated.
    pub fn new(n_nodes: usize, hyperedges: Vec<Hyperedge>) -> Result<Self> {
        let mut hyperedges = hyperedges;
        let mut incident = vec![Vec::new(); n_nodes];
        for (j, edge) in hyperedges.iter_mut().enumerate() {
            edge.id = j;
            edge.members.sort_unstable();
            edge.members.dedup();
            if let Some(&bad) = edge.members.iter().find(|&&k| k >= n_nodes) {
                return Err(Error::Validation(format!(
                    "hyperedge {j} ({} `{}`) references node {bad} but N = {n_nodes}",
                    edge.kind, edge.key
                )));
            }
            for &k in &edge.members {
                incident[k].push(j);
            }
        }
        Ok(Hypergraph {
            n_nodes,
            hyperedges,
            incident,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_hyperedges(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn hyperedges(&self) -> &[Hyperedge] {
        &self.hyperedges
    }

    pub fn members(&self, j: usize) -> &[usize] {
        &self.hyperedges[j].members
    }

    /// Hyperedges containing node `i`, ascending.
    pub fn incident(&self, i: usize) -> &[usize] {
        &self.incident[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.hyperedges[j].members.binary_search(&i).is_ok()
    }

    /// Total number of nonzeros of `H`.
    pub fn nnz(&self) -> usize {
        self.hyperedges.iter().map(|e| e.members.len()).sum()
    }

    pub fn isolated_nodes(&self) -> usize {
        self.incident.iter().filter(|list| list.is_empty()).count()
    }

    /// Sub-hypergraph with only the hyperedges of the given kinds.
    pub fn restrict_kinds(&self, kinds: &[HyperedgeKind]) -> Hypergraph {
        let edges = self
            .hyperedges
            .iter()
            .filter(|e| kinds.contains(&e.kind))
            .cloned()
            .collect();
        Hypergraph::new(self.n_nodes, edges).expect("members already validated")
    }
}

/// Concatenates hyperedge families into one hypergraph, assigning ids in the
/// given order.
pub fn concat_hypergraphs(parts: Vec<Vec<Hyperedge>>, n_nodes: usize) -> Result<Hypergraph> {
    let edges: Vec<Hyperedge> = parts.into_iter().flatten().collect();
    if edges.is_empty() {
        log::warn!("hypergraph over {n_nodes} nodes has no hyperedges");
    }
    let graph = Hypergraph::new(n_nodes, edges)?;
    let isolated = graph.isolated_nodes();
    if isolated > 0 {
        log::warn!("{isolated} of {n_nodes} nodes belong to no hyperedge and will get a zero state");
    }
    Ok(graph)
}
