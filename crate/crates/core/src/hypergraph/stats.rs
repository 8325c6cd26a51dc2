use std::fmt::Write as _;

use serde::Serialize;

use super::{HyperedgeKind, Hypergraph};

/// Size and degree summary for one hyperedge kind (or `all`). Degrees are
/// averaged over nodes that touch at least one hyperedge of the scope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KindStats {
    pub scope: String,
    pub hyperedges: usize,
    pub mean_size: f64,
    pub max_size: usize,
    pub mean_degree: f64,
    pub max_degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypergraphStats {
    pub n_nodes: usize,
    /// One row per kind in User, Time, Entity order, then `all`.
    pub rows: Vec<KindStats>,
}

impl HypergraphStats {
    pub fn kind(&self, kind: HyperedgeKind) -> &KindStats {
        self.rows
            .iter()
            .find(|r| r.scope == kind.as_str())
            .expect("every kind has a row")
    }

    pub fn overall(&self) -> &KindStats {
        self.rows.last().expect("overall row present")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,hyperedges,mean_size,max_size,mean_degree,max_degree\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.4},{},{:.4},{}",
                r.scope, r.hyperedges, r.mean_size, r.max_size, r.mean_degree, r.max_degree
            )
            .unwrap();
        }
        out
    }
}

fn summarize(scope: &str, h: &Hypergraph, keep: impl Fn(HyperedgeKind) -> bool) -> KindStats {
    let mut degree = vec![0usize; h.n_nodes()];
    let mut count = 0;
    let mut total_size = 0;
    let mut max_size = 0;
    for edge in h.hyperedges().iter().filter(|e| keep(e.kind)) {
        count += 1;
        total_size += edge.members.len();
        max_size = max_size.max(edge.members.len());
        for &k in &edge.members {
            degree[k] += 1;
        }
    }
    let touched: Vec<usize> = degree.into_iter().filter(|&d| d > 0).collect();
    KindStats {
        scope: scope.to_string(),
        hyperedges: count,
        mean_size: if count == 0 {
            0.0
        } else {
            total_size as f64 / count as f64
        },
        max_size,
        mean_degree: if touched.is_empty() {
            0.0
        } else {
            touched.iter().sum::<usize>() as f64 / touched.len() as f64
        },
        max_degree: touched.into_iter().max().unwrap_or(0),
    }
}

pub fn stats(h: &Hypergraph) -> HypergraphStats {
    let mut rows: Vec<KindStats> = HyperedgeKind::ALL
        .iter()
        .map(|&kind| summarize(kind.as_str(), h, |k| k == kind))
        .collect();
    rows.push(summarize("all", h, |_| true));
    HypergraphStats {
        n_nodes: h.n_nodes(),
        rows,
    }
}
