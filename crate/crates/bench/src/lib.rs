//! Fixtures shared by the benchmarks.

use hgfnd::data::generate_synthetic;
use hgfnd::hypergraph::build_hypergraph;
use hgfnd::{Dataset, HyperedgeKind, Hypergraph, SyntheticConfig, TimeGranularity};

/// Synthetic dataset of `n_news` items and its full hypergraph.
pub fn fixture(n_news: usize, seed: u64) -> (Dataset, Hypergraph) {
    let config = SyntheticConfig {
        n_news,
        n_users: (n_news / 2).max(10),
        seed,
        ..Default::default()
    };
    let dataset = generate_synthetic(&config).expect("valid synthetic config");
    let graph = build_hypergraph(&dataset, &HyperedgeKind::ALL, TimeGranularity::Day).expect("hypergraph builds");
    (dataset, graph)
}
