#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeSet;

use hgfnd::data::{Label, Splits};
use hgfnd::{Dataset, Hyperedge, HyperedgeKind, Hypergraph, NewsItem, PropagationTree, TreeNode};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn features(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect()
}

/// Random tree of up to `max_nodes` nodes, each node attached to an earlier
/// one.
pub fn random_tree(rng: &mut ChaCha8Rng, news_id: usize, dim: usize, max_nodes: usize) -> PropagationTree {
    let n = rng.random_range(1..=max_nodes);
    let nodes = (0..n)
        .map(|idx| TreeNode {
            idx,
            user: format!("u{}", rng.random_range(0..6)),
            ts: 1_600_000_000 + rng.random_range(0..200_000),
            feature: features(rng, dim),
        })
        .collect();
    let edges = (1..n).map(|c| (rng.random_range(0..c), c)).collect();
    PropagationTree { news_id, nodes, edges }
}

/// `n` labeled items, all in the training split unless `split` is set.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, dim: usize, max_nodes: usize) -> Dataset {
    let items = (0..n)
        .map(|id| NewsItem {
            id,
            origin: id,
            feature: features(rng, dim),
            label: Some(if rng.random_bool(0.5) { Label::True } else { Label::Fake }),
            entities: BTreeSet::new(),
        })
        .collect();
    let trees = (0..n).map(|id| random_tree(rng, id, dim, max_nodes)).collect();
    Dataset {
        items,
        trees,
        splits: Splits {
            train: (0..n).collect(),
            val: Vec::new(),
            test: Vec::new(),
        },
        feature_dim: dim,
    }
}

pub fn hypergraph(n: usize, edges: &[&[usize]]) -> Hypergraph {
    Hypergraph::new(
        n,
        edges
            .iter()
            .enumerate()
            .map(|(j, m)| Hyperedge {
                id: j,
                kind: HyperedgeKind::User,
                key: format!("e{j}"),
                members: m.to_vec(),
            })
            .collect(),
    )
    .unwrap()
}

/// `m` hyperedges over `n` nodes, each with 2 to `n` distinct members.
pub fn random_hypergraph(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Hypergraph {
    let kinds = HyperedgeKind::ALL;
    let edges = (0..m)
        .map(|j| {
            let size = rng.random_range(2..=n.max(2));
            let mut members = sample(rng, n, size.min(n)).into_vec();
            members.sort_unstable();
            Hyperedge {
                id: j,
                kind: kinds[rng.random_range(0..kinds.len())],
                key: format!("k{j}"),
                members,
            }
        })
        .collect();
    Hypergraph::new(n, edges).unwrap()
}
