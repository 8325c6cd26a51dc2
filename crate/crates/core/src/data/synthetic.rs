//! Seeded generator for desk-scale datasets with planted user credibility.
//!
//! Every user leans towards fake or true news. Each engagement slot of a
//! news piece is filled by a user of the matching lean with probability
//! `user_fidelity`, so User hyperedges inherit label purity from fidelity.
//! Time stamps and entities are drawn independently of labels.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{make_splits, Dataset, Label, NewsItem, PropagationTree, Splits, TreeNode};
use crate::error::{Error, Result};

const MIN_TREE_NODES: usize = 2;
const MAX_TREE_NODES: usize = 30;
/// 2020-01-01T00:00:00Z
const EPOCH_START: i64 = 1_577_836_800;
const PUBLISH_WINDOW_SECS: i64 = 30 * 86_400;
const MAX_REPLY_DELAY_SECS: i64 = 12 * 3_600;
const MAX_ENTITIES_PER_NEWS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_news: usize,
    pub n_users: usize,
    pub fake_fraction: f64,
    /// Probability that an engagement comes from a user whose lean matches
    /// the news label.
    pub user_fidelity: f64,
    pub feature_dim: usize,
    /// Distance between the two class means of news features.
    pub signal_strength: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_news: 200,
            n_users: 100,
            fake_fraction: 0.5,
            user_fidelity: 0.95,
            feature_dim: 32,
            signal_strength: 1.0,
            noise_scale: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Validation(format!("synthetic config: {msg}")));
        if self.n_news < 3 {
            return bad("n_news must be at least 3");
        }
        if self.n_users < 2 {
            return bad("n_users must be at least 2");
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive");
        }
        if !(self.fake_fraction > 0.0 && self.fake_fraction < 1.0) {
            return bad("fake_fraction must lie in (0, 1)");
        }
        if !(0.5..=1.0).contains(&self.user_fidelity) {
            return bad("user_fidelity must lie in [0.5, 1]");
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return bad("signal_strength must be non-negative");
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return bad("noise_scale must be positive");
        }
        Ok(())
    }
}

fn split_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n - 1)
}

/// Generates a labeled dataset with 20/10/70 stratified splits.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.feature_dim;
    let noise = Normal::new(0.0, config.noise_scale).expect("validated noise scale");
    let unit = Normal::new(0.0, 1.0).unwrap();

    // Class means sit at +-signal/2 along a random unit direction.
    let mut direction: Vec<f64> = (0..dim).map(|_| unit.sample(&mut rng)).collect();
    let norm = direction
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    direction.iter_mut().for_each(|v| *v /= norm);
    let class_mean = |label: Label| -> Vec<f64> {
        let sign = if label == Label::True { 0.5 } else { -0.5 };
        direction.iter().map(|v| sign * config.signal_strength * v).collect()
    };
    let means = [class_mean(Label::Fake), class_mean(Label::True)];

    let n_fake = split_count(config.fake_fraction, config.n_news);
    let mut labels: Vec<Label> = (0..config.n_news)
        .map(|i| if i < n_fake { Label::Fake } else { Label::True })
        .collect();
    labels.shuffle(&mut rng);

    let n_fake_users = split_count(config.fake_fraction, config.n_users);
    let mut user_lean: Vec<Label> = (0..config.n_users)
        .map(|u| if u < n_fake_users { Label::Fake } else { Label::True })
        .collect();
    user_lean.shuffle(&mut rng);
    let pools: [Vec<usize>; 2] =
        [Label::Fake, Label::True].map(|lean| (0..config.n_users).filter(|&u| user_lean[u] == lean).collect());
    let profiles: Vec<Vec<f64>> = user_lean
        .iter()
        .map(|lean| means[lean.index()].iter().map(|m| m + noise.sample(&mut rng)).collect())
        .collect();

    let n_entities = (config.n_news / 5).max(8);
    let mut items = Vec::with_capacity(config.n_news);
    let mut trees = Vec::with_capacity(config.n_news);
    for (i, &label) in labels.iter().enumerate() {
        let feature: Vec<f32> = means[label.index()]
            .iter()
            .map(|m| (m + noise.sample(&mut rng)) as f32)
            .collect();

        let n_nodes = rng.random_range(MIN_TREE_NODES..=MAX_TREE_NODES);
        let root_ts = EPOCH_START + rng.random_range(0..PUBLISH_WINDOW_SECS);
        let mut nodes = vec![TreeNode {
            idx: 0,
            user: format!("source-{i:05}"),
            ts: root_ts,
            feature: feature.clone(),
        }];
        let mut edges = Vec::with_capacity(n_nodes - 1);
        for idx in 1..n_nodes {
            let lean = if rng.random_bool(config.user_fidelity) {
                label
            } else {
                label.flipped()
            };
            let user = *pools[lean.index()]
                .choose(&mut rng)
                .expect("both user pools are nonempty");
            let parent = rng.random_range(0..idx);
            let ts = nodes[parent].ts + rng.random_range(0..=MAX_REPLY_DELAY_SECS);
            let feature = profiles[user]
                .iter()
                .map(|p| (p + 0.5 * noise.sample(&mut rng)) as f32)
                .collect();
            nodes.push(TreeNode {
                idx,
                user: format!("user-{user:05}"),
                ts,
                feature,
            });
            edges.push((parent, idx));
        }

        let n_ent = rng.random_range(0..=MAX_ENTITIES_PER_NEWS);
        let entities: BTreeSet<String> = (0..n_ent)
            .map(|_| format!("Topic {:03}", rng.random_range(0..n_entities)))
            .collect();

        items.push(NewsItem {
            id: i,
            origin: i,
            feature,
            label: Some(label),
            entities,
        });
        trees.push(PropagationTree {
            news_id: i,
            nodes,
            edges,
        });
    }

    let dataset = Dataset {
        items,
        trees,
        splits: Splits::default(),
        feature_dim: dim,
    };
    make_splits(&dataset, (0.2, 0.1, 0.7), config.seed)
}
