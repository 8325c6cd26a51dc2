//! Dataset model: news items, propagation trees and train/val/test splits.

mod io;
mod splits;
mod synthetic;

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, read_matrix, write_dataset, write_matrix, DatasetPaths, FeatureMatrix};
pub use splits::{downsample_train_labels, make_splits};
pub use synthetic::{generate_synthetic, SyntheticConfig};

/// Binary veracity label. Serialised as `0` (fake) and `1` (true).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Fake,
    True,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Fake => 0,
            Label::True => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Label::Fake),
            1 => Some(Label::True),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Fake => Label::True,
            Label::True => Label::Fake,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewsItem {
    /// Position of the item in its dataset, `0..N`.
    pub id: usize,
    /// Identifier of the item in the dataset it was first loaded or generated
    /// in. Survives downsampling, which re-indexes `id`.
    pub origin: usize,
    pub feature: Vec<f32>,
    pub label: Option<Label>,
    /// Entity surface forms as annotated; normalised at hyperedge construction.
    pub entities: BTreeSet<String>,
}

/// One engagement (or the news root at `idx == 0`) inside a propagation tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub idx: usize,
    pub user: String,
    /// Seconds since the Unix epoch.
    pub ts: i64,
    pub feature: Vec<f32>,
}

/// Rooted propagation cascade of one news piece. Nodes are stored sorted by
/// `idx`; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationTree {
    pub news_id: usize,
    pub nodes: Vec<TreeNode>,
    /// Directed parent -> child pairs over node indices.
    pub edges: Vec<(usize, usize)>,
}

impl PropagationTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Checks the tree property and timestamp monotonicity.
    pub fn validate(&self, feature_dim: usize) -> Result<()> {
        let n = self.nodes.len();
        let tag = |msg: String| Error::Validation(format!("tree for news {}: {msg}", self.news_id));
        if n == 0 {
            return Err(tag("tree has no nodes".into()));
        }
        for (pos, node) in self.nodes.iter().enumerate() {
            if node.idx != pos {
                return Err(tag(format!(
                    "node indices must be 0..{n}, found {} at position {pos}",
                    node.idx
                )));
            }
            if node.feature.len() != feature_dim {
                return Err(tag(format!(
                    "node {} has feature length {}, expected {feature_dim}",
                    node.idx,
                    node.feature.len()
                )));
            }
        }
        if self.edges.len() + 1 != n {
            return Err(tag(format!("{} edges for {n} nodes", self.edges.len())));
        }
        let mut parent = vec![None; n];
        for &(p, c) in &self.edges {
            if p >= n || c >= n {
                return Err(tag(format!("edge ({p}, {c}) out of range")));
            }
            if c == 0 {
                return Err(tag("root has a parent".into()));
            }
            if parent[c].replace(p).is_some() {
                return Err(tag(format!("node {c} has more than one parent")));
            }
            if self.nodes[c].ts < self.nodes[p].ts {
                return Err(tag(format!("node {c} is timestamped before its parent {p}")));
            }
        }
        // Every node must hang off the root; rules out detached cycles.
        let children = self.children();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &c in &children[v] {
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(tag(format!("node {orphan} is not reachable from the root")));
        }
        Ok(())
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.nodes.len()];
        for &(p, c) in &self.edges {
            children[p].push(c);
        }
        children
    }

    /// Undirected neighbour lists, each sorted.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(p, c) in &self.edges {
            adj[p].push(c);
            adj[c].push(p);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Format(format!("unknown split `{other}`"))),
        }
    }
}

/// Sorted, pairwise disjoint index sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// Per-index split assignment for a dataset of `n` items.
    pub fn assignment(&self, n: usize) -> Vec<Option<Split>> {
        let mut out = vec![None; n];
        for split in [Split::Train, Split::Val, Split::Test] {
            for &i in self.get(split) {
                if i < n {
                    out[i] = Some(split);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub items: Vec<NewsItem>,
    /// `trees[i]` belongs to `items[i]`.
    pub trees: Vec<PropagationTree>,
    pub splits: Splits,
    pub feature_dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<Option<Label>> {
        self.items.iter().map(|item| item.label).collect()
    }

    /// Checks every type invariant of items, trees and splits.
    pub fn validate(&self) -> Result<()> {
        let n = self.items.len();
        for (pos, item) in self.items.iter().enumerate() {
            if item.id != pos {
                return Err(Error::Validation(format!("item at position {pos} has id {}", item.id)));
            }
            if item.feature.len() != self.feature_dim {
                return Err(Error::Validation(format!(
                    "item {pos} has feature length {}, expected {}",
                    item.feature.len(),
                    self.feature_dim
                )));
            }
        }
        if self.trees.len() != n {
            return Err(Error::Integrity(format!(
                "{} trees for {n} news items",
                self.trees.len()
            )));
        }
        for (pos, tree) in self.trees.iter().enumerate() {
            if tree.news_id != pos {
                return Err(Error::Integrity(format!(
                    "tree at position {pos} belongs to news {}",
                    tree.news_id
                )));
            }
            tree.validate(self.feature_dim)?;
        }
        let mut owner: Vec<Option<Split>> = vec![None; n];
        for split in [Split::Train, Split::Val, Split::Test] {
            for &i in self.splits.get(split) {
                if i >= n {
                    return Err(Error::Integrity(format!(
                        "{} split references unknown news {i}",
                        split.as_str()
                    )));
                }
                if let Some(prev) = owner[i].replace(split) {
                    return Err(Error::Validation(format!(
                        "news {i} appears in both {} and {} splits",
                        prev.as_str(),
                        split.as_str()
                    )));
                }
                if split != Split::Test && self.items[i].label.is_none() {
                    return Err(Error::Validation(format!("{} item {i} has no label", split.as_str())));
                }
            }
        }
        if let Some(i) = (0..n).find(|&i| self.items[i].label.is_some() && owner[i].is_none()) {
            return Err(Error::Validation(format!(
                "labeled news {i} is not assigned to any split"
            )));
        }
        Ok(())
    }

    /// Feature rows of all news items, row-major `N x F`.
    pub fn feature_matrix(&self) -> FeatureMatrix {
        let mut data = Vec::with_capacity(self.len() * self.feature_dim);
        for item in &self.items {
            data.extend_from_slice(&item.feature);
        }
        FeatureMatrix {
            rows: self.len(),
            cols: self.feature_dim,
            data,
        }
    }

    /// Copy of the dataset whose val/test labels are inverted. Used to show
    /// that training never reads held-out labels.
    pub fn with_flipped_heldout_labels(&self) -> Dataset {
        let mut out = self.clone();
        for &i in self.splits.val.iter().chain(&self.splits.test) {
            out.items[i].label = out.items[i].label.map(Label::flipped);
        }
        out
    }

    /// Keeps only the items at `keep` (ascending), re-indexing ids, trees and
    /// splits.
    pub(crate) fn retain_items(&self, keep: &[usize]) -> Dataset {
        let mut remap = vec![usize::MAX; self.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let items = keep
            .iter()
            .enumerate()
            .map(|(new, &old)| NewsItem {
                id: new,
                ..self.items[old].clone()
            })
            .collect();
        let trees = keep
            .iter()
            .enumerate()
            .map(|(new, &old)| PropagationTree {
                news_id: new,
                ..self.trees[old].clone()
            })
            .collect();
        let map_split = |ids: &[usize]| -> Vec<usize> {
            let mut out: Vec<usize> = ids.iter().map(|&i| remap[i]).filter(|&i| i != usize::MAX).collect();
            out.sort_unstable();
            out
        };
        Dataset {
            items,
            trees,
            splits: Splits {
                train: map_split(&self.splits.train),
                val: map_split(&self.splits.val),
                test: map_split(&self.splits.test),
            },
            feature_dim: self.feature_dim,
        }
    }
}
