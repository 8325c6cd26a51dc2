//! Propagation-tree encoder and skip-connection fusion.
//!
//! Each tree is encoded by two mean-aggregation layers over its undirected
//! edges; the root's final state summarises the cascade. The raw news feature
//! is mapped to the hidden width, concatenated with the root state, passed
//! through ReLU (and dropout while training) and projected to the initial
//! hypergraph node embedding.

use ndarray::{concatenate, s, Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, PropagationTree};
use crate::params::{glorot_matrix, Parameters};
use crate::scalar::Scalar;
use crate::sparse::{relu, relu_backward, sage_backward, sage_forward, Csr, SageCache};

/// Number of mean-aggregation layers in the tree encoder.
pub const TREE_LAYERS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SageWeights<T> {
    pub self_w: Array2<T>,
    pub nbr_w: Array2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeEncoderParams<T> {
    /// Maps the raw news feature (width F) to the hidden width.
    pub input_w: Array2<T>,
    pub input_b: Array1<T>,
    /// First layer is F -> d, the rest d -> d.
    pub sage: Vec<SageWeights<T>>,
    /// Projection `2d -> d` applied to the fused vector.
    pub proj_w: Array2<T>,
    pub proj_b: Array1<T>,
}

impl<T: Scalar> TreeEncoderParams<T> {
    pub fn init(rng: &mut ChaCha8Rng, feature_dim: usize, hidden: usize) -> Self {
        let input_w = glorot_matrix(rng, feature_dim, hidden);
        let sage = (0..TREE_LAYERS)
            .map(|l| {
                let fan_in = if l == 0 { feature_dim } else { hidden };
                SageWeights {
                    self_w: glorot_matrix(rng, fan_in, hidden),
                    nbr_w: glorot_matrix(rng, fan_in, hidden),
                }
            })
            .collect();
        let proj_w = glorot_matrix(rng, 2 * hidden, hidden);
        TreeEncoderParams {
            input_w,
            input_b: Array1::zeros(hidden),
            sage,
            proj_w,
            proj_b: Array1::zeros(hidden),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.input_w.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.input_w.ncols()
    }

    pub(crate) fn named(&self) -> Vec<(String, ArrayViewD<'_, T>)> {
        let mut out = vec![
            ("encoder.input.w".to_string(), self.input_w.view().into_dyn()),
            ("encoder.input.b".to_string(), self.input_b.view().into_dyn()),
        ];
        for (l, layer) in self.sage.iter().enumerate() {
            out.push((format!("encoder.sage{l}.self"), layer.self_w.view().into_dyn()));
            out.push((format!("encoder.sage{l}.nbr"), layer.nbr_w.view().into_dyn()));
        }
        out.push(("encoder.proj.w".to_string(), self.proj_w.view().into_dyn()));
        out.push(("encoder.proj.b".to_string(), self.proj_b.view().into_dyn()));
        out
    }

    pub(crate) fn named_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, T>)> {
        let mut out = vec![
            ("encoder.input.w".to_string(), self.input_w.view_mut().into_dyn()),
            ("encoder.input.b".to_string(), self.input_b.view_mut().into_dyn()),
        ];
        for (l, layer) in self.sage.iter_mut().enumerate() {
            out.push((format!("encoder.sage{l}.self"), layer.self_w.view_mut().into_dyn()));
            out.push((format!("encoder.sage{l}.nbr"), layer.nbr_w.view_mut().into_dyn()));
        }
        out.push(("encoder.proj.w".to_string(), self.proj_w.view_mut().into_dyn()));
        out.push(("encoder.proj.b".to_string(), self.proj_b.view_mut().into_dyn()));
        out
    }
}

impl<T: Scalar> Parameters<T> for TreeEncoderParams<T> {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, T>)> {
        self.named()
    }

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, T>)> {
        self.named_mut()
    }
}

/// A group of trees stacked into one block-diagonal graph.
#[derive(Debug, Clone)]
pub struct TreeBatch<T> {
    /// News index of each tree in the batch.
    pub news: Vec<usize>,
    /// Row of each tree's root in `features`.
    pub roots: Vec<usize>,
    pub features: Array2<T>,
    pub adj: Csr,
    /// `adj * features`, constant across epochs.
    pub aggregated: Array2<T>,
}

impl<T: Scalar> TreeBatch<T> {
    pub fn from_trees<'a>(feature_dim: usize, trees: impl IntoIterator<Item = &'a PropagationTree>) -> Self {
        let mut news = Vec::new();
        let mut roots = Vec::new();
        let mut rows = Vec::new();
        let mut blocks = Vec::new();
        let mut offset = 0;
        for tree in trees {
            news.push(tree.news_id);
            roots.push(offset);
            for node in &tree.nodes {
                rows.extend(node.feature.iter().map(|&v| T::of_f32(v)));
            }
            blocks.push(Csr::mean_of_neighbors(&tree.neighbors()));
            offset += tree.nodes.len();
        }
        let features = Array2::from_shape_vec((offset, feature_dim), rows).expect("tree features have width F");
        let adj = Csr::block_diag(&blocks.iter().collect::<Vec<_>>());
        let aggregated = adj.spmm(features.view());
        TreeBatch {
            news,
            roots,
            features,
            adj,
            aggregated,
        }
    }
}

/// Splits the dataset's trees into batches of `batch_size` in item order.
pub fn prepare_tree_batches<T: Scalar>(dataset: &Dataset, batch_size: usize) -> Vec<TreeBatch<T>> {
    let batch_size = batch_size.max(1);
    dataset
        .trees
        .par_chunks(batch_size)
        .map(|chunk| TreeBatch::from_trees(dataset.feature_dim, chunk))
        .collect()
}

/// Root states of all trees plus per-batch activations for backward.
#[derive(Debug, Clone)]
pub struct TreeEncoding<T> {
    pub roots: Array2<T>,
    caches: Vec<Vec<SageCache<T>>>,
}

fn encode_batch<T: Scalar>(params: &TreeEncoderParams<T>, batch: &TreeBatch<T>) -> (Array2<T>, Vec<SageCache<T>>) {
    let mut caches = Vec::with_capacity(params.sage.len());
    let mut state = batch.features.clone();
    for (l, layer) in params.sage.iter().enumerate() {
        let pre_aggregated = (l == 0).then(|| batch.aggregated.clone());
        let (out, cache) = sage_forward(&layer.self_w, &layer.nbr_w, &batch.adj, state, pre_aggregated);
        caches.push(cache);
        state = out;
    }
    (state, caches)
}

pub fn encode_batches<T: Scalar>(
    params: &TreeEncoderParams<T>,
    batches: &[TreeBatch<T>],
    n_news: usize,
) -> TreeEncoding<T> {
    let outputs: Vec<(Array2<T>, Vec<SageCache<T>>)> =
        batches.par_iter().map(|batch| encode_batch(params, batch)).collect();
    let mut roots = Array2::zeros((n_news, params.hidden_dim()));
    let mut caches = Vec::with_capacity(batches.len());
    for (batch, (state, cache)) in batches.iter().zip(outputs) {
        for (&news, &row) in batch.news.iter().zip(&batch.roots) {
            roots.row_mut(news).assign(&state.row(row));
        }
        caches.push(cache);
    }
    TreeEncoding { roots, caches }
}

/// Accumulates encoder weight gradients from the gradient w.r.t. root states.
pub fn encode_batches_backward<T: Scalar>(
    params: &TreeEncoderParams<T>,
    batches: &[TreeBatch<T>],
    encoding: &TreeEncoding<T>,
    d_roots: &Array2<T>,
    grads: &mut TreeEncoderParams<T>,
) {
    let per_batch: Vec<Vec<(Array2<T>, Array2<T>)>> = batches
        .par_iter()
        .zip(&encoding.caches)
        .map(|(batch, caches)| {
            let mut d_state = Array2::zeros((batch.features.nrows(), params.hidden_dim()));
            for (&news, &row) in batch.news.iter().zip(&batch.roots) {
                d_state.row_mut(row).assign(&d_roots.row(news));
            }
            let mut layer_grads = Vec::with_capacity(params.sage.len());
            for l in (0..params.sage.len()).rev() {
                let layer = &params.sage[l];
                let (d_self, d_nbr, d_in) =
                    sage_backward(&layer.self_w, &layer.nbr_w, &batch.adj, &caches[l], &d_state, l > 0);
                layer_grads.push((d_self, d_nbr));
                if let Some(d_in) = d_in {
                    d_state = d_in;
                }
            }
            layer_grads.reverse();
            layer_grads
        })
        .collect();
    // Fixed batch order keeps the reduction deterministic.
    for batch_grads in per_batch {
        for (g, (d_self, d_nbr)) in grads.sage.iter_mut().zip(batch_grads) {
            g.self_w += &d_self;
            g.nbr_w += &d_nbr;
        }
    }
}

/// Activations of the skip-connection fusion.
#[derive(Debug, Clone)]
pub struct FusionCache<T> {
    concat: Array2<T>,
    dropped: Array2<T>,
    mask: Option<Array2<T>>,
}

/// `v0 = proj(dropout(ReLU([x W_in + b_in, roots])))`. `mask` holds already
/// rescaled keep factors.
pub fn fuse<T: Scalar>(
    params: &TreeEncoderParams<T>,
    news_features: &Array2<T>,
    roots: &Array2<T>,
    mask: Option<Array2<T>>,
) -> (Array2<T>, FusionCache<T>) {
    let mapped = news_features.dot(&params.input_w) + &params.input_b;
    let concat = concatenate(Axis(1), &[mapped.view(), roots.view()]).expect("matching row counts");
    let mut dropped = relu(&concat);
    if let Some(mask) = &mask {
        dropped *= mask;
    }
    let v0 = dropped.dot(&params.proj_w) + &params.proj_b;
    (v0, FusionCache { concat, dropped, mask })
}

/// Accumulates fusion gradients and returns the gradient w.r.t. root states.
pub fn fuse_backward<T: Scalar>(
    params: &TreeEncoderParams<T>,
    news_features: &Array2<T>,
    cache: &FusionCache<T>,
    d_v0: &Array2<T>,
    grads: &mut TreeEncoderParams<T>,
) -> Array2<T> {
    grads.proj_w += &cache.dropped.t().dot(d_v0);
    grads.proj_b += &d_v0.sum_axis(Axis(0));
    let mut d_dropped = d_v0.dot(&params.proj_w.t());
    if let Some(mask) = &cache.mask {
        d_dropped *= mask;
    }
    let d_concat = relu_backward(&cache.concat, &d_dropped);
    let hidden = params.hidden_dim();
    let d_mapped = d_concat.slice(s![.., ..hidden]).to_owned();
    grads.input_w += &news_features.t().dot(&d_mapped);
    grads.input_b += &d_mapped.sum_axis(Axis(0));
    d_concat.slice(s![.., hidden..]).to_owned()
}

/// Root representation of a single tree.
pub fn encode_tree<T: Scalar>(params: &TreeEncoderParams<T>, tree: &PropagationTree) -> Array1<T> {
    let batch = TreeBatch::from_trees(params.feature_dim(), [tree]);
    let (state, _) = encode_batch(params, &batch);
    state.row(0).to_owned()
}

/// News features of the dataset as an `N x F` matrix in precision `T`.
pub fn news_feature_matrix<T: Scalar>(dataset: &Dataset) -> Array2<T> {
    let m = dataset.feature_matrix();
    Array2::from_shape_vec((m.rows, m.cols), m.data.into_iter().map(T::of_f32).collect())
        .expect("feature matrix is rectangular")
}

/// Initial hypergraph node embeddings `v0` (`N x d`), without dropout.
pub fn initial_node_embeddings<T: Scalar>(
    params: &TreeEncoderParams<T>,
    dataset: &Dataset,
    batch_size: usize,
) -> Array2<T> {
    let batches = prepare_tree_batches(dataset, batch_size);
    let encoding = encode_batches(params, &batches, dataset.len());
    fuse(params, &news_feature_matrix(dataset), &encoding.roots, None).0
}
