//! Full model: tree encoder, stacked attention layers and the head.

use ndarray::{Array2, ArrayViewD, ArrayViewMutD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{
    layer_backward, layer_forward, to_f64_lists, AttentionLayerParams, AttentionSnapshot, HeadParams, LayerAttention,
    LayerPass,
};
use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::params::Parameters;
use crate::scalar::Scalar;
use crate::tree_encoder::{
    encode_batches, encode_batches_backward, fuse, fuse_backward, news_feature_matrix, prepare_tree_batches,
    FusionCache, TreeBatch, TreeEncoderParams, TreeEncoding,
};

/// Number of attention layers.
pub const ATTENTION_LAYERS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
}

impl ModelShape {
    pub fn new(feature_dim: usize, hidden_dim: usize) -> Self {
        ModelShape {
            feature_dim,
            hidden_dim,
            layers: ATTENTION_LAYERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub encoder: TreeEncoderParams<T>,
    pub layers: Vec<AttentionLayerParams<T>>,
    pub head: HeadParams<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Glorot-uniform weights and zero biases from a fixed seed. Values are
    /// drawn in `f64` and cast, so both precisions start from the same point.
    pub fn init(shape: ModelShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = TreeEncoderParams::init(&mut rng, shape.feature_dim, shape.hidden_dim);
        let layers = (0..shape.layers)
            .map(|_| AttentionLayerParams::init(&mut rng, shape.hidden_dim))
            .collect();
        let head = HeadParams::init(&mut rng, shape.hidden_dim);
        ModelParams { encoder, layers, head }
    }

    pub fn zeros(shape: ModelShape) -> Self {
        Self::init(shape, 0).zeros_like()
    }

    /// Replaces every bias with a uniform draw from `+-scale`. With zero
    /// biases, a node whose fused activations are all clipped gets `v0 = 0`
    /// exactly, which sits on the LeakyReLU kink; gradient checks use this to
    /// evaluate at a differentiable point.
    pub fn randomize_biases(&mut self, seed: u64, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for b in [&mut self.encoder.input_b, &mut self.encoder.proj_b, &mut self.head.b] {
            b.mapv_inplace(|_| T::of(rng.random_range(-scale..scale)));
        }
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            feature_dim: self.encoder.feature_dim(),
            hidden_dim: self.encoder.hidden_dim(),
            layers: self.layers.len(),
        }
    }
}

impl<T: Scalar> Parameters<T> for ModelParams<T> {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, T>)> {
        let mut out = self.encoder.named();
        for (l, layer) in self.layers.iter().enumerate() {
            out.extend(layer.named(&format!("attn{l}")));
        }
        out.push(("head.w3".to_string(), self.head.w3.view().into_dyn()));
        out.push(("head.b".to_string(), self.head.b.view().into_dyn()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, T>)> {
        let mut out = self.encoder.named_mut();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            out.extend(layer.named_mut(&format!("attn{l}")));
        }
        out.push(("head.w3".to_string(), self.head.w3.view_mut().into_dyn()));
        out.push(("head.b".to_string(), self.head.b.view_mut().into_dyn()));
        out
    }
}

/// Dataset tensors that stay fixed across epochs.
#[derive(Debug, Clone)]
pub struct PreparedData<T> {
    pub news_features: Array2<T>,
    pub batches: Vec<TreeBatch<T>>,
    pub labels: Vec<Option<Label>>,
    pub n_news: usize,
}

impl<T: Scalar> PreparedData<T> {
    pub fn new(dataset: &Dataset, batch_size: usize) -> Self {
        PreparedData {
            news_features: news_feature_matrix(dataset),
            batches: prepare_tree_batches(dataset, batch_size),
            labels: dataset.labels(),
            n_news: dataset.len(),
        }
    }
}

/// Dropout configuration for a training-mode forward pass.
#[derive(Debug)]
pub struct DropoutPlan<'a> {
    pub rate: f64,
    pub rng: &'a mut ChaCha8Rng,
}

/// Keep mask with entries `0` or `1 / (1 - rate)`.
pub fn dropout_mask<T: Scalar>(rng: &mut ChaCha8Rng, shape: (usize, usize), rate: f64) -> Array2<T> {
    let keep = T::of(1.0 / (1.0 - rate));
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < rate { T::zero() } else { keep })
}

/// Everything a backward pass needs from the forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    pub logits: Array2<T>,
    pub snapshot: AttentionSnapshot,
    /// Final-layer hyperedge states `e^L`.
    pub hyperedge_states: Array2<T>,
    encoding: TreeEncoding<T>,
    fusion: FusionCache<T>,
    layer_inputs: Vec<Array2<T>>,
    layer_masks: Vec<Option<Array2<T>>>,
    passes: Vec<LayerPass<T>>,
    final_states: Array2<T>,
}

pub fn forward<T: Scalar>(
    params: &ModelParams<T>,
    data: &PreparedData<T>,
    h: &Hypergraph,
    mut dropout: Option<DropoutPlan<'_>>,
) -> Result<ForwardPass<T>> {
    if h.n_nodes() != data.n_news {
        return Err(Error::Validation(format!(
            "hypergraph has {} nodes but the dataset has {} news items",
            h.n_nodes(),
            data.n_news
        )));
    }
    let shape = params.shape();
    if data.news_features.ncols() != shape.feature_dim {
        return Err(Error::Shape {
            name: "news features".into(),
            expected: vec![data.n_news, shape.feature_dim],
            found: data.news_features.shape().to_vec(),
        });
    }
    let d = shape.hidden_dim;
    let encoding = encode_batches(&params.encoder, &data.batches, data.n_news);
    let fusion_mask = dropout
        .as_mut()
        .filter(|plan| plan.rate > 0.0)
        .map(|plan| dropout_mask(plan.rng, (data.n_news, 2 * d), plan.rate));
    let (v0, fusion) = fuse(&params.encoder, &data.news_features, &encoding.roots, fusion_mask);

    let mut layer_inputs = Vec::with_capacity(params.layers.len());
    let mut layer_masks = Vec::with_capacity(params.layers.len());
    let mut passes: Vec<LayerPass<T>> = Vec::with_capacity(params.layers.len());
    let mut state = v0;
    for (l, layer) in params.layers.iter().enumerate() {
        // Dropout between attention layers only.
        let mask = if l > 0 {
            dropout
                .as_mut()
                .filter(|plan| plan.rate > 0.0)
                .map(|plan| dropout_mask(plan.rng, (data.n_news, d), plan.rate))
        } else {
            None
        };
        if let Some(mask) = &mask {
            state *= mask;
        }
        let pass = layer_forward(layer, &state, h);
        layer_inputs.push(state);
        layer_masks.push(mask);
        state = pass.nodes.states.clone();
        passes.push(pass);
    }
    let logits = params.head.logits(&state);
    let snapshot = AttentionSnapshot {
        layers: passes
            .iter()
            .map(|p| LayerAttention {
                alpha: to_f64_lists(&p.edges.alpha),
                beta: to_f64_lists(&p.nodes.beta),
            })
            .collect(),
    };
    let hyperedge_states = passes
        .last()
        .map(|p| p.edges.states.clone())
        .unwrap_or_else(|| Array2::zeros((h.n_hyperedges(), d)));
    Ok(ForwardPass {
        logits,
        snapshot,
        hyperedge_states,
        encoding,
        fusion,
        layer_inputs,
        layer_masks,
        passes,
        final_states: state,
    })
}

/// Reverse-mode gradients of every parameter given `d loss / d logits`.
pub fn backward<T: Scalar>(
    params: &ModelParams<T>,
    data: &PreparedData<T>,
    h: &Hypergraph,
    pass: &ForwardPass<T>,
    d_logits: &Array2<T>,
) -> ModelParams<T> {
    let mut grads = params.zeros_like();
    grads.head.w3 += &pass.final_states.t().dot(d_logits);
    grads.head.b += &d_logits.sum_axis(ndarray::Axis(0));
    let mut d_state = d_logits.dot(&params.head.w3.t());
    for l in (0..params.layers.len()).rev() {
        let mut d_in = layer_backward(
            &params.layers[l],
            &pass.layer_inputs[l],
            &pass.passes[l],
            &d_state,
            h,
            &mut grads.layers[l],
        );
        if let Some(mask) = &pass.layer_masks[l] {
            d_in *= mask;
        }
        d_state = d_in;
    }
    let d_roots = fuse_backward(
        &params.encoder,
        &data.news_features,
        &pass.fusion,
        &d_state,
        &mut grads.encoder,
    );
    encode_batches_backward(
        &params.encoder,
        &data.batches,
        &pass.encoding,
        &d_roots,
        &mut grads.encoder,
    );
    grads
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_names_are_unique_and_stable() {
        let p = ModelParams::<f64>::init(ModelShape::new(4, 3), 1);
        let names: Vec<String> = p.tensors().into_iter().map(|(n, _)| n).collect();
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), names.len());
        assert_eq!(names.first().unwrap(), "encoder.input.w");
        assert_eq!(names.last().unwrap(), "head.b");
        assert_eq!(names.len(), 8 + 2 * 4 + 2);
    }

    #[test]
    fn init_is_seeded_and_precision_consistent() {
        let shape = ModelShape::new(5, 4);
        let a = ModelParams::<f64>::init(shape, 9);
        let b = ModelParams::<f64>::init(shape, 9);
        let c = ModelParams::<f32>::init(shape, 9);
        assert!(a.bitwise_eq(&b));
        assert!((a.layers[1].w2[[2, 3]] as f32 - c.layers[1].w2[[2, 3]]).abs() < 1e-7);
        assert!(!a.bitwise_eq(&ModelParams::init(shape, 10)));
    }
}
