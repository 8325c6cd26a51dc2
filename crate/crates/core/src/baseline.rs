//! Clique-expansion baseline: a two-layer mean-aggregation graph network over
//! raw news features on the clique-expanded hypergraph, with a linear head.

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::Result;
use crate::hypergraph::{clique_expansion, Hypergraph, PlainGraph};
use crate::model::{dropout_mask, DropoutPlan};
use crate::params::{glorot_matrix, Parameters};
use crate::scalar::Scalar;
use crate::sparse::{sage_backward, sage_forward, Csr, SageCache};
use crate::train::{fit, TrainConfig, TrainReport};
use crate::tree_encoder::{news_feature_matrix, SageWeights, TREE_LAYERS};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams<T> {
    pub sage: Vec<SageWeights<T>>,
    pub w3: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> BaselineParams<T> {
    pub fn init(feature_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sage = (0..TREE_LAYERS)
            .map(|l| {
                let fan_in = if l == 0 { feature_dim } else { hidden };
                SageWeights {
                    self_w: glorot_matrix(&mut rng, fan_in, hidden),
                    nbr_w: glorot_matrix(&mut rng, fan_in, hidden),
                }
            })
            .collect();
        BaselineParams {
            sage,
            w3: glorot_matrix(&mut rng, hidden, 2),
            b: Array1::zeros(2),
        }
    }
}

impl<T: Scalar> Parameters<T> for BaselineParams<T> {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, T>)> {
        let mut out = Vec::new();
        for (l, layer) in self.sage.iter().enumerate() {
            out.push((format!("sage{l}.self"), layer.self_w.view().into_dyn()));
            out.push((format!("sage{l}.nbr"), layer.nbr_w.view().into_dyn()));
        }
        out.push(("head.w3".to_string(), self.w3.view().into_dyn()));
        out.push(("head.b".to_string(), self.b.view().into_dyn()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, T>)> {
        let mut out = Vec::new();
        for (l, layer) in self.sage.iter_mut().enumerate() {
            out.push((format!("sage{l}.self"), layer.self_w.view_mut().into_dyn()));
            out.push((format!("sage{l}.nbr"), layer.nbr_w.view_mut().into_dyn()));
        }
        out.push(("head.w3".to_string(), self.w3.view_mut().into_dyn()));
        out.push(("head.b".to_string(), self.b.view_mut().into_dyn()));
        out
    }
}

/// Fixed inputs of the baseline: features and the neighbour-mean operator.
#[derive(Debug, Clone)]
pub struct BaselineData<T> {
    pub features: Array2<T>,
    pub adj: Csr,
    aggregated: Array2<T>,
}

impl<T: Scalar> BaselineData<T> {
    pub fn new(features: Array2<T>, graph: &PlainGraph) -> Self {
        let adj = graph.mean_adjacency();
        let aggregated = adj.spmm(features.view());
        BaselineData {
            features,
            adj,
            aggregated,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselinePass<T> {
    pub logits: Array2<T>,
    caches: Vec<SageCache<T>>,
    masks: Vec<Option<Array2<T>>>,
    final_states: Array2<T>,
}

/// `masks[l]`, when present, is applied to the input of layer `l > 0`.
pub fn baseline_forward<T: Scalar>(
    params: &BaselineParams<T>,
    data: &BaselineData<T>,
    mut masks: Vec<Option<Array2<T>>>,
) -> BaselinePass<T> {
    masks.resize(params.sage.len(), None);
    let mut state = data.features.clone();
    let mut caches = Vec::with_capacity(params.sage.len());
    for (l, layer) in params.sage.iter().enumerate() {
        let pre_aggregated = if l == 0 {
            Some(data.aggregated.clone())
        } else {
            if let Some(mask) = &masks[l] {
                state *= mask;
            }
            None
        };
        let (out, cache) = sage_forward(&layer.self_w, &layer.nbr_w, &data.adj, state, pre_aggregated);
        caches.push(cache);
        state = out;
    }
    let logits = state.dot(&params.w3) + &params.b;
    BaselinePass {
        logits,
        caches,
        masks,
        final_states: state,
    }
}

pub fn baseline_backward<T: Scalar>(
    params: &BaselineParams<T>,
    data: &BaselineData<T>,
    pass: &BaselinePass<T>,
    d_logits: &Array2<T>,
) -> BaselineParams<T> {
    let mut grads = params.zeros_like();
    grads.w3 += &pass.final_states.t().dot(d_logits);
    grads.b += &d_logits.sum_axis(Axis(0));
    let mut d_state = d_logits.dot(&params.w3.t());
    for l in (0..params.sage.len()).rev() {
        let layer = &params.sage[l];
        let (d_self, d_nbr, d_in) =
            sage_backward(&layer.self_w, &layer.nbr_w, &data.adj, &pass.caches[l], &d_state, l > 0);
        grads.sage[l].self_w += &d_self;
        grads.sage[l].nbr_w += &d_nbr;
        if let Some(mut d_in) = d_in {
            if let Some(mask) = &pass.masks[l] {
                d_in *= mask;
            }
            d_state = d_in;
        }
    }
    grads
}

/// The baseline as a trainable task.
#[derive(Debug, Clone)]
pub struct BaselineTask<T> {
    pub data: BaselineData<T>,
    pub hidden: usize,
}

impl<T: Scalar> crate::train::Task<T> for BaselineTask<T> {
    type Params = BaselineParams<T>;
    type Pass = BaselinePass<T>;

    fn forward(&self, params: &BaselineParams<T>, dropout: Option<DropoutPlan<'_>>) -> Result<BaselinePass<T>> {
        let n = self.data.features.nrows();
        let masks = match dropout {
            Some(plan) if plan.rate > 0.0 => (0..params.sage.len())
                .map(|l| (l > 0).then(|| dropout_mask(plan.rng, (n, self.hidden), plan.rate)))
                .collect(),
            _ => Vec::new(),
        };
        Ok(baseline_forward(params, &self.data, masks))
    }

    fn logits<'p>(&self, pass: &'p BaselinePass<T>) -> &'p Array2<T> {
        &pass.logits
    }

    fn backward(&self, params: &BaselineParams<T>, pass: &BaselinePass<T>, d_logits: &Array2<T>) -> BaselineParams<T> {
        baseline_backward(params, &self.data, pass, d_logits)
    }
}

/// Trains the baseline on raw news features over the clique expansion of
/// `graph`.
pub fn train_baseline<T: Scalar>(
    config: &TrainConfig,
    dataset: &Dataset,
    graph: &Hypergraph,
) -> Result<(BaselineParams<T>, TrainReport)> {
    config.validate()?;
    let task = BaselineTask {
        data: BaselineData::new(news_feature_matrix(dataset), &clique_expansion(graph)),
        hidden: config.hidden_dim,
    };
    let init = BaselineParams::init(dataset.feature_dim, config.hidden_dim, config.seed);
    fit(&task, init, &dataset.labels(), &dataset.splits, config, |_, _| {})
}
