//! Dual-level hypergraph attention.
//!
//! One layer alternates two aggregations:
//!
//! ```text
//! node -> hyperedge:  h_k  = LeakyReLU(W1 v_k)
//!                     a_jk = softmax_{k in e_j}(a1 . h_k)
//!                     e_j  = ReLU(sum_k a_jk W1 v_k)
//!
//! hyperedge -> node:  r_ij = LeakyReLU([W2 e_j ; W1 v_i])
//!                     b_ij = softmax_{j in E_i}(a2 . r_ij)
//!                     v_i' = ReLU(sum_j b_ij W2 e_j)
//! ```
//!
//! Vectors are rows, so `W x` is written `x.dot(W)` in code. A node with no
//! incident hyperedge gets a zero state.

use std::fmt::Write as _;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayViewD, ArrayViewMutD, Axis};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::hypergraph::Hypergraph;
use crate::params::{glorot_matrix, glorot_vector};
use crate::scalar::Scalar;
use crate::sparse::{relu, relu_backward};

pub const LEAKY_SLOPE: f64 = 0.01;

pub(crate) fn leaky<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        x
    } else {
        x * T::of(LEAKY_SLOPE)
    }
}

/// Derivative of LeakyReLU; 1 at the origin.
pub(crate) fn leaky_grad<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        T::of(LEAKY_SLOPE)
    }
}

/// Max-shifted softmax.
pub fn softmax<T: Scalar>(scores: &[T]) -> Vec<T> {
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Gradient of the scores given the gradient of softmax outputs.
fn softmax_backward<T: Scalar>(probs: &[T], d_probs: &[T]) -> Vec<T> {
    let inner: T = probs.iter().zip(d_probs).map(|(&p, &g)| p * g).sum();
    probs.iter().zip(d_probs).map(|(&p, &g)| p * (g - inner)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionLayerParams<T> {
    /// `d x d`, node transform.
    pub w1: Array2<T>,
    /// `d x d`, hyperedge transform.
    pub w2: Array2<T>,
    /// Node-level context vector, length `d`.
    pub a1: Array1<T>,
    /// Hyperedge-level context vector, length `2d`.
    pub a2: Array1<T>,
}

impl<T: Scalar> AttentionLayerParams<T> {
    pub fn init(rng: &mut ChaCha8Rng, d: usize) -> Self {
        AttentionLayerParams {
            w1: glorot_matrix(rng, d, d),
            w2: glorot_matrix(rng, d, d),
            a1: glorot_vector(rng, d),
            a2: glorot_vector(rng, 2 * d),
        }
    }

    pub fn dim(&self) -> usize {
        self.w1.nrows()
    }

    pub(crate) fn named(&self, prefix: &str) -> Vec<(String, ArrayViewD<'_, T>)> {
        vec![
            (format!("{prefix}.w1"), self.w1.view().into_dyn()),
            (format!("{prefix}.w2"), self.w2.view().into_dyn()),
            (format!("{prefix}.a1"), self.a1.view().into_dyn()),
            (format!("{prefix}.a2"), self.a2.view().into_dyn()),
        ]
    }

    pub(crate) fn named_mut(&mut self, prefix: &str) -> Vec<(String, ArrayViewMutD<'_, T>)> {
        vec![
            (format!("{prefix}.w1"), self.w1.view_mut().into_dyn()),
            (format!("{prefix}.w2"), self.w2.view_mut().into_dyn()),
            (format!("{prefix}.a1"), self.a1.view_mut().into_dyn()),
            (format!("{prefix}.a2"), self.a2.view_mut().into_dyn()),
        ]
    }
}

/// Classification head: `logits = v W3 + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams<T> {
    /// `d x 2`.
    pub w3: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> HeadParams<T> {
    pub fn init(rng: &mut ChaCha8Rng, d: usize) -> Self {
        HeadParams {
            w3: glorot_matrix(rng, d, 2),
            b: Array1::zeros(2),
        }
    }

    pub fn logits(&self, states: &Array2<T>) -> Array2<T> {
        states.dot(&self.w3) + &self.b
    }
}

/// Output of the node -> hyperedge aggregation.
#[derive(Debug, Clone)]
pub struct HyperedgeStep<T> {
    /// `M x d` hyperedge states.
    pub states: Array2<T>,
    /// `alpha[j][p]` weights member `h.members(j)[p]`.
    pub alpha: Vec<Vec<T>>,
    /// `v W1`, shared with the node step.
    pub(crate) z: Array2<T>,
    pub(crate) pre: Array2<T>,
}

pub fn hyperedge_step<T: Scalar>(
    params: &AttentionLayerParams<T>,
    node_states: &Array2<T>,
    h: &Hypergraph,
) -> HyperedgeStep<T> {
    let d = params.dim();
    let z = node_states.dot(&params.w1);
    let scores: Array1<T> = z.mapv(leaky).dot(&params.a1);
    let per_edge: Vec<(Vec<T>, Array1<T>)> = (0..h.n_hyperedges())
        .into_par_iter()
        .map(|j| {
            let members = h.members(j);
            let alpha = softmax(&members.iter().map(|&k| scores[k]).collect::<Vec<_>>());
            let mut acc = Array1::zeros(d);
            for (&a, &k) in alpha.iter().zip(members) {
                acc.scaled_add(a, &z.row(k));
            }
            (alpha, acc)
        })
        .collect();
    let mut pre = Array2::zeros((h.n_hyperedges(), d));
    let mut alpha = Vec::with_capacity(per_edge.len());
    for (j, (a, acc)) in per_edge.into_iter().enumerate() {
        pre.row_mut(j).assign(&acc);
        alpha.push(a);
    }
    HyperedgeStep {
        states: relu(&pre),
        alpha,
        z,
        pre,
    }
}

/// Output of the hyperedge -> node aggregation.
#[derive(Debug, Clone)]
pub struct NodeStep<T> {
    /// `N x d` node states.
    pub states: Array2<T>,
    /// `beta[i][p]` weights hyperedge `h.incident(i)[p]`.
    pub beta: Vec<Vec<T>>,
    /// `e W2`.
    pub(crate) y: Array2<T>,
    pub(crate) pre: Array2<T>,
}

fn split_a2<T: Scalar>(a2: &Array1<T>) -> (ArrayView1<'_, T>, ArrayView1<'_, T>) {
    let d = a2.len() / 2;
    (a2.slice(s![..d]), a2.slice(s![d..]))
}

pub fn node_step<T: Scalar>(
    params: &AttentionLayerParams<T>,
    edge_states: &Array2<T>,
    prev_node_states: &Array2<T>,
    h: &Hypergraph,
) -> NodeStep<T> {
    let z = prev_node_states.dot(&params.w1);
    node_step_with_z(params, edge_states, &z, h)
}

fn node_step_with_z<T: Scalar>(
    params: &AttentionLayerParams<T>,
    edge_states: &Array2<T>,
    _z: &Array2<T>,
    h: &Hypergraph,
) -> NodeStep<T> {
    let d = params.dim();
    let y = edge_states.dot(&params.w2);
    let (a2_edge, _) = split_a2(&params.a2);
    // a2 . LeakyReLU([y_j ; z_i]) splits into an edge part and a node part.
    // The node part is the same for every hyperedge incident to node i, so
    // the softmax cancels it and it is left out.
    let edge_scores: Array1<T> = y.mapv(leaky).dot(&a2_edge);
    let per_node: Vec<(Vec<T>, Array1<T>)> = (0..h.n_nodes())
        .into_par_iter()
        .map(|i| {
            let incident = h.incident(i);
            let beta = softmax(&incident.iter().map(|&j| edge_scores[j]).collect::<Vec<_>>());
            let mut acc = Array1::zeros(d);
            for (&b, &j) in beta.iter().zip(incident) {
                acc.scaled_add(b, &y.row(j));
            }
            (beta, acc)
        })
        .collect();
    let mut pre = Array2::zeros((h.n_nodes(), d));
    let mut beta = Vec::with_capacity(per_node.len());
    for (i, (b, acc)) in per_node.into_iter().enumerate() {
        pre.row_mut(i).assign(&acc);
        beta.push(b);
    }
    NodeStep {
        states: relu(&pre),
        beta,
        y,
        pre,
    }
}

/// Both aggregations of one layer.
#[derive(Debug, Clone)]
pub struct LayerPass<T> {
    pub edges: HyperedgeStep<T>,
    pub nodes: NodeStep<T>,
}

pub fn layer_forward<T: Scalar>(params: &AttentionLayerParams<T>, input: &Array2<T>, h: &Hypergraph) -> LayerPass<T> {
    let edges = hyperedge_step(params, input, h);
    let nodes = node_step_with_z(params, &edges.states, &edges.z, h);
    LayerPass { edges, nodes }
}

/// Accumulates this layer's parameter gradients into `grads` and returns the
/// gradient w.r.t. the layer input.
pub fn layer_backward<T: Scalar>(
    params: &AttentionLayerParams<T>,
    input: &Array2<T>,
    pass: &LayerPass<T>,
    d_out: &Array2<T>,
    h: &Hypergraph,
    grads: &mut AttentionLayerParams<T>,
) -> Array2<T> {
    let d = params.dim();
    let z = &pass.edges.z;
    let y = &pass.nodes.y;
    let (a2_edge, _) = split_a2(&params.a2);

    // Hyperedge -> node aggregation.
    let d_pre_nodes = relu_backward(&pass.nodes.pre, d_out);
    let mut d_y = Array2::<T>::zeros(y.raw_dim());
    let mut d_edge_scores = Array1::<T>::zeros(h.n_hyperedges());
    for i in 0..h.n_nodes() {
        let incident = h.incident(i);
        if incident.is_empty() {
            continue;
        }
        let beta = &pass.nodes.beta[i];
        let g = d_pre_nodes.row(i);
        let d_beta: Vec<T> = incident.iter().map(|&j| g.dot(&y.row(j))).collect();
        let d_scores = softmax_backward(beta, &d_beta);
        for ((&j, &b), &ds) in incident.iter().zip(beta).zip(&d_scores) {
            d_y.row_mut(j).scaled_add(b, &g);
            d_edge_scores[j] += ds;
        }
    }
    let leaky_y = y.mapv(leaky);
    let leaky_z = z.mapv(leaky);
    {
        let mut ga2_edge = grads.a2.slice_mut(s![..d]);
        ga2_edge += &leaky_y.t().dot(&d_edge_scores);
    }
    let mut d_leaky_y = outer(&d_edge_scores, &a2_edge);
    d_leaky_y.zip_mut_with(y, |g, &v| *g *= leaky_grad(v));
    d_y += &d_leaky_y;
    let mut d_z = Array2::<T>::zeros(z.raw_dim());

    grads.w2 += &pass.edges.states.t().dot(&d_y);
    let d_edge_states = d_y.dot(&params.w2.t());

    // Node -> hyperedge aggregation.
    let d_pre_edges = relu_backward(&pass.edges.pre, &d_edge_states);
    let mut d_node_level_scores = Array1::<T>::zeros(h.n_nodes());
    for j in 0..h.n_hyperedges() {
        let members = h.members(j);
        let alpha = &pass.edges.alpha[j];
        let g = d_pre_edges.row(j);
        let d_alpha: Vec<T> = members.iter().map(|&k| g.dot(&z.row(k))).collect();
        let d_scores = softmax_backward(alpha, &d_alpha);
        for ((&k, &a), &ds) in members.iter().zip(alpha).zip(&d_scores) {
            d_z.row_mut(k).scaled_add(a, &g);
            d_node_level_scores[k] += ds;
        }
    }
    grads.a1 += &leaky_z.t().dot(&d_node_level_scores);
    let mut d_leaky_h = outer(&d_node_level_scores, &params.a1.view());
    d_leaky_h.zip_mut_with(z, |g, &v| *g *= leaky_grad(v));
    d_z += &d_leaky_h;

    grads.w1 += &input.t().dot(&d_z);
    d_z.dot(&params.w1.t())
}

fn outer<T: Scalar>(col: &Array1<T>, row: &ArrayView1<'_, T>) -> Array2<T> {
    let c = col.view().insert_axis(Axis(1));
    let r = row.view().insert_axis(Axis(0));
    c.dot(&r)
}

/// Row-wise softmax of `N x 2` logits and argmax labels; ties go to label 0.
pub fn predict<T: Scalar>(logits: &Array2<T>) -> (Vec<usize>, Array2<f64>) {
    let mut probs = Array2::zeros(logits.raw_dim());
    let mut labels = Vec::with_capacity(logits.nrows());
    for (i, row) in logits.axis_iter(Axis(0)).enumerate() {
        let scores: Vec<f64> = row.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
        let p = softmax(&scores);
        let mut best = 0;
        for (c, &pc) in p.iter().enumerate() {
            if pc > p[best] {
                best = c;
            }
        }
        labels.push(best);
        probs.row_mut(i).assign(&Array1::from(p));
    }
    (labels, probs)
}

/// Attention coefficients of one layer, aligned with the hypergraph's member
/// and incident lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerAttention {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttentionSnapshot {
    pub layers: Vec<LayerAttention>,
}

impl AttentionSnapshot {
    pub fn final_layer(&self) -> Option<&LayerAttention> {
        self.layers.last()
    }

    /// `layer,level,i,j,coefficient`: level `node` rows are `alpha` with
    /// `i` = hyperedge and `j` = member node; level `hyperedge` rows are
    /// `beta` with `i` = node and `j` = incident hyperedge. Layers count
    /// from 1.
    pub fn to_csv(&self, h: &Hypergraph) -> String {
        let mut out = String::from("layer,level,i,j,coefficient\n");
        for (l, layer) in self.layers.iter().enumerate() {
            for (j, alpha) in layer.alpha.iter().enumerate() {
                for (&k, a) in h.members(j).iter().zip(alpha) {
                    writeln!(out, "{},node,{j},{k},{a}", l + 1).unwrap();
                }
            }
            for (i, beta) in layer.beta.iter().enumerate() {
                for (&j, b) in h.incident(i).iter().zip(beta) {
                    writeln!(out, "{},hyperedge,{i},{j},{b}", l + 1).unwrap();
                }
            }
        }
        out
    }
}

pub(crate) fn to_f64_lists<T: Scalar>(lists: &[Vec<T>]) -> Vec<Vec<f64>> {
    lists
        .iter()
        .map(|l| l.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{Hyperedge, HyperedgeKind};
    use ndarray::array;

    fn hg(n: usize, edges: &[&[usize]]) -> Hypergraph {
        Hypergraph::new(
            n,
            edges
                .iter()
                .map(|m| Hyperedge {
                    id: 0,
                    kind: HyperedgeKind::User,
                    key: String::new(),
                    members: m.to_vec(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn layer_2x2() -> AttentionLayerParams<f64> {
        AttentionLayerParams {
            w1: array![[1.0, 0.0], [0.0, 2.0]],
            w2: array![[0.0, 1.0], [1.0, 0.0]],
            a1: array![1.0, -1.0],
            a2: array![0.5, 1.0, 2.0, -3.0],
        }
    }

    #[test]
    fn single_member_gets_full_weight() {
        let step = hyperedge_step(&layer_2x2(), &array![[0.3, -1.0]], &hg(1, &[&[0]]));
        assert_eq!(step.alpha, vec![vec![1.0]]);
    }

    #[test]
    fn identical_members_split_evenly() {
        let step = hyperedge_step(&layer_2x2(), &array![[0.3, 1.0], [0.3, 1.0]], &hg(2, &[&[0, 1]]));
        assert_eq!(step.alpha, vec![vec![0.5, 0.5]]);
    }

    #[test]
    fn three_member_hyperedge_by_hand() {
        // z = v W1: (1,1) -> (1,2); (2,0) -> (2,0); (-1,1) -> (-1,2)
        // h = LeakyReLU(z): (1,2), (2,0), (-0.01,2)
        // scores a1.h: -1, 2, -2.01
        let v = array![[1.0, 1.0], [2.0, 0.0], [-1.0, 1.0]];
        let step = hyperedge_step(&layer_2x2(), &v, &hg(3, &[&[0, 1, 2]]));
        let e = [(-1.0f64).exp(), 2.0f64.exp(), (-2.01f64).exp()];
        let total: f64 = e.iter().sum();
        let alpha: Vec<f64> = e.iter().map(|x| x / total).collect();
        for (got, want) in step.alpha[0].iter().zip(&alpha) {
            assert!((got - want).abs() < 1e-15);
        }
        let pre = [
            alpha[0] * 1.0 + alpha[1] * 2.0 + -alpha[2],
            alpha[0] * 2.0 + alpha[1] * 0.0 + alpha[2] * 2.0,
        ];
        assert!((step.states[[0, 0]] - pre[0].max(0.0)).abs() < 1e-12);
        assert!((step.states[[0, 1]] - pre[1].max(0.0)).abs() < 1e-12);
    }

    #[test]
    fn node_with_one_hyperedge_gets_full_weight() {
        let p = layer_2x2();
        let h = hg(2, &[&[0, 1]]);
        let step = node_step(&p, &array![[0.5, 0.2]], &array![[1.0, 0.0], [0.0, 1.0]], &h);
        assert_eq!(step.beta, vec![vec![1.0], vec![1.0]]);
    }

    #[test]
    fn identical_hyperedges_split_evenly() {
        let p = layer_2x2();
        let h = hg(2, &[&[0, 1], &[0, 1]]);
        let step = node_step(&p, &array![[0.5, 0.2], [0.5, 0.2]], &array![[1.0, 0.0], [0.0, 1.0]], &h);
        assert_eq!(step.beta[0], vec![0.5, 0.5]);
    }

    #[test]
    fn node_with_three_hyperedges_by_hand() {
        // y = e W2 swaps coordinates: (1,2)->(2,1), (0,3)->(3,0), (2,-1)->(-1,2)
        // a2 edge part (0.5,1): LeakyReLU(y).a = 2, 1.5, -0.005+2 = 1.995
        // node part adds the same constant to every score.
        let p = layer_2x2();
        let h = hg(1, &[&[0], &[0], &[0]]);
        let e = array![[1.0, 2.0], [0.0, 3.0], [2.0, -1.0]];
        let step = node_step(&p, &e, &array![[0.7, -0.4]], &h);
        let ex = [2.0f64.exp(), 1.5f64.exp(), 1.995f64.exp()];
        let total: f64 = ex.iter().sum();
        let beta: Vec<f64> = ex.iter().map(|x| x / total).collect();
        for (got, want) in step.beta[0].iter().zip(&beta) {
            assert!((got - want).abs() < 1e-12);
        }
        let v0 = beta[0] * 2.0 + beta[1] * 3.0 + -beta[2];
        let v1 = beta[0] * 1.0 + beta[1] * 0.0 + beta[2] * 2.0;
        assert!((step.states[[0, 0]] - v0.max(0.0)).abs() < 1e-12);
        assert!((step.states[[0, 1]] - v1.max(0.0)).abs() < 1e-12);
    }

    #[test]
    fn isolated_node_is_zero() {
        let p = layer_2x2();
        let h = hg(3, &[&[0, 1]]);
        let pass = layer_forward(&p, &array![[1.0, 1.0], [2.0, 1.0], [5.0, 5.0]], &h);
        assert!(pass.nodes.states.row(2).iter().all(|&v| v == 0.0));
        assert!(pass.nodes.beta[2].is_empty());
    }

    #[test]
    fn predict_tie_and_saturation() {
        let (labels, probs) = predict(&array![[0.0, 0.0], [-10.0, 10.0]]);
        assert_eq!(labels, vec![0, 1]);
        assert_eq!(probs[[0, 0]], 0.5);
        assert!(probs[[1, 1]] > 0.9999);
    }
}
