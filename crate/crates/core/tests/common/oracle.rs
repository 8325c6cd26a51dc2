//! Scalar re-implementation of the forward pass, written from the model
//! definition with plain loops and no shared code.

use hgfnd::{Dataset, Hypergraph, ModelParams};
use ndarray::{Array1, Array2};

type Vector = Vec<f64>;

fn row_times(x: &[f64], w: &Array2<f64>) -> Vector {
    let (rows, cols) = w.dim();
    assert_eq!(x.len(), rows);
    (0..cols).map(|c| (0..rows).map(|r| x[r] * w[[r, c]]).sum()).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn plus_bias(a: &[f64], b: &Array1<f64>) -> Vector {
    a.iter().enumerate().map(|(i, x)| x + b[i]).collect()
}

fn relu(a: &[f64]) -> Vector {
    a.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect()
}

fn leaky(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        0.01 * x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax(scores: &[f64]) -> Vector {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// Root state of tree `t` after the two mean-aggregation layers.
pub fn tree_root(params: &ModelParams<f64>, dataset: &Dataset, t: usize) -> Vector {
    let tree = &dataset.trees[t];
    let n = tree.nodes.len();
    let mut adjacent = vec![vec![false; n]; n];
    for &(p, c) in &tree.edges {
        adjacent[p][c] = true;
        adjacent[c][p] = true;
    }
    let mut state: Vec<Vector> = tree
        .nodes
        .iter()
        .map(|node| node.feature.iter().map(|&v| v as f64).collect())
        .collect();
    for layer in &params.encoder.sage {
        let width = state[0].len();
        let next = (0..n)
            .map(|v| {
                let nbrs: Vec<usize> = (0..n).filter(|&u| adjacent[v][u]).collect();
                let mut mean = vec![0.0; width];
                for &u in &nbrs {
                    for k in 0..width {
                        mean[k] += state[u][k] / nbrs.len() as f64;
                    }
                }
                relu(&add(
                    &row_times(&state[v], &layer.self_w),
                    &row_times(&mean, &layer.nbr_w),
                ))
            })
            .collect();
        state = next;
    }
    state[0].clone()
}

pub fn initial_embeddings(params: &ModelParams<f64>, dataset: &Dataset) -> Vec<Vector> {
    (0..dataset.len())
        .map(|i| {
            let x: Vector = dataset.items[i].feature.iter().map(|&v| v as f64).collect();
            let mapped = plus_bias(&row_times(&x, &params.encoder.input_w), &params.encoder.input_b);
            let mut concat = mapped;
            concat.extend(tree_root(params, dataset, i));
            plus_bias(
                &row_times(&relu(&concat), &params.encoder.proj_w),
                &params.encoder.proj_b,
            )
        })
        .collect()
}

pub struct OracleOutput {
    pub logits: Vec<[f64; 2]>,
    /// `alpha[layer][j][k]` over the members of hyperedge `j` in ascending order.
    pub alpha: Vec<Vec<Vector>>,
    /// `beta[layer][i][p]` over the hyperedges containing node `i`, ascending.
    pub beta: Vec<Vec<Vector>>,
    pub states: Vec<Vec<Vector>>,
}

/// Full forward pass without dropout. Membership is read by scanning the
/// dense incidence relation, not the hypergraph's own adjacency lists.
pub fn forward(params: &ModelParams<f64>, dataset: &Dataset, h: &Hypergraph) -> OracleOutput {
    let n = dataset.len();
    let m = h.n_hyperedges();
    let mut incidence = vec![vec![false; m]; n];
    for (j, edge) in h.hyperedges().iter().enumerate() {
        for &k in &edge.members {
            incidence[k][j] = true;
        }
    }
    let d = params.encoder.proj_b.len();
    let mut v = initial_embeddings(params, dataset);
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut states = Vec::new();
    for layer in &params.layers {
        let z: Vec<Vector> = v.iter().map(|vi| row_times(vi, &layer.w1)).collect();
        let a1: Vector = layer.a1.to_vec();
        let a2: Vector = layer.a2.to_vec();
        let mut e = vec![vec![0.0; d]; m];
        let mut layer_alpha = Vec::new();
        for j in 0..m {
            let members: Vec<usize> = (0..n).filter(|&k| incidence[k][j]).collect();
            let scores: Vector = members
                .iter()
                .map(|&k| dot(&a1, &z[k].iter().map(|&x| leaky(x)).collect::<Vector>()))
                .collect();
            let alpha = softmax(&scores);
            let mut acc = vec![0.0; d];
            for (&k, &a) in members.iter().zip(&alpha) {
                for c in 0..d {
                    acc[c] += a * z[k][c];
                }
            }
            e[j] = relu(&acc);
            layer_alpha.push(alpha);
        }
        let y: Vec<Vector> = e.iter().map(|ej| row_times(ej, &layer.w2)).collect();
        let mut next = vec![vec![0.0; d]; n];
        let mut layer_beta = Vec::new();
        for i in 0..n {
            let incident: Vec<usize> = (0..m).filter(|&j| incidence[i][j]).collect();
            if incident.is_empty() {
                layer_beta.push(Vec::new());
                continue;
            }
            let scores: Vector = incident
                .iter()
                .map(|&j| {
                    let mut r: Vector = y[j].iter().map(|&x| leaky(x)).collect();
                    r.extend(z[i].iter().map(|&x| leaky(x)));
                    dot(&a2, &r)
                })
                .collect();
            let beta = softmax(&scores);
            let mut acc = vec![0.0; d];
            for (&j, &b) in incident.iter().zip(&beta) {
                for c in 0..d {
                    acc[c] += b * y[j][c];
                }
            }
            next[i] = relu(&acc);
            layer_beta.push(beta);
        }
        alphas.push(layer_alpha);
        betas.push(layer_beta);
        v = next;
        states.push(v.clone());
    }
    let logits = v
        .iter()
        .map(|vi| {
            let out = plus_bias(&row_times(vi, &params.head.w3), &params.head.b);
            [out[0], out[1]]
        })
        .collect();
    OracleOutput {
        logits,
        alpha: alphas,
        beta: betas,
        states,
    }
}
