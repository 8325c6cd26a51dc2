//! Central finite-difference oracle for the analytic gradients.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss_and_grad;
use super::trainer::{HgfndTask, Task};
use crate::data::{Dataset, Label, NewsItem, PropagationTree, Splits, TreeNode};
use crate::error::{Error, Result};
use crate::hypergraph::{Hyperedge, HyperedgeKind, Hypergraph};
use crate::model::{ModelParams, ModelShape};
use crate::params::Parameters;

pub const STEP: f64 = 1e-5;
/// Tensors larger than this are checked on a random sample of entries.
pub const FULL_CHECK_LIMIT: usize = 100;
pub const SAMPLED_ENTRIES: usize = 50;
const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Flat index of the worst entry.
    pub worst_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn failures(&self) -> Vec<String> {
        self.tensors
            .iter()
            .filter(|t| !(t.max_rel_error <= self.tolerance))
            .map(|t| format!("{} (rel err {:.3e} at {})", t.name, t.max_rel_error, t.worst_index))
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }
}

/// Compares `analytic` against central differences of `loss_fn` around
/// `params`, entry by entry: `|ga - gfd| / max(|ga|, |gfd|, 1e-8)`.
pub fn grad_check_with<P: Parameters<f64>>(
    params: &P,
    analytic: &P,
    loss_fn: impl Fn(&P) -> f64,
    tolerance: f64,
    seed: u64,
) -> GradCheckReport {
    grad_check_with_difference(params, analytic, |a, b| loss_fn(a) - loss_fn(b), tolerance, seed)
}

/// As [`grad_check_with`], with `difference(a, b)` returning
/// `loss(a) - loss(b)` directly so it can avoid cancellation.
pub fn grad_check_with_difference<P: Parameters<f64>>(
    params: &P,
    analytic: &P,
    difference: impl Fn(&P, &P) -> f64,
    tolerance: f64,
    seed: u64,
) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes: Vec<(String, usize)> = params.tensors().iter().map(|(n, t)| (n.clone(), t.len())).collect();
    let analytic: Vec<Vec<f64>> = analytic
        .tensors()
        .iter()
        .map(|(_, t)| t.iter().copied().collect())
        .collect();
    let mut probe = params.clone();
    let mut tensors = Vec::with_capacity(sizes.len());
    for (k, (name, len)) in sizes.into_iter().enumerate() {
        let entries: Vec<usize> = if len <= FULL_CHECK_LIMIT {
            (0..len).collect()
        } else {
            let mut picked = sample(&mut rng, len, SAMPLED_ENTRIES).into_vec();
            picked.sort_unstable();
            picked
        };
        let mut worst = (0.0, 0);
        let mut below = params.clone();
        for &e in &entries {
            let original = nudge(&mut probe, k, e, None);
            nudge(&mut probe, k, e, Some(original + STEP));
            nudge(&mut below, k, e, Some(original - STEP));
            let fd = difference(&probe, &below) / (2.0 * STEP);
            nudge(&mut probe, k, e, Some(original));
            nudge(&mut below, k, e, Some(original));
            let ga = analytic[k][e];
            let rel = (ga - fd).abs() / ga.abs().max(fd.abs()).max(REL_FLOOR);
            if !(rel <= worst.0) {
                worst = (rel, e);
            }
        }
        tensors.push(TensorCheck {
            name,
            checked: entries.len(),
            max_rel_error: worst.0,
            worst_index: worst.1,
        });
    }
    GradCheckReport { tolerance, tensors }
}

/// Reads entry `e` of tensor `k`, optionally overwriting it.
fn nudge<P: Parameters<f64>>(p: &mut P, k: usize, e: usize, value: Option<f64>) -> f64 {
    let mut tensors = p.tensors_mut();
    let slot = tensors[k].1.iter_mut().nth(e).expect("entry in range");
    let old = *slot;
    if let Some(v) = value {
        *slot = v;
    }
    old
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const CLAMP: f64 = 1e-12;

fn clamped(margin: f64) -> bool {
    let p = sigmoid(-margin);
    !(CLAMP..=1.0 - CLAMP).contains(&p)
}

fn clamped_loss(margin: f64) -> f64 {
    -sigmoid(-margin).clamp(CLAMP, 1.0 - CLAMP).ln()
}

/// `loss(a) - loss(b)` for two nearby logit matrices. Each item's loss is
/// `softplus(m)` with margin `m = z_other - z_label`; the difference is
/// `ln(1 + sigmoid(m_b) * expm1(m_a - m_b))`, with `m_a - m_b` formed from
/// per-logit differences. Agrees with subtracting [`loss`] values wherever
/// the probability clamp is inactive, without losing the low-order digits.
pub fn loss_difference(a: &Array2<f64>, b: &Array2<f64>, labels: &[Option<Label>], mask: &[usize]) -> f64 {
    let mut total = 0.0;
    for &i in mask {
        let Some(y) = labels[i].map(Label::index) else {
            return f64::NAN;
        };
        let other = 1 - y;
        let m_b = b[[i, other]] - b[[i, y]];
        let m_a = a[[i, other]] - a[[i, y]];
        if clamped(m_a) || clamped(m_b) {
            total += clamped_loss(m_a) - clamped_loss(m_b);
            continue;
        }
        let shift = (a[[i, other]] - b[[i, other]]) - (a[[i, y]] - b[[i, y]]);
        total += (sigmoid(m_b) * shift.exp_m1()).ln_1p();
    }
    total / mask.len() as f64
}

/// Gradient check of the full model in evaluation mode, on the labeled
/// training items.
pub fn grad_check_report(
    params: &ModelParams<f64>,
    dataset: &Dataset,
    graph: &Hypergraph,
    batch_size: usize,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let task = HgfndTask::<f64>::new(dataset, graph, batch_size);
    let labels = dataset.labels();
    let mask: Vec<usize> = dataset
        .splits
        .train
        .iter()
        .copied()
        .filter(|&i| labels[i].is_some())
        .collect();
    let pass = task.forward(params, None)?;
    let (_, d_logits) = loss_and_grad(&pass.logits, &labels, &mask)?;
    let analytic = task.backward(params, &pass, &d_logits);
    let difference = |a: &ModelParams<f64>, b: &ModelParams<f64>| match (task.forward(a, None), task.forward(b, None)) {
        (Ok(a), Ok(b)) => loss_difference(&a.logits, &b.logits, &labels, &mask),
        _ => f64::NAN,
    };
    Ok(grad_check_with_difference(
        params, &analytic, difference, tolerance, seed,
    ))
}

/// As [`grad_check_report`], failing with the offending tensors.
pub fn grad_check(
    params: &ModelParams<f64>,
    dataset: &Dataset,
    graph: &Hypergraph,
    batch_size: usize,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let report = grad_check_report(params, dataset, graph, batch_size, tolerance, seed)?;
    if report.passed() {
        Ok(report)
    } else {
        Err(Error::GradCheck(report.failures()))
    }
}
/// Small random problem for gradient checks: `n` labeled training items
/// with feature width 4, trees of up to 4 nodes, `m` random hyperedges of
/// 2 to `n` members, and a width-`d` model with nonzero biases so that no
/// activation sits exactly on a kink.
pub fn gradcheck_fixture(n: usize, m: usize, d: usize, seed: u64) -> Result<(Dataset, Hypergraph, ModelParams<f64>)> {
    if n < 2 || d == 0 {
        return Err(Error::Validation(format!(
            "gradient check needs n >= 2 and d >= 1, got n = {n}, d = {d}"
        )));
    }
    const WIDTH: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let feature = |rng: &mut ChaCha8Rng| -> Vec<f32> { (0..WIDTH).map(|_| rng.random_range(-1.0f32..1.0)).collect() };
    let mut items = Vec::with_capacity(n);
    let mut trees = Vec::with_capacity(n);
    for i in 0..n {
        let size = rng.random_range(1..=4);
        let nodes = (0..size)
            .map(|idx| TreeNode {
                idx,
                user: format!("u{idx}"),
                ts: idx as i64,
                feature: feature(&mut rng),
            })
            .collect();
        let edges = (1..size).map(|c| (rng.random_range(0..c), c)).collect();
        trees.push(PropagationTree {
            news_id: i,
            nodes,
            edges,
        });
        let label = if i % 2 == 0 { Label::Fake } else { Label::True };
        items.push(NewsItem {
            id: i,
            origin: i,
            feature: feature(&mut rng),
            label: Some(label),
            entities: Default::default(),
        });
    }
    let dataset = Dataset {
        items,
        trees,
        splits: Splits {
            train: (0..n).collect(),
            val: Vec::new(),
            test: Vec::new(),
        },
        feature_dim: WIDTH,
    };
    let hyperedges = (0..m)
        .map(|j| {
            let size = rng.random_range(2..=n);
            Hyperedge {
                id: j,
                kind: HyperedgeKind::User,
                key: format!("h{j}"),
                members: sample(&mut rng, n, size).into_vec(),
            }
        })
        .collect();
    let graph = Hypergraph::new(n, hyperedges)?;
    let mut params = ModelParams::init(ModelShape::new(WIDTH, d), seed);
    params.randomize_biases(seed, 0.1);
    Ok((dataset, graph, params))
}
