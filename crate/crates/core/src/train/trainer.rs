use std::time::Instant;

use log::{debug, info};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss, loss_and_grad, Adam, TrainConfig};
use crate::analysis::metrics::{evaluate_logits, Metrics};
use crate::attention::AttentionSnapshot;
use crate::data::{Dataset, Label, Splits};
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::model::{backward, forward, DropoutPlan, ForwardPass, ModelParams, ModelShape, PreparedData};
use crate::params::Parameters;
use crate::scalar::Scalar;

/// A differentiable node classifier over a fixed input.
pub trait Task<T: Scalar> {
    type Params: Parameters<T>;
    type Pass;

    fn forward(&self, params: &Self::Params, dropout: Option<DropoutPlan<'_>>) -> Result<Self::Pass>;
    fn logits<'p>(&self, pass: &'p Self::Pass) -> &'p Array2<T>;
    fn backward(&self, params: &Self::Params, pass: &Self::Pass, d_logits: &Array2<T>) -> Self::Params;
}

/// The full model on one dataset and hypergraph.
#[derive(Debug, Clone)]
pub struct HgfndTask<'a, T> {
    pub data: PreparedData<T>,
    pub graph: &'a Hypergraph,
}

impl<'a, T: Scalar> HgfndTask<'a, T> {
    pub fn new(dataset: &Dataset, graph: &'a Hypergraph, batch_size: usize) -> Self {
        HgfndTask {
            data: PreparedData::new(dataset, batch_size),
            graph,
        }
    }
}

impl<T: Scalar> Task<T> for HgfndTask<'_, T> {
    type Params = ModelParams<T>;
    type Pass = ForwardPass<T>;

    fn forward(&self, params: &ModelParams<T>, dropout: Option<DropoutPlan<'_>>) -> Result<ForwardPass<T>> {
        forward(params, &self.data, self.graph, dropout)
    }

    fn logits<'p>(&self, pass: &'p ForwardPass<T>) -> &'p Array2<T> {
        &pass.logits
    }

    fn backward(&self, params: &ModelParams<T>, pass: &ForwardPass<T>, d_logits: &Array2<T>) -> ModelParams<T> {
        backward(params, &self.data, self.graph, pass, d_logits)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Training-mode loss (with dropout) before this epoch's update.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub val_f1: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; 0 means the initial parameters.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub val: Option<Metrics>,
    pub test: Option<Metrics>,
    pub wall_seconds: f64,
    /// Attention of the kept parameters, evaluated without dropout.
    #[serde(skip)]
    pub snapshot: AttentionSnapshot,
}

fn labeled(labels: &[Option<Label>], ids: &[usize]) -> Vec<usize> {
    ids.iter()
        .copied()
        .filter(|&i| labels.get(i).copied().flatten().is_some())
        .collect()
}

/// Full-batch Adam with early stopping on validation accuracy (ties broken
/// by lower validation loss). Returns the best validation parameters.
/// `observer` sees the parameters after every epoch's update.
pub fn fit<T: Scalar, K: Task<T>>(
    task: &K,
    init: K::Params,
    labels: &[Option<Label>],
    splits: &Splits,
    config: &TrainConfig,
    mut observer: impl FnMut(usize, &K::Params),
) -> Result<(K::Params, TrainReport)> {
    config.validate()?;
    let started = Instant::now();
    let train_ids = labeled(labels, &splits.train);
    let val_ids = labeled(labels, &splits.val);
    let test_ids = labeled(labels, &splits.test);
    if train_ids.is_empty() {
        return Err(Error::Validation("training split has no labeled items".into()));
    }

    let mut params = init;
    let mut adam = Adam::new(config.learning_rate, config.beta1, config.beta2, config.epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_d20f);
    let mut best = params.clone();
    let mut best_key: Option<(f64, f64)> = None;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut report = TrainReport::default();

    for epoch in 1..=config.max_epochs {
        let plan = DropoutPlan {
            rate: config.dropout,
            rng: &mut rng,
        };
        let pass = task.forward(&params, Some(plan))?;
        let (train_loss, d_logits) = loss_and_grad(task.logits(&pass), labels, &train_ids)?;
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: train_loss,
            });
        }
        let grads = task.backward(&params, &pass, &d_logits);
        drop(pass);
        if let Some(name) = grads.first_non_finite() {
            return Err(Error::NonFiniteGradient(name));
        }
        adam.step(&mut params, &grads);
        observer(epoch, &params);

        let mut record = EpochRecord {
            epoch,
            train_loss,
            val_loss: None,
            val_accuracy: None,
            val_f1: None,
        };
        if val_ids.is_empty() {
            best = params.clone();
            best_epoch = epoch;
        } else {
            let eval = task.forward(&params, None)?;
            let logits = task.logits(&eval);
            let val_loss = loss(logits, labels, &val_ids)?;
            let metrics = evaluate_logits(logits, labels, &val_ids)?;
            record.val_loss = Some(val_loss);
            record.val_accuracy = Some(metrics.accuracy);
            record.val_f1 = Some(metrics.f1_macro);
            let improved = match best_key {
                None => true,
                Some((acc, l)) => metrics.accuracy > acc || (metrics.accuracy == acc && val_loss < l),
            };
            if improved {
                best_key = Some((metrics.accuracy, val_loss));
                best = params.clone();
                best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
            }
        }
        debug!(
            "epoch {epoch}: train loss {train_loss:.5} val loss {:?} val acc {:?}",
            record.val_loss, record.val_accuracy
        );
        report.epochs.push(record);
        if since_best >= config.patience {
            report.stopped_early = true;
            break;
        }
    }

    let eval = task.forward(&best, None)?;
    let logits = task.logits(&eval);
    report.best_epoch = best_epoch;
    report.val = (!val_ids.is_empty())
        .then(|| evaluate_logits(logits, labels, &val_ids))
        .transpose()?;
    report.test = (!test_ids.is_empty())
        .then(|| evaluate_logits(logits, labels, &test_ids))
        .transpose()?;
    report.wall_seconds = started.elapsed().as_secs_f64();
    info!(
        "trained {} epochs (best {}), {:.2}s",
        report.epochs.len(),
        best_epoch,
        report.wall_seconds
    );
    Ok((best, report))
}

/// Trains the full model from the seeded initialisation.
pub fn train<T: Scalar>(
    config: &TrainConfig,
    dataset: &Dataset,
    graph: &Hypergraph,
) -> Result<(ModelParams<T>, TrainReport)> {
    train_with_observer(config, dataset, graph, |_, _| {})
}

pub fn train_with_observer<T: Scalar>(
    config: &TrainConfig,
    dataset: &Dataset,
    graph: &Hypergraph,
    observer: impl FnMut(usize, &ModelParams<T>),
) -> Result<(ModelParams<T>, TrainReport)> {
    config.validate()?;
    let task = HgfndTask::<T>::new(dataset, graph, config.batch_size);
    let init = ModelParams::init(ModelShape::new(dataset.feature_dim, config.hidden_dim), config.seed);
    let labels = dataset.labels();
    let (params, mut report) = fit(&task, init, &labels, &dataset.splits, config, observer)?;
    report.snapshot = task.forward(&params, None)?.snapshot;
    Ok((params, report))
}
