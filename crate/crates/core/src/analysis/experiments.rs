use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use crate::baseline::train_baseline;
use crate::data::{downsample_train_labels, Dataset};
use crate::error::{Error, Result};
use crate::hypergraph::{build_hypergraph, HyperedgeKind, Hypergraph, TimeGranularity};
use crate::scalar::Precision;
use crate::train::{train, TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub train: TrainConfig,
    pub granularity: TimeGranularity,
    /// Hyperedge kinds used where the experiment does not vary them.
    pub kinds: Vec<HyperedgeKind>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            train: TrainConfig::default(),
            granularity: TimeGranularity::Day,
            kinds: HyperedgeKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub std: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return MetricSummary::default();
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MetricSummary { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub key: String,
    pub runs: Vec<Metrics>,
    pub accuracy: MetricSummary,
    pub f1_macro: MetricSummary,
    pub f1_fake: MetricSummary,
    pub f1_true: MetricSummary,
}

impl ResultRow {
    pub fn new(key: String, runs: Vec<Metrics>) -> Self {
        let pick = |f: fn(&Metrics) -> f64| MetricSummary::of(&runs.iter().map(f).collect::<Vec<_>>());
        ResultRow {
            accuracy: pick(|m| m.accuracy),
            f1_macro: pick(|m| m.f1_macro),
            f1_fake: pick(|m| m.f1_fake),
            f1_true: pick(|m| m.f1_true),
            key,
            runs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub key_name: String,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn row(&self, key: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.key == key)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "{},runs,accuracy_mean,accuracy_std,f1_macro_mean,f1_macro_std,f1_fake_mean,f1_fake_std,f1_true_mean,f1_true_std\n",
            self.key_name
        );
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.key,
                r.runs.len(),
                r.accuracy.mean,
                r.accuracy.std,
                r.f1_macro.mean,
                r.f1_macro.std,
                r.f1_fake.mean,
                r.f1_fake.std,
                r.f1_true.mean,
                r.f1_true.std
            )
            .unwrap();
        }
        out
    }

    /// Aligned text with percentages as `mean ± std`.
    pub fn to_text(&self) -> String {
        let cell = |s: &MetricSummary| format!("{:6.2} ± {:5.2}", 100.0 * s.mean, 100.0 * s.std);
        let width = self
            .rows
            .iter()
            .map(|r| r.key.len())
            .chain([self.key_name.len()])
            .max()
            .unwrap_or(0);
        let mut out = format!(
            "{:<width$}  {:>4}  {:>15}  {:>15}  {:>15}  {:>15}\n",
            self.key_name, "runs", "accuracy", "f1 macro", "f1 fake", "f1 true"
        );
        for r in &self.rows {
            writeln!(
                out,
                "{:<width$}  {:>4}  {:>15}  {:>15}  {:>15}  {:>15}",
                r.key,
                r.runs.len(),
                cell(&r.accuracy),
                cell(&r.f1_macro),
                cell(&r.f1_fake),
                cell(&r.f1_true)
            )
            .unwrap();
        }
        out
    }
}

/// The seven nonempty kind subsets: UTE, UT, UE, TE, U, T, E.
pub fn kind_subsets() -> Vec<Vec<HyperedgeKind>> {
    use HyperedgeKind::{Entity as E, Time as T, User as U};
    vec![
        vec![U, T, E],
        vec![U, T],
        vec![U, E],
        vec![T, E],
        vec![U],
        vec![T],
        vec![E],
    ]
}

fn subset_key(kinds: &[HyperedgeKind]) -> String {
    kinds.iter().map(|k| k.letter()).collect()
}

fn with_seed(config: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..config.clone() }
}

fn train_any(config: &TrainConfig, dataset: &Dataset, graph: &Hypergraph) -> Result<TrainReport> {
    Ok(match config.precision {
        Precision::F32 => train::<f32>(config, dataset, graph)?.1,
        Precision::F64 => train::<f64>(config, dataset, graph)?.1,
    })
}

fn test_metrics(report: TrainReport) -> Result<Metrics> {
    report
        .test
        .ok_or_else(|| Error::Validation("test split has no labeled items".into()))
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::Validation("at least one seed is required".into()));
    }
    Ok(())
}

fn collect_rows(keys: Vec<String>, seeds: usize, metrics: Vec<Metrics>) -> Vec<ResultRow> {
    keys.into_iter()
        .zip(metrics.chunks(seeds))
        .map(|(key, runs)| ResultRow::new(key, runs.to_vec()))
        .collect()
}

/// Test metrics of one model per kind subset and seed.
pub fn ablate_hyperedge_types(options: &RunOptions, dataset: &Dataset, seeds: &[u64]) -> Result<ResultTable> {
    check_seeds(seeds)?;
    let subsets = kind_subsets();
    let cells: Vec<(usize, u64)> = (0..subsets.len())
        .flat_map(|s| seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let metrics = cells
        .par_iter()
        .map(|&(s, seed)| {
            let graph = build_hypergraph(dataset, &subsets[s], options.granularity)?;
            test_metrics(train_any(&with_seed(&options.train, seed), dataset, &graph)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultTable {
        key_name: "kinds".into(),
        rows: collect_rows(subsets.iter().map(|s| subset_key(s)).collect(), seeds.len(), metrics),
    })
}

/// Test metrics after keeping only a fraction of the training labels. The
/// hypergraph is rebuilt on each reduced dataset.
pub fn sweep_label_fraction(
    options: &RunOptions,
    dataset: &Dataset,
    fractions: &[f64],
    seeds: &[u64],
) -> Result<ResultTable> {
    check_seeds(seeds)?;
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::Validation(format!("label fraction {f} must lie in (0, 1]")));
    }
    let cells: Vec<(f64, u64)> = fractions
        .iter()
        .flat_map(|&f| seeds.iter().map(move |&s| (f, s)))
        .collect();
    let metrics = cells
        .par_iter()
        .map(|&(fraction, seed)| {
            let reduced = downsample_train_labels(dataset, fraction, seed)?;
            let graph = build_hypergraph(&reduced, &options.kinds, options.granularity)?;
            test_metrics(train_any(&with_seed(&options.train, seed), &reduced, &graph)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultTable {
        key_name: "label_fraction".into(),
        rows: collect_rows(fractions.iter().map(|f| format!("{f}")).collect(), seeds.len(), metrics),
    })
}

/// Test metrics of the clique-expansion baseline on `graph`.
pub fn baseline_clique_gnn(config: &TrainConfig, dataset: &Dataset, graph: &Hypergraph) -> Result<Metrics> {
    let report = match config.precision {
        Precision::F32 => train_baseline::<f32>(config, dataset, graph)?.1,
        Precision::F64 => train_baseline::<f64>(config, dataset, graph)?.1,
    };
    test_metrics(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_follow_table_order() {
        let keys: Vec<String> = kind_subsets().iter().map(|s| subset_key(s)).collect();
        assert_eq!(keys, ["UTE", "UT", "UE", "TE", "U", "T", "E"]);
    }

    #[test]
    fn summary_uses_sample_std() {
        let s = MetricSummary::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 1.0).abs() < 1e-12);
        assert_eq!(MetricSummary::of(&[0.4]).std, 0.0);
    }
}
