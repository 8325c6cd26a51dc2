//! Metrics, credibility scoring and experiment orchestration.

mod credibility;
mod experiments;
pub mod metrics;

pub use credibility::{
    attention_user_sampling, credibility_csv, credibility_table, parse_credibility_csv, sampling_csv,
    CredibilityRecord, SamplingRow,
};
pub use experiments::{
    ablate_hyperedge_types, baseline_clique_gnn, kind_subsets, sweep_label_fraction, MetricSummary, ResultRow,
    ResultTable, RunOptions,
};
pub use metrics::{evaluate_logits, Confusion, Metrics};

/// `evaluate` on a trained model: metrics of the forward pass without
/// dropout on the given split.
pub fn evaluate<T: crate::Scalar>(
    params: &crate::ModelParams<T>,
    dataset: &crate::Dataset,
    graph: &crate::Hypergraph,
    split: crate::Split,
    batch_size: usize,
) -> crate::Result<Metrics> {
    let ids = dataset.splits.get(split);
    if ids.is_empty() {
        return Err(crate::Error::Validation(format!("{} split is empty", split.as_str())));
    }
    let labels = dataset.labels();
    if let Some(&i) = ids.iter().find(|&&i| labels[i].is_none()) {
        return Err(crate::Error::Validation(format!(
            "{} item {i} has no label",
            split.as_str()
        )));
    }
    let data = crate::model::PreparedData::new(dataset, batch_size);
    let pass = crate::model::forward(params, &data, graph, None)?;
    evaluate_logits(&pass.logits, &labels, ids)
}
