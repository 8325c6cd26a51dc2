use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::attention::AttentionSnapshot;
use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::hypergraph::{HyperedgeKind, Hypergraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibilityRecord {
    pub hyperedge: usize,
    pub user_key: String,
    /// Share of true-labeled news among the labeled members.
    pub credibility: f64,
    pub n_news: usize,
    pub n_labeled: usize,
    /// Mean final-layer `beta` from each member node to this hyperedge.
    pub mean_beta: f64,
}

/// One record per User hyperedge with at least one labeled member.
/// Unlabeled members count in neither numerator nor denominator.
pub fn credibility_table(
    dataset: &Dataset,
    graph: &Hypergraph,
    snapshot: &AttentionSnapshot,
) -> Result<Vec<CredibilityRecord>> {
    if !graph.hyperedges().iter().any(|e| e.kind == HyperedgeKind::User) {
        return Err(Error::MissingKind("user"));
    }
    let final_layer = snapshot
        .final_layer()
        .ok_or_else(|| Error::Validation("attention snapshot has no layers".into()))?;
    if final_layer.beta.len() != graph.n_nodes() {
        return Err(Error::Validation(format!(
            "snapshot covers {} nodes, hypergraph has {}",
            final_layer.beta.len(),
            graph.n_nodes()
        )));
    }
    let mut out = Vec::new();
    for edge in graph.hyperedges().iter().filter(|e| e.kind == HyperedgeKind::User) {
        let labels: Vec<Label> = edge.members.iter().filter_map(|&i| dataset.items[i].label).collect();
        if labels.is_empty() {
            continue;
        }
        let n_true = labels.iter().filter(|&&y| y == Label::True).count();
        let betas: Vec<f64> = edge
            .members
            .iter()
            .map(|&i| {
                let pos = graph.incident(i).binary_search(&edge.id).expect("member is incident");
                final_layer.beta[i][pos]
            })
            .collect();
        out.push(CredibilityRecord {
            hyperedge: edge.id,
            user_key: edge.key.clone(),
            credibility: n_true as f64 / labels.len() as f64,
            n_news: edge.members.len(),
            n_labeled: labels.len(),
            mean_beta: betas.iter().sum::<f64>() / betas.len() as f64,
        });
    }
    Ok(out)
}

pub fn credibility_csv(records: &[CredibilityRecord]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in records {
        writer.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory csv flush")).expect("csv output is UTF-8")
}

/// Reads the output of [`credibility_csv`].
pub fn parse_credibility_csv(text: &str) -> Result<Vec<CredibilityRecord>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .enumerate()
        .map(|(line, row)| row.map_err(|e| Error::Format(format!("credibility csv line {}: {e}", line + 2))))
        .collect()
}

/// Percentages (0 to 100) of high (> 0.9) and low (< 0.1) credibility among
/// the highest- and lowest-attention users at one sampling ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRow {
    pub ratio: f64,
    pub count: usize,
    pub top_high: f64,
    pub top_low: f64,
    pub bottom_high: f64,
    pub bottom_low: f64,
}

const HIGH: f64 = 0.9;
const LOW: f64 = 0.1;

fn percent(records: &[&CredibilityRecord], pred: impl Fn(f64) -> bool) -> f64 {
    100.0 * records.iter().filter(|r| pred(r.credibility)).count() as f64 / records.len() as f64
}

/// Ranks records by `mean_beta` (descending, ties by `user_key`) and takes
/// `ceil(ratio * n)` records from each end.
pub fn attention_user_sampling(records: &[CredibilityRecord], ratios: &[f64]) -> Result<Vec<SamplingRow>> {
    if records.is_empty() {
        return Err(Error::Validation("no credibility records to sample".into()));
    }
    if let Some(r) = ratios.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::Validation(format!("sampling ratio {r} must lie in (0, 1)")));
    }
    let mut ranked: Vec<&CredibilityRecord> = records.iter().collect();
    ranked.sort_by(|a, b| {
        b.mean_beta
            .partial_cmp(&a.mean_beta)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.user_key.cmp(&b.user_key))
    });
    let n = ranked.len();
    Ok(ratios
        .iter()
        .map(|&ratio| {
            let count = ((ratio * n as f64).ceil() as usize).clamp(1, n);
            let top = &ranked[..count];
            let bottom = &ranked[n - count..];
            SamplingRow {
                ratio,
                count,
                top_high: percent(top, |c| c > HIGH),
                top_low: percent(top, |c| c < LOW),
                bottom_high: percent(bottom, |c| c > HIGH),
                bottom_low: percent(bottom, |c| c < LOW),
            }
        })
        .collect())
}

pub fn sampling_csv(rows: &[SamplingRow]) -> String {
    let mut out = String::from("ratio,count,top_high_pct,top_low_pct,bottom_high_pct,bottom_low_pct\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{:.2},{:.2},{:.2},{:.2}",
            r.ratio, r.count, r.top_high, r.top_low, r.bottom_high, r.bottom_low
        )
        .unwrap();
    }
    out
}
