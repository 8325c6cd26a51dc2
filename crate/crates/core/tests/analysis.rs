mod common;

use common::{hypergraph, random_dataset, rng};
use hgfnd::analysis::{
    ablate_hyperedge_types, attention_user_sampling, baseline_clique_gnn, credibility_table, evaluate, kind_subsets,
    sweep_label_fraction, Confusion, MetricSummary, Metrics, RunOptions,
};
use hgfnd::attention::{predict, AttentionSnapshot, LayerAttention};
use hgfnd::data::{generate_synthetic, Label};
use hgfnd::hypergraph::build_hypergraph;
use hgfnd::train::train;
use hgfnd::{
    CredibilityRecord, Dataset, Error, Hyperedge, HyperedgeKind, Hypergraph, ModelParams, ModelShape, Split,
    SyntheticConfig, TimeGranularity, TrainConfig,
};
use ndarray::array;

fn user_edge(key: &str, members: &[usize]) -> Hyperedge {
    Hyperedge {
        id: 0,
        kind: HyperedgeKind::User,
        key: key.into(),
        members: members.to_vec(),
    }
}

fn uniform_snapshot(h: &Hypergraph) -> AttentionSnapshot {
    let beta = (0..h.n_nodes())
        .map(|i| vec![1.0 / h.incident(i).len() as f64; h.incident(i).len()])
        .collect();
    AttentionSnapshot {
        layers: vec![LayerAttention {
            alpha: Vec::new(),
            beta,
        }],
    }
}

fn with_labels(labels: &[Option<Label>]) -> Dataset {
    let mut ds = random_dataset(&mut rng(0), labels.len(), 2, 2);
    for (item, &label) in ds.items.iter_mut().zip(labels) {
        item.label = label;
    }
    ds
}

#[test]
fn hand_built_confusion_gives_expected_metrics() {
    let m = Metrics::from_confusion(Confusion {
        tp: 3,
        fp: 1,
        tn: 4,
        fn_: 2,
    });
    assert!((m.accuracy - 0.7).abs() < 1e-12);
    assert!((m.f1_fake - 6.0 / 9.0).abs() < 1e-12);
    assert!((m.f1_true - 8.0 / 11.0).abs() < 1e-12);
    assert!((m.f1_macro - (6.0 / 9.0 + 8.0 / 11.0) / 2.0).abs() < 1e-12);
}

#[test]
fn constant_prediction_on_a_balanced_split() {
    let truth = [
        Label::Fake,
        Label::True,
        Label::Fake,
        Label::True,
        Label::Fake,
        Label::True,
    ];
    let m = Metrics::from_predictions(&truth, &[Label::True; 6]).unwrap();
    assert_eq!(m.accuracy, 0.5);
    assert!((m.f1_true - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(m.f1_fake, 0.0);
    let perfect = Metrics::from_predictions(&truth, &truth).unwrap();
    assert_eq!((perfect.accuracy, perfect.f1_fake, perfect.f1_true), (1.0, 1.0, 1.0));
}

#[test]
fn prediction_ties_and_saturation() {
    let (labels, probs) = predict(&array![[0.0, 0.0], [-10.0, 10.0]]);
    assert_eq!(labels, [0, 1]);
    assert_eq!(probs[[0, 0]], 0.5);
    assert!(probs[[1, 1]] > 0.9999);
}

#[test]
fn evaluate_rejects_empty_and_unlabeled_splits() {
    let mut ds = random_dataset(&mut rng(1), 4, 2, 2);
    let h = hypergraph(4, &[&[0, 1, 2, 3]]);
    let params = ModelParams::<f64>::init(ModelShape::new(2, 3), 0);
    assert!(evaluate(&params, &ds, &h, Split::Test, 8).is_err());
    ds.items[1].label = None;
    assert!(evaluate(&params, &ds, &h, Split::Train, 8).is_err());
}

#[test]
fn credibility_counts_true_share() {
    let t = Some(Label::True);
    let f = Some(Label::Fake);
    let ds = with_labels(&[t, t, f, t, f, f, None]);
    let h = Hypergraph::new(
        7,
        vec![
            user_edge("mixed", &[0, 1, 2, 3]),
            user_edge("fakes", &[4, 5]),
            user_edge("partial", &[3, 6]),
            Hyperedge {
                kind: HyperedgeKind::Time,
                ..user_edge("day", &[0, 4])
            },
        ],
    )
    .unwrap();
    let records = credibility_table(&ds, &h, &uniform_snapshot(&h)).unwrap();
    let find = |key: &str| records.iter().find(|r| r.user_key == key).unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(find("mixed").credibility, 0.75);
    assert_eq!(find("fakes").credibility, 0.0);
    assert_eq!(find("partial").credibility, 1.0);
    assert_eq!(find("partial").n_news, 2);
    assert_eq!(find("partial").n_labeled, 1);
    // Node 0 sits in "mixed" and "day", so its share is 1/2.
    assert_eq!(find("mixed").mean_beta, (0.5 + 1.0 + 1.0 + 0.5) / 4.0);
}

#[test]
fn credibility_needs_user_hyperedges() {
    let ds = with_labels(&[Some(Label::True), Some(Label::Fake)]);
    let h = Hypergraph::new(
        2,
        vec![Hyperedge {
            kind: HyperedgeKind::Entity,
            ..user_edge("x", &[0, 1])
        }],
    )
    .unwrap();
    assert!(matches!(
        credibility_table(&ds, &h, &uniform_snapshot(&h)),
        Err(Error::MissingKind("user"))
    ));
}

/// Direct count over random labelings and memberships.
#[test]
fn credibility_matches_direct_count_on_random_fixtures() {
    use rand::Rng;
    for seed in 0..200 {
        let mut r = rng(seed);
        let n = r.random_range(2..15);
        let labels: Vec<Option<Label>> = (0..n)
            .map(|_| match r.random_range(0..5) {
                0 => None,
                1 | 2 => Some(Label::True),
                _ => Some(Label::Fake),
            })
            .collect();
        let ds = with_labels(&labels);
        let m = r.random_range(1..8);
        let h = common::random_hypergraph(&mut r, n, m);
        let mut edges = h.hyperedges().to_vec();
        edges[0].kind = HyperedgeKind::User;
        let h = Hypergraph::new(n, edges).unwrap();
        let records = credibility_table(&ds, &h, &uniform_snapshot(&h)).unwrap();
        let mut expected = Vec::new();
        for (j, edge) in h.hyperedges().iter().enumerate() {
            if edge.kind != HyperedgeKind::User {
                continue;
            }
            let mut trues = 0;
            let mut known = 0;
            for i in 0..n {
                if h.contains(i, j) {
                    match labels[i] {
                        Some(Label::True) => {
                            trues += 1;
                            known += 1
                        }
                        Some(Label::Fake) => known += 1,
                        None => {}
                    }
                }
            }
            if known > 0 {
                expected.push((j, trues as f64 / known as f64));
            }
        }
        let got: Vec<(usize, f64)> = records.iter().map(|r| (r.hyperedge, r.credibility)).collect();
        assert_eq!(got, expected, "seed {seed}");
    }
}

fn record(key: &str, credibility: f64, mean_beta: f64) -> CredibilityRecord {
    CredibilityRecord {
        hyperedge: 0,
        user_key: key.into(),
        credibility,
        n_news: 2,
        n_labeled: 2,
        mean_beta,
    }
}

#[test]
fn sampling_ranks_by_attention_with_key_tiebreak() {
    let records: Vec<CredibilityRecord> = (0..20)
        .map(|k| record(&format!("u{k:02}"), if k < 10 { 1.0 } else { 0.0 }, 0.5))
        .collect();
    let rows = attention_user_sampling(&records, &[0.10, 0.15, 0.20, 0.25]).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().map(|r| r.count).collect::<Vec<_>>(), [2, 3, 4, 5]);
    assert_eq!(rows[0].top_high, 100.0);
    assert_eq!(rows[0].bottom_low, 100.0);

    let ranked: Vec<CredibilityRecord> = (0..10)
        .map(|k| record(&format!("u{k}"), if k % 2 == 0 { 0.95 } else { 0.5 }, k as f64))
        .collect();
    let rows = attention_user_sampling(&ranked, &[0.2]).unwrap();
    // Top two by attention are u9 (0.5) and u8 (0.95).
    assert_eq!(rows[0].top_high, 50.0);
    assert!(attention_user_sampling(&[], &[0.1]).is_err());
    assert!(attention_user_sampling(&ranked, &[1.0]).is_err());
}

#[test]
fn summaries_use_sample_standard_deviation() {
    let s = MetricSummary::of(&[0.9, 1.0, 0.95]);
    assert!((s.mean - 0.95).abs() < 1e-12);
    assert!((s.std - 0.05).abs() < 1e-12);
    assert_eq!(MetricSummary::of(&[0.7]).std, 0.0);
}

#[test]
fn kind_subsets_follow_the_ablation_table_order() {
    let keys: Vec<String> = kind_subsets()
        .iter()
        .map(|s| s.iter().map(|k| k.letter()).collect())
        .collect();
    assert_eq!(keys, ["UTE", "UT", "UE", "TE", "U", "T", "E"]);
}

fn small_synthetic(seed: u64, signal: f64) -> Dataset {
    generate_synthetic(&SyntheticConfig {
        n_news: 100,
        n_users: 50,
        signal_strength: signal,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn quick() -> TrainConfig {
    TrainConfig {
        hidden_dim: 16,
        max_epochs: 15,
        ..Default::default()
    }
}

#[test]
fn ablation_is_deterministic_and_has_seven_rows() {
    let ds = small_synthetic(1, 1.0);
    let options = RunOptions {
        train: quick(),
        ..Default::default()
    };
    let a = ablate_hyperedge_types(&options, &ds, &[0, 1]).unwrap();
    let b = ablate_hyperedge_types(&options, &ds, &[0, 1]).unwrap();
    assert_eq!(a.rows.len(), 7);
    assert!(a.rows.iter().all(|r| r.runs.len() == 2));
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(a.to_csv().starts_with("kinds,runs,accuracy_mean"));
    assert!(ablate_hyperedge_types(&options, &ds, &[]).is_err());
}

#[test]
fn full_label_fraction_equals_a_plain_run() {
    let ds = small_synthetic(2, 1.0);
    let options = RunOptions {
        train: TrainConfig { seed: 3, ..quick() },
        ..Default::default()
    };
    let table = sweep_label_fraction(&options, &ds, &[1.0, 0.5], &[3]).unwrap();
    assert_eq!(table.rows.len(), 2);
    let h = build_hypergraph(&ds, &HyperedgeKind::ALL, TimeGranularity::Day).unwrap();
    let (_, report) = train::<f32>(&options.train, &ds, &h).unwrap();
    assert_eq!(table.rows[0].runs[0], report.test.unwrap());
    assert!(sweep_label_fraction(&options, &ds, &[0.0], &[3]).is_err());
}

#[test]
fn edgeless_baseline_is_a_per_node_network() {
    use hgfnd::baseline::{baseline_forward, BaselineData, BaselineParams};
    let ds = small_synthetic(3, 1.0);
    let h = Hypergraph::new(ds.len(), Vec::new()).unwrap();
    let graph = hgfnd::hypergraph::clique_expansion(&h);
    assert!(graph.edges.is_empty());
    let params = BaselineParams::<f64>::init(ds.feature_dim, 8, 0);
    let mut features = hgfnd::tree_encoder::news_feature_matrix::<f64>(&ds);
    let before = baseline_forward(&params, &BaselineData::new(features.clone(), &graph), Vec::new()).logits;
    features.row_mut(0).fill(5.0);
    let after = baseline_forward(&params, &BaselineData::new(features, &graph), Vec::new()).logits;
    assert_ne!(before.row(0), after.row(0));
    for i in 1..ds.len() {
        assert_eq!(before.row(i), after.row(i));
    }
    let m = baseline_clique_gnn(&quick(), &ds, &h).unwrap();
    assert_eq!(m, baseline_clique_gnn(&quick(), &ds, &h).unwrap());
}

#[test]
fn content_only_baseline_is_blind_to_structural_signal() {
    let ds = generate_synthetic(&SyntheticConfig {
        signal_strength: 0.0,
        ..Default::default()
    })
    .unwrap();
    let h = build_hypergraph(&ds, &HyperedgeKind::ALL, TimeGranularity::Day).unwrap();
    let baseline = baseline_clique_gnn(&TrainConfig::default(), &ds, &h).unwrap();
    let (_, report) = train::<f32>(&TrainConfig::default(), &ds, &h).unwrap();
    let ours = report.test.unwrap();
    println!("baseline {baseline}\nhypergraph {ours}");
    assert!((baseline.accuracy - 0.5).abs() < 0.15, "{baseline}");
    assert!(ours.accuracy > baseline.accuracy + 0.2);
}
