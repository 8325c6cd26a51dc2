mod common;

use std::fs;

use hgfnd::data::{
    downsample_train_labels, generate_synthetic, load_dataset, make_splits, read_matrix, write_dataset, write_matrix,
    DatasetPaths, FeatureMatrix, Label,
};
use hgfnd::hypergraph::build_hypergraph;
use hgfnd::{Error, HyperedgeKind, SyntheticConfig, TimeGranularity};
use tempfile::tempdir;

fn write_toy(dir: &std::path::Path) {
    let features = FeatureMatrix {
        rows: 5,
        cols: 2,
        data: vec![0.5, -1.0, 1.5, 2.0, 0.0, 0.25, -3.0, 4.0, 1.0, 1.0],
    };
    write_matrix(&dir.join("features.hgfd"), &features).unwrap();
    let trees = [
        r#"{"news_id":0,"nodes":[{"idx":0,"user":"alice","ts":100},{"idx":1,"user":"bob","ts":150}],"edges":[[0,1]]}"#,
        r#"{"news_id":1,"nodes":[{"idx":0,"user":"bob","ts":200}],"edges":[]}"#,
        r#"{"news_id":2,"nodes":[{"idx":0,"user":"carol","ts":300},{"idx":1,"user":"alice","ts":310},{"idx":2,"user":"dave","ts":320}],"edges":[[0,1],[0,2]]}"#,
        r#"{"news_id":3,"nodes":[{"idx":0,"user":"dave","ts":400}],"edges":[]}"#,
        r#"{"news_id":4,"nodes":[{"idx":0,"user":"erin","ts":500}],"edges":[]}"#,
    ];
    fs::write(dir.join("trees.jsonl"), trees.join("\n") + "\n").unwrap();
    let node_ids = [(0, 0), (0, 1), (1, 0), (2, 0), (2, 1), (2, 2), (3, 0), (4, 0)];
    let tree_features = FeatureMatrix {
        rows: node_ids.len(),
        cols: 2,
        data: (0..node_ids.len() * 2).map(|k| k as f32 * 0.5).collect(),
    };
    write_matrix(&dir.join("tree_features.hgfd"), &tree_features).unwrap();
    let manifest: String = node_ids.iter().map(|(n, i)| format!("{n},{i}\n")).collect();
    fs::write(dir.join("tree_manifest.csv"), format!("news_id,idx\n{manifest}")).unwrap();
    fs::write(dir.join("labels.csv"), "news_id,label\n0,0\n1,1\n2,0\n3,1\n4,1\n").unwrap();
    fs::write(
        dir.join("splits.csv"),
        "news_id,split\n0,train\n1,train\n2,val\n3,test\n4,test\n",
    )
    .unwrap();
    fs::write(dir.join("entities.csv"), "news_id,entity\n0,COVID-19\n2,covid-19\n").unwrap();
}

#[test]
fn hand_authored_fixture_loads_field_by_field() {
    let dir = tempdir().unwrap();
    write_toy(dir.path());
    let ds = load_dataset(&DatasetPaths::in_dir(dir.path())).unwrap();
    assert_eq!(ds.len(), 5);
    assert_eq!(ds.feature_dim, 2);
    assert_eq!(ds.items[1].feature, vec![1.5, 2.0]);
    assert_eq!(ds.items[3].feature, vec![-3.0, 4.0]);
    let labels: Vec<_> = ds.items.iter().map(|i| i.label.unwrap()).collect();
    assert_eq!(
        labels,
        [Label::Fake, Label::True, Label::Fake, Label::True, Label::True]
    );
    assert_eq!(ds.splits.train, [0, 1]);
    assert_eq!(ds.splits.val, [2]);
    assert_eq!(ds.splits.test, [3, 4]);
    let tree = &ds.trees[2];
    assert_eq!(tree.nodes.len(), 3);
    assert_eq!(tree.nodes[1].user, "alice");
    assert_eq!(tree.nodes[2].ts, 320);
    assert_eq!(tree.nodes[2].feature, vec![5.0, 5.5]);
    assert_eq!(tree.edges, [(0, 1), (0, 2)]);
    assert!(ds.items[0].entities.contains("COVID-19"));

    let h = build_hypergraph(&ds, &[HyperedgeKind::User, HyperedgeKind::Entity], TimeGranularity::Day).unwrap();
    let members: Vec<(String, Vec<usize>)> = h
        .hyperedges()
        .iter()
        .map(|e| (e.key.clone(), e.members.clone()))
        .collect();
    assert_eq!(
        members,
        [
            ("alice".to_string(), vec![0, 2]),
            ("bob".to_string(), vec![0, 1]),
            ("dave".to_string(), vec![2, 3]),
            ("covid-19".to_string(), vec![0, 2]),
        ]
    );
}

#[test]
fn round_trip_gives_byte_identical_matrices() {
    let first = tempdir().unwrap();
    write_toy(first.path());
    let ds = load_dataset(&DatasetPaths::in_dir(first.path())).unwrap();
    let second = tempdir().unwrap();
    write_dataset(&ds, &DatasetPaths::in_dir(second.path())).unwrap();
    for name in ["features.hgfd", "tree_features.hgfd"] {
        assert_eq!(
            fs::read(first.path().join(name)).unwrap(),
            fs::read(second.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let again = load_dataset(&DatasetPaths::in_dir(second.path())).unwrap();
    assert_eq!(again.items, ds.items);
    assert_eq!(again.trees, ds.trees);
    assert_eq!(again.splits, ds.splits);
}

#[test]
fn politifact_shaped_input_loads_with_314_items() {
    let config = SyntheticConfig {
        n_news: 314,
        n_users: 150,
        ..Default::default()
    };
    let ds = generate_synthetic(&config).unwrap();
    let dir = tempdir().unwrap();
    let paths = DatasetPaths::in_dir(dir.path());
    write_dataset(&ds, &paths).unwrap();
    let loaded = load_dataset(&paths).unwrap();
    assert_eq!(loaded.len(), 314);
    let fake = loaded.items.iter().filter(|i| i.label == Some(Label::Fake)).count();
    assert_eq!(fake, 157);
    assert_eq!(read_matrix(&paths.features).unwrap().rows, 314);
}

#[test]
fn empty_trees_file_is_an_integrity_error() {
    let dir = tempdir().unwrap();
    write_toy(dir.path());
    fs::write(dir.path().join("trees.jsonl"), "").unwrap();
    let err = load_dataset(&DatasetPaths::in_dir(dir.path())).unwrap_err();
    assert!(matches!(err, Error::Integrity(_)), "{err}");
}

#[test]
fn tree_for_unknown_news_is_an_integrity_error() {
    let dir = tempdir().unwrap();
    write_toy(dir.path());
    let path = dir.path().join("trees.jsonl");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str(r#"{"news_id":9,"nodes":[{"idx":0,"user":"x","ts":1}],"edges":[]}"#);
    fs::write(&path, text).unwrap();
    assert!(matches!(
        load_dataset(&DatasetPaths::in_dir(dir.path())),
        Err(Error::Integrity(_))
    ));
}

#[test]
fn bad_magic_is_a_format_error() {
    let dir = tempdir().unwrap();
    write_toy(dir.path());
    let path = dir.path().join("features.hgfd");
    let mut bytes = fs::read(&path).unwrap();
    bytes[0] = b'X';
    fs::write(&path, bytes).unwrap();
    assert!(matches!(
        load_dataset(&DatasetPaths::in_dir(dir.path())),
        Err(Error::Format(_))
    ));
}

#[test]
fn overlapping_splits_are_a_validation_error() {
    let dir = tempdir().unwrap();
    write_toy(dir.path());
    fs::write(dir.path().join("splits.csv"), "news_id,split\n0,train\n0,test\n1,val\n").unwrap();
    assert!(matches!(
        load_dataset(&DatasetPaths::in_dir(dir.path())),
        Err(Error::Validation(_))
    ));
}

fn politifact_shape() -> hgfnd::Dataset {
    generate_synthetic(&SyntheticConfig {
        n_news: 314,
        n_users: 150,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn split_sizes_use_floor_with_remainder_to_test() {
    let ds = make_splits(&politifact_shape(), (0.2, 0.1, 0.7), 3).unwrap();
    assert_eq!(ds.splits.train.len(), 62);
    assert_eq!(ds.splits.val.len(), 31);
    assert_eq!(ds.splits.test.len(), 221);
    let again = make_splits(&politifact_shape(), (0.2, 0.1, 0.7), 3).unwrap();
    assert_eq!(ds.splits, again.splits);
}

#[test]
fn degenerate_split_fractions_are_rejected() {
    assert!(matches!(
        make_splits(&politifact_shape(), (1.0, 0.0, 0.0), 0),
        Err(Error::Validation(_))
    ));
}

#[test]
fn tiny_dataset_cannot_be_split() {
    let mut r = common::rng(0);
    let ds = common::random_dataset(&mut r, 2, 2, 2);
    assert!(matches!(make_splits(&ds, (0.2, 0.1, 0.7), 0), Err(Error::TooSmall(_))));
}

#[test]
fn quarter_of_62_training_labels_keeps_16_and_removes_46_items() {
    let ds = make_splits(&politifact_shape(), (0.2, 0.1, 0.7), 1).unwrap();
    let down = downsample_train_labels(&ds, 0.25, 7).unwrap();
    assert_eq!(down.splits.train.len(), 16);
    assert_eq!(down.len(), 314 - 46);
    assert_eq!(down.splits.val.len(), 31);
    assert_eq!(down.splits.test.len(), 221);

    let kept: std::collections::BTreeSet<usize> = down.items.iter().map(|i| i.origin).collect();
    let removed: Vec<usize> = ds.splits.train.iter().copied().filter(|i| !kept.contains(i)).collect();
    assert_eq!(removed.len(), 46);
    let h = build_hypergraph(&down, &HyperedgeKind::ALL, TimeGranularity::Day).unwrap();
    for edge in h.hyperedges() {
        for &k in &edge.members {
            assert!(k < down.len());
            assert!(!removed.contains(&down.items[k].origin));
        }
    }
    assert_eq!(downsample_train_labels(&ds, 1.0, 7).unwrap().items, ds.items);
}

#[test]
fn fidelity_one_makes_every_user_hyperedge_label_pure() {
    let ds = generate_synthetic(&SyntheticConfig {
        user_fidelity: 1.0,
        ..Default::default()
    })
    .unwrap();
    let h = build_hypergraph(&ds, &[HyperedgeKind::User], TimeGranularity::Day).unwrap();
    assert!(h.n_hyperedges() > 0);
    for edge in h.hyperedges() {
        let first = ds.items[edge.members[0]].label;
        assert!(edge.members.iter().all(|&k| ds.items[k].label == first), "{}", edge.key);
    }
}

#[test]
fn default_synthetic_user_hyperedges_are_mostly_pure() {
    let ds = generate_synthetic(&SyntheticConfig::default()).unwrap();
    let h = build_hypergraph(&ds, &[HyperedgeKind::User], TimeGranularity::Day).unwrap();
    let purity: f64 = h
        .hyperedges()
        .iter()
        .map(|edge| {
            let fake = edge
                .members
                .iter()
                .filter(|&&k| ds.items[k].label == Some(Label::Fake))
                .count();
            fake.max(edge.members.len() - fake) as f64 / edge.members.len() as f64
        })
        .sum::<f64>()
        / h.n_hyperedges() as f64;
    assert!(purity >= 0.9, "purity {purity}");
}

#[test]
fn synthetic_trees_are_valid_and_time_ordered() {
    let ds = generate_synthetic(&SyntheticConfig {
        n_news: 120,
        seed: 4,
        ..Default::default()
    })
    .unwrap();
    for tree in &ds.trees {
        tree.validate(ds.feature_dim).unwrap();
        assert!((2..=30).contains(&tree.nodes.len()));
        for &(p, c) in &tree.edges {
            assert!(tree.nodes[p].ts <= tree.nodes[c].ts);
        }
    }
}
