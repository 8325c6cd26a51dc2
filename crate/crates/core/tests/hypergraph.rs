mod common;

use common::{random_dataset, rng};
use hgfnd::hypergraph::{
    build_entity_hyperedges, build_time_hyperedges, build_user_hyperedges, clique_expansion, concat_hypergraphs, stats,
};
use hgfnd::{Dataset, Hyperedge, HyperedgeKind, Hypergraph, TimeGranularity};

// 2020-01-01T00:00:00Z
const NEW_YEAR: i64 = 1_577_836_800;

fn with_engagements(engagements: &[&[(&str, i64)]]) -> Dataset {
    let mut r = rng(0);
    let mut ds = random_dataset(&mut r, engagements.len(), 2, 1);
    for (tree, list) in ds.trees.iter_mut().zip(engagements) {
        let template = tree.nodes[0].clone();
        tree.nodes = list
            .iter()
            .enumerate()
            .map(|(idx, &(user, ts))| hgfnd::TreeNode {
                idx,
                user: user.to_string(),
                ts,
                ..template.clone()
            })
            .collect();
        tree.edges = (1..list.len()).map(|c| (0, c)).collect();
    }
    ds
}

#[test]
fn user_shared_by_three_news_forms_one_hyperedge() {
    let ds = with_engagements(&[
        &[("a", 0)],
        &[("b", 0)],
        &[("c", 0)],
        &[("d", 0), ("fan", 1)],
        &[("e", 0), ("fan", 1)],
        &[("f", 0), ("fan", 1)],
    ]);
    let edges = build_user_hyperedges(&ds);
    assert_eq!(edges.len(), 1);
    assert_eq!(edges[0].key, "fan");
    assert_eq!(edges[0].members, [3, 4, 5]);
    let graph = clique_expansion(&Hypergraph::new(6, edges).unwrap());
    assert_eq!(graph.edges, [(3, 4), (3, 5), (4, 5)]);
}

#[test]
fn users_confined_to_one_tree_give_no_hyperedges() {
    let ds = with_engagements(&[&[("a", 0), ("b", 1)], &[("c", 0)], &[("d", 0), ("e", 5)]]);
    assert!(build_user_hyperedges(&ds).is_empty());
}

#[test]
fn same_day_engagements_share_a_day_bucket_but_not_an_hour_bucket() {
    let ds = with_engagements(&[&[("a", NEW_YEAR + 3 * 3600)], &[("b", NEW_YEAR + 21 * 3600)]]);
    let day = build_time_hyperedges(&ds, TimeGranularity::Day);
    assert_eq!(day.len(), 1);
    assert_eq!(day[0].members, [0, 1]);
    assert!(build_time_hyperedges(&ds, TimeGranularity::Hour).is_empty());
}

#[test]
fn identical_timestamps_give_one_hyperedge_over_everything() {
    let ds = with_engagements(&[
        &[("a", NEW_YEAR)],
        &[("b", NEW_YEAR)],
        &[("c", NEW_YEAR)],
        &[("d", NEW_YEAR)],
    ]);
    for granularity in [TimeGranularity::Day, TimeGranularity::Hour] {
        let edges = build_time_hyperedges(&ds, granularity);
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].members, [0, 1, 2, 3]);
    }
}

#[test]
fn day_buckets_floor_at_utc_midnight() {
    let ds = with_engagements(&[&[("a", NEW_YEAR - 1)], &[("b", NEW_YEAR)], &[("c", NEW_YEAR + 86_399)]]);
    let edges = build_time_hyperedges(&ds, TimeGranularity::Day);
    assert_eq!(edges.len(), 1);
    assert_eq!(edges[0].members, [1, 2]);
}

#[test]
fn entities_are_case_folded() {
    let mut ds = with_engagements(&[&[("a", 0)], &[("b", 0)], &[("c", 0)]]);
    assert!(build_entity_hyperedges(&ds).is_empty());
    ds.items[0].entities.insert("covid-19".into());
    ds.items[2].entities.insert("COVID-19".into());
    ds.items[1].entities.insert("Senate".into());
    let edges = build_entity_hyperedges(&ds);
    assert_eq!(edges.len(), 1);
    assert_eq!(edges[0].members, [0, 2]);
}

fn part(kind: HyperedgeKind, count: usize) -> Vec<Hyperedge> {
    (0..count)
        .map(|j| Hyperedge {
            id: j,
            kind,
            key: format!("{kind}{j}"),
            members: vec![j % 50, 50 + j % 50],
        })
        .collect()
}

#[test]
fn concatenation_counts_every_part() {
    let h = concat_hypergraphs(
        vec![
            part(HyperedgeKind::User, 2953),
            part(HyperedgeKind::Time, 1717),
            part(HyperedgeKind::Entity, 1040),
        ],
        100,
    )
    .unwrap();
    assert_eq!(h.n_hyperedges(), 5710);
    assert_eq!(h.hyperedges()[2953].kind, HyperedgeKind::Time);
    assert_eq!(h.hyperedges()[2953].id, 2953);
    assert_eq!(h.hyperedges()[5709].kind, HyperedgeKind::Entity);
}

#[test]
fn identical_member_sets_across_kinds_stay_distinct() {
    let pair = |kind| Hyperedge {
        id: 0,
        kind,
        key: "k".into(),
        members: vec![1, 2],
    };
    let h = concat_hypergraphs(
        vec![vec![pair(HyperedgeKind::User)], vec![pair(HyperedgeKind::Time)]],
        3,
    )
    .unwrap();
    assert_eq!(h.n_hyperedges(), 2);
    assert_eq!(h.incident(1), [0, 1]);
}

#[test]
fn stats_of_single_triple() {
    let h = common::hypergraph(3, &[&[0, 1, 2]]);
    let s = stats(&h);
    let overall = s.overall();
    assert_eq!(overall.hyperedges, 1);
    assert_eq!(overall.mean_size, 3.0);
    assert_eq!(overall.max_size, 3);
    assert_eq!(overall.mean_degree, 1.0);
    assert_eq!(overall.max_degree, 1);
}

#[test]
fn stats_of_empty_hypergraph_are_zero() {
    let h = Hypergraph::new(4, Vec::new()).unwrap();
    let s = stats(&h);
    for row in &s.rows {
        assert_eq!(row.hyperedges, 0);
        assert_eq!(row.mean_size, 0.0);
        assert_eq!(row.max_size, 0);
        assert_eq!(row.mean_degree, 0.0);
        assert_eq!(row.max_degree, 0);
    }
}

#[test]
fn serialized_form_is_deterministic_and_round_trips() {
    let ds = hgfnd::data::generate_synthetic(&hgfnd::SyntheticConfig::default()).unwrap();
    let a = hgfnd::hypergraph::build_hypergraph(&ds, &HyperedgeKind::ALL, TimeGranularity::Day).unwrap();
    let b = hgfnd::hypergraph::build_hypergraph(&ds, &HyperedgeKind::ALL, TimeGranularity::Day).unwrap();
    assert_eq!(a.to_text(), b.to_text());
    assert_eq!(Hypergraph::from_text(&a.to_text()).unwrap(), a);
}
