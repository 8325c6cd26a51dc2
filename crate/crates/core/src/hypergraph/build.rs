use std::collections::{BTreeMap, BTreeSet};

use super::{concat_hypergraphs, Hyperedge, HyperedgeKind, Hypergraph, TimeGranularity};
use crate::data::Dataset;
use crate::error::Result;

fn collect(kind: HyperedgeKind, groups: BTreeMap<String, BTreeSet<usize>>) -> Vec<Hyperedge> {
    groups
        .into_iter()
        .filter(|(_, members)| members.len() >= 2)
        .enumerate()
        .map(|(id, (key, members))| Hyperedge {
            id,
            kind,
            key,
            members: members.into_iter().collect(),
        })
        .collect()
}

/// One hyperedge per user id appearing in at least two news trees (root
/// posters included), ordered by user id.
pub fn build_user_hyperedges(dataset: &Dataset) -> Vec<Hyperedge> {
    let mut groups: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (news, tree) in dataset.trees.iter().enumerate() {
        for node in &tree.nodes {
            groups.entry(node.user.clone()).or_default().insert(news);
        }
    }
    collect(HyperedgeKind::User, groups)
}

/// One hyperedge per UTC day or hour bucket holding engagements of at least
/// two news, ordered by bucket start.
pub fn build_time_hyperedges(dataset: &Dataset, granularity: TimeGranularity) -> Vec<Hyperedge> {
    let width = granularity.seconds();
    let mut buckets: BTreeMap<i64, BTreeSet<usize>> = BTreeMap::new();
    for (news, tree) in dataset.trees.iter().enumerate() {
        for node in &tree.nodes {
            buckets.entry(node.ts.div_euclid(width)).or_default().insert(news);
        }
    }
    buckets
        .into_iter()
        .filter(|(_, members)| members.len() >= 2)
        .enumerate()
        .map(|(id, (bucket, members))| Hyperedge {
            id,
            kind: HyperedgeKind::Time,
            key: format!("{}:{}", granularity.as_str(), bucket * width),
            members: members.into_iter().collect(),
        })
        .collect()
}

/// Case-folds and collapses internal whitespace.
pub fn normalize_entity(raw: &str) -> String {
    raw.split_whitespace()
        .map(|token| token.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// One hyperedge per normalised entity string shared by at least two news.
pub fn build_entity_hyperedges(dataset: &Dataset) -> Vec<Hyperedge> {
    let mut groups: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (news, item) in dataset.items.iter().enumerate() {
        for raw in &item.entities {
            let key = normalize_entity(raw);
            if !key.is_empty() {
                groups.entry(key).or_default().insert(news);
            }
        }
    }
    collect(HyperedgeKind::Entity, groups)
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "as", "at", "but", "by", "for", "from", "he", "her", "his", "i", "if", "in", "is", "it", "its",
    "of", "on", "or", "she", "so", "that", "the", "their", "they", "this", "to", "was", "we", "what", "when", "who",
    "why", "with", "you",
];

/// Fallback entity extractor for unannotated text: maximal runs of
/// capitalised tokens, with stopwords trimmed from both ends of a run.
pub fn extract_entities(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut run: Vec<&str> = Vec::new();
    let mut flush = |run: &mut Vec<&str>| {
        let is_stop = |t: &&str| STOPWORDS.contains(&t.to_lowercase().as_str());
        while run.first().is_some_and(is_stop) {
            run.remove(0);
        }
        while run.last().is_some_and(is_stop) {
            run.pop();
        }
        if !run.is_empty() {
            out.insert(run.join(" "));
        }
        run.clear();
    };
    for raw in text.split_whitespace() {
        let token = raw.trim_matches(|c: char| !c.is_alphanumeric() && c != '-');
        let capitalised = token.chars().next().is_some_and(char::is_uppercase);
        if capitalised {
            run.push(token);
        } else {
            flush(&mut run);
        }
        // Sentence punctuation ends a run even between capitalised tokens.
        if raw.ends_with(['.', ',', ';', ':', '!', '?']) {
            flush(&mut run);
        }
    }
    flush(&mut run);
    out
}

/// Builds the requested hyperedge families and concatenates them in the
/// fixed order User, Time, Entity.
pub fn build_hypergraph(
    dataset: &Dataset,
    kinds: &[HyperedgeKind],
    granularity: TimeGranularity,
) -> Result<Hypergraph> {
    let want = |k| kinds.contains(&k);
    let (user, (time, entity)) = rayon::join(
        || {
            if want(HyperedgeKind::User) {
                build_user_hyperedges(dataset)
            } else {
                Default::default()
            }
        },
        || {
            rayon::join(
                || {
                    if want(HyperedgeKind::Time) {
                        build_time_hyperedges(dataset, granularity)
                    } else {
                        Default::default()
                    }
                },
                || {
                    if want(HyperedgeKind::Entity) {
                        build_entity_hyperedges(dataset)
                    } else {
                        Default::default()
                    }
                },
            )
        },
    );
    concat_hypergraphs(vec![user, time, entity], dataset.len())
}
