//! On-disk dataset formats.
//!
//! A dataset directory holds:
//!
//! | file                 | content                                             |
//! |----------------------|-----------------------------------------------------|
//! | `features.hgfd`      | news feature matrix, `N x F`                        |
//! | `trees.jsonl`        | one `{news_id, nodes:[{idx,user,ts}], edges}` per line |
//! | `tree_features.hgfd` | node features of all trees, one row per manifest row |
//! | `tree_manifest.csv`  | `news_id,idx` naming each row of `tree_features.hgfd` |
//! | `labels.csv`         | `news_id,label` with label 0 (fake) or 1 (true)     |
//! | `splits.csv`         | `news_id,split` with split in {train,val,test}      |
//! | `entities.csv`       | `news_id,entity`, optional                          |
//!
//! Matrix files are `HGFD`, u32 LE rows, u32 LE cols, then row-major f32 LE.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, Label, NewsItem, PropagationTree, Split, Splits, TreeNode};
use crate::error::{Error, Result};

const MATRIX_MAGIC: &[u8; 4] = b"HGFD";

/// Dense row-major `f32` matrix as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.data.len() * 4);
        out.extend_from_slice(MATRIX_MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MATRIX_MAGIC {
            return Err(Error::Format("matrix file does not start with HGFD magic".into()));
        }
        let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let expected = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format("matrix dimensions overflow".into()))?;
        let payload = &bytes[12..];
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "matrix {rows}x{cols} needs {expected} payload bytes, found {}",
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(FeatureMatrix { rows, cols, data })
    }
}

pub fn read_matrix(path: &Path) -> Result<FeatureMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    FeatureMatrix::from_bytes(&bytes)
}

pub fn write_matrix(path: &Path, matrix: &FeatureMatrix) -> Result<()> {
    fs::write(path, matrix.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Locations of every file making up a dataset.
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub features: PathBuf,
    pub trees: PathBuf,
    pub tree_features: PathBuf,
    pub tree_manifest: PathBuf,
    pub labels: PathBuf,
    pub splits: PathBuf,
    pub entities: PathBuf,
}

impl DatasetPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        DatasetPaths {
            features: dir.join("features.hgfd"),
            trees: dir.join("trees.jsonl"),
            tree_features: dir.join("tree_features.hgfd"),
            tree_manifest: dir.join("tree_manifest.csv"),
            labels: dir.join("labels.csv"),
            splits: dir.join("splits.csv"),
            entities: dir.join("entities.csv"),
        }
    }

    /// Uses the four primary files as given; tree features, manifest and
    /// entities are looked up next to the trees file.
    pub fn from_files(features: &Path, trees: &Path, labels: &Path, splits: &Path) -> Self {
        let sibling_dir = trees.parent().unwrap_or(Path::new("."));
        DatasetPaths {
            features: features.to_path_buf(),
            trees: trees.to_path_buf(),
            tree_features: sibling_dir.join("tree_features.hgfd"),
            tree_manifest: sibling_dir.join("tree_manifest.csv"),
            labels: labels.to_path_buf(),
            splits: splits.to_path_buf(),
            entities: sibling_dir.join("entities.csv"),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TreeRecord {
    news_id: usize,
    nodes: Vec<NodeRecord>,
    edges: Vec<[usize; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRecord {
    idx: usize,
    user: String,
    ts: i64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    news_id: usize,
    idx: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    news_id: usize,
    label: u8,
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitRow {
    news_id: usize,
    split: Split,
}

#[derive(Debug, Serialize, Deserialize)]
struct EntityRow {
    news_id: usize,
    entity: String,
}

fn csv_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    reader
        .deserialize()
        .enumerate()
        .map(|(line, row)| row.map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), line + 2))))
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn check_news_id(id: usize, n: usize, what: &str) -> Result<()> {
    if id >= n {
        return Err(Error::Integrity(format!(
            "{what} references unknown news id {id} (N = {n})"
        )));
    }
    Ok(())
}

pub fn load_dataset(paths: &DatasetPaths) -> Result<Dataset> {
    let features = read_matrix(&paths.features)?;
    let n = features.rows;
    let feature_dim = features.cols;

    let mut items: Vec<NewsItem> = (0..n)
        .map(|i| NewsItem {
            id: i,
            origin: i,
            feature: features.row(i).to_vec(),
            label: None,
            entities: BTreeSet::new(),
        })
        .collect();

    let tree_file = File::open(&paths.trees).map_err(|e| Error::io(&paths.trees, e))?;
    let mut records: Vec<Option<TreeRecord>> = (0..n).map(|_| None).collect();
    for (line_no, line) in BufReader::new(tree_file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&paths.trees, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TreeRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", paths.trees.display(), line_no + 1)))?;
        check_news_id(record.news_id, n, "tree")?;
        let slot = record.news_id;
        if records[slot].replace(record).is_some() {
            return Err(Error::Integrity(format!("news {slot} has more than one tree")));
        }
    }

    let tree_features = read_matrix(&paths.tree_features)?;
    if tree_features.rows > 0 && tree_features.cols != feature_dim {
        return Err(Error::Format(format!(
            "tree feature width {} differs from news feature width {feature_dim}",
            tree_features.cols
        )));
    }
    let manifest: Vec<ManifestRow> = csv_rows(&paths.tree_manifest)?;
    if manifest.len() != tree_features.rows {
        return Err(Error::Integrity(format!(
            "manifest has {} rows but tree feature matrix has {}",
            manifest.len(),
            tree_features.rows
        )));
    }
    let mut feature_row: HashMap<(usize, usize), usize> = HashMap::with_capacity(manifest.len());
    for (row, entry) in manifest.iter().enumerate() {
        check_news_id(entry.news_id, n, "tree manifest")?;
        feature_row.insert((entry.news_id, entry.idx), row);
    }

    let mut trees = Vec::with_capacity(n);
    for (news_id, record) in records.into_iter().enumerate() {
        let record = record.ok_or_else(|| Error::Integrity(format!("news {news_id} has no propagation tree")))?;
        let mut nodes = record
            .nodes
            .into_iter()
            .map(|node| {
                let row = feature_row.get(&(news_id, node.idx)).ok_or_else(|| {
                    Error::Integrity(format!("no feature row for node {} of news {news_id}", node.idx))
                })?;
                Ok(TreeNode {
                    idx: node.idx,
                    user: node.user,
                    ts: node.ts,
                    feature: tree_features.row(*row).to_vec(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        nodes.sort_by_key(|node| node.idx);
        trees.push(PropagationTree {
            news_id,
            nodes,
            edges: record.edges.into_iter().map(|[p, c]| (p, c)).collect(),
        });
    }

    for row in csv_rows::<LabelRow>(&paths.labels)? {
        check_news_id(row.news_id, n, "labels file")?;
        let label = Label::from_index(row.label as usize)
            .ok_or_else(|| Error::Format(format!("label {} for news {} is not 0 or 1", row.label, row.news_id)))?;
        items[row.news_id].label = Some(label);
    }

    let mut split_of: BTreeMap<usize, Split> = BTreeMap::new();
    for row in csv_rows::<SplitRow>(&paths.splits)? {
        check_news_id(row.news_id, n, "splits file")?;
        if let Some(prev) = split_of.insert(row.news_id, row.split) {
            return Err(Error::Validation(format!(
                "news {} assigned to both {} and {}",
                row.news_id,
                prev.as_str(),
                row.split.as_str()
            )));
        }
    }
    let mut splits = Splits::default();
    for (id, split) in split_of {
        match split {
            Split::Train => splits.train.push(id),
            Split::Val => splits.val.push(id),
            Split::Test => splits.test.push(id),
        }
    }

    if paths.entities.exists() {
        for row in csv_rows::<EntityRow>(&paths.entities)? {
            check_news_id(row.news_id, n, "entities file")?;
            items[row.news_id].entities.insert(row.entity);
        }
    }

    let dataset = Dataset {
        items,
        trees,
        splits,
        feature_dim,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Writes every dataset file; directories in `paths` must exist.
pub fn write_dataset(dataset: &Dataset, paths: &DatasetPaths) -> Result<()> {
    write_matrix(&paths.features, &dataset.feature_matrix())?;

    let file = File::create(&paths.trees).map_err(|e| Error::io(&paths.trees, e))?;
    let mut out = BufWriter::new(file);
    let mut tree_rows = Vec::new();
    let mut manifest = Vec::new();
    for tree in &dataset.trees {
        let record = TreeRecord {
            news_id: tree.news_id,
            nodes: tree
                .nodes
                .iter()
                .map(|node| NodeRecord {
                    idx: node.idx,
                    user: node.user.clone(),
                    ts: node.ts,
                })
                .collect(),
            edges: tree.edges.iter().map(|&(p, c)| [p, c]).collect(),
        };
        let line = serde_json::to_string(&record).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(&paths.trees, e))?;
        for node in &tree.nodes {
            tree_rows.extend_from_slice(&node.feature);
            manifest.push(ManifestRow {
                news_id: tree.news_id,
                idx: node.idx,
            });
        }
    }
    out.flush().map_err(|e| Error::io(&paths.trees, e))?;

    write_matrix(
        &paths.tree_features,
        &FeatureMatrix {
            rows: manifest.len(),
            cols: dataset.feature_dim,
            data: tree_rows,
        },
    )?;
    write_csv(&paths.tree_manifest, manifest)?;

    write_csv(
        &paths.labels,
        dataset.items.iter().filter_map(|item| {
            item.label.map(|label| LabelRow {
                news_id: item.id,
                label: label.index() as u8,
            })
        }),
    )?;
    write_csv(
        &paths.splits,
        dataset
            .splits
            .assignment(dataset.len())
            .into_iter()
            .enumerate()
            .filter_map(|(news_id, split)| split.map(|split| SplitRow { news_id, split })),
    )?;
    write_csv(
        &paths.entities,
        dataset.items.iter().flat_map(|item| {
            item.entities.iter().map(move |entity| EntityRow {
                news_id: item.id,
                entity: entity.clone(),
            })
        }),
    )?;
    Ok(())
}
