//! Stratified train/val/test splitting and training-label downsampling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Label, Splits};
use crate::error::{Error, Result};

const CLASSES: [Label; 2] = [Label::Fake, Label::True];

/// Splits `total` across groups proportionally to `sizes` by largest
/// remainder. Ties go to the lower group index.
fn apportion(total: usize, sizes: &[usize]) -> Vec<usize> {
    let population: usize = sizes.iter().sum();
    if population == 0 {
        return vec![0; sizes.len()];
    }
    let mut alloc: Vec<usize> = sizes.iter().map(|&s| total * s / population).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&c| std::cmp::Reverse(total * sizes[c] % population));
    let mut left = total - alloc.iter().sum::<usize>();
    for c in order {
        if left == 0 {
            break;
        }
        alloc[c] += 1;
        left -= 1;
    }
    alloc
}

fn floor_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

fn class_members(dataset: &Dataset, ids: impl Iterator<Item = usize>) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for i in ids {
        if let Some(label) = dataset.items[i].label {
            out[label.index()].push(i);
        }
    }
    out
}

/// Assigns every labeled item to train, val or test.
///
/// Sizes are `floor(fraction * N)` for train and val with the remainder going
/// to test, where `N` counts labeled items. Each class is apportioned so that
/// every split's per-class count stays within one item of the global ratio.
pub fn make_splits(dataset: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<Dataset> {
    let (train_frac, val_frac, test_frac) = fractions;
    if [train_frac, val_frac, test_frac]
        .iter()
        .any(|f| !(*f > 0.0) || !f.is_finite())
    {
        return Err(Error::Validation(format!(
            "split fractions must all be positive, got {fractions:?}"
        )));
    }
    if (train_frac + val_frac + test_frac - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "split fractions must sum to 1, got {fractions:?}"
        )));
    }
    let by_class = class_members(dataset, 0..dataset.len());
    let sizes = [by_class[0].len(), by_class[1].len()];
    let n: usize = sizes.iter().sum();
    if n < 3 {
        return Err(Error::TooSmall(format!("{n} labeled items; at least 3 are needed")));
    }
    let n_train = floor_count(train_frac, n);
    let n_val = floor_count(val_frac, n);
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::Validation(format!(
            "fractions {fractions:?} leave an empty split for {n} labeled items"
        )));
    }

    let train_alloc = apportion(n_train, &sizes);
    // Round val per class against the train rounding error so the test
    // remainder also lands within one item of its ideal share.
    let mut val_alloc = [0usize; 2];
    let mut priority = Vec::new();
    for c in 0..2 {
        val_alloc[c] = n_val * sizes[c] / n;
        let train_error = train_alloc[c] as f64 - (n_train * sizes[c]) as f64 / n as f64;
        let has_fraction = !(n_val * sizes[c]).is_multiple_of(n);
        priority.push((c, train_error < 0.0, has_fraction, (n_val * sizes[c]) % n));
    }
    priority.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(b.2.cmp(&a.2))
            .then(b.3.cmp(&a.3))
            .then(a.0.cmp(&b.0))
    });
    let mut left = n_val - val_alloc.iter().sum::<usize>();
    for &(c, ..) in &priority {
        if left == 0 {
            break;
        }
        if train_alloc[c] + val_alloc[c] < sizes[c] {
            val_alloc[c] += 1;
            left -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut splits = Splits::default();
    for (c, mut members) in by_class.into_iter().enumerate() {
        members.shuffle(&mut rng);
        let (train, rest) = members.split_at(train_alloc[c].min(members.len()));
        let (val, test) = rest.split_at(val_alloc[c].min(rest.len()));
        splits.train.extend_from_slice(train);
        splits.val.extend_from_slice(val);
        splits.test.extend_from_slice(test);
    }
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();

    let mut out = dataset.clone();
    out.splits = splits;
    Ok(out)
}

/// Keeps `ceil(keep_fraction * |train|)` training items, stratified by label,
/// and removes the rest of the training items from the dataset entirely,
/// together with their propagation trees. Validation and test are untouched.
///
/// For a fixed seed the kept set grows monotonically with `keep_fraction`.
pub fn downsample_train_labels(dataset: &Dataset, keep_fraction: f64, seed: u64) -> Result<Dataset> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Validation(format!(
            "keep fraction {keep_fraction} is outside (0, 1]"
        )));
    }
    if keep_fraction == 1.0 {
        return Ok(dataset.clone());
    }
    let by_class = class_members(dataset, dataset.splits.train.iter().copied());
    let sizes = [by_class[0].len(), by_class[1].len()];
    let n_train = dataset.splits.train.len();
    let total = ((keep_fraction * n_train as f64) - 1e-9).ceil().max(0.0) as usize;
    let alloc = apportion(total, &sizes);
    for (c, &k) in alloc.iter().enumerate() {
        if k == 0 {
            return Err(Error::Stratification(format!(
                "keeping {keep_fraction} of {n_train} training items leaves no {:?} examples",
                CLASSES[c]
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dropped = vec![false; dataset.len()];
    for (c, mut members) in by_class.into_iter().enumerate() {
        members.shuffle(&mut rng);
        for &i in &members[alloc[c]..] {
            dropped[i] = true;
        }
    }
    let keep: Vec<usize> = (0..dataset.len()).filter(|&i| !dropped[i]).collect();
    Ok(dataset.retain_items(&keep))
}
