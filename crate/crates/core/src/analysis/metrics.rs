use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::attention::predict;
use crate::data::Label;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Confusion counts with `fake` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut c = Confusion::default();
        for (truth, pred) in pairs {
            match (truth, pred) {
                (Label::Fake, Label::Fake) => c.tp += 1,
                (Label::True, Label::Fake) => c.fp += 1,
                (Label::True, Label::True) => c.tn += 1,
                (Label::Fake, Label::True) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1_fake: f64,
    pub f1_true: f64,
    /// Mean of the two per-class F1 scores.
    pub f1_macro: f64,
    pub confusion: Confusion,
}

impl Metrics {
    pub fn from_confusion(c: Confusion) -> Self {
        let f1_fake = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
        let f1_true = ratio(2 * c.tn, 2 * c.tn + c.fn_ + c.fp);
        Metrics {
            accuracy: ratio(c.tp + c.tn, c.total()),
            f1_fake,
            f1_true,
            f1_macro: (f1_fake + f1_true) / 2.0,
            confusion: c,
        }
    }

    pub const CSV_HEADER: &'static str = "accuracy,f1_macro,f1_fake,f1_true,tp,fp,tn,fn";

    /// Values in [`Metrics::CSV_HEADER`] order.
    pub fn csv_row(&self) -> String {
        let c = &self.confusion;
        format!(
            "{},{},{},{},{},{},{},{}",
            self.accuracy, self.f1_macro, self.f1_fake, self.f1_true, c.tp, c.fp, c.tn, c.fn_
        )
    }

    pub fn from_predictions(truth: &[Label], predicted: &[Label]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Validation(format!(
                "{} labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        Ok(Self::from_confusion(Confusion::from_pairs(
            truth.iter().copied().zip(predicted.iter().copied()),
        )))
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "acc {:.4}  f1 {:.4} (fake {:.4}, true {:.4})",
            self.accuracy, self.f1_macro, self.f1_fake, self.f1_true
        )
    }
}

/// Metrics of argmax predictions from `logits` on the labeled items of `ids`.
pub fn evaluate_logits<T: Scalar>(logits: &Array2<T>, labels: &[Option<Label>], ids: &[usize]) -> Result<Metrics> {
    let (pred, _) = predict(logits);
    let mut truth = Vec::with_capacity(ids.len());
    let mut guess = Vec::with_capacity(ids.len());
    for &i in ids {
        let (Some(Some(y)), Some(&p)) = (labels.get(i), pred.get(i)) else {
            continue;
        };
        truth.push(*y);
        guess.push(Label::from_index(p).expect("two-class logits"));
    }
    if truth.is_empty() {
        return Err(Error::Validation("no labeled items to evaluate".into()));
    }
    Metrics::from_predictions(&truth, &guess)
}
