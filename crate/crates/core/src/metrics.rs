//! Segmentation metrics: Dice, accuracy, Cohen's kappa and ROC AUC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BinaryMask, ScalarField};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts> {
    if pred.shape() != gt.shape() {
        return Err(Error::invalid(format!(
            "prediction {} and ground truth {} differ in shape",
            pred.shape(),
            gt.shape()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        match (p, g) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fp += 1,
            (_, 1) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    Ok(c)
}

/// `2tp / (2tp + fp + fn)`; two empty masks score 1.
pub fn dice(c: &ConfusionCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        1.0
    } else {
        (2 * c.tp) as f64 / denom as f64
    }
}

pub fn accuracy(c: &ConfusionCounts) -> f64 {
    let n = c.total();
    if n == 0 {
        1.0
    } else {
        (c.tp + c.tn) as f64 / n as f64
    }
}

/// Cohen's kappa. When chance agreement is 1 the value is 1 for perfect
/// agreement and 0 otherwise.
pub fn kappa(c: &ConfusionCounts) -> f64 {
    let n = c.total() as f64;
    if n == 0.0 {
        return 1.0;
    }
    let po = accuracy(c);
    let pred_pos = (c.tp + c.fp) as f64;
    let gt_pos = (c.tp + c.fn_) as f64;
    let pe = (pred_pos * gt_pos + (n - pred_pos) * (n - gt_pos)) / (n * n);
    if pe >= 1.0 {
        if po >= 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (po - pe) / (1.0 - pe)
    }
}

/// Area under the ROC curve from the Mann–Whitney rank statistic, ties
/// counting one half.
pub fn auc(scores: &ScalarField, gt: &BinaryMask) -> Result<f64> {
    if scores.shape() != gt.shape() {
        return Err(Error::invalid(format!(
            "scores {} and ground truth {} differ in shape",
            scores.shape(),
            gt.shape()
        )));
    }
    auc_from_slices(scores.data(), gt.data())
}

pub(crate) fn auc_from_slices(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs both positive and negative pixels".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of 1-based mid-ranks of positives, accumulated twice to stay integral
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u128;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        twice_rank_sum += twice_mid * pos_in_group;
        i = j + 1;
    }
    let (p, q) = (n_pos as u128, n_neg as u128);
    // U = R - p(p+1)/2; AUC = U / (p q)
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * q) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dice: f64,
    pub accuracy: f64,
    pub kappa: f64,
    pub auc: f64,
}

/// All four metrics. `scores` defaults to the prediction mask itself.
pub fn evaluate(pred: &BinaryMask, gt: &BinaryMask, scores: Option<&ScalarField>) -> Result<MetricsReport> {
    let c = confusion(pred, gt)?;
    let fallback;
    let scores = match scores {
        Some(s) => s,
        None => {
            fallback = pred.to_field();
            &fallback
        }
    };
    Ok(MetricsReport {
        dice: dice(&c),
        accuracy: accuracy(&c),
        kappa: kappa(&c),
        auc: auc(scores, gt)?,
    })
}
