//! Training losses: partial cross-entropy on annotated pixels and the
//! entropy-weighted KL divergence towards the variational segmentation.
//!
//! Natural logarithms throughout; probabilities are clamped to
//! `[LOG_EPS, 1 - LOG_EPS]` before any logarithm.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridPoint, ScalarField, Shape};
use crate::io::AnnotationFile;

pub const LOG_EPS: f64 = 1e-7;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(LOG_EPS, 1.0 - LOG_EPS)
}

/// Labeled pixels `(row-major index, label)`, sorted by index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseLabels {
    shape: Shape,
    entries: Vec<(usize, u8)>,
}

impl SparseLabels {
    pub fn new(shape: Shape, entries: Vec<(usize, u8)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, label) in entries {
            if idx >= shape.len() {
                return Err(Error::invalid(format!("label index {idx} outside {shape}")));
            }
            if label > 1 {
                return Err(Error::invalid(format!("label {label} is not 0 or 1")));
            }
            if map.insert(idx, label).is_some() {
                return Err(Error::invalid(format!("pixel {idx} labeled twice")));
            }
        }
        Ok(SparseLabels {
            shape,
            entries: map.into_iter().collect(),
        })
    }

    /// In-target points become label 1, out-of-target points label 0, in
    /// field coordinates. With `expand`, each point claims its clipped 3×3
    /// neighbourhood and pixels claimed by both classes are dropped.
    pub fn from_annotations(ann: &AnnotationFile, shape: Shape, expand: bool) -> Result<Self> {
        ann.check_fits(shape)?;
        let claim = |pts: Vec<GridPoint>| -> Vec<usize> {
            let mut out = Vec::new();
            for p in pts {
                if !expand {
                    out.push(shape.index(p));
                    continue;
                }
                for y in p.y.saturating_sub(1)..=(p.y + 1).min(shape.height - 1) {
                    for x in p.x.saturating_sub(1)..=(p.x + 1).min(shape.width - 1) {
                        out.push(shape.index(GridPoint::new(x, y)));
                    }
                }
            }
            out
        };
        let mut labels: BTreeMap<usize, Option<u8>> = BTreeMap::new();
        for (label, pixels) in [(1u8, claim(ann.in_target_field())), (0, claim(ann.out_of_target_field()))] {
            for idx in pixels {
                labels
                    .entry(idx)
                    .and_modify(|slot| {
                        if *slot != Some(label) {
                            *slot = None;
                        }
                    })
                    .or_insert(Some(label));
            }
        }
        let entries = labels
            .into_iter()
            .filter_map(|(idx, l)| l.map(|l| (idx, l)))
            .collect();
        SparseLabels::new(shape, entries)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn entries(&self) -> &[(usize, u8)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Mean binary cross-entropy over the labeled pixels only.
pub fn partial_cross_entropy(yhat: &ScalarField, labels: &SparseLabels) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::invalid("partial cross-entropy over an empty label set"));
    }
    if yhat.shape() != labels.shape {
        return Err(Error::shape(labels.shape, yhat.shape()));
    }
    let sum: f64 = labels
        .entries
        .iter()
        .map(|&(idx, y)| {
            let p = clamp_prob(yhat.data()[idx]);
            if y == 1 {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum();
    Ok(-sum / labels.len() as f64)
}

/// Natural-log binary entropy with `0 ln 0 = 0`.
fn binary_entropy(u: f64) -> f64 {
    let term = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    term(u) + term(1.0 - u)
}

/// `w = exp(-2 h(u))`: 1 at confident pixels, 0.25 at `u = 0.5`.
pub fn entropy_weights(u: &ScalarField) -> ScalarField {
    u.map(|v| (-2.0 * binary_entropy(v.clamp(0.0, 1.0))).exp())
}

/// Bernoulli KL divergence `KL(u || yhat)` with clamped logs.
fn bernoulli_kl(u: f64, yhat: f64) -> f64 {
    let y = clamp_prob(yhat);
    let term = |p: f64, q: f64| if p > 0.0 { p * (p / q).ln() } else { 0.0 };
    term(u, y) + term(1.0 - u, 1.0 - y)
}

/// Mean over all pixels of `w(u) · KL(u || yhat)`.
pub fn weighted_kl(yhat: &ScalarField, u: &ScalarField) -> Result<f64> {
    yhat.ensure_same_shape(u)?;
    if u.is_empty() {
        return Err(Error::invalid("weighted KL over an empty field"));
    }
    let w = entropy_weights(u);
    let sum: f64 = yhat
        .data()
        .iter()
        .zip(u.data())
        .zip(w.data())
        .map(|((&y, &uv), &wv)| wv * bernoulli_kl(uv.clamp(0.0, 1.0), y))
        .sum();
    Ok(sum / u.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub pce: f64,
    pub wkl: f64,
}

pub fn total_loss(yhat: &ScalarField, labels: &SparseLabels, u: &ScalarField) -> Result<LossReport> {
    let pce = partial_cross_entropy(yhat, labels)?;
    let wkl = weighted_kl(yhat, u)?;
    Ok(LossReport {
        total: pce + wkl,
        pce,
        wkl,
    })
}
