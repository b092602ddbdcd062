//! Correlation maps (cosine similarity against an annotated feature vector)
//! and contrast maps between in-target and out-of-target correlations.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{normalize_minmax, order_independent_mean, FeatureMap, GridPoint, ScalarField};
use crate::io::AnnotationFile;

pub const DEFAULT_ETA: f64 = 0.6;

pub fn extract_feature(map: &FeatureMap, point: GridPoint) -> Result<Vec<f64>> {
    if !map.shape().contains(point) {
        return Err(Error::invalid(format!(
            "point {point} outside feature map {}",
            map.shape()
        )));
    }
    Ok(map.vector_at_index(map.shape().index(point)))
}

/// Cosine similarity between `feature` and every pixel vector of `map`.
///
/// Pixels where either vector has zero norm get similarity 0.
pub fn cosine_similarity_map(feature: &[f64], map: &FeatureMap) -> Result<ScalarField> {
    if feature.len() != map.channels() {
        return Err(Error::shape(
            format!("{} channels", map.channels()),
            format!("feature of length {}", feature.len()),
        ));
    }
    let n = map.shape().len();
    let mut dot = vec![0.0; n];
    let mut sq = vec![0.0; n];
    for (c, &fc) in feature.iter().enumerate() {
        for ((d, s), &a) in dot.iter_mut().zip(sq.iter_mut()).zip(map.channel(c)) {
            *d += fc * a;
            *s += a * a;
        }
    }
    let ff: f64 = feature.iter().map(|v| v * v).sum();
    let data = dot
        .iter()
        .zip(&sq)
        .map(|(&d, &aa)| {
            let denom = (ff * aa).sqrt();
            if denom > 0.0 {
                (d / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    ScalarField::new(map.height(), map.width(), data)
}

/// `normalize_minmax(relu(s_p - eta * s_q)^2)`.
pub fn contrast_map(s_p: &ScalarField, s_q: &ScalarField, eta: f64) -> Result<ScalarField> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta {eta} outside [0, 1]")));
    }
    s_p.ensure_same_shape(s_q)?;
    let raw: Vec<f64> = s_p
        .data()
        .iter()
        .zip(s_q.data())
        .map(|(&p, &q)| {
            let d = (p - eta * q).max(0.0);
            d * d
        })
        .collect();
    Ok(normalize_minmax(&ScalarField::new(s_p.height(), s_p.width(), raw)?))
}

/// Contrast maps of one in-target point against every out-of-target point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointContrasts {
    pub point: GridPoint,
    pub correlation: ScalarField,
    /// One map per out-of-target point, in annotation order.
    pub maps: Vec<ScalarField>,
    /// Elementwise mean of `maps`.
    pub mean: ScalarField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastSet {
    pub out_of_target: Vec<(GridPoint, ScalarField)>,
    pub per_point: Vec<PointContrasts>,
}

/// Builds every contrast map `C_{p,q}` and the per-`p` mean maps.
pub fn build_contrast_set(map: &FeatureMap, ann: &AnnotationFile, eta: f64) -> Result<ContrastSet> {
    let inside = ann.in_target_field();
    let outside = ann.out_of_target_field();
    if inside.is_empty() || outside.is_empty() {
        return Err(Error::invalid(
            "need at least one in-target and one out-of-target point",
        ));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta {eta} outside [0, 1]")));
    }
    ann.check_fits(map.shape())?;

    let correlate = |p: &GridPoint| -> Result<(GridPoint, ScalarField)> {
        let f = extract_feature(map, *p)?;
        Ok((*p, cosine_similarity_map(&f, map)?))
    };
    let q_maps = outside.par_iter().map(correlate).collect::<Result<Vec<_>>>()?;

    let per_point = inside
        .par_iter()
        .map(|p| {
            let (point, s_p) = correlate(p)?;
            let maps = q_maps
                .iter()
                .map(|(_, s_q)| contrast_map(&s_p, s_q, eta))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&ScalarField> = maps.iter().collect();
            let mean = order_independent_mean(&refs)?;
            Ok(PointContrasts {
                point,
                correlation: s_p,
                maps,
                mean,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ContrastSet {
        out_of_target: q_maps,
        per_point,
    })
}
