//! Dense 2-D fields, multi-channel feature maps and binary masks.
//!
//! All storage is row-major with `(row, col)` indexing. External coordinates
//! are `(x, y)` with `x` the column and `y` the row; [`GridPoint`] carries them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A pixel location in field space, `x` = column, `y` = row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: usize,
    pub y: usize,
}

impl GridPoint {
    pub fn new(x: usize, y: usize) -> Self {
        GridPoint { x, y }
    }
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Height × width of a 2-D grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(height: usize, width: usize) -> Self {
        Shape { height, width }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, p: GridPoint) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn index(&self, p: GridPoint) -> usize {
        p.y * self.width + p.x
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Data(format!("non-finite value at element {i}"))),
        None => Ok(()),
    }
}

/// A real-valued H×W field.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    shape: Shape,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(
                format!("{} elements", height * width),
                format!("{} elements", data.len()),
            ));
        }
        check_finite(&data)?;
        Ok(ScalarField {
            shape: Shape::new(height, width),
            data,
        })
    }

    /// Builds a field from nested rows. Panics on ragged input; intended for
    /// literals in tests and examples.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(height * width);
        for r in rows {
            assert_eq!(r.as_ref().len(), width, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        ScalarField::new(height, width, data).expect("finite literal")
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        ScalarField {
            shape: Shape::new(height, width),
            data: vec![value; height * width],
        }
    }

    /// Evaluates `f(row, col)` at every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        ScalarField {
            shape: Shape::new(height, width),
            data,
        }
    }

    pub(crate) fn from_vec_unchecked(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        ScalarField { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.shape.width + col]
    }

    pub fn at(&self, p: GridPoint) -> f64 {
        self.data[self.shape.index(p)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn ensure_same_shape(&self, other: &ScalarField) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(self.shape, other.shape));
        }
        Ok(())
    }

    /// Largest elementwise absolute difference.
    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A C×H×W feature map, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    shape: Shape,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::shape(
                format!("{} elements", channels * height * width),
                format!("{} elements", data.len()),
            ));
        }
        check_finite(&data)?;
        Ok(FeatureMap {
            channels,
            shape: Shape::new(height, width),
            data,
        })
    }

    /// Stacks equally shaped scalar fields as channels.
    pub fn from_channels(channels: &[ScalarField]) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::invalid("feature map needs at least one channel"))?;
        let mut data = Vec::with_capacity(channels.len() * first.len());
        for ch in channels {
            first.ensure_same_shape(ch)?;
            data.extend_from_slice(ch.data());
        }
        Ok(FeatureMap {
            channels: channels.len(),
            shape: first.shape(),
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.shape.len();
        &self.data[c * n..(c + 1) * n]
    }

    /// The feature vector at pixel index `idx` (row-major).
    pub fn vector_at_index(&self, idx: usize) -> Vec<f64> {
        let n = self.shape.len();
        (0..self.channels).map(|c| self.data[c * n + idx]).collect()
    }
}

/// An H×W field of exact 0/1 values.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    shape: Shape,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(
                format!("{} elements", height * width),
                format!("{} elements", data.len()),
            ));
        }
        if let Some(i) = data.iter().position(|&v| v > 1) {
            return Err(Error::Data(format!(
                "mask element {i} is {}, expected 0 or 1",
                data[i]
            )));
        }
        Ok(BinaryMask {
            shape: Shape::new(height, width),
            data,
        })
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let data: Vec<u8> = rows.iter().flat_map(|r| r.as_ref().to_vec()).collect();
        BinaryMask::new(height, width, data).expect("valid mask literal")
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        BinaryMask {
            shape: Shape::new(height, width),
            data: vec![0; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c) as u8);
            }
        }
        BinaryMask {
            shape: Shape::new(height, width),
            data,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.shape.width + col] == 1
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            shape: self.shape,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField::from_vec_unchecked(self.shape, self.data.iter().map(|&v| v as f64).collect())
    }
}

/// Rescales `m` to `[0, 1]` by `(m - min) / (max - min)`.
///
/// A constant field maps to all zeros.
pub fn normalize_minmax(m: &ScalarField) -> ScalarField {
    let (lo, hi) = m
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if m.is_empty() || hi <= lo {
        return ScalarField::zeros(m.height(), m.width());
    }
    let range = hi - lo;
    m.map(|v| ((v - lo) / range).clamp(0.0, 1.0))
}

/// `1` where `u > gamma` (strictly), `0` elsewhere.
pub fn threshold(u: &ScalarField, gamma: f64) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("threshold {gamma} outside [0, 1]")));
    }
    Ok(BinaryMask {
        shape: u.shape,
        data: u.data.iter().map(|&v| (v > gamma) as u8).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

pub fn field_stats(m: &ScalarField) -> Result<FieldStats> {
    if m.is_empty() {
        return Err(Error::invalid("statistics of an empty field"));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in &m.data {
        min = min.min(v);
        max = max.max(v);
    }
    Ok(FieldStats {
        min,
        max,
        mean: m.data.iter().sum::<f64>() / m.len() as f64,
    })
}

/// Elementwise mean of equally shaped fields.
///
/// Per pixel the values are sorted before summation, so the result is
/// bitwise independent of the order of `fields`.
pub fn order_independent_mean(fields: &[&ScalarField]) -> Result<ScalarField> {
    let first = fields
        .first()
        .ok_or_else(|| Error::invalid("mean of an empty list of fields"))?;
    for f in fields {
        first.ensure_same_shape(f)?;
    }
    let n = fields.len() as f64;
    let mut column = vec![0.0; fields.len()];
    let data = (0..first.len())
        .map(|i| {
            for (slot, f) in column.iter_mut().zip(fields) {
                *slot = f.data[i];
            }
            column.sort_by(f64::total_cmp);
            column.iter().sum::<f64>() / n
        })
        .collect();
    Ok(ScalarField::from_vec_unchecked(first.shape, data))
}
