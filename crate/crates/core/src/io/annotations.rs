//! Point annotation files.
//!
//! ```json
//! {
//!   "image_width": 64,
//!   "image_height": 64,
//!   "reduction_factor": 1,
//!   "in_target": [[12, 30], [20, 31]],
//!   "out_of_target": [[50, 4]]
//! }
//! ```
//!
//! Coordinates are `[x, y]` in image pixels. Field coordinates are obtained
//! by floor division with `reduction_factor`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridPoint, Shape};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    pub image_width: i64,
    pub image_height: i64,
    pub reduction_factor: i64,
    pub in_target: Vec<[i64; 2]>,
    pub out_of_target: Vec<[i64; 2]>,
}

impl AnnotationFile {
    /// Builds and validates an annotation set from field/image points.
    pub fn new(
        image_width: usize,
        image_height: usize,
        reduction_factor: usize,
        in_target: &[GridPoint],
        out_of_target: &[GridPoint],
    ) -> Result<Self> {
        let conv = |pts: &[GridPoint]| pts.iter().map(|p| [p.x as i64, p.y as i64]).collect();
        let ann = AnnotationFile {
            image_width: image_width as i64,
            image_height: image_height as i64,
            reduction_factor: reduction_factor as i64,
            in_target: conv(in_target),
            out_of_target: conv(out_of_target),
        };
        ann.validate()?;
        Ok(ann)
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_width <= 0 || self.image_height <= 0 {
            return Err(Error::Validation(format!(
                "image size {}x{} must be positive",
                self.image_width, self.image_height
            )));
        }
        if self.reduction_factor < 1 {
            return Err(Error::Validation(format!(
                "reduction_factor {} must be >= 1",
                self.reduction_factor
            )));
        }
        for (name, set) in [("in_target", &self.in_target), ("out_of_target", &self.out_of_target)] {
            let mut seen = HashSet::new();
            for &[x, y] in set.iter() {
                if x < 0 || y < 0 || x >= self.image_width || y >= self.image_height {
                    return Err(Error::Validation(format!(
                        "{name} point ({x}, {y}) outside image {}x{}",
                        self.image_width, self.image_height
                    )));
                }
                if !seen.insert((x, y)) {
                    return Err(Error::Validation(format!(
                        "{name} point ({x}, {y}) listed twice"
                    )));
                }
            }
        }
        let inside: HashSet<GridPoint> = self.in_target_field().into_iter().collect();
        for (&[x, y], fp) in self.out_of_target.iter().zip(self.out_of_target_field()) {
            if inside.contains(&fp) {
                return Err(Error::Validation(format!(
                    "out_of_target point ({x}, {y}) maps to field point {fp} which is also in-target"
                )));
            }
        }
        Ok(())
    }

    /// Feature-map shape implied by the image size and reduction factor
    /// (ceiling division, so every valid point lands inside it).
    pub fn field_shape(&self) -> Shape {
        let r = self.reduction_factor.max(1);
        Shape::new(
            ((self.image_height + r - 1) / r) as usize,
            ((self.image_width + r - 1) / r) as usize,
        )
    }

    fn rescale(&self, pts: &[[i64; 2]]) -> Vec<GridPoint> {
        let r = self.reduction_factor.max(1);
        pts.iter()
            .map(|&[x, y]| GridPoint::new((x / r) as usize, (y / r) as usize))
            .collect()
    }

    pub fn in_target_field(&self) -> Vec<GridPoint> {
        self.rescale(&self.in_target)
    }

    pub fn out_of_target_field(&self) -> Vec<GridPoint> {
        self.rescale(&self.out_of_target)
    }

    /// Checks that every rescaled point lies inside a field of `shape`.
    pub fn check_fits(&self, shape: Shape) -> Result<()> {
        for p in self.in_target_field().into_iter().chain(self.out_of_target_field()) {
            if !shape.contains(p) {
                return Err(Error::Validation(format!(
                    "field point {p} outside array of shape {shape}"
                )));
            }
        }
        Ok(())
    }
}

pub fn parse_annotations(text: &str) -> Result<AnnotationFile> {
    let ann: AnnotationFile = serde_json::from_str(text).map_err(|e| Error::Format {
        offset: text
            .lines()
            .take(e.line().saturating_sub(1))
            .map(|l| l.len() + 1)
            .sum::<usize>()
            + e.column().saturating_sub(1),
        message: e.to_string(),
    })?;
    ann.validate()?;
    Ok(ann)
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<AnnotationFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text)
}

pub fn write_annotations(ann: &AnnotationFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(ann).expect("annotation serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
