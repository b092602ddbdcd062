//! File formats: NPY arrays, annotation JSON, PNG masks/heatmaps and JSON
//! reports.

mod annotations;
mod image;
mod npy;

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub use annotations::{parse_annotations, read_annotations, write_annotations, AnnotationFile};
pub use image::{
    colormap, decode_mask, encode_heatmap, encode_mask, read_mask_png, write_heatmap_png,
    write_mask_png,
};
pub use npy::{
    decode as decode_npy, encode_features, encode_scalar, read_array, write_array, write_features,
    write_scalar, Array,
};

/// Pretty-printed JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json_string(value)).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}
