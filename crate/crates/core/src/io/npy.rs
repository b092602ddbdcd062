//! Single-array NPY (format version 1.0) reading and writing.
//!
//! Writing always produces little-endian float32, C order, with the header
//! padded by spaces and a trailing newline so that the data starts on a
//! 64-byte boundary. Reading also accepts little-endian float64 and promotes
//! everything to `f64`. Fortran-order arrays are rejected.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{FeatureMap, ScalarField};

pub const MAGIC: [u8; 6] = *b"\x93NUMPY";
const PREAMBLE_LEN: usize = 10;
const ALIGN: usize = 64;

/// Either kind of array an NPY file can hold.
#[derive(Clone, Debug, PartialEq)]
pub enum Array {
    Scalar(ScalarField),
    Feature(FeatureMap),
}

impl Array {
    pub fn into_scalar(self) -> Result<ScalarField> {
        match self {
            Array::Scalar(s) => Ok(s),
            Array::Feature(f) => Err(Error::Validation(format!(
                "expected a 2-D array, got shape ({}, {}, {})",
                f.channels(),
                f.height(),
                f.width()
            ))),
        }
    }

    /// A 2-D array is accepted as a single-channel feature map.
    pub fn into_features(self) -> Result<FeatureMap> {
        match self {
            Array::Feature(f) => Ok(f),
            Array::Scalar(s) => FeatureMap::from_channels(&[s]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dtype {
    F4,
    F8,
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

fn header_text(shape: &[usize]) -> String {
    let dims = match shape {
        [n] => format!("({n},)"),
        _ => format!(
            "({})",
            shape
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut dict = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': {dims}, }}");
    let unpadded = PREAMBLE_LEN + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat(' ').take(pad));
    dict.push('\n');
    dict
}

fn encode(shape: &[usize], values: &[f64]) -> Vec<u8> {
    let header = header_text(shape);
    let mut out = Vec::with_capacity(PREAMBLE_LEN + header.len() + 4 * values.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn encode_scalar(field: &ScalarField) -> Vec<u8> {
    encode(&[field.height(), field.width()], field.data())
}

pub fn encode_features(map: &FeatureMap) -> Vec<u8> {
    encode(&[map.channels(), map.height(), map.width()], map.data())
}

/// Extracts the value text following `'key':` in a header dict.
fn dict_value<'a>(dict: &'a str, key: &str, base: usize) -> Result<(&'a str, usize)> {
    let needle = format!("'{key}'");
    let at = dict
        .find(&needle)
        .ok_or_else(|| format_err(base, format!("header has no '{key}' entry")))?;
    let rest = &dict[at + needle.len()..];
    let colon = rest
        .find(':')
        .ok_or_else(|| format_err(base + at, format!("missing ':' after '{key}'")))?;
    let value_start = at + needle.len() + colon + 1;
    Ok((dict[value_start..].trim_start(), base + value_start))
}

fn parse_header(dict: &str, base: usize) -> Result<(Dtype, Vec<usize>)> {
    let (descr, off) = dict_value(dict, "descr", base)?;
    let dtype = if descr.starts_with("'<f4'") {
        Dtype::F4
    } else if descr.starts_with("'<f8'") {
        Dtype::F8
    } else {
        let shown: String = descr.chars().take(8).collect();
        return Err(format_err(
            off,
            format!("unsupported dtype {shown}, expected '<f4' or '<f8'"),
        ));
    };

    let (order, off) = dict_value(dict, "fortran_order", base)?;
    if order.starts_with("True") {
        return Err(format_err(off, "fortran-order arrays are not supported"));
    } else if !order.starts_with("False") {
        return Err(format_err(off, "fortran_order must be True or False"));
    }

    let (shape_text, off) = dict_value(dict, "shape", base)?;
    if !shape_text.starts_with('(') {
        return Err(format_err(off, "shape must be a tuple"));
    }
    let close = shape_text
        .find(')')
        .ok_or_else(|| format_err(off, "unterminated shape tuple"))?;
    let shape = shape_text[1..close]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| format_err(off, format!("bad shape dimension '{s}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((dtype, shape))
}

pub fn decode(bytes: &[u8]) -> Result<Array> {
    if bytes.len() < PREAMBLE_LEN || bytes[..6] != MAGIC {
        return Err(format_err(0, "missing NPY magic string"));
    }
    let header_len = match (bytes[6], bytes[7]) {
        (1, 0) => u16::from_le_bytes([bytes[8], bytes[9]]) as usize,
        (major, minor) => {
            return Err(format_err(
                6,
                format!("unsupported NPY version {major}.{minor}, expected 1.0"),
            ))
        }
    };
    let data_start = PREAMBLE_LEN + header_len;
    if bytes.len() < data_start {
        return Err(format_err(bytes.len(), "truncated header"));
    }
    let dict = std::str::from_utf8(&bytes[PREAMBLE_LEN..data_start])
        .map_err(|e| format_err(PREAMBLE_LEN + e.valid_up_to(), "header is not ASCII"))?;
    let (dtype, shape) = parse_header(dict, PREAMBLE_LEN)?;

    let count: usize = shape.iter().product();
    let width = match dtype {
        Dtype::F4 => 4,
        Dtype::F8 => 8,
    };
    let payload = &bytes[data_start..];
    if payload.len() != count * width {
        return Err(format_err(
            data_start,
            format!(
                "payload has {} bytes, shape {:?} needs {}",
                payload.len(),
                shape,
                count * width
            ),
        ));
    }
    let values: Vec<f64> = match dtype {
        Dtype::F4 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        Dtype::F8 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "non-finite value at element {i} (byte {})",
            data_start + i * width
        )));
    }
    match shape[..] {
        [h, w] => Ok(Array::Scalar(ScalarField::new(h, w, values)?)),
        [c, h, w] => Ok(Array::Feature(FeatureMap::new(c, h, w, values)?)),
        _ => Err(format_err(
            PREAMBLE_LEN,
            format!("expected a 2-D or 3-D array, got rank {}", shape.len()),
        )),
    }
}

pub fn read_array(path: impl AsRef<Path>) -> Result<Array> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write_scalar(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_scalar(field)).map_err(|e| Error::io(path, e))
}

pub fn write_features(map: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_features(map)).map_err(|e| Error::io(path, e))
}

pub fn write_array(array: &Array, path: impl AsRef<Path>) -> Result<()> {
    match array {
        Array::Scalar(s) => write_scalar(s, path),
        Array::Feature(f) => write_features(f, path),
    }
}
