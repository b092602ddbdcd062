//! PNG masks and heatmaps.
//!
//! Masks are 8-bit grayscale: written as 0/255, read with any nonzero value
//! mapped to 1. Heatmaps are 8-bit RGB using [`colormap`].

use std::fs;
use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType};

use crate::error::{Error, Result};
use crate::field::{BinaryMask, ScalarField};

/// Control points of the heatmap colormap: blue, cyan, green, yellow, red.
const STOPS: [(f64, [f64; 3]); 5] = [
    (0.0, [0.0, 0.0, 255.0]),
    (0.25, [0.0, 255.0, 255.0]),
    (0.5, [0.0, 255.0, 0.0]),
    (0.75, [255.0, 255.0, 0.0]),
    (1.0, [255.0, 0.0, 0.0]),
];

/// Piecewise-linear blue→red color for `v`, clamped to `[0, 1]`.
pub fn colormap(v: f64) -> [u8; 3] {
    let v = v.clamp(0.0, 1.0);
    let k = STOPS
        .windows(2)
        .position(|w| v <= w[1].0)
        .unwrap_or(STOPS.len() - 2);
    let (t0, c0) = STOPS[k];
    let (t1, c1) = STOPS[k + 1];
    let s = (v - t0) / (t1 - t0);
    let mut rgb = [0u8; 3];
    for i in 0..3 {
        rgb[i] = (c0[i] + s * (c1[i] - c0[i])).round() as u8;
    }
    rgb
}

fn png_err(e: png::EncodingError) -> Error {
    Error::Data(format!("png encoding failed: {e}"))
}

fn encode(width: usize, height: usize, color: ColorType, pixels: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(BitDepth::Eight);
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(pixels).map_err(png_err)?;
    }
    Ok(out)
}

pub fn encode_mask(mask: &BinaryMask) -> Result<Vec<u8>> {
    let pixels: Vec<u8> = mask.data().iter().map(|&v| v * 255).collect();
    encode(mask.width(), mask.height(), ColorType::Grayscale, &pixels)
}

pub fn encode_heatmap(u: &ScalarField) -> Result<Vec<u8>> {
    let pixels: Vec<u8> = u.data().iter().flat_map(|&v| colormap(v)).collect();
    encode(u.width(), u.height(), ColorType::Rgb, &pixels)
}

pub fn decode_mask(bytes: &[u8]) -> Result<BinaryMask> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| Error::Format {
        offset: 0,
        message: format!("png: {e}"),
    })?;
    let info = reader.info();
    if info.color_type != ColorType::Grayscale || info.bit_depth != BitDepth::Eight {
        return Err(Error::Format {
            offset: 0,
            message: format!(
                "mask png must be 8-bit grayscale, got {:?} at {:?}",
                info.color_type, info.bit_depth
            ),
        });
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![0; width * height];
    reader.next_frame(&mut buf).map_err(|e| Error::Format {
        offset: 0,
        message: format!("png: {e}"),
    })?;
    BinaryMask::new(height, width, buf.iter().map(|&v| (v != 0) as u8).collect())
}

pub fn read_mask_png(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(&bytes)
}

pub fn write_mask_png(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_mask(mask)?).map_err(|e| Error::io(path, e))
}

pub fn write_heatmap_png(u: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_heatmap(u)?).map_err(|e| Error::io(path, e))
}
