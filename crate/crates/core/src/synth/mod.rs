//! Seeded synthetic instances with known ground truth.
//!
//! Each instance has blob-shaped targets, a C-channel feature map drawn from
//! class-conditional clusters, a scalar two-level image and point
//! annotations sampled away from the class boundaries. Cluster centers are
//! unit vectors: the target center is `e0`, the background center is
//! `cos θ e0 + sin θ e1` (θ = `feature_separation` in degrees) and the
//! optional novel-region center is `e2`, orthogonal to both.

mod oracle;
pub mod rng;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BinaryMask, FeatureMap, GridPoint, ScalarField};
use crate::io::AnnotationFile;

pub use oracle::{mask_energy, oracle_best_mask, ORACLE_MAX_PIXELS};
use rng::{Stream, Streams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlobKind {
    Disk,
    SmoothedNoise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub n_blobs: usize,
    pub blob_kind: BlobKind,
    /// Angle between target and background cluster centers, in degrees.
    pub feature_separation: f64,
    pub noise_sigma: f64,
    pub novel_region: bool,
    pub pairs: usize,
    /// Minimum distance of annotated points from any class boundary.
    pub margin: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            height: 64,
            width: 64,
            channels: 8,
            n_blobs: 2,
            blob_kind: BlobKind::Disk,
            feature_separation: 60.0,
            noise_sigma: 0.0,
            novel_region: false,
            pairs: 3,
            margin: 2.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("height", self.height),
            ("width", self.width),
            ("n_blobs", self.n_blobs),
            ("pairs", self.pairs),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        let needed = if self.novel_region { 3 } else { 2 };
        if self.channels < needed {
            return Err(Error::invalid(format!(
                "{needed} channels needed to host the cluster centers, got {}",
                self.channels
            )));
        }
        if !(self.feature_separation > 0.0 && self.feature_separation <= 180.0) {
            return Err(Error::invalid("feature_separation must be in (0, 180] degrees"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be non-negative"));
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(Error::invalid("margin must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthInstance {
    pub features: FeatureMap,
    pub image: ScalarField,
    pub gt: BinaryMask,
    /// Novel-region pixels (all zero unless requested); never part of `gt`.
    pub novel: BinaryMask,
    pub annotations: AnnotationFile,
}

const BG: u8 = 0;
const TARGET: u8 = 1;
const NOVEL: u8 = 2;
const DISK_GAP: f64 = 3.0;
const PLACEMENT_ATTEMPTS: usize = 1000;

/// Places a disk whose every pixel is at least `DISK_GAP` away from the
/// labels already present.
fn place_disk(labels: &mut [u8], h: usize, w: usize, rng: &mut Stream, value: u8) -> Result<()> {
    let side = h.min(w);
    let r_min = (side / 10).max(2);
    let r_max = (side / 5).max(r_min);
    let occupied: Vec<(f64, f64)> = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l != BG)
        .map(|(i, _)| ((i / w) as f64, (i % w) as f64))
        .collect();
    for _ in 0..PLACEMENT_ATTEMPTS {
        let radius = r_min + rng.below(r_max - r_min + 1);
        let span = radius + 1;
        if h <= 2 * span || w <= 2 * span {
            continue;
        }
        let cy = (span + rng.below(h - 2 * span)) as f64;
        let cx = (span + rng.below(w - 2 * span)) as f64;
        let reach = radius as f64 + DISK_GAP;
        if occupied
            .iter()
            .any(|&(y, x)| (y - cy).powi(2) + (x - cx).powi(2) < reach * reach)
        {
            continue;
        }
        let r2 = (radius * radius) as f64;
        for (i, l) in labels.iter_mut().enumerate() {
            let (y, x) = ((i / w) as f64, (i % w) as f64);
            if (y - cy).powi(2) + (x - cx).powi(2) <= r2 {
                *l = value;
            }
        }
        return Ok(());
    }
    Err(Error::Generation(format!(
        "could not place a disk on a {h}x{w} grid after {PLACEMENT_ATTEMPTS} attempts"
    )))
}

/// Level set `{Σ_k exp(-|x - c_k|² / 2σ_k²) > 0.5}` of random Gaussian bumps.
fn smoothed_blobs(labels: &mut [u8], h: usize, w: usize, n: usize, rng: &mut Stream) {
    let side = h.min(w) as f64;
    let bumps: Vec<(f64, f64, f64)> = (0..n)
        .map(|_| {
            let cy = rng.uniform() * h as f64;
            let cx = rng.uniform() * w as f64;
            let sigma = side * (0.06 + 0.06 * rng.uniform());
            (cy, cx, sigma)
        })
        .collect();
    for (i, l) in labels.iter_mut().enumerate() {
        let (y, x) = ((i / w) as f64, (i % w) as f64);
        let v: f64 = bumps
            .iter()
            .map(|&(cy, cx, s)| (-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * s * s)).exp())
            .sum();
        if v > 0.5 {
            *l = TARGET;
        }
    }
}

/// Distance from each pixel to the nearest pixel with a different label.
fn distance_to_other_class(labels: &[u8], h: usize, w: usize) -> Vec<f64> {
    let coords = |i: usize| ((i / w) as f64, (i % w) as f64);
    (0..h * w)
        .map(|i| {
            let (y, x) = coords(i);
            labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l != labels[i])
                .map(|(j, _)| {
                    let (yj, xj) = coords(j);
                    (y - yj).powi(2) + (x - xj).powi(2)
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

/// Draws `k` distinct indices from `pool` (partial Fisher–Yates).
fn sample(pool: &mut [usize], k: usize, rng: &mut Stream) -> Vec<usize> {
    for i in 0..k {
        let j = i + rng.below(pool.len() - i);
        pool.swap(i, j);
    }
    pool[..k].to_vec()
}

pub fn generate(spec: &SynthSpec) -> Result<SynthInstance> {
    spec.validate()?;
    let (h, w, ch) = (spec.height, spec.width, spec.channels);
    let n = h * w;
    let mut streams = Streams::new(spec.seed);

    let mut labels = vec![BG; n];
    match spec.blob_kind {
        BlobKind::Disk => {
            for _ in 0..spec.n_blobs {
                place_disk(&mut labels, h, w, &mut streams.blobs, TARGET)?;
            }
        }
        BlobKind::SmoothedNoise => smoothed_blobs(&mut labels, h, w, spec.n_blobs, &mut streams.blobs),
    }
    if !labels.contains(&TARGET) {
        return Err(Error::Generation("no target pixels generated".into()));
    }
    if spec.novel_region {
        place_disk(&mut labels, h, w, &mut streams.blobs, NOVEL)?;
    }

    let theta = spec.feature_separation.to_radians();
    let mut centers = vec![vec![0.0; ch]; 3];
    centers[TARGET as usize][0] = 1.0;
    centers[BG as usize][0] = theta.cos();
    centers[BG as usize][1] = theta.sin();
    if ch > 2 {
        centers[NOVEL as usize][2] = 1.0;
    }
    let mut feat = vec![0.0; ch * n];
    for (i, &l) in labels.iter().enumerate() {
        for c in 0..ch {
            feat[c * n + i] = centers[l as usize][c] + spec.noise_sigma * streams.features.normal();
        }
    }

    let image: Vec<f64> = labels
        .iter()
        .map(|&l| (l == TARGET) as u8 as f64 + spec.noise_sigma * streams.noise.normal())
        .collect();

    let dist = distance_to_other_class(&labels, h, w);
    let eligible = |class: u8| -> Vec<usize> {
        (0..n)
            .filter(|&i| labels[i] == class && dist[i] >= spec.margin)
            .collect()
    };
    let mut pool_in = eligible(TARGET);
    let mut pool_out = eligible(BG);
    if pool_in.len() < spec.pairs || pool_out.len() < spec.pairs {
        return Err(Error::Generation(format!(
            "only {} in-target and {} out-of-target pixels satisfy margin {}, need {} each",
            pool_in.len(),
            pool_out.len(),
            spec.margin,
            spec.pairs
        )));
    }
    let to_point = |i: usize| GridPoint::new(i % w, i / w);
    let inside: Vec<GridPoint> = sample(&mut pool_in, spec.pairs, &mut streams.points)
        .into_iter()
        .map(to_point)
        .collect();
    let outside: Vec<GridPoint> = sample(&mut pool_out, spec.pairs, &mut streams.points)
        .into_iter()
        .map(to_point)
        .collect();

    Ok(SynthInstance {
        features: FeatureMap::new(ch, h, w, feat)?,
        image: ScalarField::new(h, w, image)?,
        gt: BinaryMask::new(h, w, labels.iter().map(|&l| (l == TARGET) as u8).collect())?,
        novel: BinaryMask::new(h, w, labels.iter().map(|&l| (l == NOVEL) as u8).collect())?,
        annotations: AnnotationFile::new(w, h, 1, &inside, &outside)?,
    })
}
