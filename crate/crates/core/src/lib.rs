//! Contrast-based variational segmentation from sparse point annotations.
//!
//! Given a C×H×W feature map and a handful of in-target and out-of-target
//! points, the pipeline builds cosine correlation maps for every point,
//! contrasts each in-target map against every out-of-target map, and runs an
//! edge-aware convex two-phase segmentation on the per-point mean contrast
//! map. The per-point results are averaged into a soft segmentation `u`
//! that can be thresholded into a pseudo label or used as a soft target via
//! [`supervision::weighted_kl`].
//!
//! ```no_run
//! use cvm_core::{io, variational::{run_cvm, SolverConfig}};
//!
//! let features = io::read_array("features.npy")?.into_features()?;
//! let points = io::read_annotations("points.json")?;
//! let out = run_cvm(&features, &points, &SolverConfig::default(), 0.6)?;
//! io::write_scalar(&out.u, "u.npy")?;
//! # Ok::<(), cvm_core::Error>(())
//! ```

pub mod correlation;
pub mod error;
pub mod field;
pub mod io;
pub mod metrics;
pub mod selective;
pub mod supervision;
pub mod synth;
pub mod tridiag;
pub mod variational;

pub use error::{Error, Result};
pub use field::{BinaryMask, FeatureMap, GridPoint, ScalarField, Shape};
