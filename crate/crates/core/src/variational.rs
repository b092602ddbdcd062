//! Edge-aware convex two-phase segmentation of contrast mean maps.
//!
//! For a map `z` in `[0, 1]` the solver minimizes
//!
//! ```text
//! E(u) = Σ g |∇u| + λ Σ ((z - c1)² - (z - c2)²) u,      0 <= u <= 1
//! ```
//!
//! alternating the closed-form region means `c1`, `c2` with one additive
//! operator splitting (AOS) step of the gradient flow
//!
//! ```text
//! u_t = div(g ∇u / |∇u|) - λ ((z - c1)² - (z - c2)²)
//! ```
//!
//! Each AOS step solves one tridiagonal system per row and per column:
//! `u⁺ = ½ Σ_l (I - 2τ A_l)⁻¹ (u - τ r)`, with `A_l` the 1-D divergence
//! operator built from the lagged diffusivity `g / (|∇u| + ε)` on the
//! half-grid edges, with no flux across the image border. Each line solve
//! is restricted to `[0, 1]`, so the projection acts inside the implicit
//! step rather than after it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{build_contrast_set, ContrastSet};
use crate::error::{Error, Result};
use crate::field::{
    normalize_minmax, order_independent_mean, threshold, BinaryMask, FeatureMap, ScalarField,
    Shape,
};
use crate::io::AnnotationFile;
use crate::tridiag::BoxTridiagonal;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Fidelity weight λ.
    pub lambda: f64,
    /// Edge-detector coefficient in `g(s) = 1 / (1 + ι s²)`.
    pub iota: f64,
    /// AOS time step.
    pub tau: f64,
    pub max_iters: usize,
    /// Stop once `max |u⁺ - u|` falls below this.
    pub tol: f64,
    /// ε in the diffusivity `g / (|∇u| + ε)`.
    pub grad_reg: f64,
    /// Segmentation threshold γ.
    pub gamma: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 5.0,
            iota: 1000.0,
            tau: 0.25,
            max_iters: 200,
            tol: 1e-4,
            grad_reg: 1e-4,
            gamma: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("iota", self.iota),
            ("tau", self.tau),
            ("tol", self.tol),
            ("grad_reg", self.grad_reg),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations_used: usize,
    pub final_max_delta: f64,
    pub converged: bool,
    /// Energy of the initial iterate followed by one value per iteration.
    pub energy_trace: Vec<f64>,
}

impl SolveReport {
    pub fn initial_energy(&self) -> f64 {
        self.energy_trace[0]
    }

    pub fn final_energy(&self) -> f64 {
        *self.energy_trace.last().expect("trace is never empty")
    }
}

/// Per-axis derivatives with central differences inside and one-sided
/// differences on the border.
fn central_gradient(z: &ScalarField) -> (Vec<f64>, Vec<f64>) {
    let (h, w) = (z.height(), z.width());
    let d = z.data();
    // lo/hi neighbours along an axis of length n; span is 2 inside, 1 on borders
    let stencil = |k: usize, n: usize| -> (usize, usize, f64) {
        let lo = k.saturating_sub(1);
        let hi = (k + 1).min(n - 1);
        (lo, hi, (hi - lo).max(1) as f64)
    };
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let (lo, hi, span) = stencil(c, w);
            gx[i] = (d[r * w + hi] - d[r * w + lo]) / span;
            let (lo, hi, span) = stencil(r, h);
            gy[i] = (d[hi * w + c] - d[lo * w + c]) / span;
        }
    }
    (gx, gy)
}

/// `|∇z|²` from central differences (one-sided on the border).
pub fn gradient_norm_sq(z: &ScalarField) -> ScalarField {
    let (gx, gy) = central_gradient(z);
    let data = gx.iter().zip(&gy).map(|(a, b)| a * a + b * b).collect();
    ScalarField::from_vec_unchecked(z.shape(), data)
}

/// `g(|∇z|) = 1 / (1 + ι |∇z|²)`.
pub fn edge_map(z: &ScalarField, iota: f64) -> ScalarField {
    gradient_norm_sq(z).map(|s| 1.0 / (1.0 + iota * s))
}

/// Forward-difference gradient magnitude; the difference across the last
/// row/column is zero.
fn forward_gradient_norm(u: &[f64], shape: Shape, out: &mut [f64]) {
    let (h, w) = (shape.height, shape.width);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let dx = if c + 1 < w { u[i + 1] - u[i] } else { 0.0 };
            let dy = if r + 1 < h { u[i + w] - u[i] } else { 0.0 };
            out[i] = (dx * dx + dy * dy).sqrt();
        }
    }
}

/// Weighted means of `z` inside (`u`) and outside (`1 - u`).
///
/// A phase with zero total weight takes the global mean of `z`.
pub fn region_means(z: &ScalarField, u: &ScalarField) -> Result<(f64, f64)> {
    z.ensure_same_shape(u)?;
    let (mut zin, mut win, mut zout, mut wout, mut total) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&zv, &uv) in z.data().iter().zip(u.data()) {
        zin += zv * uv;
        win += uv;
        zout += zv * (1.0 - uv);
        wout += 1.0 - uv;
        total += zv;
    }
    let global = if z.is_empty() { 0.0 } else { total / z.len() as f64 };
    let c1 = if win > 0.0 { zin / win } else { global };
    let c2 = if wout > 0.0 { zout / wout } else { global };
    Ok((c1, c2))
}

/// Σ g |∇u| with forward differences.
pub fn weighted_total_variation(u: &ScalarField, g: &ScalarField) -> Result<f64> {
    u.ensure_same_shape(g)?;
    let mut norm = vec![0.0; u.len()];
    forward_gradient_norm(u.data(), u.shape(), &mut norm);
    Ok(norm.iter().zip(g.data()).map(|(n, g)| n * g).sum())
}

/// Discrete energy `Σ g |∇u| + λ Σ ((z - c1)² - (z - c2)²) u`.
pub fn cvm_energy(
    u: &ScalarField,
    z: &ScalarField,
    g: &ScalarField,
    c1: f64,
    c2: f64,
    lambda: f64,
) -> Result<f64> {
    u.ensure_same_shape(z)?;
    let tv = weighted_total_variation(u, g)?;
    let fidelity: f64 = z
        .data()
        .iter()
        .zip(u.data())
        .map(|(&zv, &uv)| ((zv - c1).powi(2) - (zv - c2).powi(2)) * uv)
        .sum();
    Ok(tv + lambda * fidelity)
}

/// Diffusivities at the half-grid points between each pixel and its right
/// (`east`) and lower (`south`) neighbour, stored at the index of the first
/// pixel. Both edges of pixel `i` carry `g_i / (|∇⁺u_i| + ε)`, which makes
/// the flux the lagged gradient of the forward-difference total variation.
fn half_point_diffusivity(
    u: &[f64],
    g: &[f64],
    shape: Shape,
    reg: f64,
    east: &mut [f64],
    south: &mut [f64],
) {
    let (h, w) = (shape.height, shape.width);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let dx = if c + 1 < w { u[i + 1] - u[i] } else { 0.0 };
            let dy = if r + 1 < h { u[i + w] - u[i] } else { 0.0 };
            let d = g[i] / ((dx * dx + dy * dy).sqrt() + reg);
            east[i] = if c + 1 < w { d } else { 0.0 };
            south[i] = if r + 1 < h { d } else { 0.0 };
        }
    }
}

/// Workspace for AOS sweeps over one grid.
struct Aos {
    shape: Shape,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    line: Vec<f64>,
    solver: BoxTridiagonal,
}

impl Aos {
    fn new(shape: Shape) -> Self {
        let n = shape.height.max(shape.width);
        Aos {
            shape,
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
            line: vec![0.0; n],
            solver: BoxTridiagonal::new(),
        }
    }

    /// Solves `(I - 2τ A) v = rhs` along every line of one axis, with `v`
    /// kept in `[0, 1]`. `coupling[idx(j)]` links positions `j` and `j + 1`.
    #[allow(clippy::too_many_arguments)]
    fn sweep(
        &mut self,
        rhs: &[f64],
        coupling: &[f64],
        tau: f64,
        lines: impl Iterator<Item = usize>,
        stride: usize,
        len: usize,
        out: &mut [f64],
    ) {
        let k = 2.0 * tau;
        for start in lines {
            let idx = |j: usize| start + j * stride;
            for j in 0..len {
                let left = if j > 0 { coupling[idx(j - 1)] } else { 0.0 };
                let right = if j + 1 < len { coupling[idx(j)] } else { 0.0 };
                self.lower[j] = -k * left;
                self.upper[j] = -k * right;
                self.diag[j] = 1.0 + k * (left + right);
                self.rhs[j] = rhs[idx(j)];
            }
            self.solver.solve(
                &self.lower[..len],
                &self.diag[..len],
                &self.upper[..len],
                &self.rhs[..len],
                0.0,
                1.0,
                &mut self.line[..len],
            );
            for j in 0..len {
                out[idx(j)] = self.line[j];
            }
        }
    }

    /// One AOS step: `½ Σ_l (I - 2τ A_l)⁻¹ rhs`, each line solve projected.
    fn step(&mut self, rhs: &[f64], east: &[f64], south: &[f64], tau: f64, rows: &mut [f64], cols: &mut [f64]) {
        let Shape { height: h, width: w } = self.shape;
        self.sweep(rhs, east, tau, (0..h).map(|r| r * w), 1, w, rows);
        self.sweep(rhs, south, tau, 0..w, w, h, cols);
    }
}

/// Shared gradient-flow driver. `penalty`, when present, is added to the
/// pointwise forcing and to the energy as `Σ penalty · u`.
pub(crate) fn evolve(
    z: &ScalarField,
    g: &ScalarField,
    penalty: Option<&ScalarField>,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    cfg.validate()?;
    z.ensure_same_shape(g)?;
    if let Some(p) = penalty {
        z.ensure_same_shape(p)?;
    }
    let energy = |u: &ScalarField| -> Result<f64> {
        let (c1, c2) = region_means(z, u)?;
        let mut e = cvm_energy(u, z, g, c1, c2, cfg.lambda)?;
        if let Some(p) = penalty {
            e += p.data().iter().zip(u.data()).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(e)
    };

    let (lo, hi) = z
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if z.is_empty() || hi <= lo {
        let u = ScalarField::zeros(z.height(), z.width());
        let e = energy(&u)?;
        return Ok((
            u,
            SolveReport {
                iterations_used: 0,
                final_max_delta: 0.0,
                converged: true,
                energy_trace: vec![e],
            },
        ));
    }

    let shape = z.shape();
    let n = shape.len();
    let mut u = z.clone();
    let mut trace = vec![energy(&u)?];
    let mut aos = Aos::new(shape);
    let mut rhs = vec![0.0; n];
    let mut east = vec![0.0; n];
    let mut south = vec![0.0; n];
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; n];
    let mut iterations = 0;
    let mut delta = f64::INFINITY;

    while iterations < cfg.max_iters {
        let (c1, c2) = region_means(z, &u)?;
        for (i, (r, &zv)) in rhs.iter_mut().zip(z.data()).enumerate() {
            let mut force = cfg.lambda * ((zv - c1).powi(2) - (zv - c2).powi(2));
            if let Some(p) = penalty {
                force += p.data()[i];
            }
            *r = u.data()[i] - cfg.tau * force;
        }
        half_point_diffusivity(u.data(), g.data(), shape, cfg.grad_reg, &mut east, &mut south);
        aos.step(&rhs, &east, &south, cfg.tau, &mut rows, &mut cols);

        let next: Vec<f64> = rows
            .iter()
            .zip(&cols)
            .map(|(a, b)| (0.5 * (a + b)).clamp(0.0, 1.0))
            .collect();
        delta = next
            .iter()
            .zip(u.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        u = ScalarField::from_vec_unchecked(shape, next);
        iterations += 1;
        trace.push(energy(&u)?);
        if delta < cfg.tol {
            break;
        }
    }

    Ok((
        u,
        SolveReport {
            iterations_used: iterations,
            final_max_delta: delta,
            converged: delta < cfg.tol,
            energy_trace: trace,
        },
    ))
}

/// Segments a contrast mean map with the edge detector computed from `z`.
///
/// A constant `z` carries no evidence and yields the all-zero field.
pub fn solve_cvm(z: &ScalarField, cfg: &SolverConfig) -> Result<(ScalarField, SolveReport)> {
    cfg.validate()?;
    let g = edge_map(z, cfg.iota);
    evolve(z, &g, None, cfg)
}

/// As [`solve_cvm`] with caller-supplied edge weights (e.g. `g ≡ 1`).
pub fn solve_cvm_with_edges(
    z: &ScalarField,
    g: &ScalarField,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    evolve(z, g, None, cfg)
}

#[derive(Clone, Debug)]
pub struct CvmOutput {
    /// Normalized mean of the per-point segmentations.
    pub u: ScalarField,
    /// One segmentation per in-target point, in annotation order.
    pub per_point: Vec<ScalarField>,
    pub reports: Vec<SolveReport>,
    pub contrasts: ContrastSet,
}

/// Full pipeline: contrast maps, one solve per in-target point, then the
/// normalized average. Per-point solves run on the current rayon pool; the
/// average does not depend on the order of points.
pub fn run_cvm(
    map: &FeatureMap,
    ann: &AnnotationFile,
    cfg: &SolverConfig,
    eta: f64,
) -> Result<CvmOutput> {
    cfg.validate()?;
    let contrasts = build_contrast_set(map, ann, eta)?;
    let solved = contrasts
        .per_point
        .par_iter()
        .map(|pc| solve_cvm(&pc.mean, cfg))
        .collect::<Result<Vec<_>>>()?;
    let (per_point, reports): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    let refs: Vec<&ScalarField> = per_point.iter().collect();
    let u = normalize_minmax(&order_independent_mean(&refs)?);
    Ok(CvmOutput {
        u,
        per_point,
        reports,
        contrasts,
    })
}

/// Pseudo-label mask `u > gamma`.
pub fn binarize_supervision(u: &ScalarField, gamma: f64) -> Result<BinaryMask> {
    threshold(u, gamma)
}
