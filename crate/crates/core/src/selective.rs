//! Distance-constrained selective segmentation baselines.
//!
//! The distance term `θ Σ D u` pulls the segmentation towards marker
//! points. `D` is either the exact Euclidean distance to the nearest marker
//! or an edge-weighted geodesic distance obtained by fast marching on the
//! Eikonal equation `|∇D| = F` with slowness `F = ε + β |∇f|²`. Both are
//! divided by their maximum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridPoint, ScalarField, Shape};
use crate::variational::{edge_map, evolve, gradient_norm_sq, SolveReport, SolverConfig};

pub const DEFAULT_SPEED_EPS: f64 = 1e-3;
pub const DEFAULT_SPEED_BETA: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Euclidean,
    Geodesic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceConstraint {
    pub kind: DistanceKind,
    pub map: ScalarField,
    pub theta: f64,
}

impl DistanceConstraint {
    pub fn euclidean(points: &[GridPoint], shape: Shape, theta: f64) -> Result<Self> {
        Ok(DistanceConstraint {
            kind: DistanceKind::Euclidean,
            map: euclidean_distance_map(points, shape)?,
            theta,
        })
    }

    pub fn geodesic(
        f: &ScalarField,
        points: &[GridPoint],
        speed_eps: f64,
        speed_beta: f64,
        theta: f64,
    ) -> Result<Self> {
        Ok(DistanceConstraint {
            kind: DistanceKind::Geodesic,
            map: geodesic_distance_map(f, points, speed_eps, speed_beta)?,
            theta,
        })
    }
}

fn check_points(points: &[GridPoint], shape: Shape) -> Result<()> {
    if points.is_empty() {
        return Err(Error::invalid("distance map needs at least one marker"));
    }
    if let Some(p) = points.iter().find(|p| !shape.contains(**p)) {
        return Err(Error::invalid(format!("marker {p} outside grid {shape}")));
    }
    Ok(())
}

fn normalize_by_max(shape: Shape, mut data: Vec<f64>) -> ScalarField {
    let max = data.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        data.iter_mut().for_each(|v| *v /= max);
    }
    ScalarField::new(shape.height, shape.width, data).expect("finite distances")
}

/// Exact distance to the nearest marker, divided by its maximum.
pub fn euclidean_distance_map(points: &[GridPoint], shape: Shape) -> Result<ScalarField> {
    check_points(points, shape)?;
    let mut data = Vec::with_capacity(shape.len());
    for r in 0..shape.height {
        for c in 0..shape.width {
            let d2 = points
                .iter()
                .map(|p| {
                    let dx = c as f64 - p.x as f64;
                    let dy = r as f64 - p.y as f64;
                    dx * dx + dy * dy
                })
                .fold(f64::INFINITY, f64::min);
            data.push(d2.sqrt());
        }
    }
    Ok(normalize_by_max(shape, data))
}

/// Slowness `ε + β |∇f|²` with the same gradient as the edge detector.
pub fn slowness_field(f: &ScalarField, speed_eps: f64, speed_beta: f64) -> ScalarField {
    gradient_norm_sq(f).map(|s| speed_eps + speed_beta * s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Trial {
    time: f64,
    index: usize,
}

impl Eq for Trial {}

impl Ord for Trial {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on time, ties by index
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Trial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Arrival times from fast marching, with the order in which pixels were
/// accepted.
#[derive(Clone, Debug)]
pub struct FastMarching {
    pub arrival: ScalarField,
    pub accepted_order: Vec<usize>,
}

/// First-order upwind fast marching on the 4-neighbour grid.
pub fn fast_marching(slowness: &ScalarField, points: &[GridPoint]) -> Result<FastMarching> {
    let shape = slowness.shape();
    check_points(points, shape)?;
    if slowness.data().iter().any(|&s| s <= 0.0) {
        return Err(Error::invalid("slowness must be positive"));
    }
    let (h, w) = (shape.height, shape.width);
    let speed = slowness.data();
    let mut time = vec![f64::INFINITY; shape.len()];
    let mut accepted = vec![false; shape.len()];
    let mut order = Vec::with_capacity(shape.len());
    let mut heap = BinaryHeap::new();
    for p in points {
        let i = shape.index(*p);
        time[i] = 0.0;
        heap.push(Trial { time: 0.0, index: i });
    }

    while let Some(Trial { time: t, index }) = heap.pop() {
        if accepted[index] || t > time[index] {
            continue;
        }
        accepted[index] = true;
        order.push(index);
        let (r, c) = (index / w, index % w);
        let neighbours = [
            (r > 0).then(|| index - w),
            (r + 1 < h).then(|| index + w),
            (c > 0).then(|| index - 1),
            (c + 1 < w).then(|| index + 1),
        ];
        for n in neighbours.into_iter().flatten() {
            if accepted[n] {
                continue;
            }
            let (nr, nc) = (n / w, n % w);
            let known = |i: usize| if accepted[i] { time[i] } else { f64::INFINITY };
            let a = f64::min(
                if nc > 0 { known(n - 1) } else { f64::INFINITY },
                if nc + 1 < w { known(n + 1) } else { f64::INFINITY },
            );
            let b = f64::min(
                if nr > 0 { known(n - w) } else { f64::INFINITY },
                if nr + 1 < h { known(n + w) } else { f64::INFINITY },
            );
            let f = speed[n];
            let candidate = if (a - b).abs() >= f {
                a.min(b) + f
            } else {
                0.5 * (a + b + (2.0 * f * f - (a - b) * (a - b)).sqrt())
            };
            if candidate < time[n] {
                time[n] = candidate;
                heap.push(Trial {
                    time: candidate,
                    index: n,
                });
            }
        }
    }

    Ok(FastMarching {
        arrival: ScalarField::new(h, w, time)?,
        accepted_order: order,
    })
}

/// Edge-weighted geodesic distance to the nearest marker, divided by its
/// maximum.
pub fn geodesic_distance_map(
    f: &ScalarField,
    points: &[GridPoint],
    speed_eps: f64,
    speed_beta: f64,
) -> Result<ScalarField> {
    if !(speed_eps > 0.0 && speed_beta > 0.0) {
        return Err(Error::invalid("speed parameters must be positive"));
    }
    let fm = fast_marching(&slowness_field(f, speed_eps, speed_beta), points)?;
    Ok(normalize_by_max(f.shape(), fm.arrival.into_data()))
}

/// Selective segmentation: the same AOS flow as the contrast model, with the
/// extra forcing `θ D`.
pub fn solve_selective(
    f: &ScalarField,
    constraint: &DistanceConstraint,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    cfg.validate()?;
    f.ensure_same_shape(&constraint.map)?;
    if !(constraint.theta.is_finite() && constraint.theta >= 0.0) {
        return Err(Error::invalid(format!(
            "theta must be non-negative, got {}",
            constraint.theta
        )));
    }
    let g = edge_map(f, cfg.iota);
    if constraint.theta == 0.0 {
        return evolve(f, &g, None, cfg);
    }
    let penalty = constraint.map.map(|d| constraint.theta * d);
    evolve(f, &g, Some(&penalty), cfg)
}
