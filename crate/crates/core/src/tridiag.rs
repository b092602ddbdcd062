//! Thomas algorithm for tridiagonal systems, plus a box-constrained variant
//! for symmetric M-matrices.

/// Solves `A x = rhs` in place for tridiagonal `A`.
///
/// `lower[i]` multiplies `x[i - 1]` in row `i` (`lower[0]` is ignored),
/// `upper[i]` multiplies `x[i + 1]` (`upper[n - 1]` is ignored).
/// `scratch` must have the same length as `rhs`. The recurrence is stable
/// without pivoting for diagonally dominant systems, which is the only case
/// the AOS solver produces.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut [f64],
) {
    let n = rhs.len();
    debug_assert!(lower.len() == n && diag.len() == n && upper.len() == n && scratch.len() == n);
    if n == 0 {
        return;
    }
    // forward elimination
    let mut denom = diag[0];
    scratch[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    // back substitution
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bound {
    Free,
    Low,
    High,
}

/// Minimizes `½ xᵀ A x − rhsᵀ x` over `lo ≤ x ≤ hi` for a symmetric,
/// diagonally dominant tridiagonal `A` with non-positive off-diagonals.
///
/// Primal-dual active-set iteration: each pass pins the current active
/// variables at their bound, solves for the rest, then pins new violators
/// and releases pinned variables whose multiplier has the wrong sign.
#[derive(Clone, Debug, Default)]
pub struct BoxTridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    scratch: Vec<f64>,
    state: Vec<Bound>,
}

impl BoxTridiagonal {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes the minimizer into `x` and returns the number of passes.
    #[allow(clippy::too_many_arguments)]
    pub fn solve(
        &mut self,
        lower: &[f64],
        diag: &[f64],
        upper: &[f64],
        rhs: &[f64],
        lo: f64,
        hi: f64,
        x: &mut [f64],
    ) -> usize {
        let n = rhs.len();
        debug_assert!(lower.len() == n && diag.len() == n && upper.len() == n && x.len() == n);
        for buf in [&mut self.lower, &mut self.diag, &mut self.upper, &mut self.scratch] {
            buf.resize(n, 0.0);
        }
        self.state.clear();
        self.state.resize(n, Bound::Free);

        let max_passes = 2 * n + 2;
        let mut passes = 0;
        while passes < max_passes {
            passes += 1;
            for j in 0..n {
                match self.state[j] {
                    Bound::Free => {
                        self.lower[j] = lower[j];
                        self.diag[j] = diag[j];
                        self.upper[j] = upper[j];
                        x[j] = rhs[j];
                    }
                    pinned => {
                        self.lower[j] = 0.0;
                        self.diag[j] = 1.0;
                        self.upper[j] = 0.0;
                        x[j] = if pinned == Bound::Low { lo } else { hi };
                    }
                }
            }
            solve_tridiagonal(&self.lower, &self.diag, &self.upper, x, &mut self.scratch);

            let mut changed = false;
            for j in 0..n {
                let next = match self.state[j] {
                    Bound::Free if x[j] < lo => Bound::Low,
                    Bound::Free if x[j] > hi => Bound::High,
                    Bound::Free => Bound::Free,
                    pinned => {
                        let mut grad = diag[j] * x[j] - rhs[j];
                        if j > 0 {
                            grad += lower[j] * x[j - 1];
                        }
                        if j + 1 < n {
                            grad += upper[j] * x[j + 1];
                        }
                        match pinned {
                            Bound::Low if grad < 0.0 => Bound::Free,
                            Bound::High if grad > 0.0 => Bound::Free,
                            _ => pinned,
                        }
                    }
                };
                changed |= next != self.state[j];
                self.state[j] = next;
            }
            if !changed {
                break;
            }
        }
        for v in x.iter_mut() {
            *v = v.clamp(lo, hi);
        }
        passes
    }
}
