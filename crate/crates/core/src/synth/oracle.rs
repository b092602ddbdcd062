//! Exhaustive minimizer of the two-phase energy on tiny grids, with `g ≡ 1`.
//!
//! For a binary mask `M` with region means `c1` (inside) and `c2` (outside)
//!
//! ```text
//! E(M) = TV(M) + λ (Σ_{M} (z - c1)² + Σ_{not M} (z - c2)²)
//! ```
//!
//! where `TV` uses isotropic forward differences. Only masks whose inside
//! mean is at least the outside mean are candidates (the foreground is the
//! brighter phase); an empty phase takes the global mean. This module does
//! not call into the solver code.

use crate::error::{Error, Result};
use crate::field::{BinaryMask, ScalarField};

pub const ORACLE_MAX_PIXELS: usize = 16;
const TIE: f64 = 1e-9;

/// Two-phase energy of `mask` with the means recomputed from the mask.
/// Returns the energy and whether the inside mean is at least the outside one.
pub fn mask_energy(z: &ScalarField, mask: &BinaryMask, lambda: f64) -> (f64, bool) {
    let (h, w) = (z.height(), z.width());
    let m = mask.data();
    let zd = z.data();
    let (mut s_in, mut n_in, mut s_out, mut n_out) = (0.0, 0usize, 0.0, 0usize);
    for (&v, &b) in zd.iter().zip(m) {
        if b == 1 {
            s_in += v;
            n_in += 1;
        } else {
            s_out += v;
            n_out += 1;
        }
    }
    let global = (s_in + s_out) / zd.len() as f64;
    let c1 = if n_in > 0 { s_in / n_in as f64 } else { global };
    let c2 = if n_out > 0 { s_out / n_out as f64 } else { global };

    let mut tv = 0.0;
    for r in 0..h {
        for c in 0..w {
            let here = m[r * w + c] as i32;
            let dx = if c + 1 < w { m[r * w + c + 1] as i32 - here } else { 0 };
            let dy = if r + 1 < h { m[(r + 1) * w + c] as i32 - here } else { 0 };
            tv += ((dx * dx + dy * dy) as f64).sqrt();
        }
    }
    let fidelity: f64 = zd
        .iter()
        .zip(m)
        .map(|(&v, &b)| if b == 1 { (v - c1).powi(2) } else { (v - c2).powi(2) })
        .sum();
    (tv + lambda * fidelity, c1 >= c2)
}

/// The brighter-foreground mask of least energy. Ties (within 1e-9) go to
/// the smaller area, then to the lexicographically smaller row-major mask.
pub fn oracle_best_mask(z: &ScalarField, lambda: f64) -> Result<BinaryMask> {
    let n = z.len();
    if n == 0 || n > ORACLE_MAX_PIXELS {
        return Err(Error::invalid(format!(
            "exhaustive search supports 1..={ORACLE_MAX_PIXELS} pixels, got {n}"
        )));
    }
    let (h, w) = (z.height(), z.width());
    let mut best: Option<(f64, BinaryMask)> = None;
    for bits in 0u32..(1 << n) {
        let data: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
        let mask = BinaryMask::new(h, w, data).expect("binary data");
        let (e, bright) = mask_energy(z, &mask, lambda);
        if !bright {
            continue;
        }
        let better = match &best {
            None => true,
            Some((be, bm)) => {
                if e < be - TIE {
                    true
                } else if e <= be + TIE {
                    (mask.area(), mask.data()) < (bm.area(), bm.data())
                } else {
                    false
                }
            }
        };
        if better {
            best = Some((e, mask));
        }
    }
    Ok(best.expect("the empty mask is always a candidate").1)
}
