//! Inverse maintenance under symmetric single-entry perturbations.
//!
//! For `Θ' = Θ + α (e_i e_jᵀ + e_j e_iᵀ)` with `W = Θ⁻¹`:
//!
//! ```text
//! det Θ' = det Θ · ((1 + α W_ij)² − α² W_ii W_jj)
//! ```
//!
//! and `W' = Θ'⁻¹` follows from two Sherman–Morrison corrections using
//! `α (e_i e_jᵀ + e_j e_iᵀ) = (α/2)(u uᵀ − v vᵀ)`, `u = e_i + e_j`, `v = e_i − e_j`.

use super::SymmetricMatrix;
use crate::error::{Error, Result};

/// Sherman–Morrison denominators smaller than this are treated as singular.
pub const SINGULAR_DENOMINATOR: f64 = 1e-12;

/// `(1 + α W_ij)² − α² W_ii W_jj`, the factor by which `det Θ` scales.
#[inline]
pub fn det_factor(w: &SymmetricMatrix, i: usize, j: usize, alpha: f64) -> f64 {
    let wij = w.get(i, j);
    let d = w.get(i, i) * w.get(j, j) - wij * wij;
    1.0 + alpha * (2.0 * wij - alpha * d)
}

/// `log det(Θ + α(e_ij + e_ji)) − log det Θ`; `-inf` once positive definiteness is lost.
#[inline]
pub fn log_det_change(w: &SymmetricMatrix, i: usize, j: usize, alpha: f64) -> f64 {
    let wij = w.get(i, j);
    let d = w.get(i, i) * w.get(j, j) - wij * wij;
    let x = alpha * (2.0 * wij - alpha * d);
    if x <= -1.0 {
        f64::NEG_INFINITY
    } else {
        x.ln_1p()
    }
}

/// Open interval of `α` around zero on which `Θ + α(e_ij + e_ji)` stays
/// positive definite.
pub fn pd_interval_for_pair(w: &SymmetricMatrix, i: usize, j: usize) -> (f64, f64) {
    let root = (w.get(i, i) * w.get(j, j)).sqrt();
    let wij = w.get(i, j);
    (-1.0 / (root + wij), 1.0 / (root - wij))
}

/// Returns `(Θ + α(e_ij + e_ji))⁻¹` given `w = Θ⁻¹`.
pub fn pair_update_inverse(w: &SymmetricMatrix, i: usize, j: usize, alpha: f64) -> Result<SymmetricMatrix> {
    let mut out = w.clone();
    pair_update_inverse_in_place(&mut out, i, j, alpha)?;
    Ok(out)
}

/// In-place form of [`pair_update_inverse`]. On error `w` is left untouched.
///
/// The positive-semidefinite half of the split is applied first so the
/// intermediate matrix stays positive definite whenever the result is.
pub fn pair_update_inverse_in_place(w: &mut SymmetricMatrix, i: usize, j: usize, alpha: f64) -> Result<()> {
    assert_ne!(i, j, "pair update requires distinct indices");
    if alpha == 0.0 {
        return Ok(());
    }
    let half = 0.5 * alpha;
    let (first, second) = if alpha > 0.0 {
        ((half, 1.0), (-half, -1.0))
    } else {
        ((-half, -1.0), (half, 1.0))
    };

    // Check both denominators before mutating so failures leave `w` intact.
    let q1 = quad_form(w, i, j, first.1);
    let den1 = 1.0 + first.0 * q1;
    if den1.abs() < SINGULAR_DENOMINATOR || !den1.is_finite() {
        return Err(Error::SingularUpdate { denominator: den1 });
    }
    // After the first step, x2ᵀ W1 x2 = x2ᵀ W x2 − c1 (x2ᵀ W x1)² / den1.
    let q2 = quad_form(w, i, j, second.1);
    let cross = cross_form(w, i, j);
    let q2_after = q2 - first.0 * cross * cross / den1;
    let den2 = 1.0 + second.0 * q2_after;
    if den2.abs() < SINGULAR_DENOMINATOR || !den2.is_finite() {
        return Err(Error::SingularUpdate { denominator: den2 });
    }

    rank_one_pair(w, i, j, first.0, first.1, den1);
    rank_one_pair(w, i, j, second.0, second.1, den2);
    Ok(())
}

/// Updates `w = Θ⁻¹` for `Θ_ii += beta`. Returns the denominator `1 + beta W_ii`.
pub fn diag_update_inverse_in_place(w: &mut SymmetricMatrix, i: usize, beta: f64) -> Result<f64> {
    let den = 1.0 + beta * w.get(i, i);
    if den.abs() < SINGULAR_DENOMINATOR || !den.is_finite() {
        return Err(Error::SingularUpdate { denominator: den });
    }
    let y = w.row(i).to_vec();
    let k = beta / den;
    subtract_outer(w, &y, k);
    Ok(den)
}

/// `xᵀ W x` for `x = e_i + sign e_j`.
#[inline]
fn quad_form(w: &SymmetricMatrix, i: usize, j: usize, sign: f64) -> f64 {
    w.get(i, i) + w.get(j, j) + 2.0 * sign * w.get(i, j)
}

/// `uᵀ W v` for `u = e_i + e_j`, `v = e_i − e_j`.
#[inline]
fn cross_form(w: &SymmetricMatrix, i: usize, j: usize) -> f64 {
    w.get(i, i) - w.get(j, j)
}

/// `W ← W − c (W x)(W x)ᵀ / den` with `x = e_i + sign e_j`.
fn rank_one_pair(w: &mut SymmetricMatrix, i: usize, j: usize, c: f64, sign: f64, den: f64) {
    let y: Vec<f64> = w.row(i).iter().zip(w.row(j)).map(|(a, b)| a + sign * b).collect();
    subtract_outer(w, &y, c / den);
}

fn subtract_outer(w: &mut SymmetricMatrix, y: &[f64], k: f64) {
    let p = w.dim();
    for a in 0..p {
        let ka = k * y[a];
        if ka == 0.0 {
            continue;
        }
        for b in a..p {
            w.add(a, b, -ka * y[b]);
        }
    }
}
