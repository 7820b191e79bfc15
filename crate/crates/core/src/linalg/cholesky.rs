use super::SymmetricMatrix;
use crate::error::{Error, Result};

/// Pivots at or below this fraction of the largest diagonal entry are
/// treated as loss of positive definiteness.
pub const PIVOT_REL_TOL: f64 = 1e-12;

/// Lower-triangular factor `L` with `L Lᵀ = M`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    dim: usize,
    lower: Vec<f64>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `L_ij`; zero above the diagonal.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.lower[i * self.dim + j]
        }
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| self.get(i, i).ln()).sum::<f64>()
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> SymmetricMatrix {
        let n = self.dim;
        SymmetricMatrix::from_fn(n, |i, j| (0..=i.min(j)).map(|k| self.get(i, k) * self.get(j, k)).sum())
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.lower[i * n + k] * y[k];
            }
            y[i] = s / self.lower[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.lower[k * n + i] * y[k];
            }
            y[i] = s / self.lower[i * n + i];
        }
        y
    }

    /// `(L Lᵀ)⁻¹` via the explicit inverse of `L`.
    pub fn inverse(&self) -> SymmetricMatrix {
        let n = self.dim;
        // Lower-triangular inverse, row-major.
        let mut inv = vec![0.0; n * n];
        for j in 0..n {
            inv[j * n + j] = 1.0 / self.lower[j * n + j];
            for i in j + 1..n {
                let mut s = 0.0;
                for k in j..i {
                    s -= self.lower[i * n + k] * inv[k * n + j];
                }
                inv[i * n + j] = s / self.lower[i * n + i];
            }
        }
        // W_ij = sum_{k >= max(i, j)} inv_ki inv_kj
        SymmetricMatrix::from_fn(n, |i, j| (j.max(i)..n).map(|k| inv[k * n + i] * inv[k * n + j]).sum())
    }
}

pub fn cholesky(m: &SymmetricMatrix) -> Result<CholeskyFactor> {
    let n = m.dim();
    let max_diag = m.diag().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if !(max_diag > 0.0) {
        return Err(Error::NotPositiveDefinite {
            index: 0,
            pivot: max_diag,
        });
    }
    let threshold = PIVOT_REL_TOL * max_diag;
    let mut lower = vec![0.0; n * n];
    for j in 0..n {
        let row_j = &lower[j * n..j * n + j];
        let pivot = m.get(j, j) - row_j.iter().map(|v| v * v).sum::<f64>();
        // NaN pivots fail this comparison too.
        if !(pivot > threshold) {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let ljj = pivot.sqrt();
        lower[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= lower[i * n + k] * lower[j * n + k];
            }
            lower[i * n + j] = s / ljj;
        }
    }
    Ok(CholeskyFactor { dim: n, lower })
}

/// `log det M` for positive definite `M`.
pub fn log_det_pd(m: &SymmetricMatrix) -> Result<f64> {
    Ok(cholesky(m)?.log_det())
}

pub fn invert_pd(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    Ok(cholesky(m)?.inverse())
}

pub fn is_positive_definite(m: &SymmetricMatrix) -> bool {
    cholesky(m).is_ok()
}
