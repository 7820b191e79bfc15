//! ℓ1-penalised comparison estimators: the graphical lasso and nodewise
//! lasso regression, plus k-fold selection of the penalty scale.

pub mod cv;
pub mod glasso;
pub mod lasso;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cv::{default_c_grid, select_lambda_cv, CvMethod, CvResult, DEFAULT_FOLDS};
pub use glasso::{fit_glasso, fit_glasso_warm, glasso_kkt_residual, glasso_objective, GlassoFit, KKT_TOL};
pub use lasso::{fit_lasso_cd, fit_lasso_gram, fit_nbd_lasso, fit_nbd_lasso_moments};

/// Penalised entries with magnitude at or below this count as zero.
pub const ZERO_TOL: f64 = 1e-8;

/// How the penalty weight is specified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "rule", content = "value")]
pub enum Lambda {
    Explicit(f64),
    /// `λ = c·√(ln p / n)`.
    Scaled(f64),
}

impl Lambda {
    pub fn value(&self, p: usize, n: usize) -> f64 {
        match *self {
            Lambda::Explicit(l) => l,
            Lambda::Scaled(c) => c * ((p as f64).ln() / n as f64).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub lambda: Lambda,
    pub tol: f64,
    pub max_iter: usize,
}

impl LassoConfig {
    pub fn explicit(lambda: f64) -> Self {
        Self {
            lambda: Lambda::Explicit(lambda),
            ..Self::default()
        }
    }

    pub fn scaled(c: f64) -> Self {
        Self {
            lambda: Lambda::Scaled(c),
            ..Self::default()
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    /// Resolves the penalty weight for `p` variables and `n` samples.
    pub fn resolve(&self, p: usize, n: usize) -> Result<f64> {
        let raw = match self.lambda {
            Lambda::Explicit(l) | Lambda::Scaled(l) => l,
        };
        if !(raw >= 0.0) || !raw.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "penalty must be finite and >= 0, got {raw}"
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {}", self.tol)));
        }
        if matches!(self.lambda, Lambda::Scaled(_)) && n == 0 {
            return Err(Error::InvalidParameter("scaled penalty needs n > 0".into()));
        }
        Ok(self.lambda.value(p, n))
    }
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            lambda: Lambda::Explicit(0.0),
            tol: 1e-9,
            max_iter: 100_000,
        }
    }
}

#[inline]
pub(crate) fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}
