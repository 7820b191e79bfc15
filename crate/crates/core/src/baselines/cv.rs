//! k-fold selection of the penalty scale `c` in `λ = c·√(ln p / n)`.

use serde::{Deserialize, Serialize};

use super::glasso::fit_glasso_warm;
use super::lasso::fit_lasso_gram;
use super::{Lambda, LassoConfig};
use crate::error::{Error, Result};
use crate::linalg::{log_det_pd, SymmetricMatrix};
use crate::models::{sample_covariance, SampleSet};

pub const DEFAULT_FOLDS: usize = 5;

/// `0.1, 0.2, …, 3.0`.
pub fn default_c_grid() -> Vec<f64> {
    (1..=30).map(|k| k as f64 / 10.0).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvMethod {
    /// Held-out Gaussian negative log-likelihood of the graphical lasso fit.
    Glasso,
    /// Held-out squared error summed over all nodewise lasso regressions.
    Nbd,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvResult {
    pub c: f64,
    /// Mean held-out loss per grid entry, in grid order.
    pub losses: Vec<f64>,
}

/// Returns the grid value with the smallest mean held-out loss over `k`
/// contiguous folds; ties go to the smaller `c`. Fits along the grid are
/// warm-started from large to small `c`.
pub fn select_lambda_cv(
    x: &SampleSet,
    k: usize,
    grid: &[f64],
    method: CvMethod,
    cfg: &LassoConfig,
) -> Result<CvResult> {
    let n = x.n();
    let p = x.p();
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty penalty grid".into()));
    }
    if let Some(c) = grid.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "grid values must be finite and >= 0, got {c}"
        )));
    }
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!(
            "need 2 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if grid.len() == 1 {
        return Ok(CvResult {
            c: grid[0],
            losses: vec![f64::NAN],
        });
    }

    // Grid indices from the largest c down, for warm starts.
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]).then(a.cmp(&b)));

    let mut totals = vec![0.0; grid.len()];
    for f in 0..k {
        let (start, end) = (f * n / k, (f + 1) * n / k);
        let train = x.without_rows(start, end);
        let test = x.slice_rows(start, end);
        let s_train = sample_covariance(&train);
        let s_test = sample_covariance(&test);
        let scale = Lambda::Scaled(1.0).value(p, train.n());
        let losses = match method {
            CvMethod::Glasso => glasso_path(&s_train, &s_test, grid, &order, scale, cfg)?,
            CvMethod::Nbd => nbd_path(&s_train, &s_test, grid, &order, scale, cfg)?,
        };
        for (t, l) in totals.iter_mut().zip(losses) {
            *t += l;
        }
    }
    let losses: Vec<f64> = totals.iter().map(|t| t / k as f64).collect();
    let mut best = 0;
    for i in 1..grid.len() {
        let (li, lb) = (losses[i], losses[best]);
        if li < lb || (li == lb && grid[i] < grid[best]) || (lb.is_nan() && !li.is_nan()) {
            best = i;
        }
    }
    Ok(CvResult { c: grid[best], losses })
}

fn glasso_path(
    s_train: &SymmetricMatrix,
    s_test: &SymmetricMatrix,
    grid: &[f64],
    order: &[usize],
    scale: f64,
    cfg: &LassoConfig,
) -> Result<Vec<f64>> {
    let mut out = vec![f64::INFINITY; grid.len()];
    let mut warm: Option<SymmetricMatrix> = None;
    for &g in order {
        let fit = fit_glasso_warm(s_train, grid[g] * scale, cfg, warm.as_ref())?;
        out[g] = fit.theta.trace_product(s_test) - log_det_pd(&fit.theta)?;
        warm = Some(fit.theta);
    }
    Ok(out)
}

fn nbd_path(
    s_train: &SymmetricMatrix,
    s_test: &SymmetricMatrix,
    grid: &[f64],
    order: &[usize],
    scale: f64,
    cfg: &LassoConfig,
) -> Result<Vec<f64>> {
    let p = s_train.dim();
    let mut out = vec![0.0; grid.len()];
    for r in 0..p {
        let mut warm: Option<Vec<f64>> = None;
        for &g in order {
            let gamma = fit_lasso_gram(s_train, r, grid[g] * scale, cfg, warm.as_deref())?;
            // (1/2m)‖x_r − Xγ‖² from test moments.
            let sg = s_test.mul_vec(&gamma);
            let quad: f64 = gamma.iter().zip(&sg).map(|(a, b)| a * b).sum();
            out[g] += 0.5 * (s_test.get(r, r) - 2.0 * sg[r] + quad);
            warm = Some(gamma);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_chain_cov, sample_gaussian};

    #[test]
    fn single_value_grid() {
        let x = sample_gaussian(&make_chain_cov(4, 0.5).unwrap(), 20, 1).unwrap();
        let r = select_lambda_cv(&x, 5, &[0.7], CvMethod::Glasso, &LassoConfig::default()).unwrap();
        assert_eq!(r.c, 0.7);
    }

    #[test]
    fn duplicated_values_pick_equal_value() {
        let x = sample_gaussian(&make_chain_cov(4, 0.5).unwrap(), 40, 2).unwrap();
        let r = select_lambda_cv(&x, 4, &[0.5, 0.5], CvMethod::Nbd, &LassoConfig::default()).unwrap();
        assert_eq!(r.c, 0.5);
        assert!((r.losses[0] - r.losses[1]).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_arguments() {
        let x = sample_gaussian(&make_chain_cov(3, 0.5).unwrap(), 10, 3).unwrap();
        let cfg = LassoConfig::default();
        assert!(select_lambda_cv(&x, 1, &[0.1, 0.2], CvMethod::Nbd, &cfg).is_err());
        assert!(select_lambda_cv(&x, 11, &[0.1, 0.2], CvMethod::Nbd, &cfg).is_err());
        assert!(select_lambda_cv(&x, 2, &[], CvMethod::Nbd, &cfg).is_err());
    }

    #[test]
    fn selected_value_is_grid_argmin() {
        let x = sample_gaussian(&make_chain_cov(8, 0.5).unwrap(), 200, 9).unwrap();
        let grid = [0.1, 0.3, 0.6, 1.0, 2.0];
        for method in [CvMethod::Glasso, CvMethod::Nbd] {
            let r = select_lambda_cv(&x, 5, &grid, method, &LassoConfig::default()).unwrap();
            let k = grid.iter().position(|&c| c == r.c).unwrap();
            assert!(r.losses.iter().all(|&l| r.losses[k] <= l));
        }
    }
}
