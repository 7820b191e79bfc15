//! Nodewise lasso by cyclic coordinate descent on the Gram matrix.

use rayon::prelude::*;

use super::{soft_threshold, LassoConfig, ZERO_TOL};
use crate::error::{Error, Result};
use crate::greedy::neighborhood::{combine_neighborhood_sets, GraphEstimate};
use crate::linalg::SymmetricMatrix;
use crate::models::{sample_covariance, SampleSet};

/// Minimises `½(G_rr − 2γᵀG_·r + γᵀGγ) + λ‖γ‖₁` over `γ` with `γ_r = 0`,
/// where `G` is a second-moment matrix (for samples, `XᵀX/n`). Returns a
/// length-`p` vector with entry `r` fixed at zero.
///
/// `warm` seeds the iterate. Stops once a full sweep changes no coefficient
/// by more than `tol`.
pub fn fit_lasso_gram(
    gram: &SymmetricMatrix,
    r: usize,
    lambda: f64,
    cfg: &LassoConfig,
    warm: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let p = gram.dim();
    if r >= p {
        return Err(Error::InvalidParameter(format!("node {r} out of range for p = {p}")));
    }
    if !(lambda >= 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need lambda >= 0 and tol > 0, got {lambda} and {}",
            cfg.tol
        )));
    }
    let mut gamma = match warm {
        Some(w) if w.len() == p => w.to_vec(),
        Some(w) => {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: w.len(),
            })
        }
        None => vec![0.0; p],
    };
    gamma[r] = 0.0;
    // q = G γ, kept in sync with every coordinate move.
    let mut q = gram.mul_vec(&gamma);

    let mut active_only = false;
    for _ in 0..cfg.max_iter {
        let mut max_change = 0.0f64;
        for t in 0..p {
            if t == r || (active_only && gamma[t] == 0.0) {
                continue;
            }
            let gtt = gram.get(t, t);
            if gtt <= 0.0 {
                continue;
            }
            let partial = gram.get(t, r) - (q[t] - gtt * gamma[t]);
            let new = soft_threshold(partial, lambda) / gtt;
            let delta = new - gamma[t];
            if delta != 0.0 {
                let row = gram.row(t);
                for (qk, g) in q.iter_mut().zip(row) {
                    *qk += delta * g;
                }
                gamma[t] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change <= cfg.tol {
            if !active_only {
                return Ok(gamma);
            }
            // Confirm on a full sweep before stopping.
            active_only = false;
        } else {
            active_only = true;
        }
    }
    Err(Error::NonConvergence {
        what: "lasso coordinate descent",
        iterations: cfg.max_iter,
    })
}

/// Lasso regression of column `r` on the remaining columns of `x`.
pub fn fit_lasso_cd(x: &SampleSet, r: usize, cfg: &LassoConfig) -> Result<Vec<f64>> {
    let lambda = cfg.resolve(x.p(), x.n())?;
    fit_lasso_gram(&sample_covariance(x), r, lambda, cfg, None)
}

fn neighborhoods_from_gram(
    gram: &SymmetricMatrix,
    lambda: f64,
    cfg: &LassoConfig,
    parallel: bool,
) -> Result<GraphEstimate> {
    let p = gram.dim();
    let fit = |r: usize| -> Result<Vec<usize>> {
        let gamma = fit_lasso_gram(gram, r, lambda, cfg, None)?;
        Ok((0..p).filter(|&t| t != r && gamma[t].abs() > ZERO_TOL).collect())
    };
    let neighborhoods: Result<Vec<Vec<usize>>> = if parallel {
        (0..p).into_par_iter().map(fit).collect()
    } else {
        (0..p).map(fit).collect()
    };
    combine_neighborhood_sets(neighborhoods?)
}

/// Nodewise lasso on samples; both AND and OR graphs are returned.
pub fn fit_nbd_lasso(x: &SampleSet, cfg: &LassoConfig, parallel: bool) -> Result<GraphEstimate> {
    let lambda = cfg.resolve(x.p(), x.n())?;
    neighborhoods_from_gram(&sample_covariance(x), lambda, cfg, parallel)
}

/// Nodewise lasso on exact second moments with an explicit penalty.
pub fn fit_nbd_lasso_moments(sigma: &SymmetricMatrix, lambda: f64, cfg: &LassoConfig) -> Result<GraphEstimate> {
    neighborhoods_from_gram(sigma, lambda, cfg, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::neighborhood::{refit_ls, Rule};
    use crate::models::{make_chain_cov, sample_gaussian};

    fn samples(rows: Vec<Vec<f64>>) -> SampleSet {
        SampleSet::from_rows(&rows).unwrap()
    }

    #[test]
    fn large_penalty_gives_zero() {
        let x = sample_gaussian(&make_chain_cov(4, 0.5).unwrap(), 40, 1).unwrap();
        let g = sample_covariance(&x);
        let max_corr = (1..4).map(|t| g.get(t, 0).abs()).fold(0.0, f64::max);
        let gamma = fit_lasso_cd(&x, 0, &LassoConfig::explicit(max_corr)).unwrap();
        assert!(gamma.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn orthonormal_design_closed_form() {
        // Columns 1 and 2 are orthogonal with unit second moment.
        let x = samples(vec![
            vec![2.0, 1.0, 1.0],
            vec![0.5, 1.0, -1.0],
            vec![-1.0, -1.0, 1.0],
            vec![0.3, -1.0, -1.0],
        ]);
        let lambda = 0.2;
        let gamma = fit_lasso_cd(&x, 0, &LassoConfig::explicit(lambda)).unwrap();
        let g = sample_covariance(&x);
        for t in 1..3 {
            assert!((gamma[t] - soft_threshold(g.get(t, 0), lambda)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_penalty_matches_ols() {
        let x = sample_gaussian(&make_chain_cov(5, 0.4).unwrap(), 60, 7).unwrap();
        let gamma = fit_lasso_cd(&x, 2, &LassoConfig::explicit(0.0).with_tol(1e-12)).unwrap();
        let ols = refit_ls(&x, 2, &[0, 1, 3, 4]).unwrap();
        for (&t, &c) in ols.active.iter().zip(&ols.coef) {
            assert!((gamma[t] - c).abs() < 1e-6);
        }
    }

    #[test]
    fn kkt_at_exit() {
        let x = sample_gaussian(&make_chain_cov(8, 0.5).unwrap(), 80, 2).unwrap();
        let g = sample_covariance(&x);
        let lambda = 0.1;
        let gamma = fit_lasso_cd(&x, 3, &LassoConfig::explicit(lambda)).unwrap();
        let q = g.mul_vec(&gamma);
        for t in (0..8).filter(|&t| t != 3) {
            let corr = g.get(t, 3) - q[t];
            if gamma[t] == 0.0 {
                assert!(corr.abs() <= lambda + 1e-6);
            } else {
                assert!((corr - lambda * gamma[t].signum()).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn population_chain_recovered() {
        let sigma = make_chain_cov(4, 0.5).unwrap();
        let g = fit_nbd_lasso_moments(&sigma, 0.01, &LassoConfig::default()).unwrap();
        let chain = vec![(0, 1), (1, 2), (2, 3)];
        assert_eq!(g.edges(Rule::And).iter().collect::<Vec<_>>(), chain);
        assert_eq!(g.edges(Rule::Or).iter().collect::<Vec<_>>(), chain);
    }

    #[test]
    fn warm_start_agrees_with_cold() {
        let x = sample_gaussian(&make_chain_cov(6, 0.5).unwrap(), 100, 4).unwrap();
        let g = sample_covariance(&x);
        let cfg = LassoConfig::default().with_tol(1e-12);
        let cold = fit_lasso_gram(&g, 0, 0.05, &cfg, None).unwrap();
        let start = fit_lasso_gram(&g, 0, 0.2, &cfg, None).unwrap();
        let warm = fit_lasso_gram(&g, 0, 0.05, &cfg, Some(&start)).unwrap();
        for (a, b) in cold.iter().zip(&warm) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
