//! Sparsistency conditions: irrepresentability for the two ℓ1 estimators,
//! restricted eigenvalues, the greedy thresholds, and the τ at which the
//! ℓ1 conditions break for the analytic families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, invert_pd, symmetric_eigenvalues, CholeskyFactor, SymmetricMatrix};
use crate::models::{edge_set_of_precision, make_chain_cov, make_diamond_cov, make_star_cov, EdgeSet, EDGE_TOL};

/// Largest `p` for the `p² x p²` Kronecker computation.
pub const MAX_KRONECKER_DIM: usize = 40;

/// Largest number of subsets `restricted_extreme_eigs` will enumerate.
pub const MAX_SUBSETS: u128 = 100_000;

/// Relative slack on the `η` lower bound, which is only computed to rounding.
const ETA_REL_TOL: f64 = 1e-12;

/// Max row ℓ1 norm of `A B⁻¹` given `B`'s Cholesky factor, rows of `A` on demand.
fn max_row_l1(rows: impl Iterator<Item = Vec<f64>>, chol: &CholeskyFactor) -> f64 {
    rows.map(|a| chol.solve(&a).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `‖Γ_{SᶜS} Γ_SS⁻¹‖_∞` with `Γ = Σ ⊗ Σ`.
///
/// Entry `(j, k)` of a `p x p` matrix maps to index `j·p + k`, so
/// `Γ_{(j,k),(l,m)} = Σ_jl Σ_km`. `S` holds every diagonal entry and both
/// orientations of each edge; `Sᶜ` is the remaining off-diagonal entries.
/// Since `Γ_SS` is symmetric, row `a` of `Γ_{SᶜS}Γ_SS⁻¹` is `Γ_SS⁻¹ Γ_{S,a}`.
pub fn glasso_irrepresentability(sigma: &SymmetricMatrix, edges: &EdgeSet) -> Result<f64> {
    let p = sigma.dim();
    if p > MAX_KRONECKER_DIM {
        return Err(Error::DimensionTooLarge {
            p,
            limit: MAX_KRONECKER_DIM,
        });
    }
    if edges.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: edges.p(),
        });
    }
    let mut s: Vec<(usize, usize)> = (0..p).map(|j| (j, j)).collect();
    for (i, j) in edges.iter() {
        s.push((i, j));
        s.push((j, i));
    }
    let sc: Vec<(usize, usize)> = (0..p)
        .flat_map(|j| (0..p).map(move |k| (j, k)))
        .filter(|&(j, k)| j != k && !edges.contains(j, k))
        .collect();
    if sc.is_empty() {
        return Ok(0.0);
    }
    let gamma = |(j, k): (usize, usize), (l, m): (usize, usize)| sigma.get(j, l) * sigma.get(k, m);
    let gss = SymmetricMatrix::from_fn(s.len(), |a, b| gamma(s[a], s[b]));
    let chol = cholesky(&gss)?;
    Ok(max_row_l1(
        sc.iter().map(|&a| s.iter().map(|&b| gamma(a, b)).collect()),
        &chol,
    ))
}

/// `max_r ‖Σ_{N^c N} Σ_NN⁻¹‖_∞` with `N = N(r)` and `N^c = V ∖ (N ∪ {r})`.
pub fn nbd_irrepresentability(sigma: &SymmetricMatrix, edges: &EdgeSet) -> Result<f64> {
    let p = sigma.dim();
    if edges.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: edges.p(),
        });
    }
    let mut worst = 0.0f64;
    for r in 0..p {
        let nb = edges.neighbors(r);
        if nb.is_empty() {
            continue;
        }
        let chol = cholesky(&sigma.submatrix(&nb))?;
        let rest = (0..p).filter(|&t| t != r && !nb.contains(&t));
        let v = max_row_l1(rest.map(|t| nb.iter().map(|&s| sigma.get(t, s)).collect()), &chol);
        worst = worst.max(v);
    }
    Ok(worst)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// `(min_T λ_min(Σ_TT), max_T λ_max(Σ_TT) / min_T λ_min(Σ_TT))` over all
/// `|T| = k`, by exhaustive enumeration.
pub fn restricted_extreme_eigs(sigma: &SymmetricMatrix, k: usize) -> Result<(f64, f64)> {
    let p = sigma.dim();
    if k == 0 || k > p {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= p, got k = {k}, p = {p}"
        )));
    }
    let subsets = binomial(p, k);
    if subsets > MAX_SUBSETS {
        return Err(Error::CombinatorialBlowup {
            subsets,
            limit: MAX_SUBSETS,
        });
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let eig = symmetric_eigenvalues(&sigma.submatrix(&idx));
        lo = lo.min(eig[0]);
        hi = hi.max(eig[k - 1]);
        // Next k-combination in lexicographic order.
        let Some(pos) = (0..k).rev().find(|&i| idx[i] < p - k + i) else {
            break;
        };
        idx[pos] += 1;
        for i in pos + 1..k {
            idx[i] = idx[i - 1] + 1;
        }
    }
    Ok((lo, hi / lo))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Global,
    Neighborhood,
}

/// Constants entering the greedy recovery guarantees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub rho: f64,
    pub c_min: f64,
    pub eta: f64,
    pub d: usize,
    pub p: usize,
    pub n: usize,
    pub c: f64,
}

/// `2 + 4ρ²(√((ρ² − ρ)/d) + √2)²`.
pub fn eta_lower_bound(rho: f64, d: usize) -> f64 {
    let inner = ((rho * rho - rho) / d.max(1) as f64).sqrt() + 2f64.sqrt();
    2.0 + 4.0 * rho * rho * inner * inner
}

impl TheoryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 1.0) {
            return Err(Error::InvalidParameter(format!("rho must be >= 1, got {}", self.rho)));
        }
        if !(self.c_min > 0.0) || !(self.c > 0.0) {
            return Err(Error::InvalidParameter("c_min and c must be > 0".into()));
        }
        if self.p < 2 || self.n == 0 || self.d == 0 {
            return Err(Error::InvalidParameter("need p >= 2, n >= 1, d >= 1".into()));
        }
        let bound = eta_lower_bound(self.rho, self.d);
        if self.eta < bound * (1.0 - ETA_REL_TOL) {
            return Err(Error::InvalidParameter(format!(
                "eta = {} is below its lower bound {bound}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// Smallest admissible stopping threshold and the matching minimum signal
/// strength: `(2cη/ρ²)·d ln p / n` with `√(8ε/ρ²)` for the global
/// estimator, `(8cρη/C_min)·d ln p / n` with `√(32ρε/C_min)` per node.
pub fn theorem_thresholds(params: &TheoryParams, which: Estimator) -> Result<(f64, f64)> {
    params.validate()?;
    let TheoryParams {
        rho,
        c_min,
        eta,
        d,
        p,
        n,
        c,
    } = *params;
    let base = d as f64 * (p as f64).ln() / n as f64;
    Ok(match which {
        Estimator::Global => {
            let eps = 2.0 * c * eta / (rho * rho) * base;
            (eps, (8.0 * eps / (rho * rho)).sqrt())
        }
        Estimator::Neighborhood => {
            let eps = 8.0 * c * rho * eta / c_min * base;
            (eps, (32.0 * rho * eps / c_min).sqrt())
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Admissible {
    pub glasso: bool,
    pub nbd: bool,
    pub greedy: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    /// `None` when `p` is too large for the Kronecker computation.
    pub glasso_irrep: Option<f64>,
    pub nbd_irrep: f64,
    pub cmin_hat: f64,
    pub rho_hat: f64,
    pub k: usize,
    pub admissible: Admissible,
}

/// Evaluates all conditions for `sigma` with the graph of its inverse.
pub fn condition_report(sigma: &SymmetricMatrix, k: usize) -> Result<ConditionReport> {
    let edges = edge_set_of_precision(&invert_pd(sigma)?, EDGE_TOL);
    let glasso_irrep = match glasso_irrepresentability(sigma, &edges) {
        Ok(v) => Some(v),
        Err(Error::DimensionTooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    let nbd_irrep = nbd_irrepresentability(sigma, &edges)?;
    let (cmin_hat, rho_hat) = restricted_extreme_eigs(sigma, k)?;
    Ok(ConditionReport {
        glasso_irrep,
        nbd_irrep,
        cmin_hat,
        rho_hat,
        k,
        admissible: Admissible {
            glasso: glasso_irrep.is_some_and(|v| v < 1.0),
            nbd: nbd_irrep < 1.0,
            greedy: cmin_hat > 0.0,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BisectFamily {
    Star,
    Chain,
    Diamond,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Glasso,
    Nbd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BisectResult {
    /// Smallest `τ > 0` where the metric reaches 1, or the upper end of the
    /// positive definite range when it never does.
    pub tau: f64,
    pub crossed: bool,
    /// Whether the metric was nondecreasing on the scan grid.
    pub monotone: bool,
}

pub const BISECT_TOL: f64 = 1e-4;
const SCAN_POINTS: usize = 64;

fn family_cov(family: BisectFamily, p: usize, tau: f64) -> Result<SymmetricMatrix> {
    match family {
        BisectFamily::Star => make_star_cov(p, tau),
        BisectFamily::Chain => make_chain_cov(p, tau),
        BisectFamily::Diamond if p == 4 => make_diamond_cov(tau),
        BisectFamily::Diamond => Err(Error::InvalidParameter("diamond requires p = 4".into())),
    }
}

fn family_tau_bound(family: BisectFamily) -> f64 {
    match family {
        BisectFamily::Star | BisectFamily::Chain => 1.0,
        BisectFamily::Diamond => std::f64::consts::FRAC_1_SQRT_2,
    }
}

/// Metric value for a family at `τ`, measured on the family's own graph.
pub fn family_metric(family: BisectFamily, p: usize, tau: f64, metric: Metric) -> Result<f64> {
    let sigma = family_cov(family, p, tau)?;
    let edges = family_edges(family, p)?;
    match metric {
        Metric::Glasso => glasso_irrepresentability(&sigma, &edges),
        Metric::Nbd => nbd_irrepresentability(&sigma, &edges),
    }
}

/// The family graph, read off the inverse at a generic `τ`.
fn family_edges(family: BisectFamily, p: usize) -> Result<EdgeSet> {
    let sigma = family_cov(family, p, 0.3)?;
    Ok(edge_set_of_precision(&invert_pd(&sigma)?, EDGE_TOL))
}

/// Bisects on `τ ∈ (0, τ_max)` for the smallest `τ` with metric `≥ 1`.
/// The metric is first scanned on a grid; a decrease anywhere on the grid
/// clears `monotone`, and the answer then only brackets the first crossing.
pub fn threshold_bisect(family: BisectFamily, p: usize, metric: Metric) -> Result<BisectResult> {
    let hi_bound = family_tau_bound(family) * (1.0 - 1e-3);
    let eval = |tau: f64| family_metric(family, p, tau, metric);

    let mut monotone = true;
    let mut prev_value = f64::NEG_INFINITY;
    let mut prev_tau = 0.0;
    let mut bracket = None;
    for k in 1..=SCAN_POINTS {
        let tau = hi_bound * k as f64 / SCAN_POINTS as f64;
        let v = match eval(tau) {
            Ok(v) => v,
            // Near the edge of the range the Kronecker block loses definiteness in floating point.
            Err(e) if e.is_numerical() && bracket.is_some() => break,
            Err(e) => return Err(e),
        };
        if v < prev_value - 1e-9 {
            monotone = false;
        }
        if v >= 1.0 && bracket.is_none() {
            bracket = Some((prev_tau, tau));
        }
        prev_value = v;
        prev_tau = tau;
    }
    let Some((mut lo, mut hi)) = bracket else {
        return Ok(BisectResult {
            tau: hi_bound,
            crossed: false,
            monotone,
        });
    };
    while hi - lo > BISECT_TOL * 1e-2 {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? >= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if !monotone {
        log::warn!(
            "{metric:?} metric for {family:?} is not monotone in tau; bisection brackets the first crossing only"
        );
    }
    Ok(BisectResult {
        tau: 0.5 * (lo + hi),
        crossed: true,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_conditions_vanish() {
        let id = SymmetricMatrix::identity(5);
        let empty = EdgeSet::new(5);
        assert_eq!(glasso_irrepresentability(&id, &empty).unwrap(), 0.0);
        assert_eq!(nbd_irrepresentability(&id, &empty).unwrap(), 0.0);
        assert_eq!(restricted_extreme_eigs(&id, 3).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn glasso_family_values() {
        let v = family_metric(BisectFamily::Star, 4, 0.2, Metric::Glasso).unwrap();
        assert!((v - 0.44).abs() < 1e-9);
        let v = family_metric(BisectFamily::Diamond, 4, 0.1, Metric::Glasso).unwrap();
        assert!((v - 0.44).abs() < 1e-9);
    }

    #[test]
    fn nbd_family_values() {
        let v = family_metric(BisectFamily::Diamond, 4, 0.2, Metric::Nbd).unwrap();
        assert!((v - 0.4).abs() < 1e-9);
        assert!(family_metric(BisectFamily::Chain, 6, 0.5, Metric::Nbd).unwrap() < 1.0);
    }

    #[test]
    fn kronecker_size_guard() {
        let id = SymmetricMatrix::identity(41);
        assert!(matches!(
            glasso_irrepresentability(&id, &EdgeSet::new(41)),
            Err(Error::DimensionTooLarge { .. })
        ));
    }

    #[test]
    fn restricted_eig_examples() {
        let chain = make_chain_cov(4, 0.5).unwrap();
        let (cmin, rho) = restricted_extreme_eigs(&chain, 2).unwrap();
        assert!((cmin - 0.5).abs() < 1e-12);
        assert!((rho * cmin - 1.5).abs() < 1e-12);

        let diamond = make_diamond_cov(0.3).unwrap();
        let (cmin, _) = restricted_extreme_eigs(&diamond, 4).unwrap();
        assert!((cmin - symmetric_eigenvalues(&diamond)[0]).abs() < 1e-12);

        assert!(matches!(
            restricted_extreme_eigs(&SymmetricMatrix::identity(40), 10),
            Err(Error::CombinatorialBlowup { .. })
        ));
        assert!(restricted_extreme_eigs(&chain, 5).is_err());
    }

    #[test]
    fn threshold_examples() {
        let params = TheoryParams {
            rho: 1.0,
            c_min: 1.0,
            eta: 10.0,
            d: 2,
            p: 36,
            n: 1000,
            c: 1.0,
        };
        let (eps, sig) = theorem_thresholds(&params, Estimator::Global).unwrap();
        // 20·2·ln 36 / 1000 ≈ 0.143341 and √(8ε) ≈ 1.070853.
        assert!((eps - 0.040 * 36f64.ln()).abs() < 1e-15);
        assert!((sig - (8.0 * eps).sqrt()).abs() < 1e-15);
        assert!((eps - 0.143341).abs() < 1e-5 && (sig - 1.070853).abs() < 1e-5);
        let (eps, sig) = theorem_thresholds(&params, Estimator::Neighborhood).unwrap();
        assert!((eps - 0.160 * 36f64.ln()).abs() < 1e-15);
        assert!((sig - (32.0 * eps).sqrt()).abs() < 1e-15);
        assert!((eps - 0.573363).abs() < 1e-5 && (sig - 4.283412).abs() < 1e-5);

        for d in [1, 2, 7] {
            assert!((eta_lower_bound(1.0, d) - 10.0).abs() < 1e-12);
        }
        let low = TheoryParams { eta: 9.0, ..params };
        assert!(theorem_thresholds(&low, Estimator::Global).is_err());
    }

    #[test]
    fn bisection_examples() {
        let r = threshold_bisect(BisectFamily::Star, 9, Metric::Glasso).unwrap();
        assert!(r.crossed && r.monotone);
        assert!((r.tau - (2f64.sqrt() - 1.0)).abs() < 1e-3);
        let r = threshold_bisect(BisectFamily::Diamond, 4, Metric::Nbd).unwrap();
        assert!((r.tau - 0.5).abs() < 1e-3);
        let r = threshold_bisect(BisectFamily::Diamond, 4, Metric::Glasso).unwrap();
        assert!((r.tau - (2f64.sqrt() - 1.0) / 2.0).abs() < 1e-3);
    }
}
