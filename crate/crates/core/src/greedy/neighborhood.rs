//! Per-node forward-backward greedy least squares and the graph built from
//! the resulting neighborhoods.
//!
//! A fit only needs second moments of the data, so the algorithm runs over
//! a [`NodeDesign`]: either the samples themselves or an exact covariance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{better, GreedyConfig};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, least_squares_qr, SymmetricMatrix, MAX_CONDITION};
use crate::models::{EdgeSet, SampleSet};

/// Squared column norms below this are treated as identically zero.
pub const ZERO_COLUMN_TOL: f64 = 1e-14;

/// `(1/2n) Σ_k (X_kr − Σ_t Γ_t X_kt)²`. `gamma` has length `p` and its
/// entry `r` is ignored.
pub fn ls_loss(gamma: &[f64], x: &SampleSet, r: usize) -> Result<f64> {
    if gamma.len() != x.p() {
        return Err(Error::DimensionMismatch {
            expected: x.p(),
            actual: gamma.len(),
        });
    }
    let n = x.n() as f64;
    let sum: f64 = x
        .rows()
        .map(|row| {
            let fit: f64 = row
                .iter()
                .zip(gamma)
                .enumerate()
                .filter(|&(t, _)| t != r)
                .map(|(_, (a, g))| a * g)
                .sum();
            (row[r] - fit).powi(2)
        })
        .sum();
    Ok(sum / (2.0 * n))
}

/// Exact line search along `x_t` from `residual`: returns `(α*, gain)` with
/// `α* = ⟨x_t, r⟩/‖x_t‖²` and `gain = ⟨x_t, r⟩²/(2n‖x_t‖²)`.
pub fn forward_gain(residual: &[f64], x_t: &[f64], n: usize) -> Result<(f64, f64)> {
    let nn = dot(x_t, x_t);
    if nn < ZERO_COLUMN_TOL {
        return Err(Error::ZeroColumn);
    }
    let c = dot(x_t, residual);
    Ok((c / nn, c * c / (2.0 * n as f64 * nn)))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Second-moment access for regressing node `r` on the others.
pub trait NodeDesign: Sync {
    fn p(&self) -> usize;
    fn node(&self) -> usize;
    /// `‖x_t‖² / n`.
    fn energy(&self, t: usize) -> f64;
    /// `⟨x_t, residual⟩ / n` for the given state.
    fn correlation(&self, state: &NeighborhoodState, t: usize) -> f64;
    /// Least squares of node `r` on `active` (sorted, excludes `r`).
    fn refit(&self, active: &[usize]) -> Result<NeighborhoodState>;
}

/// Current fit for one node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeighborhoodState {
    pub node: usize,
    /// Sorted feature indices.
    pub active: Vec<usize>,
    /// Coefficients aligned with `active`.
    pub coef: Vec<f64>,
    /// Length `n` in sample mode, empty in moment mode.
    pub residual: Vec<f64>,
    pub loss: f64,
    pub forward_gains: Vec<f64>,
}

impl NeighborhoodState {
    pub fn coefficient(&self, t: usize) -> f64 {
        self.active.binary_search(&t).map_or(0.0, |k| self.coef[k])
    }

    /// Coefficients as a length-`p` vector.
    pub fn dense_coef(&self, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; p];
        for (&t, &c) in self.active.iter().zip(&self.coef) {
            out[t] = c;
        }
        out
    }
}

/// Sample design: columns of the data matrix, refit by pivoted QR.
pub struct SampleDesign {
    node: usize,
    n: usize,
    columns: Vec<Vec<f64>>,
    energies: Vec<f64>,
}

impl SampleDesign {
    pub fn new(x: &SampleSet, r: usize) -> Result<Self> {
        let columns: Vec<Vec<f64>> = (0..x.p()).map(|t| x.column(t)).collect();
        Self::from_columns(columns, r)
    }

    /// Shares pre-extracted columns between nodes.
    pub fn from_columns(columns: Vec<Vec<f64>>, r: usize) -> Result<Self> {
        let p = columns.len();
        if r >= p {
            return Err(Error::InvalidParameter(format!("node {r} out of range for p = {p}")));
        }
        let n = columns[0].len();
        if n < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 samples, got {n}")));
        }
        let energies = columns.iter().map(|c| dot(c, c) / n as f64).collect();
        Ok(Self {
            node: r,
            n,
            columns,
            energies,
        })
    }
}

impl NodeDesign for SampleDesign {
    fn p(&self) -> usize {
        self.columns.len()
    }

    fn node(&self) -> usize {
        self.node
    }

    fn energy(&self, t: usize) -> f64 {
        self.energies[t]
    }

    fn correlation(&self, state: &NeighborhoodState, t: usize) -> f64 {
        dot(&self.columns[t], &state.residual) / self.n as f64
    }

    fn refit(&self, active: &[usize]) -> Result<NeighborhoodState> {
        let y = &self.columns[self.node];
        let (coef, residual) = if active.is_empty() {
            (Vec::new(), y.clone())
        } else {
            let cols: Vec<&[f64]> = active.iter().map(|&t| self.columns[t].as_slice()).collect();
            least_squares_qr(&cols, y)?
        };
        let loss = dot(&residual, &residual) / (2.0 * self.n as f64);
        Ok(NeighborhoodState {
            node: self.node,
            active: active.to_vec(),
            coef,
            residual,
            loss,
            forward_gains: Vec::new(),
        })
    }
}

/// Population-moment design: the sample Gram matrix `XᵀX/n` is replaced by
/// an exact covariance. Refits solve `Σ_SS γ = Σ_Sr` by Cholesky.
pub struct MomentDesign<'a> {
    node: usize,
    sigma: &'a SymmetricMatrix,
}

impl<'a> MomentDesign<'a> {
    pub fn new(sigma: &'a SymmetricMatrix, r: usize) -> Result<Self> {
        if r >= sigma.dim() {
            return Err(Error::InvalidParameter(format!(
                "node {r} out of range for p = {}",
                sigma.dim()
            )));
        }
        Ok(Self { node: r, sigma })
    }
}

impl NodeDesign for MomentDesign<'_> {
    fn p(&self) -> usize {
        self.sigma.dim()
    }

    fn node(&self) -> usize {
        self.node
    }

    fn energy(&self, t: usize) -> f64 {
        self.sigma.get(t, t)
    }

    fn correlation(&self, state: &NeighborhoodState, t: usize) -> f64 {
        let fit: f64 = state
            .active
            .iter()
            .zip(&state.coef)
            .map(|(&s, &g)| self.sigma.get(t, s) * g)
            .sum();
        self.sigma.get(t, self.node) - fit
    }

    fn refit(&self, active: &[usize]) -> Result<NeighborhoodState> {
        let r = self.node;
        let coef = if active.is_empty() {
            Vec::new()
        } else {
            let sub = self.sigma.submatrix(active);
            let chol = cholesky(&sub).map_err(|_| Error::RankDeficient {
                condition: f64::INFINITY,
            })?;
            let diag: Vec<f64> = (0..active.len()).map(|k| chol.get(k, k)).collect();
            let (lo, hi) = diag
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
            let condition = (hi / lo).powi(2);
            if condition > MAX_CONDITION {
                return Err(Error::RankDeficient { condition });
            }
            let rhs: Vec<f64> = active.iter().map(|&t| self.sigma.get(t, r)).collect();
            chol.solve(&rhs)
        };
        // ½(Σ_rr − 2γᵀΣ_Sr + γᵀΣ_SSγ) = ½(Σ_rr − γᵀΣ_Sr) at the solution.
        let explained: f64 = active.iter().zip(&coef).map(|(&t, &g)| g * self.sigma.get(t, r)).sum();
        Ok(NeighborhoodState {
            node: r,
            active: active.to_vec(),
            coef,
            residual: Vec::new(),
            loss: 0.5 * (self.sigma.get(r, r) - explained),
            forward_gains: Vec::new(),
        })
    }
}

/// Least-squares refit of node `r` on `active` from samples.
pub fn refit_ls(x: &SampleSet, r: usize, active: &[usize]) -> Result<NeighborhoodState> {
    let mut sorted = active.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.contains(&r) {
        return Err(Error::InvalidParameter(format!(
            "active set contains the target node {r}"
        )));
    }
    if let Some(&t) = sorted.iter().find(|&&t| t >= x.p()) {
        return Err(Error::InvalidParameter(format!("feature {t} out of range")));
    }
    SampleDesign::new(x, r)?.refit(&sorted)
}

/// Best inactive feature: `(t, α*, gain)`.
fn forward_candidate<D: NodeDesign + ?Sized>(
    design: &D,
    state: &NeighborhoodState,
    parallel: bool,
) -> Option<(usize, f64, f64)> {
    let r = design.node();
    let eval = |t: usize| -> Option<(f64, usize, f64)> {
        if t == r || state.active.binary_search(&t).is_ok() {
            return None;
        }
        let e = design.energy(t);
        if e < ZERO_COLUMN_TOL {
            return None;
        }
        let g = design.correlation(state, t);
        let gain = g * g / (2.0 * e);
        let gain = if gain.is_nan() { f64::NEG_INFINITY } else { gain };
        Some((gain, t, g / e))
    };
    let merge = |a: Option<(f64, usize, f64)>, b: Option<(f64, usize, f64)>| match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            let (g, t) = better((x.0, x.1), (y.0, y.1));
            Some((g, t, if t == x.1 { x.2 } else { y.2 }))
        }
    };
    let best = if parallel {
        (0..design.p()).into_par_iter().map(eval).reduce(|| None, merge)
    } else {
        (0..design.p()).map(eval).fold(None, merge)
    };
    best.map(|(gain, t, alpha)| (t, alpha, gain))
}

/// Active feature whose zeroing (without refit) raises the loss least:
/// `(t, increase)` with increase `c·g_t + ½c²e_t` for `c = Γ_t`.
fn backward_candidate<D: NodeDesign + ?Sized>(design: &D, state: &NeighborhoodState) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (&t, &c) in state.active.iter().zip(&state.coef) {
        let inc = c * design.correlation(state, t) + 0.5 * c * c * design.energy(t);
        let inc = if inc.is_nan() { f64::INFINITY } else { inc };
        if best.is_none_or(|(_, b)| inc < b) {
            best = Some((t, inc));
        }
    }
    best
}

/// Forward-backward greedy fit of one node over any design.
pub fn fit_node<D: NodeDesign + ?Sized>(design: &D, cfg: &GreedyConfig) -> Result<NeighborhoodState> {
    cfg.validate()?;
    let mut state = design.refit(&[])?;
    let mut gains: Vec<f64> = Vec::new();
    let mut iterations = 0;
    loop {
        if iterations >= cfg.max_iterations {
            return Err(Error::NonConvergence {
                what: "neighborhood greedy",
                iterations,
            });
        }
        iterations += 1;
        if state.active.len() >= cfg.max_active {
            break;
        }
        let Some((t, _alpha, gain)) = forward_candidate(design, &state, cfg.parallel) else {
            break;
        };
        if gain <= cfg.eps {
            break;
        }
        let mut active = state.active.clone();
        let pos = active.binary_search(&t).unwrap_err();
        active.insert(pos, t);
        state = design.refit(&active)?;
        gains.push(gain);

        while let Some(&last_gain) = gains.last() {
            let Some((t, inc)) = backward_candidate(design, &state) else {
                break;
            };
            if inc > cfg.nu * last_gain {
                break;
            }
            let active: Vec<usize> = state.active.iter().copied().filter(|&s| s != t).collect();
            state = design.refit(&active)?;
            gains.pop();
        }
    }
    state.forward_gains = gains;
    Ok(state)
}

/// Greedy neighborhood of node `r` from samples.
pub fn fit_neighborhood(x: &SampleSet, r: usize, cfg: &GreedyConfig) -> Result<NeighborhoodState> {
    fit_node(&SampleDesign::new(x, r)?, cfg)
}

/// Greedy neighborhood of node `r` from exact second moments.
pub fn fit_neighborhood_moments(sigma: &SymmetricMatrix, r: usize, cfg: &GreedyConfig) -> Result<NeighborhoodState> {
    fit_node(&MomentDesign::new(sigma, r)?, cfg)
}

/// Symmetrization rule for turning neighborhoods into edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    And,
    Or,
}

/// Per-node neighborhoods and both symmetrizations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphEstimate {
    pub p: usize,
    pub neighborhoods: Vec<Vec<usize>>,
    pub edges_and: EdgeSet,
    pub edges_or: EdgeSet,
}

impl GraphEstimate {
    pub fn edges(&self, rule: Rule) -> &EdgeSet {
        match rule {
            Rule::And => &self.edges_and,
            Rule::Or => &self.edges_or,
        }
    }

    /// Whether every node's neighborhood equals that in `truth`.
    pub fn neighborhoods_match(&self, truth: &EdgeSet) -> bool {
        truth.p() == self.p && (0..self.p).all(|r| self.neighborhoods[r] == truth.neighbors(r))
    }
}

/// Builds the AND and OR graphs from neighborhoods (one list per node).
pub fn combine_neighborhood_sets(neighborhoods: Vec<Vec<usize>>) -> Result<GraphEstimate> {
    let p = neighborhoods.len();
    let mut edges_and = EdgeSet::new(p);
    let mut edges_or = EdgeSet::new(p);
    for (r, nb) in neighborhoods.iter().enumerate() {
        for &t in nb {
            edges_or.insert(r, t)?;
            if neighborhoods.get(t).is_some_and(|other| other.contains(&r)) {
                edges_and.insert(r, t)?;
            }
        }
    }
    Ok(GraphEstimate {
        p,
        neighborhoods,
        edges_and,
        edges_or,
    })
}

/// Combines per-node states, which must be ordered by node.
pub fn combine_neighborhoods(states: &[NeighborhoodState]) -> Result<GraphEstimate> {
    if let Some((k, s)) = states.iter().enumerate().find(|(k, s)| s.node != *k) {
        return Err(Error::InvalidParameter(format!("state {k} belongs to node {}", s.node)));
    }
    combine_neighborhood_sets(states.iter().map(|s| s.active.clone()).collect())
}

/// Fits every node from samples.
pub fn fit_all_neighborhoods(x: &SampleSet, cfg: &GreedyConfig) -> Result<Vec<NeighborhoodState>> {
    let columns: Vec<Vec<f64>> = (0..x.p()).map(|t| x.column(t)).collect();
    let fit = |r: usize| fit_node(&SampleDesign::from_columns(columns.clone(), r)?, cfg);
    if cfg.parallel {
        (0..x.p()).into_par_iter().map(fit).collect()
    } else {
        (0..x.p()).map(fit).collect()
    }
}

/// Fits every node from exact second moments.
pub fn fit_all_neighborhoods_moments(sigma: &SymmetricMatrix, cfg: &GreedyConfig) -> Result<Vec<NeighborhoodState>> {
    let fit = |r: usize| fit_neighborhood_moments(sigma, r, cfg);
    if cfg.parallel {
        (0..sigma.dim()).into_par_iter().map(fit).collect()
    } else {
        (0..sigma.dim()).map(fit).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_chain_cov, make_star_cov, sample_gaussian};

    fn samples(rows: &[&[f64]]) -> SampleSet {
        SampleSet::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn ls_loss_examples() {
        let x = samples(&[&[1.0, 0.0], &[1.0, 2.0], &[1.0, -1.0], &[1.0, 3.0]]);
        assert_eq!(ls_loss(&[0.0, 0.0], &x, 0).unwrap(), 0.5);
        let x = samples(&[&[1.0, 1.0], &[2.0, 2.0], &[-3.0, -3.0]]);
        assert_eq!(ls_loss(&[0.0, 1.0], &x, 0).unwrap(), 0.0);
        // Entry r of gamma is ignored.
        assert_eq!(ls_loss(&[5.0, 1.0], &x, 0).unwrap(), 0.0);
        assert!(ls_loss(&[0.0], &x, 0).is_err());
    }

    #[test]
    fn forward_gain_examples() {
        assert_eq!(forward_gain(&[1.0, -1.0], &[1.0, 1.0], 2).unwrap(), (0.0, 0.0));
        let (a, g) = forward_gain(&[1.0; 4], &[1.0; 4], 4).unwrap();
        assert_eq!((a, g), (1.0, 0.5));
        let x = [0.3, -1.0, 2.0];
        let r: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert!((forward_gain(&r, &x, 3).unwrap().0 - 2.0).abs() < 1e-15);
        assert!(matches!(forward_gain(&[1.0], &[0.0], 1), Err(Error::ZeroColumn)));
    }

    #[test]
    fn refit_examples() {
        let x = samples(&[&[1.0, 2.0], &[3.0, 0.0], &[-1.0, 1.0]]);
        let st = refit_ls(&x, 0, &[]).unwrap();
        assert!(st.coef.is_empty());
        assert!((st.loss - 11.0 / 6.0).abs() < 1e-15);

        let x = samples(&[&[3.0, 1.0], &[-6.0, -2.0], &[1.5, 0.5]]);
        let st = refit_ls(&x, 0, &[1]).unwrap();
        assert!((st.coef[0] - 3.0).abs() < 1e-12);
        assert!(st.loss < 1e-24);

        assert!(refit_ls(&x, 0, &[0]).is_err());
    }

    #[test]
    fn refit_matches_normal_equations() {
        let sigma = make_chain_cov(5, 0.4).unwrap();
        let x = sample_gaussian(&sigma, 50, 11).unwrap();
        let active = [0, 2, 4];
        let st = refit_ls(&x, 1, &active).unwrap();
        // Normal equations XᵀX γ = Xᵀy.
        let cols: Vec<Vec<f64>> = active.iter().map(|&t| x.column(t)).collect();
        let y = x.column(1);
        let gram = SymmetricMatrix::from_fn(3, |a, b| dot(&cols[a], &cols[b]));
        let rhs: Vec<f64> = cols.iter().map(|c| dot(c, &y)).collect();
        let want = cholesky(&gram).unwrap().solve(&rhs);
        for (g, w) in st.coef.iter().zip(&want) {
            assert!((g - w).abs() < 1e-8);
        }
        let dense = st.dense_coef(5);
        assert!((ls_loss(&dense, &x, 1).unwrap() - st.loss).abs() < 1e-10);
    }

    #[test]
    fn moment_mode_examples() {
        let cfg = GreedyConfig::new(1e-6);
        let id = SymmetricMatrix::identity(6);
        for r in 0..6 {
            assert!(fit_neighborhood_moments(&id, r, &cfg).unwrap().active.is_empty());
        }
        let chain = make_chain_cov(4, 0.5).unwrap();
        assert_eq!(fit_neighborhood_moments(&chain, 1, &cfg).unwrap().active, vec![0, 2]);
        let star = make_star_cov(5, 0.4).unwrap();
        assert_eq!(
            fit_neighborhood_moments(&star, 0, &cfg).unwrap().active,
            vec![1, 2, 3, 4]
        );
    }

    #[test]
    fn sample_and_moment_modes_agree_on_empirical_moments() {
        let sigma = make_chain_cov(6, 0.5).unwrap();
        let x = sample_gaussian(&sigma, 400, 3).unwrap();
        let emp = crate::models::sample_covariance(&x);
        let cfg = GreedyConfig::new(0.01);
        for r in 0..6 {
            let a = fit_neighborhood(&x, r, &cfg).unwrap();
            let b = fit_neighborhood_moments(&emp, r, &cfg).unwrap();
            assert_eq!(a.active, b.active);
            assert!((a.loss - b.loss).abs() < 1e-10);
        }
    }

    #[test]
    fn combine_examples() {
        let g = combine_neighborhood_sets(vec![vec![], vec![], vec![]]).unwrap();
        assert!(g.edges_and.is_empty() && g.edges_or.is_empty());

        let g = combine_neighborhood_sets(vec![vec![1], vec![]]).unwrap();
        assert!(g.edges(Rule::And).is_empty());
        assert_eq!(g.edges(Rule::Or).iter().collect::<Vec<_>>(), vec![(0, 1)]);

        let g = combine_neighborhood_sets(vec![vec![1], vec![0, 2], vec![1, 3], vec![2]]).unwrap();
        let chain = vec![(0, 1), (1, 2), (2, 3)];
        assert_eq!(g.edges_and.iter().collect::<Vec<_>>(), chain);
        assert_eq!(g.edges_or.iter().collect::<Vec<_>>(), chain);
    }

    #[test]
    fn parallel_fit_matches_sequential() {
        let sigma = make_chain_cov(8, 0.5).unwrap();
        let x = sample_gaussian(&sigma, 300, 5).unwrap();
        let cfg = GreedyConfig::new(0.02);
        let a = fit_all_neighborhoods(&x, &cfg).unwrap();
        let b = fit_all_neighborhoods(&x, &cfg.clone().with_parallel(true)).unwrap();
        assert_eq!(a, b);
    }
}
