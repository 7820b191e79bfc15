//! Greedy minimisation of the Gaussian loss `L(Θ) = tr(Θ Σ̂) − log det Θ`
//! over positive definite `Θ` with a sparse off-diagonal support.
//!
//! The inverse `W = Θ⁻¹` is carried along with `Θ`, so every one-entry
//! move is priced in O(1) from the determinant identity and applied in
//! O(p²) by Sherman–Morrison.

use rayon::prelude::*;
use serde::Serialize;

use super::{better, GreedyConfig};
use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, diag_update_inverse_in_place, identity_residual, log_det_change, log_det_pd,
    pair_update_inverse_in_place, pd_interval_for_pair, SymmetricMatrix,
};
use crate::models::EdgeSet;

/// `tr(Θ Σ̂) − log det Θ`.
pub fn gaussian_loss(theta: &SymmetricMatrix, sigma: &SymmetricMatrix) -> Result<f64> {
    if theta.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            actual: sigma.dim(),
        });
    }
    Ok(theta.trace_product(sigma) - log_det_pd(theta)?)
}

/// Exact minimiser of the loss along `Θ + α(e_ij + e_ji)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairStep {
    pub alpha: f64,
    /// Loss decrease `L(Θ) − L(Θ + α(e_ij + e_ji)) ≥ 0`.
    pub gain: f64,
}

/// `g(α) = 2αΣ̂_ij − log((1 + αW_ij)² − α²W_iiW_jj)`, the loss change along
/// the pair direction; `+inf` outside the positive definite interval.
#[inline]
pub fn pair_loss_change(w: &SymmetricMatrix, sigma: &SymmetricMatrix, i: usize, j: usize, alpha: f64) -> f64 {
    2.0 * alpha * sigma.get(i, j) - log_det_change(w, i, j, alpha)
}

/// Minimises `g` over the positive definite interval.
///
/// Stationarity gives `Σ̂_ij D α² − (D + 2W_ijΣ̂_ij) α + (W_ij − Σ̂_ij) = 0` with
/// `D = W_iiW_jj − W_ij²`; `g` is strictly convex on the interval and blows up
/// at both ends, so exactly one root lies inside.
pub fn single_pair_min(w: &SymmetricMatrix, sigma: &SymmetricMatrix, i: usize, j: usize) -> PairStep {
    let s = sigma.get(i, j);
    let wij = w.get(i, j);
    let (wii, wjj) = (w.get(i, i), w.get(j, j));
    let d = wii * wjj - wij * wij;
    let (lo, hi) = pd_interval_for_pair(w, i, j);

    let mut alpha = if s == 0.0 {
        wij / d
    } else {
        let qa = s * d;
        let qb = -(d + 2.0 * wij * s);
        let qc = wij - s;
        // qb² − 4 qa qc, rearranged to avoid cancellation.
        let disc = d * d + 4.0 * s * s * wii * wjj;
        let q = -0.5 * (qb + qb.signum() * disc.sqrt());
        let r1 = q / qa;
        let r2 = qc / q;
        if lo < r2 && r2 < hi {
            r2
        } else {
            r1
        }
    };
    if !(alpha.is_finite() && lo < alpha && alpha < hi) {
        alpha = bisect_stationary(w, sigma, i, j, lo, hi);
    }
    let gain = -pair_loss_change(w, sigma, i, j, alpha);
    if gain > 0.0 {
        PairStep { alpha, gain }
    } else {
        PairStep { alpha: 0.0, gain: 0.0 }
    }
}

/// Safeguarded bisection on `g′` over `(lo, hi)`.
fn bisect_stationary(w: &SymmetricMatrix, sigma: &SymmetricMatrix, i: usize, j: usize, lo: f64, hi: f64) -> f64 {
    let s = sigma.get(i, j);
    let wij = w.get(i, j);
    let d = w.get(i, i) * w.get(j, j) - wij * wij;
    let deriv = |a: f64| {
        let f = 1.0 + a * (2.0 * wij - a * d);
        2.0 * s - (2.0 * wij - 2.0 * d * a) / f
    };
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if deriv(mid) > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    0.5 * (a + b)
}

/// Current iterate of the global greedy estimator.
#[derive(Clone, Debug)]
pub struct PrecisionState {
    theta: SymmetricMatrix,
    w: SymmetricMatrix,
    support: EdgeSet,
    loss: f64,
    forward_gains: Vec<f64>,
    updates_since_refactor: usize,
    refactor_period: usize,
}

impl PrecisionState {
    /// `Θ = I`, empty support.
    pub fn identity(sigma: &SymmetricMatrix, refactor_period: usize) -> Self {
        let p = sigma.dim();
        Self {
            theta: SymmetricMatrix::identity(p),
            w: SymmetricMatrix::identity(p),
            support: EdgeSet::new(p),
            loss: sigma.diag().iter().sum(),
            forward_gains: Vec::new(),
            updates_since_refactor: 0,
            refactor_period: refactor_period.max(1),
        }
    }

    /// Builds a state from an explicit iterate; off-support entries must be zero.
    pub fn from_theta(
        theta: SymmetricMatrix,
        support: EdgeSet,
        sigma: &SymmetricMatrix,
        refactor_period: usize,
    ) -> Result<Self> {
        let p = theta.dim();
        for i in 0..p {
            for j in i + 1..p {
                if theta.get(i, j) != 0.0 && !support.contains(i, j) {
                    return Err(Error::InvalidParameter(format!(
                        "theta has a nonzero at ({i}, {j}) outside the support"
                    )));
                }
            }
        }
        let chol = cholesky(&theta)?;
        let loss = theta.trace_product(sigma) - chol.log_det();
        Ok(Self {
            w: chol.inverse(),
            theta,
            support,
            loss,
            forward_gains: Vec::new(),
            updates_since_refactor: 0,
            refactor_period: refactor_period.max(1),
        })
    }

    pub fn theta(&self) -> &SymmetricMatrix {
        &self.theta
    }

    /// Maintained inverse of `theta`.
    pub fn w(&self) -> &SymmetricMatrix {
        &self.w
    }

    pub fn support(&self) -> &EdgeSet {
        &self.support
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn forward_gains(&self) -> &[f64] {
        &self.forward_gains
    }

    /// `max |Θ W − I|`.
    pub fn inverse_drift(&self) -> f64 {
        identity_residual(&self.theta, &self.w)
    }

    /// Adds `alpha` to `Θ_ij` and `Θ_ji`, keeping `W` and the loss in step,
    /// and puts the pair in the support. Returns the loss change.
    pub fn update_pair(&mut self, sigma: &SymmetricMatrix, i: usize, j: usize, alpha: f64) -> Result<f64> {
        let p = self.theta.dim();
        if i == j || i >= p || j >= p {
            return Err(Error::InvalidParameter(format!("bad pair ({i}, {j}) for p = {p}")));
        }
        let delta = pair_loss_change(&self.w, sigma, i, j, alpha);
        if !delta.is_finite() {
            return Err(Error::Diverged(format!("step {alpha} on ({i}, {j}) leaves the cone")));
        }
        self.support.insert(i, j)?;
        self.apply_pair(sigma, i, j, alpha, delta)?;
        Ok(delta)
    }

    fn apply_pair(&mut self, sigma: &SymmetricMatrix, i: usize, j: usize, alpha: f64, loss_delta: f64) -> Result<()> {
        pair_update_inverse_in_place(&mut self.w, i, j, alpha)?;
        self.theta.add(i, j, alpha);
        self.loss += loss_delta;
        self.count_update(sigma)
    }

    fn apply_diag(&mut self, sigma: &SymmetricMatrix, i: usize, beta: f64, loss_delta: f64) -> Result<()> {
        diag_update_inverse_in_place(&mut self.w, i, beta)?;
        self.theta.add(i, i, beta);
        self.loss += loss_delta;
        self.count_update(sigma)
    }

    fn count_update(&mut self, sigma: &SymmetricMatrix) -> Result<()> {
        self.updates_since_refactor += 1;
        if self.updates_since_refactor >= self.refactor_period {
            self.refactor(sigma)?;
        }
        Ok(())
    }

    /// Recomputes `W` and the loss from `Θ`.
    fn refactor(&mut self, sigma: &SymmetricMatrix) -> Result<()> {
        let chol = cholesky(&self.theta).map_err(|e| Error::Diverged(e.to_string()))?;
        self.w = chol.inverse();
        self.loss = self.theta.trace_product(sigma) - chol.log_det();
        self.updates_since_refactor = 0;
        Ok(())
    }

    /// Zeroes `Θ_ij` and drops the pair from the support.
    fn remove_pair(&mut self, sigma: &SymmetricMatrix, i: usize, j: usize) -> Result<()> {
        let alpha = -self.theta.get(i, j);
        if alpha != 0.0 {
            let delta = pair_loss_change(&self.w, sigma, i, j, alpha);
            if !delta.is_finite() {
                return Err(Error::Diverged(format!("zeroing ({i}, {j}) leaves the cone")));
            }
            self.apply_pair(sigma, i, j, alpha, delta)?;
            self.theta.set(i, j, 0.0);
        }
        self.support.remove(i, j);
        Ok(())
    }
}

/// Best off-support pair for a forward step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ForwardCandidate {
    pub pair: (usize, usize),
    pub alpha: f64,
    pub gain: f64,
}

/// Scans all off-support pairs for the largest one-dimensional loss decrease.
/// Ties go to the lexicographically smallest pair; the parallel scan returns
/// the same answer as the sequential one.
pub fn forward_scan(state: &PrecisionState, sigma: &SymmetricMatrix, parallel: bool) -> Result<ForwardCandidate> {
    forward_scan_capped(state, sigma, parallel, usize::MAX)
}

fn forward_scan_capped(
    state: &PrecisionState,
    sigma: &SymmetricMatrix,
    parallel: bool,
    max_active: usize,
) -> Result<ForwardCandidate> {
    let p = sigma.dim();
    if state.support.len() >= max_active {
        return Err(Error::NoCandidates);
    }
    let row_best = |i: usize| -> Option<(f64, (usize, usize), f64)> {
        let mut best: Option<(f64, (usize, usize), f64)> = None;
        for j in i + 1..p {
            if state.support.contains(i, j) {
                continue;
            }
            let step = single_pair_min(&state.w, sigma, i, j);
            let gain = if step.gain.is_nan() {
                f64::NEG_INFINITY
            } else {
                step.gain
            };
            best = Some(match best {
                None => (gain, (i, j), step.alpha),
                Some(b) if gain > b.0 => (gain, (i, j), step.alpha),
                Some(b) => b,
            });
        }
        best
    };
    let merge = |a: Option<(f64, (usize, usize), f64)>, b: Option<(f64, (usize, usize), f64)>| match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            let (g, key) = better((x.0, x.1), (y.0, y.1));
            let alpha = if key == x.1 { x.2 } else { y.2 };
            Some((g, key, alpha))
        }
    };
    let best = if parallel {
        (0..p).into_par_iter().map(row_best).reduce(|| None, merge)
    } else {
        (0..p).map(row_best).fold(None, merge)
    };
    best.map(|(gain, pair, alpha)| ForwardCandidate { pair, alpha, gain })
        .ok_or(Error::NoCandidates)
}

/// Cheapest supported pair to zero (without refitting).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BackwardCandidate {
    pub pair: (usize, usize),
    /// `L(Θ − Θ_ij(e_ij + e_ji)) − L(Θ)`; `+inf` if zeroing leaves the cone.
    pub loss_increase: f64,
}

pub fn backward_scan(state: &PrecisionState, sigma: &SymmetricMatrix) -> Result<BackwardCandidate> {
    let mut best: Option<BackwardCandidate> = None;
    for (i, j) in state.support.iter() {
        let alpha = -state.theta.get(i, j);
        let inc = if alpha == 0.0 {
            0.0
        } else {
            pair_loss_change(&state.w, sigma, i, j, alpha)
        };
        let inc = if inc.is_nan() { f64::INFINITY } else { inc };
        if best.is_none_or(|b| inc < b.loss_increase) {
            best = Some(BackwardCandidate {
                pair: (i, j),
                loss_increase: inc,
            });
        }
    }
    best.ok_or(Error::EmptySupport)
}

/// Exact cyclic coordinate descent over the diagonal and the support of `state`.
fn refit_in_place(sigma: &SymmetricMatrix, cfg: &GreedyConfig, state: &mut PrecisionState) -> Result<()> {
    let p = sigma.dim();
    let pairs: Vec<(usize, usize)> = state.support.iter().collect();
    for _cycle in 0..cfg.max_refit_cycles {
        let mut improvement = 0.0;
        for i in 0..p {
            // argmin_β βΣ̂_ii − log(1 + βW_ii)
            let beta = 1.0 / sigma.get(i, i) - 1.0 / state.w.get(i, i);
            if beta == 0.0 || !beta.is_finite() {
                continue;
            }
            let delta = beta * sigma.get(i, i) - (beta * state.w.get(i, i)).ln_1p();
            if !(delta < 0.0) {
                continue;
            }
            state.apply_diag(sigma, i, beta, delta)?;
            improvement -= delta;
        }
        for &(i, j) in &pairs {
            let step = single_pair_min(&state.w, sigma, i, j);
            if step.gain > 0.0 && step.alpha != 0.0 {
                state.apply_pair(sigma, i, j, step.alpha, -step.gain)?;
                improvement += step.gain;
            }
        }
        if improvement < cfg.refit_tol {
            return Ok(());
        }
    }
    Err(Error::NonConvergence {
        what: "support refit",
        iterations: cfg.max_refit_cycles,
    })
}

/// Minimises the loss over all `Θ` supported on the diagonal plus `support`,
/// warm-started from `warm`.
pub fn refit_support(
    sigma: &SymmetricMatrix,
    support: &EdgeSet,
    cfg: &GreedyConfig,
    warm: &PrecisionState,
) -> Result<PrecisionState> {
    let mut state = warm.clone();
    let stale: Vec<(usize, usize)> = state.support.iter().filter(|&(i, j)| !support.contains(i, j)).collect();
    for (i, j) in stale {
        state.remove_pair(sigma, i, j)?;
    }
    for (i, j) in support.iter() {
        state.support.insert(i, j)?;
    }
    refit_in_place(sigma, cfg, &mut state)?;
    state.refactor(sigma)?;
    Ok(state)
}

/// One recorded step of a global fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GreedyStep {
    Forward {
        pair: (usize, usize),
        gain: f64,
        loss: f64,
    },
    Backward {
        pair: (usize, usize),
        loss_increase: f64,
        loss: f64,
    },
}

#[derive(Clone, Debug)]
pub struct GlobalFit {
    pub state: PrecisionState,
    /// Loss after the initial diagonal fit.
    pub initial_loss: f64,
    pub steps: Vec<GreedyStep>,
}

impl GlobalFit {
    pub fn loss_trace(&self) -> Vec<f64> {
        std::iter::once(self.initial_loss)
            .chain(self.steps.iter().map(|s| match *s {
                GreedyStep::Forward { loss, .. } | GreedyStep::Backward { loss, .. } => loss,
            }))
            .collect()
    }
}

/// Runs the global forward-backward greedy estimator on `sigma`.
///
/// The diagonal is always free: the iterate starts from the diagonal-only
/// fit and every refit updates the diagonal alongside the active pairs.
pub fn fit_global_greedy(sigma: &SymmetricMatrix, cfg: &GreedyConfig) -> Result<GlobalFit> {
    cfg.validate()?;
    if let Some(i) = (0..sigma.dim()).find(|&i| !(sigma.get(i, i) > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "covariance diagonal must be positive (entry {i})"
        )));
    }
    let mut state = PrecisionState::identity(sigma, cfg.refactor_period);
    refit_in_place(sigma, cfg, &mut state)?;
    state.refactor(sigma)?;
    let initial_loss = state.loss;
    let mut steps = Vec::new();

    let mut iterations = 0;
    loop {
        if iterations >= cfg.max_iterations {
            return Err(Error::NonConvergence {
                what: "global greedy",
                iterations,
            });
        }
        iterations += 1;

        let cand = match forward_scan_capped(&state, sigma, cfg.parallel, cfg.max_active) {
            Ok(c) => c,
            Err(Error::NoCandidates) => break,
            Err(e) => return Err(e),
        };
        if cand.gain <= cfg.eps {
            break;
        }
        let (i, j) = cand.pair;
        state.support.insert(i, j)?;
        state.apply_pair(sigma, i, j, cand.alpha, -cand.gain)?;
        state.forward_gains.push(cand.gain);
        refit_in_place(sigma, cfg, &mut state)?;
        steps.push(GreedyStep::Forward {
            pair: cand.pair,
            gain: cand.gain,
            loss: state.loss,
        });

        while let Some(&last_gain) = state.forward_gains.last() {
            let back = backward_scan(&state, sigma)?;
            if back.loss_increase > cfg.nu * last_gain {
                break;
            }
            let (i, j) = back.pair;
            state.remove_pair(sigma, i, j)?;
            state.forward_gains.pop();
            refit_in_place(sigma, cfg, &mut state)?;
            steps.push(GreedyStep::Backward {
                pair: back.pair,
                loss_increase: back.loss_increase,
                loss: state.loss,
            });
        }
    }
    state.refactor(sigma)?;
    Ok(GlobalFit {
        state,
        initial_loss,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{invert_pd, sup_norm_deviation};
    use crate::models::{edge_set_of_precision, make_chain_cov, make_diamond_cov, make_star_cov};

    fn m22(a: f64, b: f64, c: f64) -> SymmetricMatrix {
        SymmetricMatrix::from_rows(&[vec![a, b], vec![b, c]], 0.0).unwrap()
    }

    fn pairs(set: &EdgeSet) -> Vec<(usize, usize)> {
        set.iter().collect()
    }

    #[test]
    fn loss_examples() {
        let id = SymmetricMatrix::identity(3);
        assert_eq!(gaussian_loss(&id, &id).unwrap(), 3.0);
        let l = gaussian_loss(&SymmetricMatrix::from_diag(&[2.0, 2.0]), &SymmetricMatrix::identity(2)).unwrap();
        assert!((l - 2.613705638880109).abs() < 1e-12);
        let s = m22(1.0, 0.5, 1.0);
        let l = gaussian_loss(&invert_pd(&s).unwrap(), &s).unwrap();
        assert!((l - (2.0 + 0.75f64.ln())).abs() < 1e-12);
        assert!(gaussian_loss(&m22(1.0, 2.0, 1.0), &s).is_err());
    }

    #[test]
    fn pair_min_examples() {
        let w = SymmetricMatrix::identity(2);
        let step = single_pair_min(&w, &SymmetricMatrix::identity(2), 0, 1);
        assert_eq!(step, PairStep { alpha: 0.0, gain: 0.0 });

        // g(α) = α − log(1 − α²) is minimised at 1 − √2, where
        // −g = √2 − 1 + log(2√2 − 2) ≈ 0.2259872.
        let want_gain = 2f64.sqrt() - 1.0 + (2.0 * 2f64.sqrt() - 2.0).ln();
        let step = single_pair_min(&w, &m22(1.0, 0.5, 1.0), 0, 1);
        assert!((step.alpha - (1.0 - 2f64.sqrt())).abs() < 1e-12);
        assert!((step.gain - want_gain).abs() < 1e-12);
        let step = single_pair_min(&w, &m22(1.0, -0.5, 1.0), 0, 1);
        assert!((step.alpha - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((step.gain - want_gain).abs() < 1e-12);
    }

    #[test]
    fn pair_min_with_zero_covariance_moves_toward_w() {
        // g(α) = −log(1 + 2wα − Dα²) is minimised at α = w / D.
        let w = invert_pd(&m22(1.0, 0.3, 1.0)).unwrap();
        let s = SymmetricMatrix::identity(2);
        let step = single_pair_min(&w, &s, 0, 1);
        let d = w.get(0, 0) * w.get(1, 1) - w.get(0, 1).powi(2);
        assert!((step.alpha - w.get(0, 1) / d).abs() < 1e-14);
        // Θ + α(e01 + e10) has a zero off-diagonal: the restricted optimum.
        assert!((0.3 + step.alpha).abs() < 1e-12);
    }

    #[test]
    fn forward_scan_ties_and_chain() {
        let id = SymmetricMatrix::identity(4);
        let state = PrecisionState::identity(&id, 50);
        let c = forward_scan(&state, &id, false).unwrap();
        assert_eq!(c.pair, (0, 1));
        assert_eq!((c.alpha, c.gain), (0.0, 0.0));

        let chain = make_chain_cov(3, 0.5).unwrap();
        let state = PrecisionState::identity(&chain, 50);
        let c = forward_scan(&state, &chain, false).unwrap();
        assert_eq!(c.pair, (0, 1));
        assert_eq!(forward_scan(&state, &chain, true).unwrap(), c);

        let star = make_star_cov(4, 0.4).unwrap();
        let state = PrecisionState::identity(&star, 50);
        assert_eq!(forward_scan(&state, &star, false).unwrap().pair.0, 0);
    }

    #[test]
    fn forward_scan_saturated() {
        let s = m22(1.0, 0.5, 1.0);
        let mut state = PrecisionState::identity(&s, 50);
        state.support.insert(0, 1).unwrap();
        assert!(matches!(forward_scan(&state, &s, false), Err(Error::NoCandidates)));
    }

    #[test]
    fn refit_examples() {
        let cfg = GreedyConfig::default();
        let id = SymmetricMatrix::identity(3);
        let warm = PrecisionState::identity(&id, 50);
        let st = refit_support(&id, &EdgeSet::new(3), &cfg, &warm).unwrap();
        assert_eq!(st.theta(), &id);
        assert!((st.loss() - 3.0).abs() < 1e-12);

        let s = SymmetricMatrix::from_diag(&[2.0, 4.0]);
        let st = refit_support(&s, &EdgeSet::new(2), &cfg, &PrecisionState::identity(&s, 50)).unwrap();
        assert!((st.theta().get(0, 0) - 0.5).abs() < 1e-14);
        assert!((st.theta().get(1, 1) - 0.25).abs() < 1e-14);

        let s = m22(1.0, 0.5, 1.0);
        let full = EdgeSet::from_pairs(2, [(0, 1)]).unwrap();
        let st = refit_support(&s, &full, &cfg, &PrecisionState::identity(&s, 50)).unwrap();
        let want = invert_pd(&s).unwrap();
        assert!(sup_norm_deviation(st.theta(), &want).unwrap() < 1e-5);
        assert!((st.loss() - gaussian_loss(&want, &s).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn refit_keeps_off_support_zero() {
        let sigma = make_chain_cov(5, 0.6).unwrap();
        let support = EdgeSet::from_pairs(5, [(0, 1), (2, 3)]).unwrap();
        let st = refit_support(
            &sigma,
            &support,
            &GreedyConfig::default(),
            &PrecisionState::identity(&sigma, 50),
        )
        .unwrap();
        for i in 0..5 {
            for j in i + 1..5 {
                if !support.contains(i, j) {
                    assert_eq!(st.theta().get(i, j), 0.0);
                }
            }
        }
        // Stationarity on the support: Σ̂_ij = W_ij.
        for (i, j) in support.iter() {
            assert!((sigma.get(i, j) - st.w().get(i, j)).abs() < 1e-5);
        }
    }

    #[test]
    fn backward_examples() {
        let s = m22(1.0, 0.5, 1.0);
        let cfg = GreedyConfig::default();
        let support = EdgeSet::from_pairs(2, [(0, 1)]).unwrap();
        let st = refit_support(&s, &support, &cfg, &PrecisionState::identity(&s, 50)).unwrap();
        let b = backward_scan(&st, &s).unwrap();
        assert_eq!(b.pair, (0, 1));
        assert!(b.loss_increase > 0.0);

        let empty = PrecisionState::identity(&s, 50);
        assert!(matches!(backward_scan(&empty, &s), Err(Error::EmptySupport)));

        // A supported pair that currently sits at zero costs nothing to drop.
        let mut st = PrecisionState::identity(&s, 50);
        st.support.insert(0, 1).unwrap();
        assert_eq!(backward_scan(&st, &s).unwrap().loss_increase, 0.0);
    }

    #[test]
    fn backward_picks_spurious_chain_edge() {
        let sigma = make_chain_cov(4, 0.5).unwrap();
        let support = EdgeSet::from_pairs(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let st = refit_support(
            &sigma,
            &support,
            &GreedyConfig::default(),
            &PrecisionState::identity(&sigma, 50),
        )
        .unwrap();
        // Oracle: evaluate every removal directly.
        let base = gaussian_loss(st.theta(), &sigma).unwrap();
        let mut costs = Vec::new();
        for (i, j) in support.iter() {
            let mut t = st.theta().clone();
            t.set(i, j, 0.0);
            costs.push(((i, j), gaussian_loss(&t, &sigma).unwrap() - base));
        }
        let oracle = costs.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert_eq!(oracle, (0, 3));
        let b = backward_scan(&st, &sigma).unwrap();
        assert_eq!(b.pair, (0, 3));
    }

    #[test]
    fn fit_identity_is_empty() {
        let id = SymmetricMatrix::identity(5);
        let fit = fit_global_greedy(&id, &GreedyConfig::new(1e-6)).unwrap();
        assert!(fit.state.support().is_empty());
        assert_eq!(fit.state.theta(), &id);
    }

    #[test]
    fn fit_population_chain_and_diamond() {
        let sigma = make_chain_cov(10, 0.5).unwrap();
        let fit = fit_global_greedy(&sigma, &GreedyConfig::new(1e-6)).unwrap();
        let truth = edge_set_of_precision(&invert_pd(&sigma).unwrap(), 1e-8);
        assert_eq!(fit.state.support(), &truth);

        let sigma = make_diamond_cov(0.3).unwrap();
        let fit = fit_global_greedy(&sigma, &GreedyConfig::new(1e-6)).unwrap();
        assert_eq!(pairs(fit.state.support()), vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let s = SymmetricMatrix::from_diag(&[1.0, 0.0]);
        assert!(fit_global_greedy(&s, &GreedyConfig::new(1e-3)).is_err());
        let id = SymmetricMatrix::identity(2);
        assert!(fit_global_greedy(&id, &GreedyConfig::new(-1.0)).is_err());
    }

    #[test]
    fn max_active_caps_support() {
        let sigma = make_chain_cov(8, 0.5).unwrap();
        let fit = fit_global_greedy(&sigma, &GreedyConfig::new(1e-6).with_max_active(3)).unwrap();
        assert!(fit.state.support().len() <= 3);
    }
}
