//! Forward-backward greedy structure learning.
//!
//! Both estimators share the same control loop: add the coordinate with the
//! largest one-dimensional loss decrease while that decrease exceeds the
//! stopping threshold, refit on the active set, then drop coordinates whose
//! removal costs at most `nu` times the most recent forward gain.

pub mod global;
pub mod neighborhood;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default backward factor.
pub const DEFAULT_NU: f64 = 0.5;

/// Updates between full refactorizations of the maintained inverse.
pub const DEFAULT_REFACTOR_PERIOD: usize = 50;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreedyConfig {
    /// Stopping threshold: a forward step must decrease the loss by more than this.
    pub eps: f64,
    /// Backward factor in `(0, 1)`.
    pub nu: f64,
    /// A refit sweep improving the loss by less than this ends the refit.
    pub refit_tol: f64,
    pub max_refit_cycles: usize,
    /// Cap on the active set size.
    pub max_active: usize,
    /// Cap on forward steps.
    pub max_iterations: usize,
    /// Recompute the maintained inverse from scratch after this many updates.
    pub refactor_period: usize,
    /// Fan candidate scans out over the rayon pool.
    pub parallel: bool,
}

impl GreedyConfig {
    pub fn new(eps: f64) -> Self {
        Self { eps, ..Self::default() }
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_max_active(mut self, max_active: usize) -> Self {
        self.max_active = max_active;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "nu must lie in (0, 1), got {}",
                self.nu
            )));
        }
        if !(self.refit_tol > 0.0) {
            return Err(Error::InvalidParameter("refit_tol must be positive".into()));
        }
        if self.refactor_period == 0 {
            return Err(Error::InvalidParameter("refactor_period must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            nu: DEFAULT_NU,
            refit_tol: 1e-10,
            max_refit_cycles: 10_000,
            max_active: usize::MAX,
            max_iterations: 100_000,
            refactor_period: DEFAULT_REFACTOR_PERIOD,
            parallel: false,
        }
    }
}

/// `c · d · ln(p) / n`, the sample-size scaled stopping threshold.
pub fn stopping_threshold(c: f64, d: usize, p: usize, n: usize) -> f64 {
    c * d.max(1) as f64 * (p as f64).ln() / n as f64
}

/// Picks the better of two scored candidates: larger score, then smaller key.
#[inline]
pub(crate) fn better<K: Ord + Copy>(a: (f64, K), b: (f64, K)) -> (f64, K) {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if a.1 <= b.1 {
                a
            } else {
                b
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(GreedyConfig::new(1e-3).validate().is_ok());
        assert!(GreedyConfig::new(0.0).validate().is_err());
        assert!(GreedyConfig::new(1e-3).with_nu(1.0).validate().is_err());
        assert!(GreedyConfig::new(1e-3).with_nu(0.0).validate().is_err());
    }

    #[test]
    fn threshold_formula() {
        let eps = stopping_threshold(2.0, 2, 36, 1000);
        assert!((eps - 4.0 * 36f64.ln() / 1000.0).abs() < 1e-15);
    }

    #[test]
    fn tie_break_prefers_smaller_key() {
        assert_eq!(better((1.0, (0, 2)), (1.0, (0, 1))), (1.0, (0, 1)));
        assert_eq!(better((2.0, (0, 2)), (1.0, (0, 1))), (2.0, (0, 2)));
    }
}
