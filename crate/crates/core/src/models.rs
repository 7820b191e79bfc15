//! Synthetic covariance families, ground-truth edge sets and seeded sampling.
//!
//! Node indices are zero-based throughout the crate.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, invert_pd, read_csv_rows, write_csv_rows, SymmetricMatrix};

/// Identifies the random stream used by [`sample_gaussian`]. Any change to the
/// generator or the normal transform must bump this string.
pub const SAMPLER_ID: &str = "chacha20-rand_distr0.5-standard-normal/v1";

/// Default precision-space weight for the lattice family.
pub const DEFAULT_GRID_OMEGA: f64 = 0.2;

/// Entries of a precision matrix at or below this magnitude are not edges.
pub const EDGE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Chain,
    Star,
    Grid,
    Diamond,
    Custom,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Chain => "chain",
            Family::Star => "star",
            Family::Grid => "grid",
            Family::Diamond => "diamond",
            Family::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chain" => Ok(Family::Chain),
            "star" => Ok(Family::Star),
            "grid" => Ok(Family::Grid),
            "diamond" => Ok(Family::Diamond),
            "custom" => Ok(Family::Custom),
            other => Err(Error::InvalidParameter(format!("unknown family {other:?}"))),
        }
    }
}

/// Set of undirected edges `(i, j)` with `i < j` on `p` nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSet {
    p: usize,
    pairs: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            pairs: BTreeSet::new(),
        }
    }

    pub fn from_pairs(p: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = Self::new(p);
        for (i, j) in pairs {
            set.insert(i, j)?;
        }
        Ok(set)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Inserts the unordered pair; returns whether it was new.
    pub fn insert(&mut self, i: usize, j: usize) -> Result<bool> {
        if i == j {
            return Err(Error::InvalidParameter(format!("self-loop at node {i}")));
        }
        if i >= self.p || j >= self.p {
            return Err(Error::InvalidParameter(format!(
                "edge ({i}, {j}) out of range for p = {}",
                self.p
            )));
        }
        Ok(self.pairs.insert(ordered(i, j)))
    }

    pub fn remove(&mut self, i: usize, j: usize) -> bool {
        self.pairs.remove(&ordered(i, j))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i != j && self.pairs.contains(&ordered(i, j))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    /// Sorted neighbours of node `r`.
    pub fn neighbors(&self, r: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .pairs
            .iter()
            .filter_map(|&(i, j)| {
                if i == r {
                    Some(j)
                } else if j == r {
                    Some(i)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.p];
        for &(i, j) in &self.pairs {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Largest off-diagonal row count.
    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }
}

#[inline]
fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Off-diagonal entries with `|Θ_ij| > tol`.
pub fn edge_set_of_precision(theta: &SymmetricMatrix, tol: f64) -> EdgeSet {
    let p = theta.dim();
    let mut set = EdgeSet::new(p);
    for i in 0..p {
        for j in i + 1..p {
            if theta.get(i, j).abs() > tol {
                set.pairs.insert((i, j));
            }
        }
    }
    set
}

fn check_tau(tau: f64, bound: f64, family: &str) -> Result<()> {
    if !tau.is_finite() || tau.abs() >= bound {
        return Err(Error::InvalidParameter(format!(
            "{family} requires |tau| < {bound}, got {tau}"
        )));
    }
    Ok(())
}

/// `Σ_ij = τ^|i−j|`; the precision matrix is tridiagonal.
pub fn make_chain_cov(p: usize, tau: f64) -> Result<SymmetricMatrix> {
    if p < 2 {
        return Err(Error::InvalidParameter("chain requires p >= 2".into()));
    }
    check_tau(tau, 1.0, "chain")?;
    Ok(SymmetricMatrix::from_fn(p, |i, j| tau.powi((j - i) as i32)))
}

/// Single hub at node 0: `Σ_0j = τ`, leaf–leaf entries `τ²`.
pub fn make_star_cov(p: usize, tau: f64) -> Result<SymmetricMatrix> {
    if p < 3 {
        return Err(Error::InvalidParameter("star requires p >= 3".into()));
    }
    check_tau(tau, 1.0, "star")?;
    Ok(SymmetricMatrix::from_fn(p, |i, j| {
        if i == j {
            1.0
        } else if i == 0 {
            tau
        } else {
            tau * tau
        }
    }))
}

/// Block-diagonal union of `hubs` disjoint stars, each hub with `degree`
/// leaves; remaining nodes are independent. Hub `h` sits at `h·(degree+1)`.
pub fn make_multi_star_cov(p: usize, degree: usize, hubs: usize, tau: f64) -> Result<SymmetricMatrix> {
    check_tau(tau, 1.0, "star")?;
    if degree == 0 || hubs == 0 || hubs * (degree + 1) > p {
        return Err(Error::InvalidParameter(format!(
            "{hubs} hubs of degree {degree} do not fit in p = {p}"
        )));
    }
    let block = degree + 1;
    let covered = hubs * block;
    Ok(SymmetricMatrix::from_fn(p, |i, j| {
        if i == j {
            1.0
        } else if j >= covered || i / block != j / block {
            0.0
        } else if i % block == 0 {
            tau
        } else {
            tau * tau
        }
    }))
}

/// Number of hubs used for a star of per-hub degree `degree` on `p` nodes:
/// `⌈0.1 p⌉`, reduced until the stars fit.
pub fn multi_star_hubs(p: usize, degree: usize) -> usize {
    let want = (p as f64 * 0.1).ceil() as usize;
    want.min(p / (degree + 1)).max(1)
}

/// Unit-variance covariance with `τ` off the diagonal except `Σ_12 = 0` and
/// `Σ_03 = 2τ²`. Its inverse vanishes only at 0–3, so the graph is the
/// four-cycle 0–1–3–2 plus the chord 1–2.
pub fn make_diamond_cov(tau: f64) -> Result<SymmetricMatrix> {
    check_tau(tau, std::f64::consts::FRAC_1_SQRT_2, "diamond")?;
    if tau == 0.0 {
        return Err(Error::InvalidParameter("diamond requires tau != 0".into()));
    }
    Ok(SymmetricMatrix::from_fn(4, |i, j| match (i, j) {
        _ if i == j => 1.0,
        (1, 2) => 0.0,
        (0, 3) => 2.0 * tau * tau,
        _ => tau,
    }))
}

/// Precision matrix of a `side x side` 4-nearest-neighbour lattice: unit
/// diagonal, `ω` on lattice edges. Node `(row, col)` has index `row·side + col`.
pub fn make_grid_precision(side: usize, omega: f64) -> Result<SymmetricMatrix> {
    if side < 2 {
        return Err(Error::InvalidParameter("grid requires side >= 2".into()));
    }
    if !omega.is_finite() || omega.abs() >= 0.25 {
        return Err(Error::InvalidParameter(format!(
            "grid requires |omega| < 0.25, got {omega}"
        )));
    }
    let p = side * side;
    let mut theta = SymmetricMatrix::identity(p);
    for r in 0..side {
        for c in 0..side {
            let node = r * side + c;
            if c + 1 < side {
                theta.set(node, node + 1, omega);
            }
            if r + 1 < side {
                theta.set(node, node + side, omega);
            }
        }
    }
    Ok(theta)
}

fn grid_side(p: usize) -> Result<usize> {
    let side = (p as f64).sqrt().round() as usize;
    if side * side != p {
        return Err(Error::InvalidParameter(format!(
            "grid requires a perfect-square p, got {p}"
        )));
    }
    Ok(side)
}

/// Parameters of a synthetic model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub p: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    /// Per-hub degree for the multi-hub star; `None` is the single hub of degree `p − 1`.
    #[serde(default)]
    pub star_degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_sigma: Option<Vec<Vec<f64>>>,
}

fn default_tau() -> f64 {
    0.5
}

fn default_omega() -> f64 {
    DEFAULT_GRID_OMEGA
}

impl ModelSpec {
    pub fn new(family: Family, p: usize) -> Self {
        Self {
            family,
            p,
            tau: default_tau(),
            omega: default_omega(),
            star_degree: None,
            custom_sigma: None,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_star_degree(mut self, degree: usize) -> Self {
        self.star_degree = Some(degree);
        self
    }

    pub fn build(&self) -> Result<Model> {
        let (sigma, precision) = match self.family {
            Family::Chain => {
                let sigma = make_chain_cov(self.p, self.tau)?;
                let theta = invert_pd(&sigma)?;
                (sigma, theta)
            }
            Family::Star => {
                let sigma = match self.star_degree {
                    Some(d) if d + 1 < self.p => make_multi_star_cov(self.p, d, multi_star_hubs(self.p, d), self.tau)?,
                    _ => make_star_cov(self.p, self.tau)?,
                };
                let theta = invert_pd(&sigma)?;
                (sigma, theta)
            }
            Family::Diamond => {
                if self.p != 4 {
                    return Err(Error::InvalidParameter("diamond requires p = 4".into()));
                }
                let sigma = make_diamond_cov(self.tau)?;
                let theta = invert_pd(&sigma)?;
                (sigma, theta)
            }
            Family::Grid => {
                let theta = make_grid_precision(grid_side(self.p)?, self.omega)?;
                let sigma = invert_pd(&theta)?;
                (sigma, theta)
            }
            Family::Custom => {
                let rows = self
                    .custom_sigma
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter("custom family requires custom_sigma".into()))?;
                let sigma = SymmetricMatrix::from_rows(rows, crate::linalg::SYMMETRY_TOL)?;
                if sigma.dim() != self.p {
                    return Err(Error::DimensionMismatch {
                        expected: self.p,
                        actual: sigma.dim(),
                    });
                }
                let theta = invert_pd(&sigma)?;
                (sigma, theta)
            }
        };
        cholesky(&sigma)?;
        let edges = edge_set_of_precision(&precision, EDGE_TOL);
        Ok(Model {
            sigma,
            precision,
            edges,
        })
    }
}

/// A constructed model: population covariance, its inverse and the true graph.
#[derive(Clone, Debug)]
pub struct Model {
    pub sigma: SymmetricMatrix,
    pub precision: SymmetricMatrix,
    pub edges: EdgeSet,
}

impl Model {
    pub fn max_degree(&self) -> usize {
        self.edges.max_degree()
    }
}

/// `n` iid zero-mean rows of dimension `p`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    n: usize,
    p: usize,
    data: Vec<f64>,
    seed: Option<u64>,
}

impl SampleSet {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidParameter("sample set needs at least one row".into()));
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(Error::InvalidParameter("sample rows are empty".into()));
        }
        let mut data = Vec::with_capacity(n * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("sample contains non-finite values".into()));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, p, data, seed: None })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.p..(k + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.p)
    }

    pub fn column(&self, t: usize) -> Vec<f64> {
        self.rows().map(|r| r[t]).collect()
    }

    /// Rows `[start, end)` as a new sample set.
    pub fn slice_rows(&self, start: usize, end: usize) -> SampleSet {
        SampleSet {
            n: end - start,
            p: self.p,
            data: self.data[start * self.p..end * self.p].to_vec(),
            seed: self.seed,
        }
    }

    /// All rows outside `[start, end)`.
    pub fn without_rows(&self, start: usize, end: usize) -> SampleSet {
        let mut data = Vec::with_capacity((self.n - (end - start)) * self.p);
        data.extend_from_slice(&self.data[..start * self.p]);
        data.extend_from_slice(&self.data[end * self.p..]);
        SampleSet {
            n: self.n - (end - start),
            p: self.p,
            data,
            seed: self.seed,
        }
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        Self::from_rows(&read_csv_rows(reader)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_csv_rows(writer, self.p, &self.data)
    }
}

/// Derives the seed of trial `trial` from a base seed.
#[inline]
pub fn trial_seed(base_seed: u64, trial: u64) -> u64 {
    base_seed ^ trial
}

/// Draws `n` rows `x = L z`, `L = chol(Σ)`, `z` standard normal from the
/// generator named by [`SAMPLER_ID`]. Equal seeds give bit-identical output.
pub fn sample_gaussian(sigma: &SymmetricMatrix, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let chol = cholesky(sigma)?;
    let p = sigma.dim();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..p {
            let mut s = 0.0;
            for (k, zk) in z.iter().enumerate().take(i + 1) {
                s += chol.get(i, k) * zk;
            }
            data.push(s);
        }
    }
    Ok(SampleSet {
        n,
        p,
        data,
        seed: Some(seed),
    })
}

/// `(1/n) Σ_k x⁽ᵏ⁾ x⁽ᵏ⁾ᵀ`, without centering.
pub fn sample_covariance(samples: &SampleSet) -> SymmetricMatrix {
    let p = samples.p();
    let mut acc = vec![0.0; p * p];
    for row in samples.rows() {
        for i in 0..p {
            let xi = row[i];
            if xi == 0.0 {
                continue;
            }
            let dst = &mut acc[i * p..i * p + p];
            for j in i..p {
                dst[j] += xi * row[j];
            }
        }
    }
    let inv_n = 1.0 / samples.n() as f64;
    SymmetricMatrix::from_fn(p, |i, j| acc[i * p + j] * inv_n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sup_norm_deviation;

    fn pairs(set: &EdgeSet) -> Vec<(usize, usize)> {
        set.iter().collect()
    }

    #[test]
    fn chain_examples() {
        assert_eq!(make_chain_cov(3, 0.0).unwrap(), SymmetricMatrix::identity(3));
        assert_eq!(make_chain_cov(3, 0.5).unwrap().get(0, 2), 0.25);
        let theta = invert_pd(&make_chain_cov(4, 0.5).unwrap()).unwrap();
        assert!(theta.get(0, 2).abs() < 1e-10);
        assert!(make_chain_cov(3, 1.0).is_err());
        assert!(make_chain_cov(1, 0.5).is_err());
    }

    #[test]
    fn star_examples() {
        assert_eq!(make_star_cov(4, 0.0).unwrap(), SymmetricMatrix::identity(4));
        assert!((make_star_cov(4, 0.3).unwrap().get(1, 2) - 0.09).abs() < 1e-15);
        let theta = invert_pd(&make_star_cov(5, 0.4).unwrap()).unwrap();
        for i in 1..5 {
            for j in i + 1..5 {
                assert!(theta.get(i, j).abs() < 1e-10);
            }
        }
        assert!(make_star_cov(4, -1.2).is_err());
    }

    #[test]
    fn diamond_examples() {
        assert_eq!(make_diamond_cov(0.5).unwrap().get(0, 3), 0.5);
        let theta = invert_pd(&make_diamond_cov(0.3).unwrap()).unwrap();
        // Σ_12 = 0 does not make Θ_12 vanish; only the 0–3 entry is zero.
        assert!(theta.get(1, 2).abs() > 0.2);
        assert!(theta.get(0, 3).abs() < 1e-10);
        assert!(make_diamond_cov(0.75).is_err());
        assert_eq!(
            pairs(&edge_set_of_precision(&theta, 1e-8)),
            vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]
        );
    }

    #[test]
    fn grid_examples() {
        assert_eq!(make_grid_precision(3, 0.0).unwrap(), SymmetricMatrix::identity(9));
        let theta = make_grid_precision(2, 0.2).unwrap();
        assert_eq!(
            pairs(&edge_set_of_precision(&theta, 1e-8)),
            vec![(0, 1), (0, 2), (1, 3), (2, 3)]
        );
        assert!(make_grid_precision(3, 0.25).is_err());
        assert!(make_grid_precision(1, 0.1).is_err());
    }

    #[test]
    fn edge_set_examples() {
        assert!(edge_set_of_precision(&SymmetricMatrix::identity(4), 0.0).is_empty());
        let theta = invert_pd(&make_chain_cov(4, 0.5).unwrap()).unwrap();
        assert_eq!(
            pairs(&edge_set_of_precision(&theta, 1e-8)),
            vec![(0, 1), (1, 2), (2, 3)]
        );
    }

    #[test]
    fn edge_set_rejects_bad_pairs() {
        let mut set = EdgeSet::new(3);
        assert!(set.insert(1, 1).is_err());
        assert!(set.insert(0, 3).is_err());
        assert!(set.insert(2, 0).unwrap());
        assert!(!set.insert(0, 2).unwrap());
        assert!(set.contains(2, 0));
        assert_eq!(set.neighbors(0), vec![2]);
    }

    #[test]
    fn model_spec_degrees() {
        let chain = ModelSpec::new(Family::Chain, 10).build().unwrap();
        assert_eq!(chain.max_degree(), 2);
        let star = ModelSpec::new(Family::Star, 10).with_tau(0.4).build().unwrap();
        assert_eq!(star.max_degree(), 9);
        assert_eq!(star.edges.neighbors(0), (1..10).collect::<Vec<_>>());
        let grid = ModelSpec::new(Family::Grid, 16).build().unwrap();
        assert_eq!(grid.max_degree(), 4);
        assert_eq!(grid.edges.len(), 24);
        let diamond = ModelSpec::new(Family::Diamond, 4).with_tau(0.3).build().unwrap();
        assert_eq!(diamond.max_degree(), 3);
        assert!(ModelSpec::new(Family::Grid, 10).build().is_err());
        assert!(ModelSpec::new(Family::Diamond, 5).with_tau(0.3).build().is_err());
    }

    #[test]
    fn multi_hub_star() {
        let model = ModelSpec::new(Family::Star, 36)
            .with_tau(0.4)
            .with_star_degree(4)
            .build()
            .unwrap();
        assert_eq!(multi_star_hubs(36, 4), 4);
        assert_eq!(model.max_degree(), 4);
        assert_eq!(model.edges.len(), 16);
        assert_eq!(model.edges.neighbors(5), vec![6, 7, 8, 9]);
        // p = 100 with degree 10 cannot host 10 hubs of 11 nodes.
        assert_eq!(multi_star_hubs(100, 10), 9);
    }

    #[test]
    fn sampling_is_deterministic() {
        let sigma = SymmetricMatrix::identity(2);
        let a = sample_gaussian(&sigma, 3, 7).unwrap();
        let b = sample_gaussian(&sigma, 3, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_gaussian(&sigma, 3, 8).unwrap());
        assert!(sample_gaussian(&sigma, 0, 7).is_err());
        let bad = SymmetricMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]], 0.0).unwrap();
        assert!(sample_gaussian(&bad, 3, 7).is_err());
    }

    #[test]
    fn sample_variance_large_n() {
        let x = sample_gaussian(&SymmetricMatrix::from_diag(&[4.0, 1.0]), 100_000, 1).unwrap();
        let s = sample_covariance(&x);
        assert!((3.9..=4.1).contains(&s.get(0, 0)), "{}", s.get(0, 0));

        let x = sample_gaussian(&make_chain_cov(3, 0.5).unwrap(), 200_000, 2).unwrap();
        let s = sample_covariance(&x);
        let corr = s.get(0, 1) / (s.get(0, 0) * s.get(1, 1)).sqrt();
        assert!((0.49..=0.51).contains(&corr), "{corr}");
    }

    #[test]
    fn sample_covariance_examples() {
        let x = SampleSet::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(sample_covariance(&x), SymmetricMatrix::from_diag(&[1.0, 0.0]));
        let x = SampleSet::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0]]).unwrap();
        assert_eq!(sample_covariance(&x), SymmetricMatrix::from_fn(2, |_, _| 1.0));
    }

    #[test]
    fn sample_covariance_concentrates() {
        let x = sample_gaussian(&SymmetricMatrix::identity(3), 1_000_000, 11).unwrap();
        let dev = sup_norm_deviation(&sample_covariance(&x), &SymmetricMatrix::identity(3)).unwrap();
        assert!(dev <= 0.01, "{dev}");
    }

    #[test]
    fn fold_helpers() {
        let x = SampleSet::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]).unwrap();
        assert_eq!(x.slice_rows(1, 3).column(0), vec![2.0, 3.0]);
        assert_eq!(x.without_rows(1, 3).column(0), vec![1.0, 4.0]);
    }
}
