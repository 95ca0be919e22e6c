//! Collapsed Gaussian likelihood under a Zellner g-prior with `g = γ n`.
//!
//! For a partition into clusters `j = 1..k` with design blocks `X_j`, the
//! coefficients integrate out to
//!
//! ```text
//! log p(y) = -(n/2) log(2πσ²) - yᵀy / (2σ²)
//!            - Σ_j (r_j / 2) log(γn + 1)
//!            + γn / (2σ²(γn + 1)) · Σ_j q_j
//! ```
//!
//! where `q_j = (X_jᵀy_j)ᵀ (X_jᵀX_j)⁺ (X_jᵀy_j)` and `r_j` is the rank of
//! `X_jᵀX_j` (equal to `d` whenever the cluster design has full column rank).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grid::BlockGrid;

/// Relative eigenvalue cutoff for the pseudoinverse, scaled by `trace / d`.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Fixed noise variance σ².
    pub sigma2: f64,
    /// Prior scale γ; the prior covariance is `γ n σ² (XᵀX)⁺`.
    pub gamma: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            sigma2: 1.0,
            gamma: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::Config(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Sufficient statistics of one cluster: `XᵀX`, `Xᵀy`, `yᵀy` and the count.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    dim: usize,
    gram: Vec<f64>,
    xty: Vec<f64>,
    yty: f64,
    count: usize,
}

impl ClusterStats {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            gram: vec![0.0; dim * dim],
            xty: vec![0.0; dim],
            yty: 0.0,
            count: 0,
        }
    }

    pub fn push(&mut self, x: &[f64], y: f64) {
        debug_assert_eq!(x.len(), self.dim);
        for (r, &xr) in x.iter().enumerate() {
            for (c, &xc) in x.iter().enumerate() {
                self.gram[r * self.dim + c] += xr * xc;
            }
            self.xty[r] += xr * y;
        }
        self.yty += y * y;
        self.count += 1;
    }

    pub fn add(&mut self, other: &Self) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.gram.iter_mut().zip(&other.gram) {
            *a += b;
        }
        for (a, b) in self.xty.iter_mut().zip(&other.xty) {
            *a += b;
        }
        self.yty += other.yty;
        self.count += other.count;
    }

    pub fn merged(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add(other);
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major `d × d` Gram matrix.
    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    pub fn xty(&self) -> &[f64] {
        &self.xty
    }

    pub fn yty(&self) -> f64 {
        self.yty
    }

    pub fn count(&self) -> usize {
        self.count
    }

    fn gram_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.gram)
    }

    fn rank_tolerance(&self) -> Option<f64> {
        let trace: f64 = (0..self.dim).map(|i| self.gram[i * self.dim + i]).sum();
        (trace > 0.0).then(|| RANK_TOLERANCE * trace / self.dim as f64)
    }

    /// Whether `other` agrees with `self` up to floating-point round-off.
    pub fn approx_eq(&self, other: &Self, rel: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()));
        self.dim == other.dim
            && self.count == other.count
            && close(self.yty, other.yty)
            && self.gram.iter().zip(&other.gram).all(|(&a, &b)| close(a, b))
            && self.xty.iter().zip(&other.xty).all(|(&a, &b)| close(a, b))
    }

    /// Explicit pseudoinverse route for `q` and the rank: symmetric
    /// eigendecomposition with small eigenvalues treated as zero.
    pub fn quadratic_form_pinv(&self) -> QuadForm {
        let Some(tol) = self.rank_tolerance() else {
            return QuadForm { q: 0.0, rank: 0 };
        };
        let eig = SymmetricEigen::new(self.gram_matrix());
        let xty = DVector::from_column_slice(&self.xty);
        let mut q = 0.0;
        let mut rank = 0;
        for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda > tol {
                let proj = eig.eigenvectors.column(i).dot(&xty);
                q += proj * proj / lambda;
                rank += 1;
            }
        }
        QuadForm { q, rank }
    }

    /// `q = xtyᵀ gram⁺ xty` and the rank of `gram`. Uses a Cholesky solve
    /// when the smallest eigenvalue is provably above the cutoff, otherwise
    /// falls back to the eigen route.
    pub fn quadratic_form(&self) -> QuadForm {
        let Some(tol) = self.rank_tolerance() else {
            return QuadForm { q: 0.0, rank: 0 };
        };
        if let Some(chol) = self.gram_matrix().cholesky() {
            // λ_min ≥ 1 / ‖A⁻¹‖_F
            let inv = chol.inverse();
            if 1.0 / inv.norm() > tol {
                let xty = DVector::from_column_slice(&self.xty);
                let sol = chol.solve(&xty);
                return QuadForm {
                    q: xty.dot(&sol),
                    rank: self.dim,
                };
            }
        }
        self.quadratic_form_pinv()
    }
}

/// `q_j` and rank of one cluster's Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadForm {
    pub q: f64,
    pub rank: usize,
}

/// Sufficient statistics for cluster `j` under a block labelling.
pub fn cluster_stats(dataset: &Dataset, grid: &BlockGrid, labels: &[usize], j: usize) -> ClusterStats {
    let mut s = ClusterStats::zeros(dataset.dim());
    for (i, &b) in grid.block_of().iter().enumerate() {
        if labels[b] == j {
            s.push(dataset.x(i), dataset.y(i));
        }
    }
    s
}

/// Per-block sufficient statistics, indexed by active block.
pub fn block_stats(dataset: &Dataset, grid: &BlockGrid) -> Vec<ClusterStats> {
    let mut out = vec![ClusterStats::zeros(dataset.dim()); grid.n_blocks()];
    for (i, &b) in grid.block_of().iter().enumerate() {
        out[b].push(dataset.x(i), dataset.y(i));
    }
    out
}

/// Eigenvector and eigenvalue of a posterior covariance.
type EigenPair = (DVector<f64>, f64);

/// Precomputed constants of the collapsed likelihood for fixed `(n, yᵀy, σ², γ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Likelihood {
    n: usize,
    /// `-(n/2) log(2πσ²) - yᵀy / (2σ²)`
    base: f64,
    /// `log(γn + 1)`
    log_inflation: f64,
    /// `γn / (2σ²(γn + 1))`
    fit_weight: f64,
    /// `γn / (γn + 1)`
    shrinkage: f64,
    sigma2: f64,
}

/// Contribution of one cluster to the log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterTerm {
    pub q: f64,
    pub rank: usize,
    pub value: f64,
}

impl Likelihood {
    pub fn new(config: &ModelConfig, n: usize, total_yty: f64) -> Result<Self> {
        config.validate()?;
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let nf = n as f64;
        let g = config.gamma * nf;
        Ok(Self {
            n,
            base: -0.5 * nf * (2.0 * std::f64::consts::PI * config.sigma2).ln()
                - total_yty / (2.0 * config.sigma2),
            log_inflation: g.ln_1p(),
            fit_weight: g / (2.0 * config.sigma2 * (g + 1.0)),
            shrinkage: g / (g + 1.0),
            sigma2: config.sigma2,
        })
    }

    pub fn for_dataset(config: &ModelConfig, dataset: &Dataset) -> Result<Self> {
        let yty = dataset.responses().iter().map(|y| y * y).sum();
        Self::new(config, dataset.len(), yty)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Partition-independent part of the log-likelihood.
    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn term(&self, stats: &ClusterStats) -> ClusterTerm {
        let QuadForm { q, rank } = stats.quadratic_form();
        ClusterTerm {
            q,
            rank,
            value: -0.5 * rank as f64 * self.log_inflation + self.fit_weight * q,
        }
    }

    /// Sums precomputed cluster terms into the total log-likelihood.
    pub fn total(&self, terms: &[ClusterTerm]) -> Result<f64> {
        let mut acc = self.base;
        for (j, t) in terms.iter().enumerate() {
            if !t.value.is_finite() {
                return Err(Error::NonFinite { cluster: j });
            }
            acc += t.value;
        }
        if acc.is_finite() {
            Ok(acc)
        } else {
            Err(Error::NonFinite { cluster: 0 })
        }
    }

    /// Posterior shrinkage factor `γn / (γn + 1)`.
    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    /// Conditional posterior mean `γn/(γn+1) · gram⁺ xty`.
    pub fn theta_mean(&self, stats: &ClusterStats) -> Result<Vec<f64>> {
        Ok(self.theta_moments(stats)?.0)
    }

    fn theta_moments(&self, stats: &ClusterStats) -> Result<(Vec<f64>, Vec<EigenPair>)> {
        if stats.count == 0 {
            return Err(Error::EmptyCluster);
        }
        let d = stats.dim;
        let mut mean = DVector::zeros(d);
        let mut factors = Vec::with_capacity(d);
        if let Some(tol) = stats.rank_tolerance() {
            let eig = SymmetricEigen::new(stats.gram_matrix());
            let xty = DVector::from_column_slice(&stats.xty);
            for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
                if lambda > tol {
                    let v = eig.eigenvectors.column(i).into_owned();
                    mean += &v * (v.dot(&xty) / lambda);
                    factors.push((v, lambda));
                }
            }
        }
        mean *= self.shrinkage;
        Ok((mean.iter().copied().collect(), factors))
    }

    /// One draw from `N(γn/(γn+1) gram⁺ xty, γnσ²/(γn+1) gram⁺)`.
    pub fn sample_theta<R: Rng + ?Sized>(&self, stats: &ClusterStats, rng: &mut R) -> Result<Vec<f64>> {
        let (mut theta, factors) = self.theta_moments(stats)?;
        let scale = (self.shrinkage * self.sigma2).sqrt();
        for (v, lambda) in factors {
            let z: f64 = rng.sample(StandardNormal);
            let step = scale * z / lambda.sqrt();
            for (t, vi) in theta.iter_mut().zip(v.iter()) {
                *t += step * vi;
            }
        }
        Ok(theta)
    }
}

/// Collapsed log-likelihood of a partition given per-cluster statistics.
pub fn integrated_log_likelihood(
    stats_per_cluster: &[ClusterStats],
    config: &ModelConfig,
    n: usize,
    total_yty: f64,
) -> Result<f64> {
    let counted: usize = stats_per_cluster.iter().map(ClusterStats::count).sum();
    if counted != n {
        return Err(Error::StatsMismatch(format!(
            "cluster counts sum to {counted}, expected n = {n}"
        )));
    }
    let lik = Likelihood::new(config, n, total_yty)?;
    let terms: Vec<ClusterTerm> = stats_per_cluster.iter().map(|s| lik.term(s)).collect();
    lik.total(&terms)
}

/// `log p(split) - log p(unsplit)` when `parent` is divided into `a` and `b`.
pub fn log_likelihood_delta_split(
    parent: &ClusterStats,
    a: &ClusterStats,
    b: &ClusterStats,
    config: &ModelConfig,
    n: usize,
) -> Result<f64> {
    if !a.merged(b).approx_eq(parent, 1e-9) {
        return Err(Error::StatsMismatch(
            "child statistics do not sum to the parent".into(),
        ));
    }
    // yᵀy only enters the base term, which cancels
    let lik = Likelihood::new(config, n, 0.0)?;
    let delta = lik.term(a).value + lik.term(b).value - lik.term(parent).value;
    if delta.is_finite() {
        Ok(delta)
    } else {
        Err(Error::NonFinite { cluster: 0 })
    }
}

/// Draws cluster coefficients from their conditional posterior.
pub fn sample_theta_conditional<R: Rng + ?Sized>(
    stats: &ClusterStats,
    config: &ModelConfig,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Likelihood::new(config, n, 0.0)?.sample_theta(stats, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stats_from(rows: &[(&[f64], f64)]) -> ClusterStats {
        let mut s = ClusterStats::zeros(rows[0].0.len());
        for (x, y) in rows {
            s.push(x, *y);
        }
        s
    }

    #[test]
    fn one_point_stats() {
        let s = stats_from(&[(&[1.0], 2.0)]);
        assert_eq!(s.gram(), &[1.0]);
        assert_eq!(s.xty(), &[2.0]);
        assert_eq!(s.yty(), 4.0);
        assert_eq!(s.count(), 1);
    }

    #[test]
    fn stats_are_additive() {
        let a = stats_from(&[(&[1.0, 0.5], 2.0), (&[1.0, -0.2], 1.0)]);
        let b = stats_from(&[(&[1.0, 0.9], -3.0)]);
        let all = stats_from(&[(&[1.0, 0.5], 2.0), (&[1.0, -0.2], 1.0), (&[1.0, 0.9], -3.0)]);
        assert!(a.merged(&b).approx_eq(&all, 1e-14));
    }

    #[test]
    fn single_observation_value() {
        // N(0; 0, 2) in log space
        let s = stats_from(&[(&[1.0], 0.0)]);
        let v = integrated_log_likelihood(&[s], &ModelConfig::default(), 1, 0.0).unwrap();
        assert!((v - (-0.5 * (4.0 * std::f64::consts::PI).ln())).abs() < 1e-12);
        assert!((v + 1.26551).abs() < 1e-5);
    }

    #[test]
    fn empty_cluster_contributes_nothing() {
        let lik = Likelihood::new(&ModelConfig::default(), 3, 1.0).unwrap();
        let t = lik.term(&ClusterStats::zeros(2));
        assert_eq!(t.value, 0.0);
        assert_eq!(t.rank, 0);
    }

    #[test]
    fn count_mismatch_rejected() {
        let s = stats_from(&[(&[1.0], 0.0)]);
        assert!(integrated_log_likelihood(&[s], &ModelConfig::default(), 2, 0.0).is_err());
    }

    #[test]
    fn collinear_children_cost_one_inflation() {
        // y = 2 x exactly in both halves: the fits coincide, q terms cancel
        let a = stats_from(&[(&[1.0], 2.0), (&[2.0], 4.0)]);
        let b = stats_from(&[(&[3.0], 6.0)]);
        let parent = a.merged(&b);
        let cfg = ModelConfig { sigma2: 1.5, gamma: 2.0 };
        let n = 10;
        let d = log_likelihood_delta_split(&parent, &a, &b, &cfg, n).unwrap();
        let expect = -0.5 * (2.0 * n as f64 + 1.0).ln();
        assert!((d - expect).abs() < 1e-12, "{d} vs {expect}");
    }

    #[test]
    fn delta_rejects_mismatched_children() {
        let a = stats_from(&[(&[1.0], 2.0)]);
        let b = stats_from(&[(&[3.0], 6.0)]);
        assert!(matches!(
            log_likelihood_delta_split(&a, &a, &b, &ModelConfig::default(), 5),
            Err(Error::StatsMismatch(_))
        ));
    }

    #[test]
    fn rank_deficient_gram_uses_pseudoinverse() {
        // two identical covariate rows: rank 1 in d = 2
        let s = stats_from(&[(&[1.0, 1.0], 3.0), (&[1.0, 1.0], 1.0)]);
        let qf = s.quadratic_form();
        assert_eq!(qf.rank, 1);
        // projection of y onto span{(1,1)}: mean 2 repeated, ‖·‖² = 8
        assert!((qf.q - 8.0).abs() < 1e-10);
    }

    #[test]
    fn cholesky_and_pinv_agree_when_full_rank() {
        let s = stats_from(&[(&[1.0, 0.3], 1.0), (&[1.0, -0.7], 2.0), (&[1.0, 0.1], -0.5)]);
        let a = s.quadratic_form();
        let b = s.quadratic_form_pinv();
        assert_eq!(a.rank, 2);
        assert_eq!(b.rank, 2);
        assert!((a.q - b.q).abs() <= 1e-10 * a.q.abs().max(1.0));
    }

    #[test]
    fn theta_mean_closed_forms() {
        let cfg = ModelConfig::default();
        let lik = Likelihood::new(&cfg, 9, 0.0).unwrap();
        let zero = stats_from(&[(&[1.0, 0.0], 0.0), (&[0.0, 1.0], 0.0)]);
        assert_eq!(lik.theta_mean(&zero).unwrap(), vec![0.0, 0.0]);

        // gram = 3 I, xty = (3, -6)
        let mut s = ClusterStats::zeros(2);
        s.gram = vec![3.0, 0.0, 0.0, 3.0];
        s.xty = vec![3.0, -6.0];
        s.count = 3;
        let m = lik.theta_mean(&s).unwrap();
        let shrink = 9.0 / 10.0;
        assert!((m[0] - shrink * 1.0).abs() < 1e-12);
        assert!((m[1] + shrink * 2.0).abs() < 1e-12);
    }

    #[test]
    fn theta_requires_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_theta_conditional(&ClusterStats::zeros(2), &ModelConfig::default(), 4, &mut rng),
            Err(Error::EmptyCluster)
        ));
    }

    #[test]
    fn theta_draws_match_stated_moments() {
        let s = stats_from(&[
            (&[1.0, 0.5], 1.0),
            (&[1.0, -0.5], 0.0),
            (&[1.0, 0.2], 2.0),
            (&[1.0, -0.9], -1.0),
        ]);
        let cfg = ModelConfig { sigma2: 2.0, gamma: 0.5 };
        let n = 4;
        let lik = Likelihood::new(&cfg, n, 0.0).unwrap();
        let mean = lik.theta_mean(&s).unwrap();
        // covariance γnσ²/(γn+1) gram⁻¹
        let g = DMatrix::from_row_slice(2, 2, s.gram());
        let cov = g.try_inverse().unwrap() * (lik.shrinkage() * cfg.sigma2);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 100_000;
        let mut acc = [0.0; 2];
        for _ in 0..draws {
            let t = lik.sample_theta(&s, &mut rng).unwrap();
            acc[0] += t[0];
            acc[1] += t[1];
        }
        for c in 0..2 {
            let m = acc[c] / draws as f64;
            let se = (cov[(c, c)] / draws as f64).sqrt();
            assert!((m - mean[c]).abs() < 4.0 * se, "component {c}: {m} vs {}", mean[c]);
        }
    }

    #[test]
    fn scaling_identity() {
        let rows: Vec<(Vec<f64>, f64)> = vec![
            (vec![1.0, 0.4], 1.3),
            (vec![1.0, -0.4], -0.2),
            (vec![1.0, 0.8], 2.2),
            (vec![1.0, 0.1], 0.7),
        ];
        let eval = |c: f64, sigma2: f64| {
            let mut a = ClusterStats::zeros(2);
            let mut b = ClusterStats::zeros(2);
            for (i, (x, y)) in rows.iter().enumerate() {
                if i < 2 { a.push(x, c * y) } else { b.push(x, c * y) }
            }
            let yty = a.yty() + b.yty();
            integrated_log_likelihood(&[a, b], &ModelConfig { sigma2, gamma: 1.0 }, 4, yty).unwrap()
        };
        let c: f64 = -2.5;
        let shift = eval(c, 0.7 * c * c) - eval(1.0, 0.7);
        assert!((shift + 4.0 * c.abs().ln()).abs() < 1e-10);
    }
}
