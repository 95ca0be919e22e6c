//! Partition distances, coefficient/prediction error statistics, scoring
//! rules, WAIC and the consensus partition.
//!
//! The set-matching distance between partitions `{A_j}` and `{B_l}` of a set
//! with total measure `|D|` is
//!
//! ```text
//! ε = 2 - |D|⁻¹ [ Σ_j max_l |A_j ∩ B_l| + Σ_l max_j |A_j ∩ B_l| ] = ε₁ + ε₂
//! ```
//!
//! For point partitions the measure is the point count; for domain
//! partitions it is area, approximated on a regular lattice.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::data::{Dataset, Location};
use crate::error::{Error, Result};
use crate::grid::BlockGrid;
use crate::likelihood::ModelConfig;
use crate::predict::prediction_matrix;
use crate::sampler::PosteriorSample;

/// A known partition of (part of) the unit square.
pub trait ReferencePartition: Sync {
    /// Number of regions `k0`.
    fn n_regions(&self) -> usize;
    /// Region of `s` in `0..k0`, or `None` outside the domain.
    fn region_of(&self, s: Location) -> Option<usize>;
}

/// Dense contingency table `table[j][l] = Σ weight` over items labelled
/// `(a = j, b = l)`.
pub fn contingency(a: &[usize], b: &[usize], weights: Option<&[u64]>) -> Result<Vec<Vec<u64>>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        table[x][y] += weights.map_or(1, |w| w[i]);
    }
    Ok(table)
}

/// Row-max and column-max sums of a contingency table.
fn matched_mass<T: Copy + PartialOrd + std::iter::Sum<T> + Default>(table: &[Vec<T>]) -> (T, T) {
    let rows = table
        .iter()
        .map(|r| r.iter().copied().fold(T::default(), |m, v| if v > m { v } else { m }))
        .sum();
    let ncol = table.iter().map(Vec::len).max().unwrap_or(0);
    let cols = (0..ncol)
        .map(|c| {
            table
                .iter()
                .filter_map(|r| r.get(c).copied())
                .fold(T::default(), |m, v| if v > m { v } else { m })
        })
        .sum();
    (rows, cols)
}

/// `n · ε_n` as an exact integer: `2n - Σ_j max_l n_jl - Σ_l max_j n_jl`.
pub fn epsilon_n_scaled(a: &[usize], b: &[usize]) -> Result<u64> {
    let table = contingency(a, b, None)?;
    let (rows, cols) = matched_mass(&table);
    Ok(2 * a.len() as u64 - rows - cols)
}

/// Set-matching distance between two labelings of the same points.
pub fn epsilon_n(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::Invalid("partitions of an empty set".into()));
    }
    Ok(epsilon_n_scaled(a, b)? as f64 / a.len() as f64)
}

/// The two halves of the set-matching distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetMatching {
    /// `1 - |D|⁻¹ Σ_j max_l |A_j ∩ B_l|`
    pub first: f64,
    /// `1 - |D|⁻¹ Σ_l max_j |A_j ∩ B_l|`
    pub second: f64,
}

impl SetMatching {
    pub fn from_table(table: &[Vec<u64>], total: u64) -> Self {
        let (rows, cols) = matched_mass(table);
        let t = total as f64;
        Self {
            first: 1.0 - rows as f64 / t,
            second: 1.0 - cols as f64 / t,
        }
    }

    pub fn total(&self) -> f64 {
        self.first + self.second
    }
}

/// Lattice approximation of intersection areas between block clusters and a
/// reference partition. Lattice points sit at cell-centred positions
/// `((i + ½)/r, (j + ½)/r)`; only points inside the reference domain count.
#[derive(Debug, Clone)]
pub struct DomainOverlap {
    n_regions: usize,
    /// `weights[block][region]` = lattice points in both.
    weights: Vec<Vec<u64>>,
    total: u64,
}

impl DomainOverlap {
    pub fn new(grid: &BlockGrid, reference: &dyn ReferencePartition, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::ZeroResolution);
        }
        let k0 = reference.n_regions();
        let r = resolution as f64;
        let rows: Vec<Vec<(usize, usize)>> = (0..resolution)
            .into_par_iter()
            .map(|j| {
                (0..resolution)
                    .filter_map(|i| {
                        let s = Location::new((i as f64 + 0.5) / r, (j as f64 + 0.5) / r);
                        reference
                            .region_of(s)
                            .map(|region| (grid.nearest_block_of_cell(grid.cell_of(s)), region))
                    })
                    .collect()
            })
            .collect();
        let mut weights = vec![vec![0u64; k0]; grid.n_blocks()];
        let mut total = 0;
        for (block, region) in rows.into_iter().flatten() {
            weights[block][region] += 1;
            total += 1;
        }
        if total == 0 {
            return Err(Error::Invalid("reference domain contains no lattice points".into()));
        }
        Ok(Self {
            n_regions: k0,
            weights,
            total,
        })
    }

    /// `table[j][l]` = lattice points in cluster `j` and reference region `l`.
    pub fn intersections(&self, labels: &[usize], k: usize) -> Vec<Vec<u64>> {
        let mut table = vec![vec![0u64; self.n_regions]; k];
        for (b, &l) in labels.iter().enumerate() {
            for (cell, w) in table[l].iter_mut().zip(&self.weights[b]) {
                *cell += w;
            }
        }
        table
    }

    pub fn epsilon(&self, sample: &PosteriorSample) -> SetMatching {
        SetMatching::from_table(&self.intersections(&sample.labels, sample.k), self.total)
    }

    /// Reference region sharing the largest area with each cluster, ties to
    /// the smaller region index.
    pub fn matched_index(&self, sample: &PosteriorSample) -> Vec<usize> {
        self.intersections(&sample.labels, sample.k)
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, 0u64), |best, (l, &v)| if v > best.1 { (l, v) } else { best })
                    .0
            })
            .collect()
    }

    pub fn lattice_points(&self) -> u64 {
        self.total
    }
}

/// Domain distance between a sample's partition and a reference.
pub fn epsilon_domain(
    sample: &PosteriorSample,
    grid: &BlockGrid,
    reference: &dyn ReferencePartition,
    resolution: usize,
) -> Result<f64> {
    Ok(DomainOverlap::new(grid, reference, resolution)?.epsilon(sample).total())
}

pub fn matched_index(
    sample: &PosteriorSample,
    grid: &BlockGrid,
    reference: &dyn ReferencePartition,
    resolution: usize,
) -> Result<Vec<usize>> {
    Ok(DomainOverlap::new(grid, reference, resolution)?.matched_index(sample))
}

/// Exact domain distance between two block labellings of the same grid:
/// every active block contributes area `K⁻²`, so intersections are shared
/// block counts.
pub fn epsilon_blocks(grid: &BlockGrid, a: &[usize], b: &[usize]) -> Result<SetMatching> {
    if a.len() != grid.n_blocks() || b.len() != grid.n_blocks() {
        return Err(Error::LengthMismatch(a.len(), grid.n_blocks()));
    }
    let table = contingency(a, b, None)?;
    Ok(SetMatching::from_table(&table, grid.n_blocks() as u64))
}

/// `log^{α₀ + (1 + α_b)/2}(n)`, evaluated as `exp(p · log log n)`.
pub fn rate_denominator(n: usize, alpha0: f64, alpha_b: f64) -> f64 {
    let power = alpha0 + 0.5 * (1.0 + alpha_b);
    (power * (n as f64).ln().ln()).exp()
}

/// Normalized partition error `e1` and coefficient error `e2` of one sample.
pub fn normalized_errors(
    sample: &PosteriorSample,
    overlap: &DomainOverlap,
    true_thetas: &[Vec<f64>],
    alpha0: f64,
    alpha_b: f64,
    n: usize,
) -> (f64, f64) {
    let scale = (n as f64).sqrt() / rate_denominator(n, alpha0, alpha_b);
    let eps = overlap.epsilon(sample).total();
    let matched = overlap.matched_index(sample);
    let max_err = sample
        .thetas
        .iter()
        .zip(&matched)
        .map(|(theta, &l)| {
            theta
                .iter()
                .zip(&true_thetas[l])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    (scale * eps, scale * max_err)
}

/// Normalized prediction error `e3` of every sample, from a prediction
/// matrix `pred[s][i]` over the test points.
pub fn prediction_error_e3(
    pred: &[Vec<f64>],
    true_means: &[f64],
    alpha0: f64,
    alpha_b: f64,
    n: usize,
) -> Result<Vec<f64>> {
    let scale = (n as f64).sqrt() / rate_denominator(n, alpha0, alpha_b);
    pred.iter()
        .map(|mu| {
            if mu.len() != true_means.len() {
                return Err(Error::LengthMismatch(mu.len(), true_means.len()));
            }
            let sq: f64 = mu.iter().zip(true_means).map(|(a, b)| (a - b).powi(2)).sum();
            Ok(scale * sq / true_means.len() as f64)
        })
        .collect()
}

/// `e3` computed directly from samples and test points.
#[allow(clippy::too_many_arguments)]
pub fn prediction_error_e3_at(
    samples: &[PosteriorSample],
    grid: &BlockGrid,
    locations: &[Location],
    covariates: &[Vec<f64>],
    true_means: &[f64],
    alpha0: f64,
    alpha_b: f64,
    n: usize,
) -> Result<Vec<f64>> {
    let pred = prediction_matrix(samples, grid, locations, covariates)?;
    prediction_error_e3(&pred, true_means, alpha0, alpha_b, n)
}

/// Mean absolute error of the posterior-mean prediction,
/// `T⁻¹ ‖M⁻¹ Σ_s (μ_s - μ₀)‖₁`.
pub fn mae(pred: &[Vec<f64>], true_means: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::Invalid("MAE needs at least one sample".into()));
    }
    let m = pred.len() as f64;
    let mut total = 0.0;
    for (i, &truth) in true_means.iter().enumerate() {
        let avg = pred.iter().map(|row| row[i]).sum::<f64>() / m;
        total += (avg - truth).abs();
    }
    Ok(total / true_means.len() as f64)
}

/// Ensemble CRPS `mean_s |m_s - y| - ½ mean_{s,s'} |m_s - m_s'|`, using the
/// sorted-order identity for the pairwise term.
pub fn crps(ensemble: &[f64], y: f64) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::Invalid("CRPS needs at least one ensemble member".into()));
    }
    let m = ensemble.len() as f64;
    let abs_err = ensemble.iter().map(|v| (v - y).abs()).sum::<f64>() / m;
    let mut sorted = ensemble.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Σ_{s,s'} |m_s - m_s'| = 2 Σ_i (2i - M - 1) m_(i), i = 1..M
    let pair: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, v)| (2.0 * (i as f64 + 1.0) - m - 1.0) * v)
        .sum::<f64>()
        * 2.0
        / (m * m);
    Ok(abs_err - 0.5 * pair)
}

/// Mean CRPS over test points from a prediction matrix `pred[s][i]`.
pub fn crps_mean(pred: &[Vec<f64>], truth: &[f64]) -> Result<f64> {
    let scores = (0..truth.len())
        .into_par_iter()
        .map(|i| {
            let ens: Vec<f64> = pred.iter().map(|row| row[i]).collect();
            crps(&ens, truth[i])
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(scores.iter().sum::<f64>() / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Waic {
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
}

/// WAIC with the variance-form penalty: `-2 Σ_i [log mean_s p_is - var_s log p_is]`.
pub fn waic(
    samples: &[PosteriorSample],
    dataset: &Dataset,
    grid: &BlockGrid,
    model: &ModelConfig,
) -> Result<Waic> {
    if samples.len() < 2 {
        return Err(Error::Invalid("WAIC needs at least two samples".into()));
    }
    model.validate()?;
    let m = samples.len() as f64;
    let log_norm = -0.5 * (2.0 * std::f64::consts::PI * model.sigma2).ln();
    let per_obs: Vec<(f64, f64)> = (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let b = grid.block_of()[i];
            let x = dataset.x(i);
            let y = dataset.y(i);
            let logp: Vec<f64> = samples
                .iter()
                .map(|s| {
                    let mu: f64 = s.thetas[s.labels[b]].iter().zip(x).map(|(t, v)| t * v).sum();
                    log_norm - (y - mu).powi(2) / (2.0 * model.sigma2)
                })
                .collect();
            let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logp.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
            let mean = logp.iter().sum::<f64>() / m;
            let var = logp.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (m - 1.0);
            (lse - m.ln(), var)
        })
        .collect();
    let lppd: f64 = per_obs.iter().map(|p| p.0).sum();
    let p_waic: f64 = per_obs.iter().map(|p| p.1).sum();
    let waic = -2.0 * (lppd - p_waic);
    if !waic.is_finite() {
        return Err(Error::Invalid("WAIC is not finite".into()));
    }
    Ok(Waic { waic, lppd, p_waic })
}

/// Index of the ε_n-medoid sample: the one minimizing the summed distance
/// to all samples, over observation labels. Ties go to the earliest index.
pub fn consensus_partition(samples: &[PosteriorSample], grid: &BlockGrid) -> Result<usize> {
    if samples.is_empty() {
        return Err(Error::Invalid("consensus needs at least one sample".into()));
    }
    // group identical block labellings; first index and multiplicity
    let mut groups: Vec<(usize, u64)> = Vec::new();
    let mut seen: HashMap<&[usize], usize> = HashMap::new();
    for (i, s) in samples.iter().enumerate() {
        match seen.get(s.labels.as_slice()) {
            Some(&g) => groups[g].1 += 1,
            None => {
                seen.insert(&s.labels, groups.len());
                groups.push((i, 1));
            }
        }
    }
    let weights: Vec<u64> = grid.block_counts().iter().map(|&c| c as u64).collect();
    let n = grid.block_of().len() as u64;
    let scaled = |a: &[usize], b: &[usize]| -> u64 {
        let table = contingency(a, b, Some(&weights)).expect("equal lengths");
        let (rows, cols) = matched_mass(&table);
        2 * n - rows - cols
    };
    let scores: Vec<u128> = groups
        .par_iter()
        .map(|&(i, _)| {
            groups
                .iter()
                .map(|&(j, mult)| scaled(&samples[i].labels, &samples[j].labels) as u128 * mult as u128)
                .sum()
        })
        .collect();
    let best = scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cmp(b.1).then(groups[a.0].0.cmp(&groups[b.0].0)))
        .map(|(g, _)| groups[g].0)
        .expect("non-empty");
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;

    struct Halves;
    impl ReferencePartition for Halves {
        fn n_regions(&self) -> usize {
            2
        }
        fn region_of(&self, s: Location) -> Option<usize> {
            Some(usize::from(s.s_h >= 0.5))
        }
    }

    fn full_grid(k: usize) -> BlockGrid {
        let mut locs = Vec::new();
        for row in 0..k {
            for col in 0..k {
                locs.push(Location::new((col as f64 + 0.5) / k as f64, (row as f64 + 0.5) / k as f64));
            }
        }
        let n = locs.len();
        BlockGrid::build(&Dataset::new(locs, vec![1.0; n], vec![0.0; n], 1).unwrap(), k).unwrap()
    }

    fn sample(labels: Vec<usize>, thetas: Vec<Vec<f64>>) -> PosteriorSample {
        PosteriorSample {
            iter: 0,
            k: thetas.len(),
            labels,
            thetas,
            log_lik: 0.0,
        }
    }

    #[test]
    fn epsilon_n_examples() {
        assert_eq!(epsilon_n(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(epsilon_n(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 0.0);
        assert_eq!(epsilon_n(&[0, 0, 1, 1], &[0, 0, 0, 0]).unwrap(), 0.5);
        assert!(epsilon_n(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn epsilon_domain_identity_and_halves() {
        let grid = full_grid(4);
        let halves: Vec<usize> = grid
            .active_cells()
            .iter()
            .map(|&c| usize::from(c % 4 >= 2))
            .collect();
        let s = sample(halves, vec![vec![0.0], vec![1.0]]);
        assert_eq!(epsilon_domain(&s, &grid, &Halves, 100).unwrap(), 0.0);
        let one = sample(vec![0; 16], vec![vec![0.0]]);
        let e = epsilon_domain(&one, &grid, &Halves, 100).unwrap();
        assert!((e - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lattice_refinement_converges() {
        // reference boundary at 0.45 cuts through block column 1 of a 4-grid
        struct Cut;
        impl ReferencePartition for Cut {
            fn n_regions(&self) -> usize {
                2
            }
            fn region_of(&self, s: Location) -> Option<usize> {
                Some(usize::from(s.s_h >= 0.45))
            }
        }
        let grid = full_grid(4);
        let halves: Vec<usize> = grid.active_cells().iter().map(|&c| usize::from(c % 4 >= 2)).collect();
        let s = sample(halves, vec![vec![0.0], vec![1.0]]);
        for r in [20usize, 50, 100] {
            let a = epsilon_domain(&s, &grid, &Cut, r).unwrap();
            let b = epsilon_domain(&s, &grid, &Cut, 2 * r).unwrap();
            assert!((a - b).abs() < 2.0 / r as f64, "r = {r}: {a} vs {b}");
        }
        let fine = epsilon_domain(&s, &grid, &Cut, 1000).unwrap();
        // area 0.05 mismatched on each side of the matching
        assert!((fine - 0.1).abs() < 2e-3);
    }

    #[test]
    fn matched_index_rules() {
        let grid = full_grid(4);
        let halves: Vec<usize> = grid.active_cells().iter().map(|&c| usize::from(c % 4 >= 2)).collect();
        let s = sample(halves, vec![vec![0.0], vec![1.0]]);
        assert_eq!(matched_index(&s, &grid, &Halves, 40).unwrap(), vec![0, 1]);
        // whole square overlaps both halves equally → smaller index
        let one = sample(vec![0; 16], vec![vec![0.0]]);
        assert_eq!(matched_index(&one, &grid, &Halves, 40).unwrap(), vec![0]);
        // mostly-right cluster: columns 1..4
        let lab: Vec<usize> = grid.active_cells().iter().map(|&c| usize::from(c % 4 >= 1)).collect();
        let s = sample(lab, vec![vec![0.0], vec![1.0]]);
        assert_eq!(matched_index(&s, &grid, &Halves, 40).unwrap(), vec![0, 1]);
    }

    #[test]
    fn block_epsilon_decomposes() {
        let grid = full_grid(3);
        let a = vec![0, 0, 1, 0, 0, 1, 2, 2, 2];
        let b = vec![0, 1, 1, 0, 1, 1, 0, 1, 1];
        let sm = epsilon_blocks(&grid, &a, &b).unwrap();
        // cluster rows (b=0, b=1): a0 → (2, 2), a1 → (0, 2), a2 → (1, 2)
        assert!((sm.first - (1.0 - 6.0 / 9.0)).abs() < 1e-12);
        assert!((sm.second - (1.0 - 4.0 / 9.0)).abs() < 1e-12);
        assert!((sm.total() - (sm.first + sm.second)).abs() < 1e-15);
    }

    #[test]
    fn normalized_errors_vanish_on_perfect_recovery() {
        let grid = full_grid(4);
        let halves: Vec<usize> = grid.active_cells().iter().map(|&c| usize::from(c % 4 >= 2)).collect();
        let truth = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let s = sample(halves, truth.clone());
        let ov = DomainOverlap::new(&grid, &Halves, 40).unwrap();
        assert_eq!(normalized_errors(&s, &ov, &truth, 0.1, 1.0, 500), (0.0, 0.0));
    }

    #[test]
    fn denominator_at_4000() {
        let d = rate_denominator(4000, 0.1, 1.0);
        let direct = (4000f64).ln().powf(1.1);
        assert!((d - direct).abs() < 1e-12);
        assert!((d - 10.25).abs() < 0.01);
    }

    #[test]
    fn e3_formula() {
        let e = prediction_error_e3(&[vec![1.0, 2.0]], &[1.0, 2.0], 0.1, 1.0, 100).unwrap();
        assert_eq!(e, vec![0.0]);
        // single test point with unit error: n = 3 keeps log log n positive
        let n = 3;
        let e = prediction_error_e3(&[vec![1.0]], &[0.0], 0.1, 1.0, n).unwrap();
        let expect = (n as f64).sqrt() / rate_denominator(n, 0.1, 1.0);
        assert!((e[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn mae_cases() {
        assert_eq!(mae(&[vec![1.0, 2.0]], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((mae(&[vec![1.5, 2.5], vec![1.5, 2.5]], &[1.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        let pred = vec![vec![0.3, -1.0, 2.0], vec![0.1, 0.0, 1.0], vec![-0.4, 2.0, 0.5]];
        let truth = [0.0, 0.5, 1.0];
        let mut oracle = 0.0;
        for i in 0..3 {
            let mut acc = 0.0;
            for row in &pred {
                acc += row[i] - truth[i];
            }
            oracle += (acc / 3.0f64).abs();
        }
        assert!((mae(&pred, &truth).unwrap() - oracle / 3.0).abs() < 1e-12);
    }

    #[test]
    fn crps_cases() {
        assert_eq!(crps(&[2.0, 2.0, 2.0], 2.0).unwrap(), 0.0);
        assert!((crps(&[0.0, 2.0], 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(crps(&[3.0], 1.0).unwrap(), 2.0);
        // sorted identity against the double sum
        let ens: [f64; 6] = [0.3, -1.2, 2.5, 0.0, 0.9, 0.9];
        let m = ens.len() as f64;
        let mut pair = 0.0;
        for a in &ens {
            for b in &ens {
                pair += (a - b).abs();
            }
        }
        let naive = ens.iter().map(|v| (v - 0.4f64).abs()).sum::<f64>() / m - 0.5 * pair / (m * m);
        assert!((crps(&ens, 0.4).unwrap() - naive).abs() < 1e-12);
    }

    #[test]
    fn waic_cases() {
        let ds = Dataset::new(
            vec![Location::new(0.1, 0.1), Location::new(0.6, 0.1)],
            vec![1.0, 1.0],
            vec![0.5, -1.0],
            1,
        )
        .unwrap();
        let grid = BlockGrid::build(&ds, 2).unwrap();
        let model = ModelConfig { sigma2: 1.0, gamma: 1.0 };
        let s = sample(vec![0, 0], vec![vec![0.0]]);
        let w = waic(&[s.clone(), s.clone()], &ds, &grid, &model).unwrap();
        let lp = |y: f64| -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * y * y;
        assert!(w.p_waic.abs() < 1e-15);
        assert!((w.waic + 2.0 * (lp(0.5) + lp(-1.0))).abs() < 1e-12);

        // two different samples, hand computation
        let s2 = sample(vec![0, 0], vec![vec![1.0]]);
        let w = waic(&[s.clone(), s2], &ds, &grid, &model).unwrap();
        let mut expect = 0.0;
        for y in [0.5f64, -1.0] {
            let (a, b) = (lp(y), lp(y - 1.0));
            let lppd = ((a.exp() + b.exp()) / 2.0).ln();
            let mean = (a + b) / 2.0;
            let var = (a - mean).powi(2) + (b - mean).powi(2);
            expect += lppd - var;
        }
        assert!((w.waic + 2.0 * expect).abs() < 1e-12);
        assert!(waic(&[s], &ds, &grid, &model).is_err());
    }

    #[test]
    fn consensus_cases() {
        let grid = full_grid(2);
        let a = sample(vec![0, 0, 1, 1], vec![vec![0.0], vec![0.0]]);
        let b = sample(vec![0, 1, 2, 3], vec![vec![0.0]; 4]);
        assert_eq!(consensus_partition(&[a.clone(), a.clone(), a.clone()], &grid).unwrap(), 0);
        assert_eq!(consensus_partition(&[b.clone(), a.clone(), a.clone()], &grid).unwrap(), 1);
    }
}
