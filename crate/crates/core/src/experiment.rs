//! Simulation harness: the U-shape truth, data generation, rate-based
//! hyperparameter selection, asymptotic sweeps and WAIC grid search.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Location};
use crate::error::{Error, Result};
use crate::grid::BlockGrid;
use crate::likelihood::{cluster_stats, Likelihood, ModelConfig};
use crate::metrics::{
    consensus_partition, normalized_errors, prediction_error_e3_at, waic, DomainOverlap, ReferencePartition, Waic,
};
use crate::sampler::{run_chains, ChainOutput, PosteriorSample, SamplerConfig};

const THIRD: f64 = 1.0 / 3.0;
const TWO_THIRDS: f64 = 2.0 / 3.0;

/// The U-shaped domain `[0,1]² \ (1/3, 1] × (1/3, 2/3)` split into an upper
/// arm (region 0), a lower arm (region 1) and the left bridge (region 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UShapeTruth {
    pub thetas: Vec<Vec<f64>>,
    pub noise_variance: f64,
}

impl Default for UShapeTruth {
    fn default() -> Self {
        Self {
            thetas: vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, -1.0]],
            noise_variance: 9.0,
        }
    }
}

impl UShapeTruth {
    /// Area of each region.
    pub const AREAS: [f64; 3] = [THIRD, THIRD, THIRD * THIRD];

    pub fn mean(&self, region: usize, x: &[f64]) -> f64 {
        self.thetas[region].iter().zip(x).map(|(t, v)| t * v).sum()
    }
}

impl ReferencePartition for UShapeTruth {
    fn n_regions(&self) -> usize {
        3
    }

    fn region_of(&self, s: Location) -> Option<usize> {
        ushape_membership(s)
    }
}

/// Region of `s` in the U-shape, or `None` in the notch or outside `[0,1]²`.
pub fn ushape_membership(s: Location) -> Option<usize> {
    if !(0.0..=1.0).contains(&s.s_h) || !(0.0..=1.0).contains(&s.s_v) {
        return None;
    }
    if s.s_v >= TWO_THIRDS {
        Some(0)
    } else if s.s_v <= THIRD {
        Some(1)
    } else if s.s_h <= THIRD {
        Some(2)
    } else {
        None
    }
}

/// Simulated observations together with their generating truth.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub dataset: Dataset,
    pub regions: Vec<usize>,
    /// Noise-free means `xᵀθ_region`.
    pub means: Vec<f64>,
}

fn ushape_location<R: Rng + ?Sized>(rng: &mut R) -> (Location, usize) {
    loop {
        let s = Location::new(rng.random(), rng.random());
        if let Some(r) = ushape_membership(s) {
            return (s, r);
        }
    }
}

/// Points uniform on the U-shape with `x = (1, Unif(-1, 1))` and, when
/// `noise` is set, `y = xᵀθ + N(0, σ₀²)`; otherwise `y` is the true mean.
fn simulate(truth: &UShapeTruth, n: usize, rng: &mut ChaCha8Rng, noise: bool) -> Result<SimulatedData> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let normal = Normal::new(0.0, truth.noise_variance.sqrt()).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut locs = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(2 * n);
    let mut ys = Vec::with_capacity(n);
    let mut regions = Vec::with_capacity(n);
    let mut means = Vec::with_capacity(n);
    for _ in 0..n {
        let (s, r) = ushape_location(rng);
        let x = [1.0, rng.random_range(-1.0..1.0)];
        let mu = truth.mean(r, &x);
        locs.push(s);
        xs.extend_from_slice(&x);
        regions.push(r);
        means.push(mu);
        ys.push(if noise { mu + normal.sample(rng) } else { mu });
    }
    Ok(SimulatedData {
        dataset: Dataset::new(locs, xs, ys, 2)?,
        regions,
        means,
    })
}

/// Training data of size `n`; a pure function of `(n, seed)`.
pub fn generate_ushape_data(n: usize, seed: u64) -> Result<SimulatedData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate(&UShapeTruth::default(), n, &mut rng, true)
}

/// Noise-free test points for prediction error, drawn on a stream disjoint
/// from the training data of the same seed.
pub fn generate_ushape_test(n: usize, seed: u64) -> Result<SimulatedData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    simulate(&UShapeTruth::default(), n, &mut rng, false)
}

/// Rate constants for the block count and the cluster-count prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConstants {
    pub c_b: f64,
    pub alpha_b: f64,
    pub c_p: f64,
    pub alpha_p: f64,
}

impl Default for RateConstants {
    fn default() -> Self {
        Self {
            c_b: 5.0,
            alpha_b: 1.0,
            c_p: 0.1,
            alpha_p: 0.5,
        }
    }
}

impl RateConstants {
    pub fn select(&self, n: usize) -> Result<HyperParams> {
        select_hyperparams(n, self.c_b, self.alpha_b, self.c_p, self.alpha_p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub constants: RateConstants,
    /// Blocks per side.
    pub k: usize,
    pub log_lambda: f64,
}

/// `K = ⌊c_b √n (log n)^{-(1+α_b)/2}⌋ ∨ 1` and `log λ = -c_p n (log n)^{-α_p}`.
pub fn select_hyperparams(n: usize, c_b: f64, alpha_b: f64, c_p: f64, alpha_p: f64) -> Result<HyperParams> {
    if n < 3 {
        return Err(Error::Config(format!("rate formulas need n >= 3, got {n}")));
    }
    if [c_b, alpha_b, c_p, alpha_p].iter().any(|v| !v.is_finite()) || c_b <= 0.0 || c_p < 0.0 {
        return Err(Error::Config("rate constants must be finite with c_b > 0, c_p >= 0".into()));
    }
    let nf = n as f64;
    let log_n = nf.ln();
    let raw = c_b * nf.sqrt() * (-0.5 * (1.0 + alpha_b) * log_n.ln()).exp();
    let k = (raw.floor() as usize).max(1);
    if k * k > n {
        warn!("K = {k} exceeds sqrt(n) = {:.2}; expect many empty blocks", nf.sqrt());
    }
    Ok(HyperParams {
        constants: RateConstants {
            c_b,
            alpha_b,
            c_p,
            alpha_p,
        },
        k,
        log_lambda: -c_p * nf * (-alpha_p * log_n.ln()).exp(),
    })
}

/// A fitted model: the grid over the retained observations and all chains.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub grid: BlockGrid,
    /// Observations on the largest connected block component.
    pub dataset: Dataset,
    /// Their row indices in the input.
    pub rows: Vec<usize>,
    pub chains: Vec<ChainOutput>,
}

impl FitOutput {
    /// Retained samples of all chains, in chain order.
    pub fn samples(&self) -> Vec<PosteriorSample> {
        self.chains.iter().flat_map(|c| c.samples.iter().cloned()).collect()
    }
}

/// Builds a `resolution`-grid (restricted to its largest connected
/// component) and runs the configured chains.
pub fn fit(dataset: &Dataset, resolution: usize, model: &ModelConfig, sampler: &SamplerConfig) -> Result<FitOutput> {
    let (grid, kept, rows) = BlockGrid::build_largest_component(dataset, resolution)?;
    let chains = run_chains(&kept, &grid, model, sampler)?;
    Ok(FitOutput {
        grid,
        dataset: kept,
        rows,
        chains,
    })
}

/// Point estimate: the ε_n-medoid partition with the conditional posterior
/// mean of each cluster's coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusEstimate {
    pub index: usize,
    pub k: usize,
    pub labels: Vec<usize>,
    pub thetas: Vec<Vec<f64>>,
}

pub fn consensus_estimate(
    samples: &[PosteriorSample],
    dataset: &Dataset,
    grid: &BlockGrid,
    model: &ModelConfig,
) -> Result<ConsensusEstimate> {
    let index = consensus_partition(samples, grid)?;
    let s = &samples[index];
    let lik = Likelihood::for_dataset(model, dataset)?;
    let thetas = (0..s.k)
        .map(|j| lik.theta_mean(&cluster_stats(dataset, grid, &s.labels, j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConsensusEstimate {
        index,
        k: s.k,
        labels: s.labels.clone(),
        thetas,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n_grid: Vec<usize>,
    /// Replicate `r` seeds data generation and the sampler with `seed + r`.
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub constants: RateConstants,
    /// Extra log power in the error normalization.
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    #[serde(default)]
    pub model: ModelConfig,
    /// Template; `log_lambda` and `seed` are replaced per run.
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    #[serde(default = "default_lattice")]
    pub lattice_resolution: usize,
}

fn one() -> usize {
    1
}

fn default_alpha0() -> f64 {
    0.1
}

fn default_test_size() -> usize {
    5000
}

fn default_lattice() -> usize {
    500
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![100, 500, 1000, 2000, 3000, 4000],
            seed: 1,
            replicates: 1,
            constants: RateConstants::default(),
            alpha0: default_alpha0(),
            model: ModelConfig::default(),
            sampler: SamplerConfig::default(),
            test_size: default_test_size(),
            lattice_resolution: default_lattice(),
        }
    }
}

/// One retained sample of one sweep run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub replicate: usize,
    pub sample: usize,
    pub k: usize,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

/// Summary of one `(n, replicate)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub n: usize,
    pub replicate: usize,
    pub n_kept: usize,
    pub resolution: usize,
    pub log_lambda: f64,
    pub frac_true_k: f64,
    pub median_e1: f64,
    pub median_e2: f64,
    pub median_e3: f64,
    pub consensus: ConsensusEstimate,
    /// True region matched to each consensus cluster.
    pub consensus_matched: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<SweepSummary>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Generates, fits and scores one sample size and replicate.
pub fn run_simulation(n: usize, replicate: usize, config: &SweepConfig) -> Result<(Vec<SweepRow>, SweepSummary)> {
    let truth = UShapeTruth::default();
    let hyper = config.constants.select(n)?;
    let seed = config.seed.wrapping_add(replicate as u64);
    let data = generate_ushape_data(n, seed)?;
    let test = generate_ushape_test(config.test_size, seed)?;
    let sampler = SamplerConfig {
        log_lambda: hyper.log_lambda,
        seed,
        ..config.sampler.clone()
    };
    let out = fit(&data.dataset, hyper.k, &config.model, &sampler)?;
    let samples = out.samples();
    if samples.is_empty() {
        return Err(Error::Config("sampler retained no samples".into()));
    }
    let overlap = DomainOverlap::new(&out.grid, &truth, config.lattice_resolution)?;
    let test_x: Vec<Vec<f64>> = (0..test.dataset.len()).map(|i| test.dataset.x(i).to_vec()).collect();
    let e3 = prediction_error_e3_at(
        &samples,
        &out.grid,
        test.dataset.locations(),
        &test_x,
        &test.means,
        config.alpha0,
        config.constants.alpha_b,
        n,
    )?;
    let rows: Vec<SweepRow> = samples
        .par_iter()
        .zip(&e3)
        .enumerate()
        .map(|(i, (s, &e3))| {
            let (e1, e2) = normalized_errors(s, &overlap, &truth.thetas, config.alpha0, config.constants.alpha_b, n);
            SweepRow {
                n,
                replicate,
                sample: i,
                k: s.k,
                e1,
                e2,
                e3,
            }
        })
        .collect();
    let consensus = consensus_estimate(&samples, &out.dataset, &out.grid, &config.model)?;
    let consensus_matched = overlap.matched_index(&samples[consensus.index]);
    let col = |f: fn(&SweepRow) -> f64| median(&rows.iter().map(f).collect::<Vec<_>>());
    let summary = SweepSummary {
        n,
        replicate,
        n_kept: out.dataset.len(),
        resolution: hyper.k,
        log_lambda: hyper.log_lambda,
        frac_true_k: rows.iter().filter(|r| r.k == truth.n_regions()).count() as f64 / rows.len() as f64,
        median_e1: col(|r| r.e1),
        median_e2: col(|r| r.e2),
        median_e3: col(|r| r.e3),
        consensus,
        consensus_matched,
    };
    Ok((rows, summary))
}

/// Runs every `(n, replicate)` job concurrently; output is ordered by `n`
/// then replicate.
pub fn run_asymptotic_sweep(config: &SweepConfig) -> Result<SweepResult> {
    if config.n_grid.is_empty() || config.replicates == 0 {
        return Err(Error::Config("empty n grid or zero replicates".into()));
    }
    let jobs: Vec<(usize, usize)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.replicates).map(move |r| (n, r)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(n, r)| run_simulation(n, r, config))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (r, s) in runs {
        rows.extend(r);
        summaries.push(s);
    }
    Ok(SweepResult { rows, summaries })
}

/// Medians of `(e1, e2, e3)` over all samples of all replicates at `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledMedians {
    pub n: usize,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub frac_true_k: f64,
}

impl SweepResult {
    pub fn pooled(&self) -> Vec<PooledMedians> {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.dedup();
        ns.into_iter()
            .map(|n| {
                let rows: Vec<&SweepRow> = self.rows.iter().filter(|r| r.n == n).collect();
                let col = |f: fn(&SweepRow) -> f64| median(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
                PooledMedians {
                    n,
                    e1: col(|r| r.e1),
                    e2: col(|r| r.e2),
                    e3: col(|r| r.e3),
                    frac_true_k: rows.iter().filter(|r| r.k == 3).count() as f64 / rows.len() as f64,
                }
            })
            .collect()
    }
}

/// One cell of the WAIC grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaicCell {
    pub c_b: f64,
    pub c_p: f64,
    pub resolution: usize,
    pub log_lambda: f64,
    /// `None` when the cell's block graph is disconnected.
    pub waic: Option<Waic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaicSearch {
    pub best: usize,
    pub cells: Vec<WaicCell>,
}

/// Fits every `(c_b, c_p)` pair and picks the smallest WAIC (first on ties).
/// Cells whose block graph is disconnected are skipped: dropping observations
/// would make their WAIC incomparable.
pub fn waic_grid_search(
    dataset: &Dataset,
    c_b_grid: &[f64],
    c_p_grid: &[f64],
    alpha_b: f64,
    alpha_p: f64,
    model: &ModelConfig,
    sampler: &SamplerConfig,
) -> Result<WaicSearch> {
    let pairs: Vec<(f64, f64)> = c_b_grid
        .iter()
        .flat_map(|&b| c_p_grid.iter().map(move |&p| (b, p)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Config("empty WAIC grid".into()));
    }
    let cells = pairs
        .par_iter()
        .map(|&(c_b, c_p)| -> Result<WaicCell> {
            let hyper = select_hyperparams(dataset.len(), c_b, alpha_b, c_p, alpha_p)?;
            let grid = BlockGrid::build_unchecked(dataset, hyper.k)?;
            let waic = if grid.is_connected() {
                let cfg = SamplerConfig {
                    log_lambda: hyper.log_lambda,
                    ..sampler.clone()
                };
                let samples: Vec<PosteriorSample> = run_chains(dataset, &grid, model, &cfg)?
                    .into_iter()
                    .flat_map(|c| c.samples)
                    .collect();
                Some(waic(&samples, dataset, &grid, model)?)
            } else {
                warn!("skipping c_b = {c_b}, c_p = {c_p}: block graph is disconnected at K = {}", hyper.k);
                None
            };
            Ok(WaicCell {
                c_b,
                c_p,
                resolution: hyper.k,
                log_lambda: hyper.log_lambda,
                waic,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.waic.map(|w| (i, w.waic)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Invalid("every WAIC grid cell has a disconnected block graph".into()))?;
    Ok(WaicSearch { best, cells })
}
