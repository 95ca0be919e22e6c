//! Reversible-jump Metropolis–Hastings over spanning trees and cut sets.
//!
//! Each iteration proposes one of four moves with probabilities that depend
//! on the current cluster count `k`:
//!
//! * **birth**: cut a uniformly chosen uncut tree edge, splitting a cluster;
//! * **death**: restore a uniformly chosen cut edge, merging two clusters;
//! * **change**: a birth followed by a death, leaving `k` unchanged;
//! * **hyper**: redraw the spanning tree so that it induces the current
//!   partition; always accepted.
//!
//! The cluster count has a truncated Poisson prior on `1..=k_max` and, given
//! the tree and `k`, the partition is uniform over the cut sets of size
//! `k - 1`. Coefficients are integrated out; they are drawn from their
//! conditional posterior only when a sample is retained.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grid::BlockGrid;
use crate::likelihood::{block_stats, ClusterStats, ClusterTerm, Likelihood, ModelConfig};
use crate::tree::{sample_rst, TreePartition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Birth,
    Death,
    Change,
    Hyper,
}

impl MoveKind {
    pub const ALL: [MoveKind; 4] = [MoveKind::Birth, MoveKind::Death, MoveKind::Change, MoveKind::Hyper];

    fn index(self) -> usize {
        self as usize
    }
}

/// Base move weights. At `k = 1` the death weight moves to birth, and at
/// `k = k_max` the birth weight moves to death.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoveProbs {
    pub birth: f64,
    pub death: f64,
    pub change: f64,
    pub hyper: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        Self {
            birth: 0.25,
            death: 0.25,
            change: 0.25,
            hyper: 0.25,
        }
    }
}

impl MoveProbs {
    pub fn validate(&self) -> Result<()> {
        let w = [self.birth, self.death, self.change, self.hyper];
        if w.iter().any(|p| !p.is_finite() || *p < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(format!("invalid move probabilities {w:?}")));
        }
        if self.birth + self.death <= 0.0 {
            return Err(Error::Config("birth and death weights cannot both be zero".into()));
        }
        Ok(())
    }

    /// `(r_b, r_d, r_c, r_h)` at cluster count `k`.
    pub fn at(&self, k: usize, k_max: usize) -> [f64; 4] {
        let (mut b, mut d, c, mut h) = (self.birth, self.death, self.change, self.hyper);
        if k_max <= 1 {
            h += b + d;
            b = 0.0;
            d = 0.0;
        } else if k <= 1 {
            b += d;
            d = 0.0;
        } else if k >= k_max {
            d += b;
            b = 0.0;
        }
        let total = b + d + c + h;
        [b / total, d / total, c / total, h / total]
    }
}

/// Prior placed on spanning trees. Both run through the same stratified
/// tree-resampling kernel; for the uniform prior this kernel is approximate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreePrior {
    #[default]
    Rst,
    Ust,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// `log λ` of the truncated Poisson prior on `k`.
    pub log_lambda: f64,
    pub k_max: usize,
    #[serde(default)]
    pub move_probs: MoveProbs,
    pub n_iters: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub seed: u64,
    #[serde(default = "one")]
    pub n_chains: usize,
    #[serde(default)]
    pub tree_prior: TreePrior,
}

fn one() -> usize {
    1
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            log_lambda: 0.0,
            k_max: 5,
            move_probs: MoveProbs::default(),
            n_iters: 20_000,
            burn_in: 5_000,
            thinning: 5,
            seed: 1,
            n_chains: 1,
            tree_prior: TreePrior::Rst,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.log_lambda.is_finite() {
            return Err(Error::Config("log_lambda must be finite".into()));
        }
        if self.k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        if self.burn_in > self.n_iters {
            return Err(Error::Config(format!(
                "burn_in ({}) exceeds n_iters ({})",
                self.burn_in, self.n_iters
            )));
        }
        if self.n_chains == 0 {
            return Err(Error::Config("n_chains must be at least 1".into()));
        }
        self.move_probs.validate()
    }

    /// Number of samples a single chain retains.
    pub fn n_retained(&self) -> u64 {
        (self.n_iters - self.burn_in) / self.thinning
    }
}

/// One retained posterior draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub iter: u64,
    pub k: usize,
    /// Cluster label of every active block.
    pub labels: Vec<usize>,
    /// Coefficient vector of every cluster, indexed by label.
    pub thetas: Vec<Vec<f64>>,
    pub log_lik: f64,
}

impl PosteriorSample {
    /// Cluster label of every observation.
    pub fn observation_labels(&self, grid: &BlockGrid) -> Vec<usize> {
        grid.block_of().iter().map(|&b| self.labels[b]).collect()
    }
}

/// Sampler state: tree, cuts, labels and cached per-cluster quantities.
#[derive(Debug, Clone)]
pub struct ChainState {
    partition: TreePartition,
    stats: Vec<ClusterStats>,
    terms: Vec<ClusterTerm>,
    log_lik: f64,
    iteration: u64,
}

impl ChainState {
    pub fn partition(&self) -> &TreePartition {
        &self.partition
    }

    pub fn k(&self) -> usize {
        self.partition.k()
    }

    pub fn labels(&self) -> &[usize] {
        self.partition.labels()
    }

    pub fn stats(&self) -> &[ClusterStats] {
        &self.stats
    }

    pub fn log_lik(&self) -> f64 {
        self.log_lik
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }
}

/// A proposed move: which tree positions flip their cut flag, and the
/// Metropolis–Hastings log acceptance ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub kind: MoveKind,
    pub toggles: Vec<usize>,
    pub new_k: usize,
    pub delta_log_lik: f64,
    pub log_accept_ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveCounts {
    pub proposed: u64,
    pub accepted: u64,
    pub rejected: u64,
}

impl MoveCounts {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub birth: MoveCounts,
    pub death: MoveCounts,
    pub change: MoveCounts,
    pub hyper: MoveCounts,
    /// Cluster count after every iteration.
    pub k_trace: Vec<usize>,
}

impl Diagnostics {
    pub fn counts_mut(&mut self, kind: MoveKind) -> &mut MoveCounts {
        match kind {
            MoveKind::Birth => &mut self.birth,
            MoveKind::Death => &mut self.death,
            MoveKind::Change => &mut self.change,
            MoveKind::Hyper => &mut self.hyper,
        }
    }

    pub fn counts(&self, kind: MoveKind) -> &MoveCounts {
        match kind {
            MoveKind::Birth => &self.birth,
            MoveKind::Death => &self.death,
            MoveKind::Change => &self.change,
            MoveKind::Hyper => &self.hyper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub chain: usize,
    pub samples: Vec<PosteriorSample>,
    pub diagnostics: Diagnostics,
}

/// The transition kernel bound to one dataset and grid.
pub struct Sampler<'a> {
    grid: &'a BlockGrid,
    config: SamplerConfig,
    lik: Likelihood,
    block_stats: Vec<ClusterStats>,
    dim: usize,
}

impl<'a> Sampler<'a> {
    pub fn new(
        dataset: &Dataset,
        grid: &'a BlockGrid,
        model: &ModelConfig,
        config: &SamplerConfig,
    ) -> Result<Self> {
        config.validate()?;
        if grid.block_of().len() != dataset.len() {
            return Err(Error::LengthMismatch(grid.block_of().len(), dataset.len()));
        }
        if !grid.is_connected() {
            return Err(Error::Disconnected {
                sizes: grid.component_sizes().to_vec(),
            });
        }
        Ok(Self {
            grid,
            config: config.clone(),
            lik: Likelihood::for_dataset(model, dataset)?,
            block_stats: block_stats(dataset, grid),
            dim: dataset.dim(),
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn likelihood(&self) -> &Likelihood {
        &self.lik
    }

    /// Single cluster over a tree drawn from the random-MST prior.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChainState> {
        let tree = sample_rst(self.grid.graph(), rng)?;
        self.state_from_partition(TreePartition::single(tree))
    }

    /// Builds the cached quantities for an arbitrary partition.
    pub fn state_from_partition(&self, partition: TreePartition) -> Result<ChainState> {
        if partition.n_blocks() != self.grid.n_blocks() {
            return Err(Error::LengthMismatch(partition.n_blocks(), self.grid.n_blocks()));
        }
        let stats = self.cluster_stats(partition.labels(), partition.k());
        let terms: Vec<ClusterTerm> = stats.iter().map(|s| self.lik.term(s)).collect();
        let log_lik = self.lik.total(&terms)?;
        Ok(ChainState {
            partition,
            stats,
            terms,
            log_lik,
            iteration: 0,
        })
    }

    /// Per-cluster statistics, summed over blocks in ascending block order.
    pub fn cluster_stats(&self, labels: &[usize], k: usize) -> Vec<ClusterStats> {
        let mut out = vec![ClusterStats::zeros(self.dim); k];
        for (b, &l) in labels.iter().enumerate() {
            out[l].add(&self.block_stats[b]);
        }
        out
    }

    fn sum_blocks(&self, blocks: &[usize]) -> ClusterStats {
        let mut s = ClusterStats::zeros(self.dim);
        for &b in blocks {
            s.add(&self.block_stats[b]);
        }
        s
    }

    /// Log-likelihood of the state's partition recomputed from the data.
    pub fn recompute_log_lik(&self, state: &ChainState) -> Result<f64> {
        let stats = self.cluster_stats(state.labels(), state.k());
        let terms: Vec<ClusterTerm> = stats.iter().map(|s| self.lik.term(s)).collect();
        self.lik.total(&terms)
    }

    fn rates(&self, k: usize) -> [f64; 4] {
        self.config.move_probs.at(k, self.config.k_max)
    }

    /// Birth proposal that cuts the tree edge at position `pos`.
    pub fn birth_at(&self, state: &ChainState, pos: usize) -> Result<Proposal> {
        let tp = &state.partition;
        if tp.is_cut(pos) {
            return Err(Error::Invalid(format!("tree position {pos} is already cut")));
        }
        let k = tp.k();
        let (a, b) = tp.tree().endpoints(pos);
        let parent = tp.labels()[a];
        let side_a = self.sum_blocks(&tp.component_without(a, pos));
        let side_b = self.sum_blocks(&tp.component_without(b, pos));
        let delta = self.lik.term(&side_a).value + self.lik.term(&side_b).value
            - state.terms[parent].value;
        let log_prior = self.config.log_lambda - ((k + 1) as f64).ln();
        let log_proposal = self.rates(k + 1)[1].ln() - self.rates(k)[0].ln();
        Ok(Proposal {
            kind: MoveKind::Birth,
            toggles: vec![pos],
            new_k: k + 1,
            delta_log_lik: delta,
            log_accept_ratio: log_prior + log_proposal + delta,
        })
    }

    /// Death proposal that restores the cut edge at position `pos`.
    pub fn death_at(&self, state: &ChainState, pos: usize) -> Result<Proposal> {
        let tp = &state.partition;
        if !tp.is_cut(pos) {
            return Err(Error::Invalid(format!("tree position {pos} is not cut")));
        }
        let k = tp.k();
        let (a, b) = tp.tree().endpoints(pos);
        let (la, lb) = (tp.labels()[a], tp.labels()[b]);
        let merged = state.stats[la].merged(&state.stats[lb]);
        let delta = self.lik.term(&merged).value - state.terms[la].value - state.terms[lb].value;
        let log_prior = (k as f64).ln() - self.config.log_lambda;
        let log_proposal = self.rates(k - 1)[0].ln() - self.rates(k)[1].ln();
        Ok(Proposal {
            kind: MoveKind::Death,
            toggles: vec![pos],
            new_k: k - 1,
            delta_log_lik: delta,
            log_accept_ratio: log_prior + log_proposal + delta,
        })
    }

    /// Change proposal: cut the uncut edge at `cut_pos`, then restore the cut
    /// edge at `restore_pos` (which may equal `cut_pos`, giving a null move).
    ///
    /// The composite proposal has equal probability `1 / ((M - k) k)` in both
    /// directions and the prior is unchanged, so the log acceptance ratio is
    /// the log-likelihood difference.
    pub fn change_at(&self, state: &ChainState, cut_pos: usize, restore_pos: usize) -> Result<Proposal> {
        let tp = &state.partition;
        let k = tp.k();
        if tp.is_cut(cut_pos) {
            return Err(Error::Invalid(format!("tree position {cut_pos} is already cut")));
        }
        if restore_pos == cut_pos {
            return Ok(Proposal {
                kind: MoveKind::Change,
                toggles: vec![],
                new_k: k,
                delta_log_lik: 0.0,
                log_accept_ratio: 0.0,
            });
        }
        if !tp.is_cut(restore_pos) {
            return Err(Error::Invalid(format!("tree position {restore_pos} is not cut")));
        }
        let labels = tp.labels();
        let (a, b) = tp.tree().endpoints(cut_pos);
        let parent = labels[a];
        let blocks_b = tp.component_without(b, cut_pos);
        let side_a = self.sum_blocks(&tp.component_without(a, cut_pos));
        let side_b = self.sum_blocks(&blocks_b);
        let term_a = self.lik.term(&side_a);
        let term_b = self.lik.term(&side_b);
        let split_delta = term_a.value + term_b.value - state.terms[parent].value;

        // intermediate labelling: side b of the split becomes label k
        let inter = |v: usize| {
            if labels[v] == parent && blocks_b.binary_search(&v).is_ok() {
                k
            } else {
                labels[v]
            }
        };
        let stats_of = |l: usize| -> (&ClusterStats, f64) {
            if l == k {
                (&side_b, term_b.value)
            } else if l == parent {
                (&side_a, term_a.value)
            } else {
                (&state.stats[l], state.terms[l].value)
            }
        };
        let (u, v) = tp.tree().endpoints(restore_pos);
        let (su, tu) = stats_of(inter(u));
        let (sv, tv) = stats_of(inter(v));
        let merge_delta = self.lik.term(&su.merged(sv)).value - tu - tv;
        let delta = split_delta + merge_delta;
        Ok(Proposal {
            kind: MoveKind::Change,
            toggles: vec![cut_pos, restore_pos],
            new_k: k,
            delta_log_lik: delta,
            log_accept_ratio: delta,
        })
    }

    /// Random birth proposal, or `None` when no uncut edge exists or `k = k_max`.
    pub fn birth_move<R: Rng + ?Sized>(&self, state: &ChainState, rng: &mut R) -> Result<Option<Proposal>> {
        let tp = &state.partition;
        if tp.k() >= self.config.k_max || tp.n_within() == 0 {
            return Ok(None);
        }
        let pos = tp.nth_within(rng.random_range(0..tp.n_within())).expect("within edge");
        self.birth_at(state, pos).map(Some)
    }

    /// Random death proposal, or `None` when `k = 1`.
    pub fn death_move<R: Rng + ?Sized>(&self, state: &ChainState, rng: &mut R) -> Result<Option<Proposal>> {
        let tp = &state.partition;
        if tp.k() < 2 {
            return Ok(None);
        }
        let pos = tp.nth_cut(rng.random_range(0..tp.n_cut())).expect("cut edge");
        self.death_at(state, pos).map(Some)
    }

    /// Random change proposal, or `None` when every block is its own cluster.
    pub fn change_move<R: Rng + ?Sized>(&self, state: &ChainState, rng: &mut R) -> Result<Option<Proposal>> {
        let tp = &state.partition;
        if tp.n_within() == 0 {
            return Ok(None);
        }
        let cut_pos = tp.nth_within(rng.random_range(0..tp.n_within())).expect("within edge");
        // the intermediate state has k cut edges: the old ones plus cut_pos
        let pick = rng.random_range(0..tp.k());
        let restore_pos = if pick == tp.n_cut() {
            cut_pos
        } else {
            tp.nth_cut(pick).expect("cut edge")
        };
        self.change_at(state, cut_pos, restore_pos).map(Some)
    }

    /// Redraws the tree so that it induces the current partition. Labels,
    /// statistics and the cached log-likelihood carry over unchanged.
    pub fn hyper_move<R: Rng + ?Sized>(&self, state: &ChainState, rng: &mut R) -> Result<ChainState> {
        let partition = state.partition.resample_tree(self.grid.graph(), rng)?;
        Ok(ChainState {
            partition,
            stats: state.stats.clone(),
            terms: state.terms.clone(),
            log_lik: state.log_lik,
            iteration: state.iteration,
        })
    }

    /// State after accepting `proposal`.
    pub fn apply(&self, state: &ChainState, proposal: &Proposal) -> Result<ChainState> {
        if proposal.toggles.is_empty() {
            return Ok(state.clone());
        }
        let mut partition = state.partition.clone();
        partition.toggle_many(&proposal.toggles);
        debug_assert_eq!(partition.k(), proposal.new_k);
        let mut next = self.state_from_partition(partition)?;
        next.iteration = state.iteration;
        Ok(next)
    }

    /// One iteration: draw a move type, propose, accept or reject.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &mut ChainState,
        rng: &mut R,
        diagnostics: &mut Diagnostics,
    ) -> Result<()> {
        let rates = self.rates(state.k());
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut kind = MoveKind::Hyper;
        for m in MoveKind::ALL {
            acc += rates[m.index()];
            if u < acc && rates[m.index()] > 0.0 {
                kind = m;
                break;
            }
        }
        let counts = diagnostics.counts_mut(kind);
        counts.proposed += 1;
        if kind == MoveKind::Hyper {
            *state = ChainState {
                iteration: state.iteration + 1,
                ..self.hyper_move(state, rng)?
            };
            counts.accepted += 1;
            diagnostics.k_trace.push(state.k());
            return Ok(());
        }
        let proposal = match kind {
            MoveKind::Birth => self.birth_move(state, rng)?,
            MoveKind::Death => self.death_move(state, rng)?,
            MoveKind::Change => self.change_move(state, rng)?,
            MoveKind::Hyper => unreachable!(),
        };
        let accepted = match proposal {
            Some(p) => {
                let log_u = rng.random::<f64>().ln();
                if log_u < p.log_accept_ratio {
                    *state = self.apply(state, &p)?;
                    true
                } else {
                    false
                }
            }
            None => false,
        };
        if accepted {
            counts.accepted += 1;
        } else {
            counts.rejected += 1;
        }
        state.iteration += 1;
        diagnostics.k_trace.push(state.k());
        Ok(())
    }

    /// Draws coefficients for every cluster of `state`.
    pub fn emit_sample<R: Rng + ?Sized>(&self, state: &ChainState, rng: &mut R) -> Result<PosteriorSample> {
        let thetas = state
            .stats
            .iter()
            .map(|s| self.lik.sample_theta(s, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(PosteriorSample {
            iter: state.iteration,
            k: state.k(),
            labels: state.labels().to_vec(),
            thetas,
            log_lik: state.log_lik,
        })
    }

    /// Runs chain `chain` with its own random stream.
    pub fn run(&self, chain: usize) -> Result<ChainOutput> {
        let mut rng = chain_rng(self.config.seed, chain);
        let mut state = self.initial_state(&mut rng)?;
        let mut diagnostics = Diagnostics {
            k_trace: Vec::with_capacity(self.config.n_iters as usize),
            ..Default::default()
        };
        let mut samples = Vec::with_capacity(self.config.n_retained() as usize);
        for it in 1..=self.config.n_iters {
            self.step(&mut state, &mut rng, &mut diagnostics)?;
            if it > self.config.burn_in && (it - self.config.burn_in).is_multiple_of(self.config.thinning) {
                samples.push(self.emit_sample(&state, &mut rng)?);
            }
        }
        Ok(ChainOutput {
            chain,
            samples,
            diagnostics,
        })
    }
}

/// Random stream for chain `chain`: ChaCha8 keyed by `seed`, stream `chain`.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Runs a single chain (chain index 0).
pub fn run_chain(
    dataset: &Dataset,
    grid: &BlockGrid,
    model: &ModelConfig,
    config: &SamplerConfig,
) -> Result<ChainOutput> {
    Sampler::new(dataset, grid, model, config)?.run(0)
}

/// Runs `config.n_chains` chains in parallel, ordered by chain index.
pub fn run_chains(
    dataset: &Dataset,
    grid: &BlockGrid,
    model: &ModelConfig,
    config: &SamplerConfig,
) -> Result<Vec<ChainOutput>> {
    let sampler = Sampler::new(dataset, grid, model, config)?;
    (0..config.n_chains).into_par_iter().map(|c| sampler.run(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Location;
    use crate::tree::{induce_partition, SpanningTree};

    fn row_dataset(m: usize, per_block: usize, seed: u64) -> Dataset {
        // m blocks along the bottom row of an m × m grid
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut locs = Vec::new();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for b in 0..m {
            for _ in 0..per_block {
                let h = (b as f64 + rng.random::<f64>()) / m as f64;
                let v = rng.random::<f64>() / m as f64;
                locs.push(Location::new(h.min(1.0), v));
                let x2: f64 = rng.random_range(-1.0..1.0);
                xs.extend_from_slice(&[1.0, x2]);
                let slope = if b < m / 2 { 1.0 } else { -1.0 };
                ys.push(slope * x2 + rng.random_range(-0.5..0.5));
            }
        }
        Dataset::new(locs, xs, ys, 2).unwrap()
    }

    fn setup(m: usize) -> (Dataset, BlockGrid) {
        let ds = row_dataset(m, 4, 9);
        let grid = BlockGrid::build(&ds, m).unwrap();
        assert_eq!(grid.n_blocks(), m);
        (ds, grid)
    }

    #[test]
    fn move_probs_boundaries() {
        let p = MoveProbs::default();
        assert_eq!(p.at(1, 5), [0.5, 0.0, 0.25, 0.25]);
        assert_eq!(p.at(5, 5), [0.0, 0.5, 0.25, 0.25]);
        assert_eq!(p.at(3, 5), [0.25; 4]);
        let r = p.at(1, 1);
        assert_eq!((r[0], r[1]), (0.0, 0.0));
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn birth_ratio_formula() {
        // λ = 0.5, k = 1, equal r_b(1), r_d(2) and no likelihood change
        let (ds, grid) = setup(4);
        let cfg = SamplerConfig {
            log_lambda: 0.5f64.ln(),
            move_probs: MoveProbs { birth: 0.5, death: 0.5, change: 0.0, hyper: 0.0 },
            ..Default::default()
        };
        // r_b(1) = 1 and r_d(2) = 0.5 under the boundary rule; correct for it
        let sampler = Sampler::new(&ds, &grid, &ModelConfig::default(), &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let state = sampler.initial_state(&mut rng).unwrap();
        let p = sampler.birth_at(&state, 0).unwrap();
        let prior_part = p.log_accept_ratio - p.delta_log_lik;
        let expect = (0.5f64 / 2.0).ln() + (0.5f64 / 1.0).ln();
        assert!((prior_part - expect).abs() < 1e-12);
    }

    #[test]
    fn death_ratio_formula() {
        let (ds, grid) = setup(4);
        let cfg = SamplerConfig {
            log_lambda: 0.5f64.ln(),
            k_max: 5,
            ..Default::default()
        };
        let sampler = Sampler::new(&ds, &grid, &ModelConfig::default(), &cfg).unwrap();
        let tree = SpanningTree::from_edges(grid.graph(), vec![0, 1, 2]).unwrap();
        let state = sampler.state_from_partition(induce_partition(&tree, &[1]).unwrap()).unwrap();
        let p = sampler.death_at(&state, 1).unwrap();
        // k = 2 → 1: (2 / 0.5) · r_b(1) / r_d(2) = 4 · 0.5 / 0.25
        let prior_part = p.log_accept_ratio - p.delta_log_lik;
        assert!((prior_part - 8.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn birth_never_proposed_at_k_max() {
        let (ds, grid) = setup(4);
        let cfg = SamplerConfig { k_max: 2, ..Default::default() };
        let sampler = Sampler::new(&ds, &grid, &ModelConfig::default(), &cfg).unwrap();
        let tree = SpanningTree::from_edges(grid.graph(), vec![0, 1, 2]).unwrap();
        let state = sampler.state_from_partition(induce_partition(&tree, &[0]).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sampler.birth_move(&state, &mut rng).unwrap().is_none());
        assert_eq!(cfg.move_probs.at(2, 2)[0], 0.0);
    }

    #[test]
    fn birth_then_death_restores_state() {
        let (ds, grid) = setup(5);
        let sampler = Sampler::new(&ds, &grid, &ModelConfig::default(), &SamplerConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let state = sampler.initial_state(&mut rng).unwrap();
        let birth = sampler.birth_at(&state, 2).unwrap();
        let split = sampler.apply(&state, &birth).unwrap();
        let death = sampler.death_at(&split, 2).unwrap();
        let back = sampler.apply(&split, &death).unwrap();
        assert_eq!(back.partition(), state.partition());
        assert_eq!(back.stats(), state.stats());
        assert_eq!(back.log_lik(), state.log_lik());
        assert!((birth.log_accept_ratio + death.log_accept_ratio).abs() < 1e-10);
    }

    #[test]
    fn change_keeps_k_and_null_change_is_identity() {
        let (ds, grid) = setup(6);
        let sampler = Sampler::new(&ds, &grid, &ModelConfig::default(), &SamplerConfig::default()).unwrap();
        let tree = SpanningTree::from_edges(grid.graph(), (0..5).collect()).unwrap();
        let state = sampler.state_from_partition(induce_partition(&tree, &[2]).unwrap()).unwrap();
        let p = sampler.change_at(&state, 4, 2).unwrap();
        assert_eq!(p.new_k, 2);
        let next = sampler.apply(&state, &p).unwrap();
        assert_eq!(next.k(), 2);
        assert_eq!(next.labels(), &[0, 0, 0, 0, 0, 1]);
        let full = sampler.recompute_log_lik(&next).unwrap();
        assert!((state.log_lik() + p.delta_log_lik - full).abs() < 1e-8);
        let null = sampler.change_at(&state, 4, 4).unwrap();
        assert_eq!(sampler.apply(&state, &null).unwrap().partition(), state.partition());
    }

    #[test]
    fn hyper_move_preserves_labels_and_likelihood() {
        // data over the full square so the graph has cycles
        let ds = {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let n = 150;
            let locs = (0..n).map(|_| Location::new(rng.random(), rng.random())).collect();
            let xs = (0..n).flat_map(|_| [1.0, rng.random_range(-1.0..1.0)]).collect();
            let ys = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            Dataset::new(locs, xs, ys, 2).unwrap()
        };
        let grid = BlockGrid::build(&ds, 4).unwrap();
        let sampler = Sampler::new(&ds, &grid, &ModelConfig::default(), &SamplerConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut state = sampler.initial_state(&mut rng).unwrap();
        let p = sampler.birth_at(&state, 3).unwrap();
        state = sampler.apply(&state, &p).unwrap();
        let mut trees = std::collections::HashSet::new();
        for _ in 0..100 {
            let next = sampler.hyper_move(&state, &mut rng).unwrap();
            assert_eq!(next.labels(), state.labels());
            assert_eq!(next.log_lik().to_bits(), state.log_lik().to_bits());
            trees.insert(next.partition().tree().edges().to_vec());
            state = next;
        }
        assert!(trees.len() >= 2);
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let (ds, grid) = setup(6);
        let cfg = SamplerConfig {
            n_iters: 1000,
            burn_in: 100,
            thinning: 10,
            seed: 77,
            ..Default::default()
        };
        let a = run_chain(&ds, &grid, &ModelConfig::default(), &cfg).unwrap();
        let b = run_chain(&ds, &grid, &ModelConfig::default(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples.len(), 90);
        for kind in MoveKind::ALL {
            let c = a.diagnostics.counts(kind);
            assert_eq!(c.accepted + c.rejected, c.proposed);
        }
        let total: u64 = MoveKind::ALL.iter().map(|&k| a.diagnostics.counts(k).proposed).sum();
        assert_eq!(total, 1000);
    }

    #[test]
    fn burn_in_equal_to_iterations_yields_nothing() {
        let (ds, grid) = setup(4);
        let cfg = SamplerConfig { n_iters: 50, burn_in: 50, ..Default::default() };
        let out = run_chain(&ds, &grid, &ModelConfig::default(), &cfg).unwrap();
        assert!(out.samples.is_empty());
    }

    #[test]
    fn default_schedule_retains_three_thousand() {
        let cfg = SamplerConfig::default();
        assert_eq!(cfg.n_retained(), 3000);
    }

    #[test]
    fn chains_use_distinct_streams() {
        let (ds, grid) = setup(6);
        let cfg = SamplerConfig { n_iters: 300, burn_in: 0, thinning: 1, n_chains: 2, ..Default::default() };
        let outs = run_chains(&ds, &grid, &ModelConfig::default(), &cfg).unwrap();
        assert_eq!(outs.len(), 2);
        assert_eq!(outs[0], run_chain(&ds, &grid, &ModelConfig::default(), &cfg).unwrap());
    }

    #[test]
    fn cache_stays_coherent_and_k_bounded() {
        let (ds, grid) = setup(6);
        let cfg = SamplerConfig { k_max: 3, log_lambda: 1.0, ..Default::default() };
        let sampler = Sampler::new(&ds, &grid, &ModelConfig::default(), &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut state = sampler.initial_state(&mut rng).unwrap();
        let mut diag = Diagnostics::default();
        for _ in 0..5000 {
            sampler.step(&mut state, &mut rng, &mut diag).unwrap();
            assert!((1..=3).contains(&state.k()));
            let fresh = sampler.recompute_log_lik(&state).unwrap();
            assert!((fresh - state.log_lik()).abs() < 1e-6);
        }
    }
}
