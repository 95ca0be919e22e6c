//! Run configuration: model, sampler, hyperparameter and path settings,
//! read from JSON with unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::experiment::{select_hyperparams, RateConstants};
use crate::likelihood::ModelConfig;
use crate::sampler::{MoveProbs, SamplerConfig, TreePrior};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub sigma2: f64,
    pub gamma: f64,
    /// Use the sample variance of the responses instead of `sigma2`.
    pub sigma2_from_data: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            sigma2: 1.0,
            gamma: 1.0,
            sigma2_from_data: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub n_iters: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub seed: u64,
    pub k_max: usize,
    pub n_chains: usize,
    pub move_probs: MoveProbs,
    pub tree_prior: TreePrior,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            n_iters: d.n_iters,
            burn_in: d.burn_in,
            thinning: d.thinning,
            seed: d.seed,
            k_max: d.k_max,
            n_chains: d.n_chains,
            move_probs: d.move_probs,
            tree_prior: d.tree_prior,
        }
    }
}

/// Either explicit `k` and `log_lambda`, or rate constants. Omitted rate
/// constants take their defaults; an empty section means all defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_p: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum HyperSpec {
    Explicit { k: usize, log_lambda: f64 },
    Rate(RateConstants),
}

impl HyperSection {
    pub fn spec(&self) -> Result<HyperSpec> {
        let explicit = self.k.is_some() || self.log_lambda.is_some();
        let rate = self.c_b.is_some() || self.alpha_b.is_some() || self.c_p.is_some() || self.alpha_p.is_some();
        match (explicit, rate) {
            (true, true) => Err(Error::Config(
                "hyper: give either explicit k/log_lambda or rate constants, not both".into(),
            )),
            (true, false) => match (self.k, self.log_lambda) {
                (Some(k), Some(log_lambda)) if k > 0 && log_lambda.is_finite() => {
                    Ok(HyperSpec::Explicit { k, log_lambda })
                }
                (Some(_), Some(_)) => Err(Error::Config("hyper: k must be positive and log_lambda finite".into())),
                _ => Err(Error::Config("hyper: explicit form needs both k and log_lambda".into())),
            },
            (false, _) => {
                let d = RateConstants::default();
                Ok(HyperSpec::Rate(RateConstants {
                    c_b: self.c_b.unwrap_or(d.c_b),
                    alpha_b: self.alpha_b.unwrap_or(d.alpha_b),
                    c_p: self.c_p.unwrap_or(d.c_p),
                    alpha_p: self.alpha_p.unwrap_or(d.alpha_p),
                }))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub sampler: SamplerSection,
    pub hyper: HyperSection,
    pub io: IoSection,
}

/// Everything a fit needs once the data size is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRun {
    pub model: ModelConfig,
    pub sampler: SamplerConfig,
    pub resolution: usize,
    pub hyper: HyperSpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.spec()?;
        if !self.model.sigma2_from_data {
            self.model_config(None)?;
        }
        self.sampler_config(0.0).validate()
    }

    fn model_config(&self, data: Option<&Dataset>) -> Result<ModelConfig> {
        let sigma2 = match data {
            Some(ds) if self.model.sigma2_from_data => ds.response_variance(),
            _ => self.model.sigma2,
        };
        let model = ModelConfig {
            sigma2,
            gamma: self.model.gamma,
        };
        model.validate()?;
        Ok(model)
    }

    fn sampler_config(&self, log_lambda: f64) -> SamplerConfig {
        let s = &self.sampler;
        SamplerConfig {
            log_lambda,
            k_max: s.k_max,
            move_probs: s.move_probs,
            n_iters: s.n_iters,
            burn_in: s.burn_in,
            thinning: s.thinning,
            seed: s.seed,
            n_chains: s.n_chains,
            tree_prior: s.tree_prior,
        }
    }

    /// Resolves the hyperparameters against `dataset` (its size drives the
    /// rate formulas and, optionally, σ²).
    pub fn resolve(&self, dataset: &Dataset) -> Result<ResolvedRun> {
        let hyper = self.hyper.spec()?;
        let (resolution, log_lambda) = match hyper {
            HyperSpec::Explicit { k, log_lambda } => (k, log_lambda),
            HyperSpec::Rate(c) => {
                let h = select_hyperparams(dataset.len(), c.c_b, c.alpha_b, c.c_p, c.alpha_p)?;
                (h.k, h.log_lambda)
            }
        };
        let sampler = self.sampler_config(log_lambda);
        sampler.validate()?;
        Ok(ResolvedRun {
            model: self.model_config(Some(dataset))?,
            sampler,
            resolution,
            hyper,
        })
    }
}

/// Reads and validates a JSON run configuration.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    RunConfig::from_json(&std::fs::read_to_string(path)?)
}
