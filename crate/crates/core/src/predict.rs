//! Coefficient and regression-mean prediction at new locations.

use serde::{Deserialize, Serialize};

use crate::data::Location;
use crate::error::{Error, Result};
use crate::grid::BlockGrid;
use crate::sampler::PosteriorSample;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRequest {
    pub location: Location,
    pub covariate: Vec<f64>,
}

/// Per-sample regression means at one location, with summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub means: Vec<f64>,
    pub mean: f64,
    pub q05: f64,
    pub q95: f64,
    /// Most frequent cluster label at the location (smallest label on ties).
    pub modal_label: usize,
}

/// Cluster label of `s` under `sample`. Points in empty cells take the label
/// of the nearest active block.
pub fn label_at(sample: &PosteriorSample, grid: &BlockGrid, s: Location) -> Result<usize> {
    Ok(sample.labels[grid.nearest_block_of_point(s)?])
}

/// Coefficient vector of the cluster containing `s`.
pub fn theta_at<'a>(sample: &'a PosteriorSample, grid: &BlockGrid, s: Location) -> Result<&'a [f64]> {
    Ok(&sample.thetas[label_at(sample, grid, s)?])
}

/// Linear-interpolated empirical quantile of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn predict_mean(
    samples: &[PosteriorSample],
    grid: &BlockGrid,
    request: &PredictionRequest,
) -> Result<PredictiveDistribution> {
    if samples.is_empty() {
        return Err(Error::Invalid("prediction needs at least one posterior sample".into()));
    }
    let block = grid.nearest_block_of_point(request.location)?;
    let mut means = Vec::with_capacity(samples.len());
    let mut label_counts: Vec<usize> = Vec::new();
    for s in samples {
        let label = s.labels[block];
        let theta = &s.thetas[label];
        if theta.len() != request.covariate.len() {
            return Err(Error::DimensionMismatch {
                expected: theta.len(),
                got: request.covariate.len(),
            });
        }
        means.push(theta.iter().zip(&request.covariate).map(|(t, x)| t * x).sum());
        if label >= label_counts.len() {
            label_counts.resize(label + 1, 0);
        }
        label_counts[label] += 1;
    }
    let mut sorted = means.clone();
    sorted.sort_by(f64::total_cmp);
    let modal_label = label_counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(l, _)| l)
        .unwrap_or(0);
    Ok(PredictiveDistribution {
        mean: means.iter().sum::<f64>() / means.len() as f64,
        q05: quantile_sorted(&sorted, 0.05),
        q95: quantile_sorted(&sorted, 0.95),
        means,
        modal_label,
    })
}

/// `μ_s` at every point for every sample: `result[s][i]`.
pub fn prediction_matrix(
    samples: &[PosteriorSample],
    grid: &BlockGrid,
    locations: &[Location],
    covariates: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    if locations.len() != covariates.len() {
        return Err(Error::LengthMismatch(locations.len(), covariates.len()));
    }
    let blocks = locations
        .iter()
        .map(|&s| grid.nearest_block_of_point(s))
        .collect::<Result<Vec<_>>>()?;
    samples
        .iter()
        .map(|s| {
            blocks
                .iter()
                .zip(covariates)
                .map(|(&b, x)| {
                    let theta = &s.thetas[s.labels[b]];
                    if theta.len() != x.len() {
                        return Err(Error::DimensionMismatch {
                            expected: theta.len(),
                            got: x.len(),
                        });
                    }
                    Ok(theta.iter().zip(x).map(|(t, v)| t * v).sum())
                })
                .collect()
        })
        .collect()
}
