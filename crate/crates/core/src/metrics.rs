//! Partition agreement, coefficient error and replicate summaries.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Result, SasaError};
use crate::model::Partition;

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index from the contingency table. When the expected and
/// maximum indices coincide (both partitions trivial) it returns 1.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    if a.n() != b.n() {
        return Err(SasaError::DimensionMismatch(alloc::format!(
            "partitions cover {} and {} locations",
            a.n(),
            b.n()
        )));
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for (&x, &y) in a.assignment().iter().zip(b.assignment()) {
        *table.entry((x, y)).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let rows: f64 = a.sizes().iter().map(|&s| choose2(s as u64)).sum();
    let cols: f64 = b.sizes().iter().map(|&s| choose2(s as u64)).sum();
    let total = choose2(a.n() as u64);
    let expected = if total > 0.0 { rows * cols / total } else { 0.0 };
    let max = 0.5 * (rows + cols);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// `sqrt(n^{-1} sum_i ||beta_hat_i - beta_i||^2)`.
pub fn rmse_beta(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(SasaError::DimensionMismatch(alloc::format!(
            "coefficient matrices {:?} and {:?}",
            estimate.shape(),
            truth.shape()
        )));
    }
    let n = estimate.nrows().max(1) as f64;
    Ok(libm::sqrt((estimate - truth).norm_squared() / n))
}

/// Mean, standard error and hit rate of estimated group counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KhatSummary {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(N)`; zero for a single replicate.
    pub se: f64,
    /// Fraction of replicates with `K_hat` equal to the true `K`.
    pub per: f64,
}

pub fn khat_summary(khats: &[usize], k_true: usize) -> Result<KhatSummary> {
    let values: Vec<f64> = khats.iter().map(|&k| k as f64).collect();
    let (mean, se) = mean_se(&values)?;
    let per = khats.iter().filter(|&&k| k == k_true).count() as f64 / khats.len() as f64;
    Ok(KhatSummary { mean, se, per })
}

/// Mean and standard error (sample sd over `sqrt(N)`).
pub fn mean_se(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(SasaError::param("replicates", "no replicates to summarize"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, libm::sqrt(var / n)))
}

/// Per-replicate outcome of a simulation fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateMetrics {
    pub replicate: usize,
    pub k_hat: usize,
    pub ari: f64,
    pub rmse: f64,
    /// RMSE after an unpenalized refit on the estimated partition; `None`
    /// when that refit is not identified.
    pub rmse_refit: Option<f64>,
    pub converged: bool,
    pub lambda: f64,
    pub psi: f64,
}

/// Aggregate over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub replicates: usize,
    pub khat: KhatSummary,
    pub ari_mean: f64,
    pub ari_se: f64,
    pub rmse_mean: f64,
    pub rmse_se: f64,
    pub converged_fraction: f64,
}

impl MetricReport {
    pub fn from_replicates(rows: &[ReplicateMetrics], k_true: usize) -> Result<Self> {
        let khats: Vec<usize> = rows.iter().map(|r| r.k_hat).collect();
        let khat = khat_summary(&khats, k_true)?;
        let aris: Vec<f64> = rows.iter().map(|r| r.ari).collect();
        let rmses: Vec<f64> = rows.iter().map(|r| r.rmse).collect();
        let (ari_mean, ari_se) = mean_se(&aris)?;
        let (rmse_mean, rmse_se) = mean_se(&rmses)?;
        let converged_fraction = rows.iter().filter(|r| r.converged).count() as f64 / rows.len() as f64;
        Ok(MetricReport {
            replicates: rows.len(),
            khat,
            ari_mean,
            ari_se,
            rmse_mean,
            rmse_se,
            converged_fraction,
        })
    }
}
