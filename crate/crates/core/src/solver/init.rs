//! Starting values for the ADMM iterates.

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Result, SasaError};
use crate::linalg::{factor_or, factor_system};
use crate::model::{Dataset, Partition};
use crate::oracle::oracle_coefficients;
use crate::solver::admm::AdmmState;
use crate::solver::design::Design;
use crate::solver::difference::ata_dense;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitMethod {
    /// Separate weighted least squares per location, sharing `eta`.
    #[default]
    PerLocation,
    /// Ridge-fused solution cut into `groups` equal bins along its leading
    /// principal direction. Works when some location cannot be fit alone.
    RidgeFusion { groups: usize, ridge: f64 },
}

pub fn initialize(dataset: &Dataset, method: InitMethod) -> Result<AdmmState> {
    match method {
        InitMethod::PerLocation => per_location(dataset),
        InitMethod::RidgeFusion { groups, ridge } => ridge_fusion(dataset, groups, ridge),
    }
}

fn per_location(dataset: &Dataset) -> Result<AdmmState> {
    let (p, q) = (dataset.p(), dataset.q());
    let need = p + usize::from(q > 0);
    for (i, b) in dataset.blocks().iter().enumerate() {
        if b.replicates() < need {
            return Err(SasaError::LocationRankDeficient { location: i });
        }
        factor_or(b.x.transpose() * &b.x, SasaError::LocationRankDeficient { location: i })?;
    }
    let c = oracle_coefficients(dataset, &Partition::singletons(dataset.n()))?;
    Ok(AdmmState::from_beta(c.eta, &c.beta))
}

fn ridge_fusion(dataset: &Dataset, groups: usize, ridge: f64) -> Result<AdmmState> {
    let (n, p) = (dataset.n(), dataset.p());
    if groups == 0 || groups > n {
        return Err(SasaError::param("groups", "must lie in 1..=n"));
    }
    if !(ridge > 0.0 && ridge.is_finite()) {
        return Err(SasaError::param("ridge", "must be positive"));
    }
    let design = Design::new(dataset)?;
    let h = design.xqx() + ata_dense(n, p) * ridge;
    let flat = factor_system(h)?.solve(design.xqy());
    let fused = DMatrix::from_row_slice(n, p, flat.as_slice());

    let mean = fused.row_mean();
    let centered = DMatrix::from_fn(n, p, |i, l| fused[(i, l)] - mean[l]);
    let eig = SymmetricEigen::new(centered.transpose() * &centered);
    let lead = eig.eigenvalues.imax();
    let dir = eig.eigenvectors.column(lead);
    let scores: Vec<f64> = (0..n).map(|i| centered.row(i).dot(&dir.transpose())).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut labels = alloc::vec![0usize; n];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = rank * groups / n;
    }
    let part = Partition::new(labels)?;
    let alpha = super::groups::group_means(&fused, &part);
    let beta = crate::model::expand_groups(&alpha, &part);
    let eta = design.eta_for(beta.transpose().as_slice());
    Ok(AdmmState::from_beta(eta, &beta))
}
