//! Weighted least squares under a known partition, error-variance
//! estimation and sandwich standard errors.
//!
//! With `U = (Z, X W)` the oracle estimate is `(U^T Omega U)^{-1} U^T Omega y`.
//! `U^T Omega U` is assembled blockwise per location, never from the stacked
//! design.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SasaError};
use crate::linalg::{factor_or, SpdFactor};
use crate::model::{Coefficients, Dataset, Partition};
use crate::solver::difference::pairs;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleFit {
    pub eta: DVector<f64>,
    /// `K x p`, row `k` for group `k`.
    pub alpha: DMatrix<f64>,
    /// `alpha` expanded to locations.
    pub beta: DMatrix<f64>,
    pub sigma2: f64,
    /// Standard errors of `(eta, vec(alpha^T))`, `eta` first then group blocks.
    pub se: DVector<f64>,
}

/// `U^T Omega^power U` and `U^T Omega y` for `power` in {1, 2}.
fn normal_equations(dataset: &Dataset, partition: &Partition, power: i32) -> (DMatrix<f64>, DVector<f64>) {
    let (q, p, k) = (dataset.q(), dataset.p(), partition.k());
    let dim = q + k * p;
    let mut gram = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for (i, b) in dataset.blocks().iter().enumerate() {
        let w = (1.0 / b.replicates() as f64).powi(power);
        let g = q + partition.label(i) * p;
        let xt = b.x.transpose();
        let mut xx = gram.view_mut((g, g), (p, p));
        xx += &xt * &b.x * w;
        rhs.rows_mut(g, p).axpy(w, &(&xt * &b.y), 1.0);
        if q > 0 {
            let zt = b.z.transpose();
            let mut zz = gram.view_mut((0, 0), (q, q));
            zz += &zt * &b.z * w;
            let zx = &zt * &b.x * w;
            let mut upper = gram.view_mut((0, g), (q, p));
            upper += &zx;
            let mut lower = gram.view_mut((g, 0), (p, q));
            lower += zx.transpose();
            rhs.rows_mut(0, q).axpy(w, &(&zt * &b.y), 1.0);
        }
    }
    (gram, rhs)
}

fn check_partition(dataset: &Dataset, partition: &Partition) -> Result<()> {
    if partition.n() != dataset.n() {
        return Err(SasaError::DimensionMismatch(alloc::format!(
            "partition covers {} locations, dataset has {}",
            partition.n(),
            dataset.n()
        )));
    }
    Ok(())
}

fn solve_oracle(dataset: &Dataset, partition: &Partition) -> Result<(SpdFactor, Coefficients)> {
    check_partition(dataset, partition)?;
    let (q, p, k) = (dataset.q(), dataset.p(), partition.k());
    let (gram, rhs) = normal_equations(dataset, partition, 1);
    let f = factor_or(gram, SasaError::PartitionRankDeficient)?;
    let sol = f.solve(&rhs);
    let eta = sol.rows(0, q).into_owned();
    let alpha = DMatrix::from_fn(k, p, |g, l| sol[q + g * p + l]);
    Ok((f, Coefficients::from_groups(eta, alpha, partition)))
}

/// Oracle coefficients only; no variance estimate, so no degrees-of-freedom
/// requirement.
pub fn oracle_coefficients(dataset: &Dataset, partition: &Partition) -> Result<Coefficients> {
    solve_oracle(dataset, partition).map(|(_, c)| c)
}

pub fn oracle_fit(dataset: &Dataset, partition: &Partition) -> Result<OracleFit> {
    let (f, coef) = solve_oracle(dataset, partition)?;
    let sigma2 = sigma2_hat(dataset, &coef.eta, &coef.beta, partition.k())?;
    let se = sandwich_se(dataset, partition, &f, sigma2);
    Ok(OracleFit {
        eta: coef.eta,
        alpha: coef.alpha.expect("oracle coefficients carry alpha"),
        beta: coef.beta,
        sigma2,
        se,
    })
}

/// `(m - q - K p)^{-1} sum_i sum_h r_ih^2`.
pub fn sigma2_hat(dataset: &Dataset, eta: &DVector<f64>, beta: &DMatrix<f64>, k: usize) -> Result<f64> {
    let dof = dataset.m() as i64 - dataset.q() as i64 - (k * dataset.p()) as i64;
    if dof <= 0 {
        return Err(SasaError::NonPositiveDof { dof });
    }
    Ok(dataset.rss(eta, beta) / dof as f64)
}

fn sandwich_se(dataset: &Dataset, partition: &Partition, f: &SpdFactor, sigma2: f64) -> DVector<f64> {
    let (meat, _) = normal_equations(dataset, partition, 2);
    let bread = f.inverse();
    let cov = &bread * meat * &bread;
    let sigma = libm::sqrt(sigma2);
    DVector::from_iterator(
        cov.nrows(),
        cov.diagonal().iter().map(|v| sigma * libm::sqrt(v.max(0.0))),
    )
}

/// `sigma * sqrt(diag((U^T Omega U)^{-1} U^T Omega Omega U (U^T Omega U)^{-1}))`.
pub fn coef_se(dataset: &Dataset, partition: &Partition, sigma2: f64) -> Result<DVector<f64>> {
    check_partition(dataset, partition)?;
    if !(sigma2 >= 0.0) {
        return Err(SasaError::param("sigma2", "must be nonnegative"));
    }
    let (gram, _) = normal_equations(dataset, partition, 1);
    let f = factor_or(gram, SasaError::PartitionRankDeficient)?;
    Ok(sandwich_se(dataset, partition, &f, sigma2))
}

/// Smallest Euclidean distance between distinct group coefficient rows.
pub fn min_group_gap(alpha: &DMatrix<f64>) -> Result<f64> {
    let k = alpha.nrows();
    if k < 2 {
        return Err(SasaError::GapUndefined);
    }
    Ok(pairs(k)
        .map(|(a, b)| (alpha.row(a) - alpha.row(b)).norm())
        .fold(f64::INFINITY, f64::min))
}

/// Whether the minimal group gap clears `gamma * lambda`, the point where the
/// SCAD derivative vanishes.
pub fn gap_exceeds_plateau(alpha: &DMatrix<f64>, lambda: f64, gamma: f64) -> Result<bool> {
    Ok(min_group_gap(alpha)? > gamma * lambda)
}
