//! Per-dataset quantities reused by every ADMM iteration.
//!
//! With `Omega = diag(I_{n_i} / n_i)` and `M = Z^T Omega Z`, the profiled
//! design `Q = Omega - Omega Z M^{-1} Z^T Omega` enters the beta update only
//! through `X^T Q X` and `X^T Q y`; both are formed once here.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SasaError};
use crate::linalg::{factor_or, SpdFactor};
use crate::model::Dataset;

#[derive(Debug, Clone)]
pub struct Design {
    pub(crate) q: usize,
    /// `X^T Omega Z`, `np x q`.
    pub(crate) xoz: DMatrix<f64>,
    /// Factor of `Z^T Omega Z`; absent when `q = 0`.
    pub(crate) zoz: Option<SpdFactor>,
    /// `Z^T Omega Z` itself; absent when `q = 0`.
    pub(crate) zoz_matrix: Option<DMatrix<f64>>,
    pub(crate) zoy: DVector<f64>,
    /// `X^T Q X`, `np x np`.
    pub(crate) xqx: DMatrix<f64>,
    /// `X^T Q y`.
    pub(crate) xqy: DVector<f64>,
}

impl Design {
    pub fn new(dataset: &Dataset) -> Result<Self> {
        let (n, p, q) = (dataset.n(), dataset.p(), dataset.q());
        let np = n * p;
        let mut xox = DMatrix::zeros(np, np);
        let mut xoy = DVector::zeros(np);
        let mut xoz = DMatrix::zeros(np, q);
        let mut zoz = DMatrix::zeros(q, q);
        let mut zoy = DVector::zeros(q);
        for (i, b) in dataset.blocks().iter().enumerate() {
            let w = 1.0 / b.replicates() as f64;
            let xt = b.x.transpose();
            let r = i * p;
            xox.view_mut((r, r), (p, p)).copy_from(&(&xt * &b.x * w));
            xoy.rows_mut(r, p).copy_from(&(&xt * &b.y * w));
            if q > 0 {
                xoz.view_mut((r, 0), (p, q)).copy_from(&(&xt * &b.z * w));
                let zt = b.z.transpose();
                zoz += &zt * &b.z * w;
                zoy += &zt * &b.y * w;
            }
        }
        let zoz_matrix = (q > 0).then(|| zoz.clone());
        let (zoz, xqx, xqy) = if q > 0 {
            let f = factor_or(zoz, SasaError::GlobalRankDeficient)?;
            let m_inv_bt = f.solve_matrix(&xoz.transpose());
            let xqx = &xox - &xoz * &m_inv_bt;
            let xqy = &xoy - &xoz * f.solve(&zoy);
            (Some(f), xqx, xqy)
        } else {
            (None, xox, xoy)
        };
        Ok(Design {
            q,
            xoz,
            zoz,
            zoz_matrix,
            zoy,
            xqx,
            xqy,
        })
    }

    pub fn xqx(&self) -> &DMatrix<f64> {
        &self.xqx
    }

    pub fn xqy(&self) -> &DVector<f64> {
        &self.xqy
    }

    /// `eta = M^{-1} Z^T Omega (y - X beta)`; empty when `q = 0`.
    pub(crate) fn eta_for(&self, beta: &[f64]) -> DVector<f64> {
        match &self.zoz {
            None => DVector::zeros(0),
            Some(f) => {
                let mut rhs = self.zoy.clone();
                for c in 0..self.q {
                    let col = self.xoz.column(c);
                    let s: f64 = col.iter().zip(beta).map(|(a, b)| a * b).sum();
                    rhs[c] -= s;
                }
                f.solve_in_place(&mut rhs);
                rhs
            }
        }
    }
}

/// Application operator for `Q_{Z,Omega}` on stacked observation vectors.
#[derive(Debug, Clone)]
pub struct ProjectionOperator {
    omega: Vec<f64>,
    z: DMatrix<f64>,
    zoz: Option<SpdFactor>,
}

pub fn projection_matrix(dataset: &Dataset) -> Result<ProjectionOperator> {
    let q = dataset.q();
    let mut omega = Vec::with_capacity(dataset.m());
    let mut z = DMatrix::zeros(dataset.m(), q);
    let mut row = 0;
    for b in dataset.blocks() {
        let w = 1.0 / b.replicates() as f64;
        for h in 0..b.replicates() {
            omega.push(w);
            for c in 0..q {
                z[(row, c)] = b.z[(h, c)];
            }
            row += 1;
        }
    }
    let zoz = if q > 0 {
        let mut m = DMatrix::zeros(q, q);
        for (r, &w) in omega.iter().enumerate() {
            let zr = z.row(r);
            m += zr.transpose() * zr * w;
        }
        Some(factor_or(m, SasaError::GlobalRankDeficient)?)
    } else {
        None
    };
    Ok(ProjectionOperator { omega, z, zoz })
}

impl ProjectionOperator {
    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let ov = DVector::from_iterator(v.len(), v.iter().zip(&self.omega).map(|(a, w)| a * w));
        match &self.zoz {
            None => ov,
            Some(f) => {
                let t = f.solve(&(self.z.transpose() * &ov));
                let zt = &self.z * t;
                DVector::from_iterator(
                    v.len(),
                    ov.iter().zip(zt.iter()).zip(&self.omega).map(|((a, b), w)| a - w * b),
                )
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.dim();
        let mut out = DMatrix::zeros(m, m);
        for c in 0..m {
            let mut e = DVector::zeros(m);
            e[c] = 1.0;
            out.set_column(c, &self.apply(&e));
        }
        out
    }
}
