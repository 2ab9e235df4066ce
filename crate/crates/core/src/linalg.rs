use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Result, SasaError};

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    /// Factors `m`; a failed or badly conditioned factorization maps to `err`.
    pub fn new(m: DMatrix<f64>) -> core::result::Result<Self, f64> {
        let scale = m.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        match Cholesky::new(m) {
            Some(chol) => {
                let l = chol.l_dirty();
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for i in 0..l.nrows() {
                    let d = l[(i, i)] * l[(i, i)];
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
                let cond = hi / lo;
                if !(lo > 1e-13 * scale.max(f64::MIN_POSITIVE)) || !cond.is_finite() {
                    return Err(cond);
                }
                Ok(SpdFactor { chol })
            }
            None => Err(f64::INFINITY),
        }
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_in_place(&self, b: &mut DVector<f64>) {
        self.chol.solve_mut(b);
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

pub(crate) fn factor_or(m: DMatrix<f64>, err: SasaError) -> Result<SpdFactor> {
    SpdFactor::new(m).map_err(|_| err)
}

pub(crate) fn factor_system(m: DMatrix<f64>) -> Result<SpdFactor> {
    SpdFactor::new(m).map_err(|condition| SasaError::SingularSystem { condition })
}
