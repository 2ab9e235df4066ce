//! Fast solves with the beta system matrix.
//!
//! `H = X^T Q X + vartheta A^T A` splits as `B - G S G^T` where
//! `B = blockdiag(X_i^T X_i / n_i + vartheta n I_p)`,
//! `G = [X^T Omega Z, 1_n (x) I_p]` and `S = blockdiag(M^{-1}, vartheta I_p)`.
//! The Woodbury identity then reduces every solve to `n` small blocks and
//! one `(q + p)`-dimensional system.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SasaError};
use crate::linalg::SpdFactor;
use crate::model::Dataset;
use crate::solver::design::Design;

#[derive(Debug, Clone)]
pub(crate) struct BetaSystem {
    n: usize,
    p: usize,
    /// Row-major `p x p` inverses of the diagonal blocks of `B`.
    block_inv: Vec<f64>,
    /// `B^{-1} G`, `np x (q + p)`.
    w: DMatrix<f64>,
    /// `W^T` kept contiguous for the projection step.
    wt: DMatrix<f64>,
    capacitance: SpdFactor,
}

impl BetaSystem {
    pub(crate) fn new(dataset: &Dataset, design: &Design, vartheta: f64) -> Result<Self> {
        let (n, p, q) = (dataset.n(), dataset.p(), dataset.q());
        let np = n * p;
        let singular = |condition| SasaError::SingularSystem { condition };
        let mut block_inv = Vec::with_capacity(n * p * p);
        for b in dataset.blocks() {
            let mut d = b.x.transpose() * &b.x / b.replicates() as f64;
            for l in 0..p {
                d[(l, l)] += vartheta * n as f64;
            }
            let inv = SpdFactor::new(d).map_err(singular)?.inverse();
            for r in 0..p {
                for c in 0..p {
                    block_inv.push(inv[(r, c)]);
                }
            }
        }
        let r = q + p;
        let mut g = DMatrix::zeros(np, r);
        if q > 0 {
            g.view_mut((0, 0), (np, q)).copy_from(&design.xoz);
        }
        for i in 0..n {
            for l in 0..p {
                g[(i * p + l, q + l)] = 1.0;
            }
        }
        let mut w = DMatrix::zeros(np, r);
        for c in 0..r {
            let col: Vec<f64> = g.column(c).iter().copied().collect();
            let mut out = alloc::vec![0.0; np];
            apply_blocks(&block_inv, n, p, &col, &mut out);
            w.column_mut(c).copy_from_slice(&out);
        }
        let mut s_inv = DMatrix::zeros(r, r);
        if let Some(m) = &design.zoz_matrix {
            s_inv.view_mut((0, 0), (q, q)).copy_from(m);
        }
        for l in 0..p {
            s_inv[(q + l, q + l)] = 1.0 / vartheta;
        }
        let cap = s_inv - g.transpose() * &w;
        let capacitance = SpdFactor::new(cap).map_err(singular)?;
        let wt = w.transpose();
        Ok(BetaSystem {
            n,
            p,
            block_inv,
            w,
            wt,
            capacitance,
        })
    }

    /// Overwrites `rhs` with `H^{-1} rhs`.
    pub(crate) fn solve_in_place(&self, rhs: &mut DVector<f64>, tmp: &mut Vec<f64>) {
        tmp.resize(rhs.len(), 0.0);
        apply_blocks(&self.block_inv, self.n, self.p, rhs.as_slice(), tmp);
        let mut s = &self.wt * &*rhs;
        self.capacitance.solve_in_place(&mut s);
        rhs.as_mut_slice().copy_from_slice(tmp);
        rhs.gemv(1.0, &self.w, &s, 1.0);
    }
}

fn apply_blocks(inv: &[f64], n: usize, p: usize, x: &[f64], out: &mut [f64]) {
    let pp = p * p;
    for i in 0..n {
        let blk = &inv[i * pp..(i + 1) * pp];
        let xi = &x[i * p..(i + 1) * p];
        for r in 0..p {
            out[i * p + r] = blk[r * p..(r + 1) * p].iter().zip(xi).map(|(a, b)| a * b).sum();
        }
    }
}
