//! Pairwise difference operators.
//!
//! Pairs `(i, j)`, `i < j`, are enumerated lexicographically:
//! `(0,1), (0,2), ..., (0,n-1), (1,2), ..., (n-2,n-1)`. Row `k` of `D` is
//! `e_i - e_j` for the `k`-th pair and `A = D (x) I_p`.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Result, SasaError};

#[inline]
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of pair `(i, j)`, `i < j`, in lexicographic order.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> + Clone {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceStructure {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

pub fn build_difference_structure(n: usize) -> Result<DifferenceStructure> {
    if n < 2 {
        return Err(SasaError::param(
            "n",
            "difference structure needs at least two locations",
        ));
    }
    Ok(DifferenceStructure {
        n,
        pairs: pairs(n).collect(),
    })
}

impl DifferenceStructure {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Dense `D`, one row per pair.
    pub fn d_matrix(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.pairs.len(), self.n);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            d[(k, i)] = 1.0;
            d[(k, j)] = -1.0;
        }
        d
    }

    /// Dense `A = D (x) I_p`.
    pub fn a_matrix(&self, p: usize) -> DMatrix<f64> {
        self.d_matrix().kronecker(&DMatrix::identity(p, p))
    }

    /// `A^T A beta` through `D^T D = n I - 1 1^T`, for `beta` stacked by location.
    pub fn apply_ata(&self, beta: &[f64], p: usize) -> Vec<f64> {
        apply_ata(self.n, p, beta)
    }

    /// `A beta`, one `p`-block per pair.
    pub fn apply_a(&self, beta: &[f64], p: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.pairs.len() * p);
        for &(i, j) in &self.pairs {
            for l in 0..p {
                out.push(beta[i * p + l] - beta[j * p + l]);
            }
        }
        out
    }

    /// `A^T w` for pair-stacked `w`.
    pub fn apply_at(&self, w: &[f64], p: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.n * p];
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            for l in 0..p {
                out[i * p + l] += w[k * p + l];
                out[j * p + l] -= w[k * p + l];
            }
        }
        out
    }
}

pub(crate) fn apply_ata(n: usize, p: usize, beta: &[f64]) -> Vec<f64> {
    let mut total = alloc::vec![0.0; p];
    for i in 0..n {
        for l in 0..p {
            total[l] += beta[i * p + l];
        }
    }
    (0..n * p).map(|idx| n as f64 * beta[idx] - total[idx % p]).collect()
}

/// `D^T D (x) I_p` as a dense matrix, from the closed form.
pub(crate) fn ata_dense(n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n * p, n * p, |r, c| {
        if r % p != c % p {
            0.0
        } else if r == c {
            n as f64 - 1.0
        } else {
            -1.0
        }
    })
}
