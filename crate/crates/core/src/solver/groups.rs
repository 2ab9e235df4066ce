//! Group recovery from fused pairwise differences.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::linalg::norm;
use crate::model::{Coefficients, Dataset, Partition};
use crate::oracle::oracle_coefficients;
use crate::solver::difference::pairs;

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected components of the graph whose edges are pairs with
/// `||delta_ij|| <= group_tol`. `delta` holds one `p`-block per pair in
/// lexicographic order. Groups are labelled by their smallest member.
pub fn extract_groups(n: usize, p: usize, delta: &[f64], group_tol: f64) -> Partition {
    let mut parent: Vec<usize> = (0..n).collect();
    for (k, (i, j)) in pairs(n).enumerate() {
        if norm(&delta[k * p..(k + 1) * p]) <= group_tol {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    Partition::from_labels(&roots).expect("at least one location")
}

/// Row means of `beta` within each group, `K x p`.
pub fn group_means(beta: &DMatrix<f64>, partition: &Partition) -> DMatrix<f64> {
    let p = beta.ncols();
    let mut alpha = DMatrix::zeros(partition.k(), p);
    for (i, &g) in partition.assignment().iter().enumerate() {
        let mut row = alpha.row_mut(g);
        row += beta.row(i);
    }
    for (g, size) in partition.sizes().into_iter().enumerate() {
        let mut row = alpha.row_mut(g);
        row /= size as f64;
    }
    alpha
}

/// Unpenalized weighted least squares refit under a fixed partition.
pub fn refit(dataset: &Dataset, partition: &Partition) -> Result<Coefficients> {
    oracle_coefficients(dataset, partition)
}
