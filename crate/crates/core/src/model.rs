//! Core data types: per-location data blocks, partitions into subgroups,
//! fitted coefficients and solver configuration.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SasaError};

/// Responses and covariates observed at one location.
///
/// `z` holds the global covariates (`n_i x q`), `x` the local covariates
/// (`n_i x p`), one row per replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationBlock {
    pub location_id: String,
    pub y: DVector<f64>,
    pub z: DMatrix<f64>,
    pub x: DMatrix<f64>,
}

impl LocationBlock {
    pub fn new(location_id: impl Into<String>, y: DVector<f64>, z: DMatrix<f64>, x: DMatrix<f64>) -> Self {
        Self {
            location_id: location_id.into(),
            y,
            z,
            x,
        }
    }

    pub fn replicates(&self) -> usize {
        self.y.len()
    }

    /// Keeps only the replicate rows selected by `keep`.
    pub fn select_rows(&self, keep: &[usize]) -> LocationBlock {
        LocationBlock {
            location_id: self.location_id.clone(),
            y: DVector::from_iterator(keep.len(), keep.iter().map(|&h| self.y[h])),
            z: self.z.select_rows(keep),
            x: self.x.select_rows(keep),
        }
    }
}

/// What is wrong with a dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    NoLocations,
    NoLocalCovariates,
    EmptyLocation,
    RowCountMismatch { y: usize, z: usize, x: usize },
    GlobalWidth { expected: usize, found: usize },
    LocalWidth { expected: usize, found: usize },
    NonFinite,
    DuplicateId,
}

/// The first invariant a dataset breaks, with the offending location index.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub location: Option<usize>,
    pub location_id: Option<String>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::NoLocations => f.write_str("no locations")?,
            ViolationKind::NoLocalCovariates => f.write_str("local covariate dimension p must be at least 1")?,
            ViolationKind::EmptyLocation => f.write_str("empty location")?,
            ViolationKind::RowCountMismatch { y, z, x } => write!(f, "row count mismatch (y: {y}, z: {z}, x: {x})")?,
            ViolationKind::GlobalWidth { expected, found } => {
                write!(f, "global covariate row has length {found}, expected {expected}")?
            }
            ViolationKind::LocalWidth { expected, found } => {
                write!(f, "local covariate row has length {found}, expected {expected}")?
            }
            ViolationKind::NonFinite => f.write_str("non-finite value")?,
            ViolationKind::DuplicateId => f.write_str("duplicate location id")?,
        }
        if let Some(i) = self.location {
            write!(f, " at location {i}")?;
        }
        if let Some(id) = &self.location_id {
            write!(f, " ({id})")?;
        }
        Ok(())
    }
}

/// Areal data with repeated measures.
///
/// Locations are indexed `0..n` in the order of `blocks`; every matrix built
/// downstream (weights, difference operators) uses this order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    blocks: Vec<LocationBlock>,
    q: usize,
    p: usize,
    m: usize,
}

impl Dataset {
    /// Builds a dataset, inferring `q` and `p` from the first block.
    pub fn new(blocks: Vec<LocationBlock>) -> Result<Self> {
        let (q, p) = blocks.first().map(|b| (b.z.ncols(), b.x.ncols())).unwrap_or((0, 0));
        Self::with_dims(blocks, q, p)
    }

    pub fn with_dims(blocks: Vec<LocationBlock>, q: usize, p: usize) -> Result<Self> {
        let m = blocks.iter().map(|b| b.y.len()).sum();
        let ds = Dataset { blocks, q, p, m };
        validate(&ds).map_err(SasaError::InvalidDataset)?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.blocks.len()
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn blocks(&self) -> &[LocationBlock] {
        &self.blocks
    }
    pub fn block(&self, i: usize) -> &LocationBlock {
        &self.blocks[i]
    }
    pub fn replicate_counts(&self) -> Vec<usize> {
        self.blocks.iter().map(LocationBlock::replicates).collect()
    }

    /// Index of a location by its identifier.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.location_id == id)
    }

    /// Residuals `y - Z eta - X beta_i` for every location.
    pub fn residuals(&self, eta: &DVector<f64>, beta: &DMatrix<f64>) -> Vec<DVector<f64>> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let mut r = b.y.clone();
                if self.q > 0 {
                    r -= &b.z * eta;
                }
                r -= &b.x * beta.row(i).transpose();
                r
            })
            .collect()
    }

    /// `sum_i n_i^{-1} sum_h r_ih^2`, the per-location averaged squared loss.
    pub fn weighted_rss(&self, eta: &DVector<f64>, beta: &DMatrix<f64>) -> f64 {
        self.residuals(eta, beta)
            .iter()
            .map(|r| r.norm_squared() / r.len() as f64)
            .sum()
    }

    /// Plain residual sum of squares over all observations.
    pub fn rss(&self, eta: &DVector<f64>, beta: &DMatrix<f64>) -> f64 {
        self.residuals(eta, beta).iter().map(|r| r.norm_squared()).sum()
    }

    /// Restricts every location to the given replicate indices.
    pub fn subset(&self, keep: &[Vec<usize>]) -> Result<Dataset> {
        if keep.len() != self.n() {
            return Err(SasaError::DimensionMismatch(alloc::format!(
                "row selection covers {} locations, dataset has {}",
                keep.len(),
                self.n()
            )));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(keep)
            .map(|(b, rows)| b.select_rows(rows))
            .collect();
        Dataset::with_dims(blocks, self.q, self.p)
    }
}

/// Checks every dataset invariant and reports the first violation.
pub fn validate(dataset: &Dataset) -> core::result::Result<(), Violation> {
    let at = |i: usize, kind| Violation {
        location: Some(i),
        location_id: Some(dataset.blocks[i].location_id.clone()),
        kind,
    };
    if dataset.blocks.is_empty() {
        return Err(Violation {
            location: None,
            location_id: None,
            kind: ViolationKind::NoLocations,
        });
    }
    if dataset.p == 0 {
        return Err(Violation {
            location: None,
            location_id: None,
            kind: ViolationKind::NoLocalCovariates,
        });
    }
    let mut seen = BTreeSet::new();
    for (i, b) in dataset.blocks.iter().enumerate() {
        if !seen.insert(b.location_id.as_str()) {
            return Err(at(i, ViolationKind::DuplicateId));
        }
        let ni = b.y.len();
        if ni == 0 {
            return Err(at(i, ViolationKind::EmptyLocation));
        }
        if b.z.nrows() != ni || b.x.nrows() != ni {
            return Err(at(
                i,
                ViolationKind::RowCountMismatch {
                    y: ni,
                    z: b.z.nrows(),
                    x: b.x.nrows(),
                },
            ));
        }
        if b.z.ncols() != dataset.q {
            return Err(at(
                i,
                ViolationKind::GlobalWidth {
                    expected: dataset.q,
                    found: b.z.ncols(),
                },
            ));
        }
        if b.x.ncols() != dataset.p {
            return Err(at(
                i,
                ViolationKind::LocalWidth {
                    expected: dataset.p,
                    found: b.x.ncols(),
                },
            ));
        }
        let finite = b.y.iter().chain(b.z.iter()).chain(b.x.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(at(i, ViolationKind::NonFinite));
        }
    }
    Ok(())
}

/// A partition of locations into `K` mutually exclusive groups.
///
/// Labels are stored zero-based and always cover `0..K`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Accepts labels that already form a surjection onto `0..K`.
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(SasaError::param("assignment", "empty partition"));
        }
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        let mut used = vec![false; k];
        for &g in &assignment {
            used[g] = true;
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(SasaError::param(
                "assignment",
                alloc::format!("label {missing} has no members"),
            ));
        }
        Ok(Partition { assignment, k })
    }

    /// Relabels arbitrary labels to `0..K` in order of first appearance.
    pub fn from_labels<T: Ord + Clone>(labels: &[T]) -> Result<Self> {
        let mut map: alloc::collections::BTreeMap<T, usize> = alloc::collections::BTreeMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(l.clone()).or_insert(next)
            })
            .collect();
        Partition::new(assignment)
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            assignment: (0..n).collect(),
            k: n,
        }
    }

    pub fn single_group(n: usize) -> Self {
        Partition {
            assignment: vec![0; n],
            k: 1,
        }
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }
    pub fn label(&self, i: usize) -> usize {
        self.assignment[i]
    }

    /// Member lists, one per group label.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.k];
        for (i, &g) in self.assignment.iter().enumerate() {
            groups[g].push(i);
        }
        groups
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &g in &self.assignment {
            sizes[g] += 1;
        }
        sizes
    }

    /// Same partition after canonical relabeling.
    pub fn canonical(&self) -> Partition {
        Partition::from_labels(&self.assignment).expect("nonempty partition")
    }

    pub fn same_grouping(&self, other: &Partition) -> bool {
        self.n() == other.n() && self.canonical().assignment == other.canonical().assignment
    }

    /// Applies a location permutation: location `perm[i]` of the result is
    /// location `i` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Partition {
        let mut labels = vec![0; self.n()];
        for (i, &to) in perm.iter().enumerate() {
            labels[to] = self.assignment[i];
        }
        Partition::from_labels(&labels).expect("nonempty partition")
    }
}

/// Fitted coefficients: common `eta`, per-location `beta` rows and, when a
/// partition is attached, per-group `alpha` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub eta: DVector<f64>,
    pub beta: DMatrix<f64>,
    pub alpha: Option<DMatrix<f64>>,
}

impl Coefficients {
    /// Expands group coefficients so that row `i` of `beta` is `alpha[label(i)]`.
    pub fn from_groups(eta: DVector<f64>, alpha: DMatrix<f64>, partition: &Partition) -> Self {
        let beta = expand_groups(&alpha, partition);
        Coefficients {
            eta,
            beta,
            alpha: Some(alpha),
        }
    }
}

pub(crate) fn expand_groups(alpha: &DMatrix<f64>, partition: &Partition) -> DMatrix<f64> {
    let p = alpha.ncols();
    DMatrix::from_fn(partition.n(), p, |i, l| alpha[(partition.label(i), l)])
}

/// ADMM and group-extraction settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// SCAD concavity constant.
    pub gamma: f64,
    /// Augmented Lagrangian penalty.
    pub vartheta: f64,
    /// Primal residual stopping threshold.
    pub tol: f64,
    pub max_iter: usize,
    /// `||delta_ij||` at or below this counts as fused.
    pub group_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: 3.0,
            vartheta: 1.0,
            tol: 1e-4,
            max_iter: 1000,
            group_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    /// The SCAD closed-form update needs `gamma > c + c / vartheta` for every
    /// weight `c <= 1`.
    pub fn validate(&self) -> Result<()> {
        if !(self.vartheta > 0.0 && self.vartheta.is_finite()) {
            return Err(SasaError::param("vartheta", "must be positive"));
        }
        if !(self.gamma > 1.0 + 1.0 / self.vartheta) {
            return Err(SasaError::param(
                "gamma",
                alloc::format!("must exceed 1 + 1/vartheta = {}", 1.0 + 1.0 / self.vartheta),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(SasaError::param("tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(SasaError::param("max_iter", "must be at least 1"));
        }
        if !(self.group_tol >= 0.0) {
            return Err(SasaError::param("group_tol", "must be nonnegative"));
        }
        Ok(())
    }
}
