//! Pairwise fusion weights `c_ij`.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Result, SasaError};
use crate::graph::NeighborOrders;
use crate::linalg::dist2;
use crate::solver::difference::{pair_count, pair_index, pairs};

/// How pairwise weights borrow spatial and coefficient information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WeightKind {
    /// `c_ij = 1`.
    Equal,
    /// `exp(psi (1 - a_ij) ||b_i - b_j||)`.
    RegSp,
    /// `exp(-psi ||b_i - b_j||)`.
    Reg,
    /// `exp(psi (1 - a_ij))`.
    Sp,
}

impl WeightKind {
    pub const ALL: [WeightKind; 4] = [WeightKind::Equal, WeightKind::RegSp, WeightKind::Reg, WeightKind::Sp];

    pub fn name(self) -> &'static str {
        match self {
            WeightKind::Equal => "equal",
            WeightKind::RegSp => "reg_sp",
            WeightKind::Reg => "reg",
            WeightKind::Sp => "sp",
        }
    }

    pub fn requires_orders(self) -> bool {
        matches!(self, WeightKind::RegSp | WeightKind::Sp)
    }

    pub fn requires_init(self) -> bool {
        matches!(self, WeightKind::RegSp | WeightKind::Reg)
    }

    /// Whether `psi` changes the weights at all.
    pub fn uses_psi(self) -> bool {
        self != WeightKind::Equal
    }
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightKind {
    type Err = SasaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(WeightKind::Equal),
            "reg_sp" | "reg-sp" => Ok(WeightKind::RegSp),
            "reg" => Ok(WeightKind::Reg),
            "sp" => Ok(WeightKind::Sp),
            other => Err(SasaError::param("weights", alloc::format!("unknown scheme `{other}`"))),
        }
    }
}

/// Candidate `psi` values used when none are given.
pub const DEFAULT_PSIS: [f64; 4] = [0.1, 0.5, 1.0, 3.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub psi: f64,
}

impl WeightSpec {
    pub fn new(kind: WeightKind, psi: f64) -> Self {
        WeightSpec { kind, psi }
    }

    pub fn equal() -> Self {
        WeightSpec::new(WeightKind::Equal, 0.0)
    }

    pub fn requires_orders(&self) -> bool {
        self.kind.requires_orders()
    }

    pub fn requires_init(&self) -> bool {
        self.kind.requires_init()
    }
}

/// Symmetric weights stored per unordered pair in lexicographic `(i, j)`, `i < j` order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    c: Vec<f64>,
}

impl WeightMatrix {
    pub fn equal(n: usize) -> Self {
        WeightMatrix {
            n,
            c: alloc::vec![1.0; pair_count(n)],
        }
    }

    /// Builds weights from per-pair values in lexicographic order.
    pub fn from_pairs(n: usize, c: Vec<f64>) -> Result<Self> {
        if c.len() != pair_count(n) {
            return Err(SasaError::DimensionMismatch(alloc::format!(
                "{} pair weights for {n} locations",
                c.len()
            )));
        }
        if c.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(SasaError::param("weights", "every weight must lie in (0, 1]"));
        }
        Ok(WeightMatrix { n, c })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i != j);
        self.c[pair_index(self.n, i.min(j), i.max(j))]
    }

    pub fn pairs(&self) -> &[f64] {
        &self.c
    }

    pub fn min(&self) -> f64 {
        self.c.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Dense symmetric matrix with a unit diagonal.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::from_element(self.n, self.n, 1.0);
        for (k, (i, j)) in pairs(self.n).enumerate() {
            m[(i, j)] = self.c[k];
            m[(j, i)] = self.c[k];
        }
        m
    }
}

/// Weights for `n` locations. Equal weights need neither optional input.
pub fn compute_weights(
    n: usize,
    spec: &WeightSpec,
    orders: Option<&NeighborOrders>,
    beta_init: Option<&DMatrix<f64>>,
) -> Result<WeightMatrix> {
    if !(spec.psi >= 0.0 && spec.psi.is_finite()) {
        return Err(SasaError::param("psi", "must be finite and nonnegative"));
    }
    let orders = if spec.requires_orders() {
        let a = orders.ok_or(SasaError::MissingInput {
            scheme: spec.kind.name(),
            input: "neighbor orders",
        })?;
        if a.n() != n {
            return Err(SasaError::DimensionMismatch(alloc::format!(
                "neighbor orders cover {} locations, expected {n}",
                a.n()
            )));
        }
        Some(a)
    } else {
        None
    };
    let rows: Vec<Vec<f64>> = if spec.requires_init() {
        let b = beta_init.ok_or(SasaError::MissingInput {
            scheme: spec.kind.name(),
            input: "initial coefficient estimates",
        })?;
        if b.nrows() != n {
            return Err(SasaError::DimensionMismatch(alloc::format!(
                "initial estimates cover {} locations, expected {n}",
                b.nrows()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(SasaError::param("beta_init", "non-finite initial estimate"));
        }
        (0..n).map(|i| b.row(i).iter().copied().collect()).collect()
    } else {
        Vec::new()
    };
    let psi = spec.psi;
    let gap = |i: usize, j: usize| libm::sqrt(dist2(&rows[i], &rows[j]));
    let order = |i: usize, j: usize| orders.map_or(0.0, |a| a.get(i, j) as f64);
    let c = pairs(n)
        .map(|(i, j)| {
            let c = match spec.kind {
                WeightKind::Equal => 1.0,
                WeightKind::RegSp => libm::exp(psi * (1.0 - order(i, j)) * gap(i, j)),
                WeightKind::Reg => libm::exp(-psi * gap(i, j)),
                WeightKind::Sp => libm::exp(psi * (1.0 - order(i, j))),
            };
            // exp underflow must not produce a zero weight
            c.max(f64::MIN_POSITIVE)
        })
        .collect();
    Ok(WeightMatrix { n, c })
}

pub(crate) fn max_pair_gap(beta: &DMatrix<f64>) -> f64 {
    let n = beta.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| beta.row(i).iter().copied().collect()).collect();
    pairs(n)
        .map(|(i, j)| libm::sqrt(dist2(&rows[i], &rows[j])))
        .fold(0.0, f64::max)
}
