//! Simulated areal datasets on rectangular grids and the per-replicate
//! simulation run.
//!
//! Every replicate draws from its own ChaCha8 stream: the generator is
//! seeded with the run seed and the stream number is the replicate index,
//! so replicates are reproducible in isolation and independent of
//! scheduling. Within a replicate the draw order is: random layout labels
//! (if any), `eta`, then for each location and each replicate row the
//! shared factor, the four correlated global covariates, `x1`, the
//! Bernoulli draw for `x2`, and the error.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::distr::{Bernoulli, Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SasaError};
use crate::graph::{build_grid_adjacency, neighbor_orders, AdjacencyGraph, Contiguity};
use crate::metrics::{adjusted_rand_index, rmse_beta, ReplicateMetrics};
use crate::model::{expand_groups, Dataset, LocationBlock, Partition, SolverConfig};
use crate::solver::{refit, InitMethod};
use crate::tuning::{tune, Criterion, TuneGrid, TuneInputs};
use crate::weights::WeightKind;

/// Number of global covariates: an intercept and four correlated normals.
pub const Q: usize = 5;
/// Number of location-specific covariates.
pub const P: usize = 2;
/// Correlation among the non-intercept global covariates.
pub const RHO: f64 = 0.3;
/// Success probability of the binary local covariate before standardization.
pub const BERNOULLI_P: f64 = 0.7;

/// Group coefficient levels for the three-group settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Levels {
    /// `(1,1), (1.5,1.5), (2,2)`.
    S1,
    /// `(1,1), (1.25,1.25), (1.5,1.5)`.
    S2,
}

impl Levels {
    pub fn alpha(self) -> DMatrix<f64> {
        let v = match self {
            Levels::S1 => [1.0, 1.5, 2.0],
            Levels::S2 => [1.0, 1.25, 1.5],
        };
        DMatrix::from_fn(3, P, |k, _| v[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    /// Three contiguous row-major bands with [`Levels::S1`].
    S1,
    /// Three contiguous row-major bands with [`Levels::S2`].
    S2,
    /// Four groups of sizes 9, 41, 41, 9 on a 10 x 10 grid.
    Unbalanced,
    /// Labels drawn uniformly at random per location; no spatial structure.
    Random(Levels),
    /// Two row-major halves with levels `(1,1)` and `(1.5,1.5)`.
    TwoGroup,
}

impl Setting {
    pub fn name(self) -> &'static str {
        match self {
            Setting::S1 => "s1",
            Setting::S2 => "s2",
            Setting::Unbalanced => "unbalanced",
            Setting::Random(Levels::S1) => "random",
            Setting::Random(Levels::S2) => "random_s2",
            Setting::TwoGroup => "two_group",
        }
    }

    /// Number of groups the layout is designed to have. Random layouts can
    /// realize fewer when a label is never drawn.
    pub fn groups(self) -> usize {
        match self {
            Setting::Unbalanced => 4,
            Setting::TwoGroup => 2,
            _ => 3,
        }
    }

    fn alpha(self) -> DMatrix<f64> {
        match self {
            Setting::S1 | Setting::Random(Levels::S1) => Levels::S1.alpha(),
            Setting::S2 | Setting::Random(Levels::S2) => Levels::S2.alpha(),
            Setting::Unbalanced => DMatrix::from_fn(4, P, |k, _| 1.0 + 0.5 * k as f64),
            Setting::TwoGroup => DMatrix::from_fn(2, P, |k, _| 1.0 + 0.5 * k as f64),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = SasaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s1" => Ok(Setting::S1),
            "s2" => Ok(Setting::S2),
            "unbalanced" => Ok(Setting::Unbalanced),
            "random" | "random_s1" => Ok(Setting::Random(Levels::S1)),
            "random_s2" => Ok(Setting::Random(Levels::S2)),
            "two_group" => Ok(Setting::TwoGroup),
            other => Err(SasaError::param("setting", alloc::format!("unknown setting `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimScenario {
    pub setting: Setting,
    pub rows: usize,
    pub cols: usize,
    /// Replicates per location.
    pub ni: usize,
    /// Error standard deviation.
    pub sigma: f64,
}

impl SimScenario {
    pub fn new(setting: Setting, rows: usize, cols: usize, ni: usize) -> Self {
        SimScenario {
            setting,
            rows,
            cols,
            ni,
            sigma: 0.5,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn n(&self) -> usize {
        self.rows * self.cols
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(SasaError::param("grid", "needs at least one row and column"));
        }
        if self.ni == 0 {
            return Err(SasaError::param("ni", "must be positive"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(SasaError::param("sigma", "must be finite and nonnegative"));
        }
        if self.setting == Setting::Unbalanced && (self.rows, self.cols) != (10, 10) {
            return Err(SasaError::param(
                "grid",
                "the unbalanced layout is defined on a 10x10 grid",
            ));
        }
        let min_n = match self.setting {
            Setting::TwoGroup => 2,
            _ => 3,
        };
        if self.n() < min_n {
            return Err(SasaError::param("grid", "too few locations for the setting"));
        }
        Ok(())
    }
}

/// Three row-major contiguous bands with sizes as equal as possible; the
/// middle band absorbs a single leftover location.
pub fn band_sizes(n: usize) -> [usize; 3] {
    let base = n / 3;
    match n % 3 {
        0 => [base; 3],
        1 => [base, base + 1, base],
        _ => [base + 1, base, base + 1],
    }
}

/// Labels, indexed into the setting's coefficient table, for fixed layouts.
fn fixed_labels(setting: Setting, rows: usize, cols: usize) -> Vec<usize> {
    let n = rows * cols;
    match setting {
        Setting::S1 | Setting::S2 => {
            let [a, b, _] = band_sizes(n);
            (0..n).map(|i| usize::from(i >= a) + usize::from(i >= a + b)).collect()
        }
        Setting::TwoGroup => (0..n).map(|i| usize::from(i >= n / 2)).collect(),
        Setting::Unbalanced => (0..n)
            .map(|i| {
                let (r, c) = (i / cols, i % cols);
                if r < 3 && c < 3 {
                    0
                } else if r >= rows - 3 && c >= cols - 3 {
                    3
                } else if c < cols / 2 {
                    1
                } else {
                    2
                }
            })
            .collect(),
        Setting::Random(_) => unreachable!("random layouts are drawn"),
    }
}

/// A generated replicate with its ground truth.
#[derive(Debug, Clone)]
pub struct SimData {
    pub dataset: Dataset,
    pub graph: AdjacencyGraph,
    pub truth: Partition,
    /// `K x p`, row `k` for group `k` of `truth`.
    pub alpha: DMatrix<f64>,
    /// `n x p` true location coefficients.
    pub beta: DMatrix<f64>,
    pub eta: DVector<f64>,
}

pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

pub fn generate(scenario: &SimScenario, seed: u64, replicate: usize) -> Result<SimData> {
    scenario.validate()?;
    let mut rng = replicate_rng(seed, replicate);
    let (rows, cols, n, ni) = (scenario.rows, scenario.cols, scenario.n(), scenario.ni);
    let table = scenario.setting.alpha();
    let raw = match scenario.setting {
        Setting::Random(_) => {
            let u = Uniform::new(0, table.nrows()).expect("nonempty range");
            (0..n).map(|_| u.sample(&mut rng)).collect()
        }
        s => fixed_labels(s, rows, cols),
    };
    let truth = Partition::from_labels(&raw)?;
    let mut alpha = DMatrix::zeros(truth.k(), P);
    for (i, &g) in raw.iter().enumerate() {
        alpha.set_row(truth.label(i), &table.row(g));
    }
    let beta = expand_groups(&alpha, &truth);

    let unit = Uniform::new(1.0, 2.0).expect("valid interval");
    let eta = DVector::from_fn(Q, |_, _| unit.sample(&mut rng));
    let bern = Bernoulli::new(BERNOULLI_P).expect("valid probability");
    let x2_scale = libm::sqrt(BERNOULLI_P * (1.0 - BERNOULLI_P));
    let (sr, sr1) = (libm::sqrt(RHO), libm::sqrt(1.0 - RHO));

    let mut blocks = Vec::with_capacity(n);
    for i in 0..n {
        let mut z = DMatrix::zeros(ni, Q);
        let mut x = DMatrix::zeros(ni, P);
        let mut y = DVector::zeros(ni);
        for h in 0..ni {
            z[(h, 0)] = 1.0;
            let w0: f64 = rng.sample(StandardNormal);
            for c in 1..Q {
                let w: f64 = rng.sample(StandardNormal);
                z[(h, c)] = sr * w0 + sr1 * w;
            }
            x[(h, 0)] = rng.sample(StandardNormal);
            let b = f64::from(u8::from(bern.sample(&mut rng)));
            x[(h, 1)] = (b - BERNOULLI_P) / x2_scale;
            let e: f64 = rng.sample(StandardNormal);
            y[h] = z.row(h).dot(&eta.transpose()) + x.row(h).dot(&beta.row(i)) + scenario.sigma * e;
        }
        blocks.push(LocationBlock::new(alloc::format!("{}", i + 1), y, z, x));
    }
    Ok(SimData {
        dataset: Dataset::with_dims(blocks, Q, P)?,
        graph: build_grid_adjacency(rows, cols, Contiguity::Rook)?,
        truth,
        alpha,
        beta,
        eta,
    })
}

/// Method settings for a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub kind: WeightKind,
    pub criterion: Criterion,
    pub grid: TuneGrid,
    pub solver: SolverConfig,
}

impl MethodConfig {
    pub fn bic(kind: WeightKind) -> Self {
        MethodConfig {
            kind,
            criterion: Criterion::Bic,
            grid: TuneGrid::default(),
            solver: SolverConfig::default(),
        }
    }
}

/// Tunes one method on an already generated replicate.
pub fn evaluate(data: &SimData, method: &MethodConfig, replicate: usize) -> Result<ReplicateMetrics> {
    let orders = neighbor_orders(&data.graph);
    let inputs = TuneInputs {
        kind: method.kind,
        orders: Some(&orders),
        init: InitMethod::PerLocation,
    };
    let res = tune(&data.dataset, inputs, &method.grid, method.criterion, method.solver)?;
    let fit = &res.best;
    let rmse_refit = refit(&data.dataset, &fit.partition)
        .ok()
        .and_then(|c| rmse_beta(&c.beta, &data.beta).ok());
    Ok(ReplicateMetrics {
        replicate,
        k_hat: fit.k(),
        ari: adjusted_rand_index(&fit.partition, &data.truth)?,
        rmse: rmse_beta(&fit.coefficients.beta, &data.beta)?,
        rmse_refit,
        converged: fit.converged,
        lambda: res.lambda,
        psi: res.psi,
    })
}

/// Generates replicate `replicate` and evaluates every method on the same data.
pub fn run_replicate(
    scenario: &SimScenario,
    methods: &[MethodConfig],
    seed: u64,
    replicate: usize,
) -> Result<Vec<ReplicateMetrics>> {
    let data = generate(scenario, seed, replicate)?;
    methods.iter().map(|m| evaluate(&data, m, replicate)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_layouts() {
        assert_eq!(band_sizes(49), [16, 17, 16]);
        assert_eq!(band_sizes(100), [33, 34, 33]);
        let p = Partition::from_labels(&fixed_labels(Setting::S1, 7, 7)).unwrap();
        assert_eq!(p.sizes(), alloc::vec![16, 17, 16]);
    }

    #[test]
    fn unbalanced_layout() {
        let l = fixed_labels(Setting::Unbalanced, 10, 10);
        let p = Partition::from_labels(&l).unwrap();
        let mut sizes = alloc::vec![0; 4];
        for &g in &l {
            sizes[g] += 1;
        }
        assert_eq!(sizes, alloc::vec![9, 41, 41, 9]);
        assert_eq!(p.k(), 4);
        assert_eq!(l[0], 0);
        assert_eq!(l[99], 3);
        assert_eq!(l[30], 1);
        assert_eq!(l[5], 2);
    }

    #[test]
    fn generation_is_reproducible_per_replicate() {
        let sc = SimScenario::new(Setting::S1, 3, 3, 4);
        let a = generate(&sc, 42, 3).unwrap();
        let b = generate(&sc, 42, 3).unwrap();
        let c = generate(&sc, 42, 4).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_ne!(a.dataset, c.dataset);
        assert_eq!(a.dataset.q(), Q);
        assert!(a.eta.iter().all(|&e| (1.0..2.0).contains(&e)));
        for blk in a.dataset.blocks() {
            assert!(blk.z.column(0).iter().all(|&v| v == 1.0));
            let hi = (1.0 - BERNOULLI_P) / libm::sqrt(0.21);
            let lo = -BERNOULLI_P / libm::sqrt(0.21);
            assert!(blk
                .x
                .column(1)
                .iter()
                .all(|&v| (v - hi).abs() < 1e-12 || (v - lo).abs() < 1e-12));
        }
    }

    #[test]
    fn zero_noise_response_is_exact() {
        let sc = SimScenario::new(Setting::TwoGroup, 2, 3, 2).with_sigma(0.0);
        let d = generate(&sc, 1, 0).unwrap();
        let r = d.dataset.rss(&d.eta, &d.beta);
        assert!(r < 1e-24);
        assert_eq!(d.truth.assignment(), &[0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn random_layout_alpha_matches_labels() {
        let sc = SimScenario::new(Setting::Random(Levels::S2), 4, 4, 2);
        let d = generate(&sc, 9, 2).unwrap();
        for i in 0..16 {
            let a = d.alpha.row(d.truth.label(i));
            assert!(a[0] == 1.0 || a[0] == 1.25 || a[0] == 1.5);
            assert_eq!(d.beta.row(i), a);
        }
    }

    #[test]
    fn unbalanced_needs_ten_by_ten() {
        assert!(generate(&SimScenario::new(Setting::Unbalanced, 7, 7, 5), 0, 0).is_err());
    }
}
