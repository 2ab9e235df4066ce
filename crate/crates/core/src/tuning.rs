//! Selection of `(psi, lambda)` by the modified BIC or by cross-validation.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SasaError};
use crate::graph::NeighborOrders;
use crate::model::{Dataset, SolverConfig};
use crate::solver::{initialize, Admm, AdmmState, InitMethod, SasaFit};
use crate::weights::{compute_weights, max_pair_gap, WeightKind, WeightMatrix, WeightSpec, DEFAULT_PSIS};

/// `C_n = 0.2 log(log(n p + q))`.
pub fn bic_constant(n: usize, p: usize, q: usize) -> f64 {
    0.2 * libm::log(libm::log((n * p + q) as f64))
}

/// `log(n^{-1} sum_i n_i^{-1} sum_h r_ih^2) + C_n (log n / n) (K p + q)`.
pub fn bic(dataset: &Dataset, eta: &DVector<f64>, beta: &DMatrix<f64>, k: usize) -> f64 {
    let (n, p, q) = (dataset.n(), dataset.p(), dataset.q());
    let nf = n as f64;
    let fit = libm::log(dataset.weighted_rss(eta, beta) / nf);
    fit + bic_constant(n, p, q) * libm::log(nf) / nf * (k * p + q) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Bic,
    /// Replicate-blocked K-fold cross-validation.
    Cv {
        folds: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneGrid {
    pub psis: Vec<f64>,
    pub nlambda: usize,
    /// `lambda_min / lambda_max`.
    pub lambda_min_ratio: f64,
    /// Explicit ascending `lambda` values; overrides the automatic grid.
    pub lambdas: Option<Vec<f64>>,
}

impl Default for TuneGrid {
    fn default() -> Self {
        TuneGrid {
            psis: DEFAULT_PSIS.to_vec(),
            nlambda: 50,
            lambda_min_ratio: 1e-3,
            lambdas: None,
        }
    }
}

impl TuneGrid {
    fn validate(&self) -> Result<()> {
        if self.psis.is_empty() || self.psis.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(SasaError::param("psis", "need at least one finite nonnegative value"));
        }
        match &self.lambdas {
            Some(l) => {
                if l.is_empty() || l.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                    return Err(SasaError::param("lambdas", "need finite nonnegative values"));
                }
                if l.windows(2).any(|w| w[1] < w[0]) {
                    return Err(SasaError::param("lambdas", "must be ascending"));
                }
            }
            None => {
                if self.nlambda < 2 {
                    return Err(SasaError::param("nlambda", "must be at least 2"));
                }
                if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
                    return Err(SasaError::param("lambda_min_ratio", "must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }

    /// `psi` values actually searched: equal weights ignore `psi`.
    pub fn effective_psis(&self, kind: WeightKind) -> Vec<f64> {
        if kind.uses_psi() {
            self.psis.clone()
        } else {
            alloc::vec![self.psis[0]]
        }
    }
}

/// `nlambda` log-spaced values from `ratio * lambda_max` up to `lambda_max`.
pub fn lambda_grid(lambda_max: f64, nlambda: usize, ratio: f64) -> Vec<f64> {
    let lo = libm::log(lambda_max * ratio);
    let hi = libm::log(lambda_max);
    (0..nlambda)
        .map(|k| {
            if k + 1 == nlambda {
                lambda_max
            } else {
                libm::exp(lo + (hi - lo) * k as f64 / (nlambda - 1) as f64)
            }
        })
        .collect()
}

const MAX_BRACKET_STEPS: usize = 80;

/// Smallest power-of-two multiple of a starting value at which every
/// location fuses into one group. The start is `1e-2` times the largest
/// pairwise gap among the initial estimates; if that already fuses
/// everything, it is halved until it no longer does.
pub fn lambda_max(admm: &Admm<'_>, weights: &WeightMatrix, init: &AdmmState) -> Result<f64> {
    if admm.dataset().n() < 2 {
        return Ok(1.0);
    }
    let gap = max_pair_gap(&init.beta());
    let mut lambda = if gap > 0.0 { 1e-2 * gap } else { 1e-2 };
    let fuses = |l: f64| -> Result<bool> { Ok(admm.fit(weights, l, Some(init))?.k() == 1) };
    if fuses(lambda)? {
        for _ in 0..MAX_BRACKET_STEPS {
            let half = 0.5 * lambda;
            if !fuses(half)? {
                return Ok(lambda);
            }
            lambda = half;
        }
        return Ok(lambda);
    }
    for _ in 0..MAX_BRACKET_STEPS {
        lambda *= 2.0;
        if fuses(lambda)? {
            return Ok(lambda);
        }
    }
    Err(SasaError::param("lambda_max", "no lambda fused all locations"))
}

/// Fits along ascending `lambdas`, warm-starting each from the previous
/// solution. A failed cell is reported and the path continues from the
/// last good state.
pub fn solve_path(admm: &Admm<'_>, weights: &WeightMatrix, lambdas: &[f64], init: &AdmmState) -> Vec<Result<SasaFit>> {
    let mut out = Vec::with_capacity(lambdas.len());
    let mut warm: Option<AdmmState> = None;
    for &lambda in lambdas {
        let start = warm.as_ref().unwrap_or(init);
        let res = admm.fit(weights, lambda, Some(start));
        if let Ok(f) = &res {
            warm = Some(f.state.clone());
        }
        out.push(res);
    }
    out
}

/// One `(psi, lambda)` grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneCell {
    pub psi: f64,
    pub lambda: f64,
    pub k: Option<usize>,
    /// BIC or mean validation error; `NaN` when the cell failed.
    pub score: f64,
    pub converged: bool,
    pub iterations: usize,
    pub error: Option<SasaError>,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub best: SasaFit,
    pub psi: f64,
    pub lambda: f64,
    pub cells: Vec<TuneCell>,
    /// No converged cell existed, so selection fell back to every finite cell.
    pub fallback: bool,
}

/// Everything a weight scheme may need besides `psi`.
#[derive(Debug, Clone, Copy)]
pub struct TuneInputs<'a> {
    pub kind: WeightKind,
    pub orders: Option<&'a NeighborOrders>,
    pub init: InitMethod,
}

/// Index of the minimal score, preferring converged cells and, on ties, the
/// larger `lambda`.
fn select(cells: &[TuneCell]) -> Result<(usize, bool)> {
    let pick = |need_converged: bool| {
        let mut best: Option<usize> = None;
        for (idx, c) in cells.iter().enumerate() {
            if !c.score.is_finite() || (need_converged && !c.converged) {
                continue;
            }
            best = match best {
                None => Some(idx),
                Some(b) => {
                    let cb = &cells[b];
                    if c.score < cb.score || (c.score == cb.score && c.lambda > cb.lambda) {
                        Some(idx)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        best
    };
    if let Some(i) = pick(true) {
        return Ok((i, false));
    }
    pick(false).map(|i| (i, true)).ok_or(SasaError::AllCellsFailed)
}

fn cell(psi: f64, lambda: f64, res: &Result<SasaFit>, score: impl Fn(&SasaFit) -> f64) -> TuneCell {
    match res {
        Ok(f) => TuneCell {
            psi,
            lambda,
            k: Some(f.k()),
            score: score(f),
            converged: f.converged,
            iterations: f.iterations,
            error: None,
        },
        Err(e) => TuneCell {
            psi,
            lambda,
            k: None,
            score: f64::NAN,
            converged: false,
            iterations: 0,
            error: Some(e.clone()),
        },
    }
}

struct PsiPath {
    weights: WeightMatrix,
    lambdas: Vec<f64>,
}

fn psi_path(admm: &Admm<'_>, inputs: &TuneInputs<'_>, grid: &TuneGrid, psi: f64, init: &AdmmState) -> Result<PsiPath> {
    let n = admm.dataset().n();
    let beta_init = init.beta();
    let weights = compute_weights(n, &WeightSpec::new(inputs.kind, psi), inputs.orders, Some(&beta_init))?;
    let lambdas = match &grid.lambdas {
        Some(l) => l.clone(),
        None => lambda_grid(lambda_max(admm, &weights, init)?, grid.nlambda, grid.lambda_min_ratio),
    };
    Ok(PsiPath { weights, lambdas })
}

/// Fits the full `(psi, lambda)` grid and returns the selected fit.
pub fn tune(
    dataset: &Dataset,
    inputs: TuneInputs<'_>,
    grid: &TuneGrid,
    criterion: Criterion,
    config: SolverConfig,
) -> Result<TuneResult> {
    grid.validate()?;
    match criterion {
        Criterion::Bic => tune_bic(dataset, &inputs, grid, config),
        Criterion::Cv { folds } => cross_validate(dataset, &inputs, grid, folds, config),
    }
}

fn tune_bic(dataset: &Dataset, inputs: &TuneInputs<'_>, grid: &TuneGrid, config: SolverConfig) -> Result<TuneResult> {
    let admm = Admm::new(dataset, config)?;
    let init = initialize(dataset, inputs.init)?;
    let mut cells = Vec::new();
    let mut fits = Vec::new();
    for psi in grid.effective_psis(inputs.kind) {
        let path = psi_path(&admm, inputs, grid, psi, &init)?;
        for (res, &lambda) in solve_path(&admm, &path.weights, &path.lambdas, &init)
            .into_iter()
            .zip(&path.lambdas)
        {
            cells.push(cell(psi, lambda, &res, |f| {
                bic(dataset, &f.coefficients.eta, &f.coefficients.beta, f.k())
            }));
            fits.push(res.ok());
        }
    }
    let (idx, fallback) = select(&cells)?;
    let best = fits.swap_remove(idx).expect("selected cell has a fit");
    Ok(TuneResult {
        psi: cells[idx].psi,
        lambda: cells[idx].lambda,
        best,
        cells,
        fallback,
    })
}

/// Replicate indices held out by fold `f` at a location with `ni` replicates:
/// a contiguous block, so blocks partition `0..ni`.
pub fn fold_range(ni: usize, folds: usize, f: usize) -> core::ops::Range<usize> {
    (f * ni / folds)..((f + 1) * ni / folds)
}

fn split(dataset: &Dataset, folds: usize, f: usize) -> Result<(Dataset, Dataset)> {
    let mut train = Vec::with_capacity(dataset.n());
    let mut valid = Vec::with_capacity(dataset.n());
    for b in dataset.blocks() {
        let held = fold_range(b.replicates(), folds, f);
        train.push((0..b.replicates()).filter(|h| !held.contains(h)).collect::<Vec<_>>());
        valid.push(held.collect::<Vec<_>>());
    }
    Ok((dataset.subset(&train)?, dataset.subset(&valid)?))
}

fn validation_error(valid: &Dataset, fit: &SasaFit) -> f64 {
    valid.rss(&fit.coefficients.eta, &fit.coefficients.beta) / valid.m() as f64
}

fn cross_validate(
    dataset: &Dataset,
    inputs: &TuneInputs<'_>,
    grid: &TuneGrid,
    folds: usize,
    config: SolverConfig,
) -> Result<TuneResult> {
    if folds < 2 {
        return Err(SasaError::param("folds", "cross-validation needs at least 2 folds"));
    }
    for (i, b) in dataset.blocks().iter().enumerate() {
        if b.replicates() < folds {
            return Err(SasaError::TooFewReplicates {
                location: i,
                have: b.replicates(),
                folds,
            });
        }
    }
    let admm = Admm::new(dataset, config)?;
    let init = initialize(dataset, inputs.init)?;
    let psis = grid.effective_psis(inputs.kind);
    let paths: Vec<PsiPath> = psis
        .iter()
        .map(|&psi| psi_path(&admm, inputs, grid, psi, &init))
        .collect::<Result<_>>()?;

    let mut totals: Vec<Vec<f64>> = paths.iter().map(|p| alloc::vec![0.0; p.lambdas.len()]).collect();
    for f in 0..folds {
        let (train, valid) = split(dataset, folds, f)?;
        let fold_admm = Admm::new(&train, config)?;
        let fold_init = initialize(&train, inputs.init)?;
        let fold_beta = fold_init.beta();
        for (pi, (&psi, path)) in psis.iter().zip(&paths).enumerate() {
            let spec = WeightSpec::new(inputs.kind, psi);
            let weights = compute_weights(train.n(), &spec, inputs.orders, Some(&fold_beta))?;
            for (li, res) in solve_path(&fold_admm, &weights, &path.lambdas, &fold_init)
                .into_iter()
                .enumerate()
            {
                totals[pi][li] += match res {
                    Ok(fit) => validation_error(&valid, &fit),
                    Err(_) => f64::NAN,
                };
            }
        }
    }

    let mut cells = Vec::new();
    let mut full_fits: Vec<Vec<Result<SasaFit>>> = Vec::new();
    for (pi, (&psi, path)) in psis.iter().zip(&paths).enumerate() {
        let fits = solve_path(&admm, &path.weights, &path.lambdas, &init);
        for (li, res) in fits.iter().enumerate() {
            let score = totals[pi][li] / folds as f64;
            cells.push(cell(psi, path.lambdas[li], res, |_| score));
        }
        full_fits.push(fits);
    }
    let (idx, fallback) = select(&cells)?;
    let mut offset = idx;
    let mut pi = 0;
    while offset >= paths[pi].lambdas.len() {
        offset -= paths[pi].lambdas.len();
        pi += 1;
    }
    let best = full_fits[pi].swap_remove(offset)?;
    Ok(TuneResult {
        psi: cells[idx].psi,
        lambda: cells[idx].lambda,
        best,
        cells,
        fallback,
    })
}
