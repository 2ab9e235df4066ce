//! ADMM iterations: beta, eta, delta, then the dual variable `v`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SasaError};
use crate::linalg::norm;
use crate::model::{Coefficients, Dataset, Partition, SolverConfig};
use crate::penalty::{FusionPenalty, Scad, ScadProx};
use crate::solver::design::Design;
use crate::solver::difference::{ata_dense, pair_count, pairs};
use crate::solver::groups::{extract_groups, group_means};
use crate::solver::init::{initialize, InitMethod};
use crate::solver::system::BetaSystem;
use crate::weights::WeightMatrix;

/// ADMM iterates. `beta` is stacked by location (`beta[i * p + l]`); `delta`
/// and `v` hold one `p`-block per pair in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    n: usize,
    p: usize,
    pub eta: DVector<f64>,
    beta: Vec<f64>,
    delta: Vec<f64>,
    v: Vec<f64>,
}

impl AdmmState {
    /// Starts from `beta` with `delta = A beta` and `v = 0`.
    pub fn from_beta(eta: DVector<f64>, beta: &DMatrix<f64>) -> Self {
        let (n, p) = beta.shape();
        let flat: Vec<f64> = beta.transpose().as_slice().to_vec();
        let mut delta = Vec::with_capacity(pair_count(n) * p);
        for (i, j) in pairs(n) {
            for l in 0..p {
                delta.push(flat[i * p + l] - flat[j * p + l]);
            }
        }
        let v = alloc::vec![0.0; delta.len()];
        AdmmState {
            n,
            p,
            eta,
            beta: flat,
            delta,
            v,
        }
    }

    pub fn from_parts(eta: DVector<f64>, beta: &DMatrix<f64>, delta: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let (n, p) = beta.shape();
        let len = pair_count(n) * p;
        if delta.len() != len || v.len() != len {
            return Err(SasaError::DimensionMismatch(alloc::format!(
                "pair blocks need length {len}, got delta {} and v {}",
                delta.len(),
                v.len()
            )));
        }
        Ok(AdmmState {
            n,
            p,
            eta,
            beta: beta.transpose().as_slice().to_vec(),
            delta,
            v,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `n x p` coefficient matrix.
    pub fn beta(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.p, &self.beta)
    }

    pub fn beta_stacked(&self) -> &[f64] {
        &self.beta
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// `||A beta - delta||`.
    pub fn primal_residual(&self) -> f64 {
        let p = self.p;
        let mut acc = 0.0;
        for (k, (i, j)) in pairs(self.n).enumerate() {
            for l in 0..p {
                let r = self.beta[i * p + l] - self.beta[j * p + l] - self.delta[k * p + l];
                acc += r * r;
            }
        }
        libm::sqrt(acc)
    }
}

/// Outcome of one penalized fit at a single `lambda`.
#[derive(Debug, Clone)]
pub struct SasaFit {
    pub lambda: f64,
    /// Final iterates, usable as a warm start.
    pub state: AdmmState,
    pub partition: Partition,
    /// `eta` from the last iteration, `alpha` as within-group means of the
    /// `beta` iterate and `beta` rows replaced by their group's `alpha`.
    pub coefficients: Coefficients,
    pub converged: bool,
    pub iterations: usize,
    /// Objective at the final `(eta, beta)` iterate.
    pub objective: f64,
    pub primal_residuals: Vec<f64>,
    /// `vartheta ||A^T (delta^{t+1} - delta^t)||`, recorded but not used for stopping.
    pub dual_residuals: Vec<f64>,
}

impl SasaFit {
    pub fn k(&self) -> usize {
        self.partition.k()
    }
}

/// Solver bound to one dataset and configuration. The beta system matrix
/// does not depend on `lambda` or the weights, so it is factored once here
/// and reused along a whole tuning path.
#[derive(Debug, Clone)]
pub struct Admm<'a> {
    dataset: &'a Dataset,
    design: Design,
    pairs: Vec<(usize, usize)>,
    config: SolverConfig,
    penalty: Scad,
    system: BetaSystem,
}

impl<'a> Admm<'a> {
    pub fn new(dataset: &'a Dataset, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let design = Design::new(dataset)?;
        let system = BetaSystem::new(dataset, &design, config.vartheta)?;
        let n = dataset.n();
        Ok(Admm {
            dataset,
            design,
            pairs: pairs(n).collect(),
            config,
            penalty: Scad { gamma: config.gamma },
            system,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    /// `X^T Q X + vartheta A^T A`.
    pub fn system_matrix(&self) -> DMatrix<f64> {
        let (n, p) = (self.dataset.n(), self.dataset.p());
        self.design.xqx() + ata_dense(n, p) * self.config.vartheta
    }

    /// `X^T Q y + A^T (vartheta delta - v)`.
    pub fn beta_rhs(&self, state: &AdmmState) -> DVector<f64> {
        let mut rhs = self.design.xqy().clone();
        self.fill_rhs(state, &mut rhs);
        rhs
    }

    fn fill_rhs(&self, state: &AdmmState, rhs: &mut DVector<f64>) {
        rhs.copy_from(self.design.xqy());
        let (p, vt) = (state.p, self.config.vartheta);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            for l in 0..p {
                let w = vt * state.delta[k * p + l] - state.v[k * p + l];
                rhs[i * p + l] += w;
                rhs[j * p + l] -= w;
            }
        }
    }

    /// Exact minimizer over `beta` with `eta` profiled out.
    pub fn update_beta(&self, state: &AdmmState) -> DMatrix<f64> {
        let mut sol = self.beta_rhs(state);
        self.system.solve_in_place(&mut sol, &mut Vec::new());
        DMatrix::from_row_slice(state.n, state.p, sol.as_slice())
    }

    pub fn update_eta(&self, beta: &DMatrix<f64>) -> DVector<f64> {
        self.design.eta_for(beta.transpose().as_slice())
    }

    /// Proximal step on every pair given the current `beta` and `v`.
    pub fn update_delta(&self, state: &AdmmState, weights: &WeightMatrix, lambda: f64) -> Vec<f64> {
        let p = state.p;
        let vt = self.config.vartheta;
        let mut out = alloc::vec![0.0; state.delta.len()];
        let mut sigma = alloc::vec![0.0; p];
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            for (l, s) in sigma.iter_mut().enumerate() {
                *s = state.beta[i * p + l] - state.beta[j * p + l] + state.v[k * p + l] / vt;
            }
            let lam = weights.pairs()[k] * lambda;
            self.penalty.prox_into(&sigma, lam, vt, &mut out[k * p..(k + 1) * p]);
        }
        out
    }

    /// `v + vartheta (A beta - delta)`.
    pub fn update_v(&self, state: &AdmmState) -> Vec<f64> {
        let p = state.p;
        let vt = self.config.vartheta;
        let mut out = state.v.clone();
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            for l in 0..p {
                out[k * p + l] += vt * (state.beta[i * p + l] - state.beta[j * p + l] - state.delta[k * p + l]);
            }
        }
        out
    }

    /// `1/2 sum_i n_i^{-1} ||r_i||^2 + sum_{i<j} p(||beta_i - beta_j||, c_ij lambda)`.
    pub fn objective(&self, eta: &DVector<f64>, beta: &DMatrix<f64>, weights: &WeightMatrix, lambda: f64) -> f64 {
        let loss = 0.5 * self.dataset.weighted_rss(eta, beta);
        let pen: f64 = self
            .pairs
            .iter()
            .enumerate()
            .map(|(k, &(i, j))| {
                let t = (beta.row(i) - beta.row(j)).norm();
                self.penalty.value(t, weights.pairs()[k] * lambda)
            })
            .sum();
        loss + pen
    }

    fn check(&self, weights: &WeightMatrix, lambda: f64, state: &AdmmState) -> Result<()> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(SasaError::param("lambda", "must be finite and nonnegative"));
        }
        let (n, p) = (self.dataset.n(), self.dataset.p());
        if weights.n() != n {
            return Err(SasaError::DimensionMismatch(alloc::format!(
                "weights cover {} locations, dataset has {n}",
                weights.n()
            )));
        }
        if state.n != n || state.p != p || state.eta.len() != self.dataset.q() {
            return Err(SasaError::DimensionMismatch(
                "warm start does not match the dataset".into(),
            ));
        }
        Ok(())
    }

    /// Runs ADMM from `init`, or from per-location estimates when absent.
    /// Stops once `||A beta - delta|| < tol`.
    pub fn fit(&self, weights: &WeightMatrix, lambda: f64, init: Option<&AdmmState>) -> Result<SasaFit> {
        let mut state = match init {
            Some(s) => s.clone(),
            None => initialize(self.dataset, InitMethod::PerLocation)?,
        };
        self.check(weights, lambda, &state)?;
        let (n, p) = (state.n, state.p);
        let vt = self.config.vartheta;
        let prox = ScadProx::new(self.config.gamma, vt);
        let lam: Vec<f64> = weights.pairs().iter().map(|c| c * lambda).collect();
        let mut rhs = DVector::zeros(n * p);
        let mut dual = alloc::vec![0.0; n * p];
        let mut scratch = Vec::with_capacity(n * p);
        let mut buffers = SweepBuffers::default();
        let mut primal_residuals = Vec::new();
        let mut dual_residuals = Vec::new();
        let mut converged = false;
        let mut iterations = 0;

        // `A^T (vartheta delta - v)` for the next beta step, refreshed during
        // the pair sweep so the pairs are visited once per iteration
        let mut scatter = alloc::vec![0.0; n * p];
        self.fill_rhs(&state, &mut rhs);
        for (s, (r, y)) in scatter.iter_mut().zip(rhs.iter().zip(self.design.xqy().iter())) {
            *s = r - y;
        }
        for it in 1..=self.config.max_iter {
            iterations = it;
            for (r, (y, s)) in rhs.iter_mut().zip(self.design.xqy().iter().zip(&scatter)) {
                *r = y + s;
            }
            self.system.solve_in_place(&mut rhs, &mut scratch);
            if rhs.iter().any(|v| !v.is_finite()) {
                return Err(SasaError::Divergence { iteration: it });
            }
            state.beta.copy_from_slice(rhs.as_slice());
            state.eta = self.design.eta_for(&state.beta);

            let primal2 = match p {
                1 => sweep::<1>(n, &lam, vt, &prox, &mut state, &mut buffers, &mut dual, &mut scatter),
                2 => sweep::<2>(n, &lam, vt, &prox, &mut state, &mut buffers, &mut dual, &mut scatter),
                3 => sweep::<3>(n, &lam, vt, &prox, &mut state, &mut buffers, &mut dual, &mut scatter),
                _ => sweep_dyn(n, &lam, vt, &prox, &mut state, &mut buffers, &mut dual, &mut scatter),
            };
            let primal = libm::sqrt(primal2);
            if !primal.is_finite() {
                return Err(SasaError::Divergence { iteration: it });
            }
            primal_residuals.push(primal);
            dual_residuals.push(vt * norm(&dual));
            if primal < self.config.tol {
                converged = true;
                break;
            }
        }

        let beta_iter = state.beta();
        let partition = extract_groups(n, p, &state.delta, self.config.group_tol);
        let alpha = group_means(&beta_iter, &partition);
        let objective = self.objective(&state.eta, &beta_iter, weights, lambda);
        let coefficients = Coefficients::from_groups(state.eta.clone(), alpha, &partition);
        Ok(SasaFit {
            lambda,
            state,
            partition,
            coefficients,
            converged,
            iterations,
            objective,
            primal_residuals,
            dual_residuals,
        })
    }
}

/// Reusable per-pair buffer for the sweep.
#[derive(Default)]
struct SweepBuffers {
    scale: Vec<f64>,
}

/// Delta and dual updates over every pair for a compile-time `P`. Also
/// refreshes `dual = A^T (delta_new - delta_old)` and
/// `scatter = A^T (vartheta delta - v)`; returns `||A beta - delta||^2`.
///
/// Pairs are walked in lexicographic order by nested loops. The prox scale
/// factors get their own pass so the sqrt and division pipeline across
/// pairs instead of stalling the scatter updates.
#[allow(clippy::too_many_arguments)]
fn sweep<const P: usize>(
    n: usize,
    lam: &[f64],
    vt: f64,
    prox: &ScadProx,
    state: &mut AdmmState,
    buf: &mut SweepBuffers,
    dual: &mut [f64],
    scatter: &mut [f64],
) -> f64 {
    let inv_vt = 1.0 / vt;
    let beta = &state.beta;
    buf.scale.resize(lam.len(), 0.0);
    let mut k = 0;
    for i in 0..n {
        let bi = &beta[i * P..(i + 1) * P];
        for j in i + 1..n {
            let bj = &beta[j * P..(j + 1) * P];
            let v_k = &state.v[k * P..(k + 1) * P];
            let mut acc = 0.0;
            for l in 0..P {
                let s = bi[l] - bj[l] + v_k[l] * inv_vt;
                acc += s * s;
            }
            buf.scale[k] = acc;
            k += 1;
        }
    }
    for (f, &lc) in buf.scale.iter_mut().zip(lam) {
        *f = prox.scale(libm::sqrt(*f), lc);
    }
    let mut primal2 = 0.0;
    dual.iter_mut().for_each(|d| *d = 0.0);
    scatter.iter_mut().for_each(|d| *d = 0.0);
    let mut k = 0;
    for i in 0..n {
        let mut bi = [0.0; P];
        bi.copy_from_slice(&beta[i * P..(i + 1) * P]);
        let (mut dual_i, mut scatter_i) = ([0.0; P], [0.0; P]);
        for j in i + 1..n {
            let f = buf.scale[k];
            let bj = &beta[j * P..(j + 1) * P];
            let delta_k = &mut state.delta[k * P..(k + 1) * P];
            let v_k = &mut state.v[k * P..(k + 1) * P];
            for l in 0..P {
                let diff = bi[l] - bj[l];
                let fresh = f * (diff + v_k[l] * inv_vt);
                let r = diff - fresh;
                v_k[l] += vt * r;
                primal2 += r * r;
                let step = fresh - delta_k[l];
                delta_k[l] = fresh;
                let w = vt * fresh - v_k[l];
                dual_i[l] += step;
                dual[j * P + l] -= step;
                scatter_i[l] += w;
                scatter[j * P + l] -= w;
            }
            k += 1;
        }
        for l in 0..P {
            dual[i * P + l] += dual_i[l];
            scatter[i * P + l] += scatter_i[l];
        }
    }
    primal2
}

#[allow(clippy::too_many_arguments)]
fn sweep_dyn(
    n: usize,
    lam: &[f64],
    vt: f64,
    prox: &ScadProx,
    state: &mut AdmmState,
    _buf: &mut SweepBuffers,
    dual: &mut [f64],
    scatter: &mut [f64],
) -> f64 {
    let p = state.p;
    let inv_vt = 1.0 / vt;
    let mut primal2 = 0.0;
    dual.iter_mut().for_each(|d| *d = 0.0);
    scatter.iter_mut().for_each(|d| *d = 0.0);
    let (mut diff, mut sigma, mut fresh) = (alloc::vec![0.0; p], alloc::vec![0.0; p], alloc::vec![0.0; p]);
    let beta = &state.beta;
    let blocks = state.delta.chunks_exact_mut(p).zip(state.v.chunks_exact_mut(p));
    for (((i, j), &lam_k), (delta_k, v_k)) in pairs(n).zip(lam).zip(blocks) {
        for l in 0..p {
            diff[l] = beta[i * p + l] - beta[j * p + l];
            sigma[l] = diff[l] + v_k[l] * inv_vt;
        }
        prox.apply(&sigma, lam_k, &mut fresh);
        for l in 0..p {
            let r = diff[l] - fresh[l];
            v_k[l] += vt * r;
            primal2 += r * r;
            let step = fresh[l] - delta_k[l];
            delta_k[l] = fresh[l];
            let w = vt * fresh[l] - v_k[l];
            dual[i * p + l] += step;
            dual[j * p + l] -= step;
            scatter[i * p + l] += w;
            scatter[j * p + l] -= w;
        }
    }
    primal2
}

/// One-shot fit: builds the solver and runs it.
pub fn fit(
    dataset: &Dataset,
    weights: &WeightMatrix,
    lambda: f64,
    config: SolverConfig,
    init: Option<&AdmmState>,
) -> Result<SasaFit> {
    Admm::new(dataset, config)?.fit(weights, lambda, init)
}
