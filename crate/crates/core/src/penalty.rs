//! Concave fusion penalties and their proximal maps.
//!
//! Only SCAD ships. The [`FusionPenalty`] trait is what the ADMM loop uses, so
//! another penalty with a closed-form prox can be dropped in.

use alloc::vec::Vec;

use crate::error::{Result, SasaError};
use crate::linalg::norm;

/// A penalty on the norm of a pairwise difference.
pub trait FusionPenalty {
    /// `p(t, lambda)` for `t >= 0`.
    fn value(&self, t: f64, lambda: f64) -> f64;

    /// Writes `argmin_d vartheta/2 ||sigma - d||^2 + p(||d||, lambda)` into `out`.
    fn prox_into(&self, sigma: &[f64], lambda: f64, vartheta: f64, out: &mut [f64]);
}

/// Smoothly clipped absolute deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scad {
    pub gamma: f64,
}

impl Scad {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 2.0) {
            return Err(SasaError::param("gamma", "SCAD needs gamma > 2"));
        }
        Ok(Scad { gamma })
    }
}

impl Default for Scad {
    fn default() -> Self {
        Scad { gamma: 3.0 }
    }
}

impl FusionPenalty for Scad {
    fn value(&self, t: f64, lambda: f64) -> f64 {
        scad_raw(t, lambda, self.gamma)
    }

    fn prox_into(&self, sigma: &[f64], lambda: f64, vartheta: f64, out: &mut [f64]) {
        scad_prox_into(sigma, lambda, self.gamma, vartheta, out);
    }
}

fn scad_raw(t: f64, lambda: f64, gamma: f64) -> f64 {
    if lambda == 0.0 {
        0.0
    } else if t <= lambda {
        lambda * t
    } else if t <= gamma * lambda {
        (2.0 * gamma * lambda * t - t * t - lambda * lambda) / (2.0 * (gamma - 1.0))
    } else {
        lambda * lambda * (gamma + 1.0) / 2.0
    }
}

/// SCAD value `lambda * int_0^t min{1, (gamma - x/lambda)_+ / (gamma - 1)} dx`.
pub fn scad_value(t: f64, lambda: f64, gamma: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(SasaError::param("t", "penalty argument must be nonnegative"));
    }
    if !(lambda >= 0.0) {
        return Err(SasaError::param("lambda", "must be nonnegative"));
    }
    if !(gamma > 2.0) {
        return Err(SasaError::param("gamma", "SCAD needs gamma > 2"));
    }
    Ok(scad_raw(t, lambda, gamma))
}

/// `scad_value(t, lambda, gamma) / lambda`.
pub fn scaled_penalty(t: f64, lambda: f64, gamma: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(SasaError::param("lambda", "scaled penalty needs lambda > 0"));
    }
    Ok(scad_value(t, lambda, gamma)? / lambda)
}

/// Block soft-thresholding `(1 - t/||w||)_+ w`.
pub fn group_soft_threshold(w: &[f64], t: f64) -> Vec<f64> {
    let s = norm(w);
    if s <= t {
        return alloc::vec![0.0; w.len()];
    }
    let f = 1.0 - t / s;
    w.iter().map(|v| f * v).collect()
}

/// Closed-form SCAD proximal map for the pairwise difference update.
///
/// `lambda_eff` is the pair's `c_ij * lambda`. Requires `gamma > 1 + 1/vartheta`
/// so the subproblem is strictly convex.
pub fn scad_prox(sigma: &[f64], lambda_eff: f64, gamma: f64, vartheta: f64) -> Vec<f64> {
    let mut out = alloc::vec![0.0; sigma.len()];
    scad_prox_into(sigma, lambda_eff, gamma, vartheta, &mut out);
    out
}

#[inline]
pub fn scad_prox_into(sigma: &[f64], lambda_eff: f64, gamma: f64, vartheta: f64, out: &mut [f64]) {
    ScadProx::new(gamma, vartheta).apply(sigma, lambda_eff, out);
}

/// SCAD prox with the `(gamma, vartheta)` constants folded in once.
///
/// The result is `f * sigma` for a scalar `f` depending only on
/// `||sigma||`. `f` is computed without branches on the region: which
/// region a pair falls in is data dependent and mispredicts badly inside
/// the pair sweep.
#[derive(Debug, Clone, Copy)]
pub struct ScadProx {
    lasso_t: f64,
    lasso_end: f64,
    middle_t: f64,
    middle_scale: f64,
    gamma: f64,
}

impl ScadProx {
    #[inline]
    pub fn new(gamma: f64, vartheta: f64) -> Self {
        let g1 = (gamma - 1.0) * vartheta;
        ScadProx {
            lasso_t: 1.0 / vartheta,
            lasso_end: 1.0 + 1.0 / vartheta,
            middle_t: gamma / g1,
            middle_scale: 1.0 / (1.0 - 1.0 / g1),
            gamma,
        }
    }

    #[inline]
    pub fn scale(&self, s: f64, lc: f64) -> f64 {
        let inv = 1.0 / s;
        let lasso = (1.0 - lc * self.lasso_t * inv).max(0.0);
        let middle = (1.0 - lc * self.middle_t * inv).max(0.0) * self.middle_scale;
        let f = if s <= self.gamma * lc { middle } else { 1.0 };
        if s <= lc * self.lasso_end {
            lasso
        } else {
            f
        }
    }

    #[inline]
    pub fn apply(&self, sigma: &[f64], lc: f64, out: &mut [f64]) {
        let f = self.scale(norm(sigma), lc);
        for (o, &v) in out.iter_mut().zip(sigma) {
            *o = f * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    /// Composite Simpson quadrature of the SCAD integrand.
    fn scad_quadrature(t: f64, lambda: f64, gamma: f64) -> f64 {
        let steps = 20_000;
        let h = t / steps as f64;
        let f = |x: f64| {
            let tail = ((gamma - x / lambda).max(0.0)) / (gamma - 1.0);
            lambda * tail.min(1.0)
        };
        let mut acc = f(0.0) + f(t);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(k as f64 * h);
        }
        acc * h / 3.0
    }

    /// Minimizes `vartheta/2 (s - d)^2 + p(d, lc)` over `d in [0, s]`
    /// by a coarse grid followed by golden-section refinement.
    pub(crate) fn prox_oracle(s: f64, lc: f64, gamma: f64, vartheta: f64) -> (f64, f64) {
        let obj = |d: f64| 0.5 * vartheta * (s - d) * (s - d) + scad_raw(d, lc, gamma);
        if s == 0.0 {
            return (0.0, 0.0);
        }
        let grid: usize = 400;
        let mut best: usize = 0;
        for k in 0..=grid {
            if obj(s * k as f64 / grid as f64) < obj(s * best as f64 / grid as f64) {
                best = k;
            }
        }
        let mut lo = s * (best.saturating_sub(1)) as f64 / grid as f64;
        let mut hi = s * ((best + 1).min(grid)) as f64 / grid as f64;
        let phi = (libm::sqrt(5.0) - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if obj(a) <= obj(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let mid = 0.5 * (lo + hi);
        let d = [mid, 0.0, s]
            .into_iter()
            .min_by(|a, b| obj(*a).total_cmp(&obj(*b)))
            .unwrap();
        (d, obj(d))
    }

    #[test]
    fn scad_examples() {
        assert_eq!(scad_value(0.0, 1.0, 3.0).unwrap(), 0.0);
        assert!((scad_value(0.5, 1.0, 3.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((scad_value(5.0, 1.0, 3.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(scad_value(-1.0, 1.0, 3.0).is_err());
        assert_eq!(scad_value(3.0, 0.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn scad_matches_quadrature() {
        for &(t, lambda, gamma) in &[(0.5, 1.0, 3.0), (5.0, 1.0, 3.0), (1.7, 0.8, 3.7), (2.2, 1.0, 3.0)] {
            let q = scad_quadrature(t, lambda, gamma);
            assert!((scad_value(t, lambda, gamma).unwrap() - q).abs() < 1e-6, "t={t}");
        }
        // frozen quadrature values
        assert!((scad_quadrature(0.5, 1.0, 3.0) - 0.5).abs() < 1e-9);
        assert!((scad_quadrature(5.0, 1.0, 3.0) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn scaled_penalty_examples() {
        assert_eq!(scaled_penalty(0.0, 1.0, 3.0).unwrap(), 0.0);
        assert!((scaled_penalty(3.0, 1.0, 3.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((scaled_penalty(0.5, 1.0, 3.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(scaled_penalty(1.0, 0.0, 3.0).is_err());
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(group_soft_threshold(&[3.0, 4.0], 0.0), vec![3.0, 4.0]);
        assert_eq!(group_soft_threshold(&[0.3, 0.4], 1.0), vec![0.0, 0.0]);
        let s = group_soft_threshold(&[3.0, 4.0], 2.5);
        assert!((s[0] - 1.5).abs() < 1e-15 && (s[1] - 2.0).abs() < 1e-15);
        assert_eq!(group_soft_threshold(&[0.0, 0.0], 0.5), vec![0.0, 0.0]);
    }

    #[test]
    fn prox_examples() {
        let big = scad_prox(&[4.0, 0.0], 1.0, 3.0, 1.0);
        assert_eq!(big, vec![4.0, 0.0]);
        assert_eq!(scad_prox(&[0.0, 0.0], 1.0, 3.0, 1.0), vec![0.0, 0.0]);
        let d = scad_prox(&[1.2, 0.0], 1.0, 3.0, 1.0);
        let (oracle, _) = prox_oracle(1.2, 1.0, 3.0, 1.0);
        assert!((d[0] - oracle).abs() < 1e-6);
        assert!((d[0] - 0.2).abs() < 1e-12);
        assert_eq!(d[1], 0.0);
    }

    #[test]
    fn prox_middle_branch() {
        // 2 < ||s|| = 2.5 <= 3 with lc = 1, gamma = 3, vartheta = 1
        let d = scad_prox(&[2.5], 1.0, 3.0, 1.0);
        let (oracle, _) = prox_oracle(2.5, 1.0, 3.0, 1.0);
        assert!((d[0] - oracle).abs() < 1e-6);
        assert!((d[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn concave_nondecreasing_plateau() {
        for &(lambda, gamma) in &[(1.0, 3.0), (0.3, 2.5), (2.0, 3.7)] {
            let h = 1e-3 * lambda;
            let upto = (gamma * lambda * 1.5 / h) as usize;
            let f = |k: usize| scad_raw(k as f64 * h, lambda, gamma);
            assert_eq!(f(0), 0.0);
            for k in 1..upto {
                let (a, b, c) = (f(k - 1), f(k), f(k + 1));
                assert!(b >= a - 1e-15);
                assert!(a + c - 2.0 * b <= 1e-12, "not concave at {}", k as f64 * h);
            }
            let plateau = lambda * lambda * (gamma + 1.0) / 2.0;
            for k in [1.0, 1.1, 2.0, 10.0] {
                assert_eq!(scad_raw(gamma * lambda * k, lambda, gamma), plateau);
            }
        }
    }

    proptest! {
        #[test]
        fn prox_zero_lambda_is_identity(v in proptest::collection::vec(-5.0f64..5.0, 1..5), vartheta in 0.6f64..4.0) {
            let gamma = 1.0 + 1.0 / vartheta + 0.5;
            prop_assert_eq!(scad_prox(&v, 0.0, gamma, vartheta), v);
        }

        #[test]
        fn prox_is_collinear(v in proptest::collection::vec(-5.0f64..5.0, 2..5), lc in 0.0f64..3.0) {
            let d = scad_prox(&v, lc, 3.0, 1.0);
            let dot: f64 = d.iter().zip(&v).map(|(a, b)| a * b).sum();
            prop_assert!(dot >= -1e-12);
            prop_assert!((dot.abs() - norm(&d) * norm(&v)).abs() <= 1e-9 * (1.0 + norm(&v).powi(2)));
        }
    }
}
