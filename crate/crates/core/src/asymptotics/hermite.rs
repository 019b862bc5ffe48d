//! Hermite coefficients `J(G, X, q) = E[G(X) Π He_{q_j}(X_j)]` and ranks.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::quadrature::{gauss_expect_kinked, gauss_hermite};
use crate::special::hermite_he_all;

/// Coefficients with `|J| < RANK_THRESHOLD · sqrt(E[G²])` count as zero.
pub const RANK_THRESHOLD: f64 = 1e-8;

/// Default tensor Gauss–Hermite order for bivariate functions.
pub const DEFAULT_ORDER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermiteTerm {
    pub q: Vec<u32>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermiteRankReport {
    /// Every multi-index with `0 ≤ |q| ≤ q_max`; `q = 0` holds `E[G]`.
    pub coefficients: Vec<HermiteTerm>,
    /// `None` when every coefficient up to `q_max` vanishes.
    pub rank: Option<u32>,
    pub threshold: f64,
    /// `sqrt(E[G²])`.
    pub scale: f64,
    /// Correlation of the bivariate Gaussian; 0 for univariate reports.
    pub correlation: f64,
    pub order: usize,
    /// Largest change of any coefficient (relative to `scale`) between
    /// quadrature orders `order` and `order / 2`.
    pub refinement_change: f64,
}

impl HermiteRankReport {
    pub fn coefficient(&self, q: &[u32]) -> Option<f64> {
        self.coefficients.iter().find(|t| t.q == q).map(|t| t.value)
    }

    pub fn mean(&self) -> f64 {
        self.coefficients[0].value
    }

    fn finish(mut self) -> Self {
        let cut = self.threshold * self.scale;
        self.rank = self
            .coefficients
            .iter()
            .filter(|t| t.q.iter().sum::<u32>() > 0 && t.value.abs() > cut)
            .map(|t| t.q.iter().sum::<u32>())
            .min();
        if self.refinement_change > 1e-6 {
            log::warn!(
                "Hermite coefficients moved by {:.2e} (relative) when the quadrature order was halved",
                self.refinement_change
            );
        }
        self
    }
}

/// `J_q(g) = E[g(N) He_q(N)]` for `q = 0..=q_max`, by adaptive quadrature
/// split at `kinks`.
pub fn hermite_coefficients_1d(g: impl Fn(f64) -> f64, q_max: u32, kinks: &[f64]) -> Result<HermiteRankReport> {
    if q_max == 0 {
        return Err(invalid("q_max must be at least 1"));
    }
    let mut coefficients = Vec::with_capacity(q_max as usize + 1);
    for q in 0..=q_max {
        let v = gauss_expect_kinked(
            |x| {
                let mut h = vec![0.0; q as usize + 1];
                hermite_he_all(x, &mut h);
                g(x) * h[q as usize]
            },
            kinks,
            1e-12,
        )?;
        coefficients.push(HermiteTerm { q: vec![q], value: v });
    }
    let scale = gauss_expect_kinked(|x| g(x).powi(2), kinks, 1e-12)?.sqrt();
    Ok(HermiteRankReport {
        coefficients,
        rank: None,
        threshold: RANK_THRESHOLD,
        scale,
        correlation: 0.0,
        order: 0,
        refinement_change: 0.0,
    }
    .finish())
}

/// Raw tensor-rule sums: coefficients for all `|q| ≤ q_max` plus `E[g²]`.
///
/// The pair is whitened as `y = u`, `x = r u + sqrt(1 − r²) v`, so for each
/// outer node the `y` argument is fixed; callers with expensive `y`-only
/// factors can cache on it.
fn tensor_sums(g: &impl Fn(f64, f64) -> f64, r: f64, q_max: u32, order: usize) -> (Vec<f64>, f64) {
    let rule = gauss_hermite(order);
    let idx = multi_indices(q_max);
    let k = q_max as usize + 1;
    let mut acc = vec![0.0; idx.len()];
    let mut sq = 0.0;
    let mut hx = vec![0.0; k];
    let mut hy = vec![0.0; k];
    let s = (1.0 - r * r).max(0.0).sqrt();
    for (u, wu) in rule.nodes.iter().zip(&rule.weights) {
        if *wu == 0.0 {
            continue;
        }
        hermite_he_all(*u, &mut hy);
        for (v, wv) in rule.nodes.iter().zip(&rule.weights) {
            let w = wu * wv;
            if w == 0.0 {
                continue;
            }
            let x = r * u + s * v;
            let val = g(x, *u);
            if !val.is_finite() {
                continue;
            }
            hermite_he_all(x, &mut hx);
            sq += w * val * val;
            for (a, (q1, q2)) in acc.iter_mut().zip(&idx) {
                *a += w * val * hx[*q1 as usize] * hy[*q2 as usize];
            }
        }
    }
    (acc, sq)
}

fn multi_indices(q_max: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for total in 0..=q_max {
        for q1 in (0..=total).rev() {
            out.push((q1, total - q1));
        }
    }
    out
}

/// Hermite coefficients of `g(x, y)` with respect to a standard bivariate
/// Gaussian with correlation `r`, by a tensor Gauss–Hermite rule of `order`
/// nodes per axis (checked against `order / 2`).
pub fn hermite_coefficients_2d(g: impl Fn(f64, f64) -> f64, r: f64, q_max: u32, order: usize) -> Result<HermiteRankReport> {
    if !(-1.0..=1.0).contains(&r) {
        return Err(invalid(format!("correlation must lie in [-1, 1], got {r}")));
    }
    if q_max == 0 || order < 8 {
        return Err(invalid("need q_max ≥ 1 and quadrature order ≥ 8"));
    }
    let (fine, sq) = tensor_sums(&g, r, q_max, order);
    let (coarse, _) = tensor_sums(&g, r, q_max, order / 2);
    let scale = sq.sqrt();
    let refinement_change =
        fine.iter().zip(&coarse).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max) / scale.max(f64::MIN_POSITIVE);
    let coefficients = multi_indices(q_max)
        .into_iter()
        .zip(fine)
        .map(|((q1, q2), value)| HermiteTerm { q: vec![q1, q2], value })
        .collect();
    Ok(HermiteRankReport {
        coefficients,
        rank: None,
        threshold: RANK_THRESHOLD,
        scale,
        correlation: r,
        order,
        refinement_change,
    }
    .finish())
}
