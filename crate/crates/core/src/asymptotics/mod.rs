//! Tail constants, normalizing sequences, Hermite analysis of the covariance
//! kernels and the stable/Hermite regime map.

pub mod hermite;
pub mod kernel;
pub mod norm_seq;
pub mod regime;

pub use hermite::{hermite_coefficients_1d, hermite_coefficients_2d, HermiteRankReport, HermiteTerm, RANK_THRESHOLD};
pub use kernel::{kernel_eval, Kernel, KernelSpec, KernelVariant, LagConstants};
pub use norm_seq::{norm_seq, norm_seq_many, McOptions, NormKind, NormMethod, NormValue};
pub use regime::{classify_regime, regime_map, Regime, RegimeCell, RegimeVerdict, Statistic};

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::gaussian_lm::theoretical_covariance;
use crate::par;
use crate::rng::derive_seed;
use crate::sv_model::{SvModel, SvSimulator, VolatilityFn};

/// `E[σ^α(X_0)]`, the constant in `P(|Y_0| > x) ~ E[σ^α(X_0)] P(|Z_0| > x)`.
pub fn breiman_constant(vol: &VolatilityFn, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    vol.gaussian_moment(alpha, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProductTailMethod {
    ClosedForm,
    MonteCarlo { draws: u64, quantile: f64, exceedances: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductTail {
    pub h: usize,
    pub d_plus: f64,
    pub d_minus: f64,
    /// Standard errors; zero for the closed form.
    pub se_plus: f64,
    pub se_minus: f64,
    pub method: ProductTailMethod,
    /// Relative standard error above 10%.
    pub low_precision: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailMcOptions {
    pub draws: u64,
    /// Threshold quantile of `|Y_0 Y_1|`.
    pub quantile: f64,
    pub seed: u64,
    pub chunk: usize,
    pub workers: Option<usize>,
}

impl Default for TailMcOptions {
    fn default() -> Self {
        Self { draws: 100_000_000, quantile: 0.9999, seed: 0, chunk: 1 << 20, workers: None }
    }
}

/// `d_±(h) = lim P(±Y_0 Y_h > x) / P(|Y_0 Y_1| > x)`.
///
/// Without leverage this is `{β² + (1−β)²}` (resp. `2β(1−β)`) times
/// `E[σ^α(X_0)σ^α(X_h)] / E[σ^α(X_0)σ^α(X_1)]`. With leverage the ratio is
/// estimated by simulation at the configured quantile.
pub fn product_tail_constants(model: &SvModel, h: usize, mc: &TailMcOptions) -> Result<ProductTail> {
    if h == 0 {
        return Err(invalid("lag h must be at least 1"));
    }
    model.validate()?;
    if !model.noise.has_leverage() {
        let a = model.noise.alpha();
        let beta = model.noise.tail_balance()?;
        let var = model.state_variance()?;
        let num = model.volatility.gaussian_joint_moment(a, var, theoretical_covariance(&model.gaussian, h)? * var)?;
        let den = model.volatility.gaussian_joint_moment(a, var, theoretical_covariance(&model.gaussian, 1)? * var)?;
        let ratio = num / den;
        return Ok(ProductTail {
            h,
            d_plus: (beta * beta + (1.0 - beta) * (1.0 - beta)) * ratio,
            d_minus: 2.0 * beta * (1.0 - beta) * ratio,
            se_plus: 0.0,
            se_minus: 0.0,
            method: ProductTailMethod::ClosedForm,
            low_precision: false,
        });
    }
    if !(mc.quantile > 0.0 && mc.quantile < 1.0) {
        return Err(invalid(format!("quantile must lie in (0, 1), got {}", mc.quantile)));
    }
    let opts = McOptions { factor: 1, seed: mc.seed, chunk: mc.chunk.max(h + 2), workers: mc.workers };
    let k = ((mc.draws as f64) * (1.0 - mc.quantile)).round().max(1.0) as usize;
    let (top, _) = norm_seq::simulated_top(model, NormKind::B, mc.draws, k, &opts)?;
    let x = *top.last().ok_or_else(|| Error::InsufficientSample("no product draws".into()))?;

    // Second pass over the same paths.
    let (len, chunks) = norm_seq::chunking(mc.draws, opts.chunk);
    let sim = SvSimulator::new(model, len)?;
    let counts = par::map_indexed(chunks, opts.workers, |c| -> Result<[u64; 3]> {
        let y = sim.sample(derive_seed(opts.seed, &[c as u64]))?.y;
        let mut n = [0u64; 3];
        for w in y.windows(2) {
            n[0] += ((w[0] * w[1]).abs() > x) as u64;
        }
        for i in 0..y.len().saturating_sub(h) {
            let v = y[i] * y[i + h];
            n[1] += (v > x) as u64;
            n[2] += (v < -x) as u64;
        }
        Ok(n)
    });
    let mut n = [0u64; 3];
    for c in counts {
        let c = c?;
        for j in 0..3 {
            n[j] += c[j];
        }
    }
    if n[0] == 0 {
        return Err(Error::InsufficientSample("no exceedances of the product threshold".into()));
    }
    let base = n[0] as f64;
    let ratio_se = |m: u64| {
        let d = m as f64 / base;
        // Counts treated as independent Poisson.
        let rel = if m == 0 { f64::INFINITY } else { (1.0 / m as f64 + 1.0 / base).sqrt() };
        (d, d * rel, rel)
    };
    let (d_plus, se_plus, rel_p) = ratio_se(n[1]);
    let (d_minus, se_minus, rel_m) = ratio_se(n[2]);
    // A vanishing side is not imprecise if the other side carries the mass.
    let low_precision = [(d_plus, rel_p), (d_minus, rel_m)].iter().any(|&(d, r)| d > 0.0 && r > 0.1);
    Ok(ProductTail {
        h,
        d_plus,
        d_minus,
        se_plus: if n[1] == 0 { 0.0 } else { se_plus },
        se_minus: if n[2] == 0 { 0.0 } else { se_minus },
        method: ProductTailMethod::MonteCarlo { draws: mc.draws, quantile: mc.quantile, exceedances: n[0] },
        low_precision,
    })
}

/// `K_1(τ, H)`, the constant in the spectral representation of the Hermite
/// process of order `τ`.
pub fn rosenblatt_norm_constant(tau: u32, hurst: f64) -> Result<f64> {
    if tau == 0 {
        return Err(invalid("tau must be at least 1"));
    }
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(invalid(format!("hurst must lie in (1/2, 1), got {hurst}")));
    }
    let t = tau as f64;
    if t * (1.0 - hurst) >= 0.5 {
        return Err(invalid(format!("need tau (1 - H) < 1/2, got {}", t * (1.0 - hurst))));
    }
    let num = (t * (hurst - 1.0) + 1.0) * (2.0 * t * (hurst - 1.0) + 1.0);
    let base = 2.0 * gamma(2.0 - 2.0 * hurst) * (std::f64::consts::PI * (hurst - 0.5)).sin();
    let fact: f64 = (1..=tau).map(f64::from).product();
    Ok((num / (fact * base.powi(tau as i32))).sqrt())
}

/// `Var Σ_{i=1}^n X_i = Σ_{|k|<n} (n − |k|) ρ_k` for unit-variance `X`.
pub fn partial_sum_variance(rho: &[f64], n: usize) -> Result<f64> {
    if rho.len() < n.max(1) {
        return Err(invalid(format!("need {n} autocovariances, got {}", rho.len())));
    }
    let mut acc = n as f64 * rho[0];
    for k in 1..n {
        acc += 2.0 * (n - k) as f64 * rho[k];
    }
    Ok(acc)
}

/// Asymptotic standard deviation of `Σ_{i≤n} Σ_q J_q/q! H_q(X_i)` restricted
/// to the rank-`τ` term, divided by `n ρ_n^{τ/2}`, when `ρ_n ~ n^{2H−2}`:
/// `|J_τ| / τ! · sqrt(2 τ! / ((1 − τ(2−2H))(2 − τ(2−2H))))`.
pub fn hermite_limit_sd(j_tau: f64, tau: u32, hurst: f64) -> Result<f64> {
    let t = tau as f64;
    let d = t * (2.0 - 2.0 * hurst);
    if tau == 0 || d >= 1.0 {
        return Err(invalid(format!("need tau ≥ 1 and tau (1 - H) < 1/2, got tau={tau}, H={hurst}")));
    }
    let fact: f64 = (1..=tau).map(f64::from).product();
    Ok(j_tau.abs() / fact * (2.0 * fact / ((1.0 - d) * (2.0 - d))).sqrt())
}
