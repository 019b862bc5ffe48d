//! Samplers for the limit laws: α-stable variables, Hermite process marginals
//! built from long-memory partial sums, and Brownian marginals with a
//! long-run variance.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian_lm::{theoretical_covariance, CirculantEngine, LongMemorySpec};
use crate::rng::{self, STREAM_AUX};
use crate::special::hermite_he_all;
use crate::stable;
use crate::stats::CompensatedSum;
use crate::sv_model::VolatilityFn;

/// α-stable law in the S1 parametrization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StableLaw {
    pub index: f64,
    pub skewness: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub location: f64,
}

fn one() -> f64 {
    1.0
}

impl StableLaw {
    pub fn new(index: f64, skewness: f64) -> Self {
        Self { index, skewness, scale: 1.0, location: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.index > 0.0 && self.index <= 2.0) {
            return Err(invalid(format!("stable index must lie in (0, 2], got {}", self.index)));
        }
        if !(-1.0..=1.0).contains(&self.skewness) {
            return Err(invalid(format!("skewness must lie in [-1, 1], got {}", self.skewness)));
        }
        if !(self.scale > 0.0) {
            return Err(invalid("scale must be positive"));
        }
        Ok(())
    }
}

/// One variate of `law`.
pub fn sample_stable<R: Rng + ?Sized>(law: &StableLaw, rng: &mut R) -> f64 {
    law.location + law.scale * stable::sample_standard(law.index, law.skewness, rng)
}

/// `count` variates from stream `STREAM_AUX` of `seed`.
pub fn stable_sample_vec(law: &StableLaw, count: usize, seed: u64) -> Result<Vec<f64>> {
    law.validate()?;
    let mut r = rng::stream(seed, STREAM_AUX);
    Ok((0..count).map(|_| sample_stable(law, &mut r)).collect())
}

/// Default internal path length for Hermite marginals.
pub const DEFAULT_N_INTERNAL: usize = 1 << 18;

/// Marginal `R_{τ,H}(t)` approximated by
/// `(n ρ_n^{τ/2})^{-1} Σ_{i ≤ [n t]} He_τ(X_i)` for an internal fractionally
/// integrated Gaussian sequence of length `n = n_internal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HermiteMarginal {
    pub tau: u32,
    pub hurst: f64,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "default_n_internal")]
    pub n_internal: usize,
}

fn default_n_internal() -> usize {
    DEFAULT_N_INTERNAL
}

impl HermiteMarginal {
    pub fn new(tau: u32, hurst: f64) -> Self {
        Self { tau, hurst, t: 1.0, n_internal: DEFAULT_N_INTERNAL }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 {
            return Err(invalid("tau must be at least 1"));
        }
        if !(self.hurst > 0.5 && self.hurst < 1.0) {
            return Err(invalid(format!("hurst must lie in (1/2, 1), got {}", self.hurst)));
        }
        if self.tau as f64 * (1.0 - self.hurst) >= 0.5 {
            return Err(invalid(format!(
                "tau (1 - H) = {} ≥ 1/2: partial sums are in the Brownian regime",
                self.tau as f64 * (1.0 - self.hurst)
            )));
        }
        if !(0.0..=1.0).contains(&self.t) {
            return Err(invalid(format!("t must lie in [0, 1], got {}", self.t)));
        }
        if self.n_internal < 2 {
            return Err(invalid("n_internal must be at least 2"));
        }
        Ok(())
    }
}

/// Reusable sampler of Hermite process values on a fixed time grid.
#[derive(Debug)]
pub struct HermiteSampler {
    tau: u32,
    n: usize,
    norm: f64,
    engine: CirculantEngine,
}

impl HermiteSampler {
    pub fn new(tau: u32, hurst: f64, n_internal: usize) -> Result<Self> {
        HermiteMarginal { tau, hurst, t: 1.0, n_internal }.validate()?;
        let spec = LongMemorySpec::arfima(hurst);
        let rho_n = theoretical_covariance(&spec, n_internal)?;
        let norm = n_internal as f64 * rho_n.powf(tau as f64 / 2.0);
        Ok(Self { tau, n: n_internal, norm, engine: CirculantEngine::new(&spec, n_internal)? })
    }

    /// `R_{τ,H}(t)` for every `t` in `ts`, all from one internal path.
    pub fn sample_at(&self, ts: &[f64], seed: u64) -> Result<Vec<f64>> {
        if let Some(t) = ts.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(invalid(format!("t must lie in [0, 1], got {t}")));
        }
        let x = self.engine.sample(seed).values;
        let mut ends: Vec<(usize, usize)> = ts.iter().enumerate().map(|(k, t)| ((t * self.n as f64).floor() as usize, k)).collect();
        ends.sort_unstable();
        let mut he = vec![0.0; self.tau as usize + 1];
        let mut acc = CompensatedSum::new();
        let mut out = vec![0.0; ts.len()];
        let mut done = 0;
        for (end, k) in ends {
            while done < end {
                hermite_he_all(x[done], &mut he);
                acc.add(he[self.tau as usize]);
                done += 1;
            }
            out[k] = acc.value() / self.norm;
        }
        Ok(out)
    }
}

pub fn sample_hermite_marginal(h: &HermiteMarginal, seed: u64) -> Result<f64> {
    h.validate()?;
    if h.t == 0.0 {
        return Ok(0.0);
    }
    Ok(HermiteSampler::new(h.tau, h.hurst, h.n_internal)?.sample_at(&[h.t], seed)?[0])
}

/// `N(0, ς² t)`.
pub fn sample_brownian_marginal<R: Rng + ?Sized>(varsigma2: f64, t: f64, rng: &mut R) -> Result<f64> {
    if !(varsigma2 >= 0.0) {
        return Err(invalid(format!("long-run variance must be nonnegative, got {varsigma2}")));
    }
    if !(t >= 0.0) {
        return Err(invalid(format!("t must be nonnegative, got {t}")));
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok((varsigma2 * t).sqrt() * z)
}

/// Default truncation lag of the long-run variance series.
pub const DEFAULT_LRV_LAGS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongRunVariance {
    pub value: f64,
    pub variance: f64,
    pub lags: usize,
    /// Share of `value` contributed by the last decade of lags.
    pub last_decade_share: f64,
    /// The last decade contributes more than 1%.
    pub truncation_flag: bool,
}

/// `ς² = var(σ^p(X_0)) + 2 Σ_{j=1}^{L} cov(σ^p(X_0), σ^p(X_j))`, each term by
/// bivariate quadrature; lags with vanishing `ρ_j` contribute zero.
pub fn long_run_variance(spec: &LongMemorySpec, vol: &VolatilityFn, p: f64, lags: usize) -> Result<LongRunVariance> {
    let mean = vol.gaussian_moment(p, 1.0)?;
    let variance = vol.gaussian_moment(2.0 * p, 1.0)? - mean * mean;
    let mut terms = Vec::with_capacity(lags);
    for j in 1..=lags {
        let rho = theoretical_covariance(spec, j)?;
        let c = if rho == 0.0 { 0.0 } else { vol.gaussian_joint_moment(p, 1.0, rho)? - mean * mean };
        terms.push(2.0 * c);
    }
    let value = variance + terms.iter().sum::<f64>();
    if value < 0.0 {
        return Err(Error::Precondition(format!(
            "truncated long-run variance is negative ({value}); raise the truncation lag"
        )));
    }
    let decade = (lags / 10).max(1).min(lags);
    let last: f64 = terms[lags - decade..].iter().sum();
    let share = if value > 0.0 { (last / value).abs() } else { 0.0 };
    Ok(LongRunVariance { value, variance, lags, last_decade_share: share, truncation_flag: share > 0.01 })
}
