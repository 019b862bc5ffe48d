//! Stochastic volatility paths `Y_i = σ(X_i) Z_i`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian_lm::{theoretical_covariance, GaussianEngine, LongMemorySpec};
use crate::quadrature::gauss_expect_kinked;
use crate::rng::{self, STREAM_AUX, STREAM_NOISE};
use crate::tail_laws::NoiseModel;

/// Volatility function `σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolatilityFn {
    /// `σ(x) = e^x`.
    Exp,
    /// `σ(x) = x^{2k}`.
    EvenPower { k: u32 },
    /// `σ(x) = Σ_j a_j x^{2j}` with `a_j ≥ 0`; `coefficients[j] = a_j`.
    SymPolyPos { coefficients: Vec<f64> },
}

impl VolatilityFn {
    pub fn constant(c: f64) -> Self {
        Self::SymPolyPos { coefficients: vec![c] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Exp => Ok(()),
            Self::EvenPower { k } if *k == 0 => Err(invalid("even power needs k ≥ 1")),
            Self::EvenPower { .. } => Ok(()),
            Self::SymPolyPos { coefficients } => {
                if coefficients.is_empty() || coefficients.iter().all(|c| *c == 0.0) {
                    return Err(invalid("volatility polynomial must not vanish identically"));
                }
                if coefficients.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
                    return Err(invalid("volatility polynomial coefficients must be finite and nonnegative"));
                }
                Ok(())
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Exp => x.exp(),
            Self::EvenPower { k } => (x * x).powi(*k as i32),
            Self::SymPolyPos { coefficients } => {
                let x2 = x * x;
                coefficients.iter().rev().fold(0.0, |acc, c| acc * x2 + c)
            }
        }
    }

    pub fn is_polynomial(&self) -> bool {
        !matches!(self, Self::Exp)
    }

    /// True when `σ ≡ const`.
    pub fn is_constant(&self) -> bool {
        matches!(self, Self::SymPolyPos { coefficients } if coefficients.iter().skip(1).all(|c| *c == 0.0))
    }

    /// `σ(0) = 0` makes `σ^q` non-smooth at the origin for fractional `q`.
    fn vanishes_at_zero(&self) -> bool {
        self.eval(0.0) == 0.0
    }

    /// `E[σ^q(X)]` for `X ~ N(0, var)`.
    pub fn gaussian_moment(&self, q: f64, var: f64) -> Result<f64> {
        if let Self::Exp = self {
            return Ok((0.5 * q * q * var).exp());
        }
        let s = var.sqrt();
        let kinks: Vec<f64> = if self.vanishes_at_zero() { vec![0.0] } else { Vec::new() };
        gauss_expect_kinked(|u| self.eval(s * u).powf(q), &kinks, 1e-11)
    }

    /// `E[σ^q(X_0) σ^q(X_h)]` for a centered Gaussian pair with common variance
    /// `var` and covariance `cov`.
    pub fn gaussian_joint_moment(&self, q: f64, var: f64, cov: f64) -> Result<f64> {
        if let Self::Exp = self {
            return Ok((q * q * (var + cov)).exp());
        }
        let s = var.sqrt();
        let r = (cov / var).clamp(-1.0, 1.0);
        let resid = (1.0 - r * r).max(0.0).sqrt() * s;
        if resid == 0.0 {
            return gauss_expect_kinked(|u| (self.eval(s * u) * self.eval(r * s * u)).powf(q), &[0.0], 1e-10);
        }
        let kinked = self.vanishes_at_zero();
        let outer_kinks: Vec<f64> = if kinked { vec![0.0] } else { Vec::new() };
        let err = std::cell::RefCell::new(None);
        let v = gauss_expect_kinked(
            |u| {
                let x0 = s * u;
                let inner_kinks: Vec<f64> = if kinked { vec![-r * x0 / resid] } else { Vec::new() };
                match gauss_expect_kinked(|w| self.eval(r * x0 + resid * w).powf(q), &inner_kinks, 1e-11) {
                    Ok(v) => self.eval(x0).powf(q) * v,
                    Err(e) => {
                        err.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            },
            &outer_kinks,
            1e-10,
        )?;
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// `sup_{0 ≤ γ ≤ 1} E[σ^q(γX)]`. Every supported family is monotone in
    /// `|x|`, so the supremum sits at `γ = 1`; the grid confirms it.
    pub fn moment_condition(&self, q: f64, var: f64) -> Result<f64> {
        let mut best: f64 = 0.0;
        for k in 0..=10 {
            let g = k as f64 / 10.0;
            best = best.max(self.gaussian_moment(q, g * g * var)?);
        }
        Ok(best)
    }
}

/// `σ(x)` for a volatility function.
#[inline]
pub fn sigma_eval(vol: &VolatilityFn, x: f64) -> f64 {
    vol.eval(x)
}

/// Largest ratios found on a random grid for the two structural conditions
/// on `σ`: `σ(x+y) ≤ C(σ(x)+σ(y))` and
/// `|σ(x+y) − σ(x+z)| ≤ C(σ(x)∨1)((σ(y)∨1)+(σ(z)∨1))|y−z|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaConditions {
    pub subadditivity: f64,
    pub truncation: f64,
}

/// Probe both conditions with `points` draws at each of the scales 1, 3, 10, 30.
pub fn check_sigma_conditions(vol: &VolatilityFn, points: usize, seed: u64) -> SigmaConditions {
    let mut rng = rng::stream(seed, STREAM_AUX);
    let mut sub: f64 = 0.0;
    let mut trunc: f64 = 0.0;
    for scale in [1.0, 3.0, 10.0, 30.0] {
        for _ in 0..points {
            let mut draw = || scale * rng.sample::<f64, _>(StandardNormal);
            let (x, y, z) = (draw(), draw(), draw());
            let denom = vol.eval(x) + vol.eval(y);
            if denom > 0.0 {
                sub = sub.max(vol.eval(x + y) / denom);
            }
            let gap = (y - z).abs();
            if gap > 0.0 {
                let rhs = vol.eval(x).max(1.0) * (vol.eval(y).max(1.0) + vol.eval(z).max(1.0)) * gap;
                trunc = trunc.max((vol.eval(x + y) - vol.eval(x + z)).abs() / rhs);
            }
        }
    }
    SigmaConditions { subadditivity: sub, truncation: trunc }
}

/// Full model: Gaussian driver, innovation law with coupling, volatility function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvModel {
    pub gaussian: LongMemorySpec,
    pub noise: NoiseModel,
    pub volatility: VolatilityFn,
}

impl SvModel {
    pub fn validate(&self) -> Result<()> {
        self.gaussian.validate()?;
        self.noise.validate()?;
        self.volatility.validate()
    }

    /// `Var X_0` of the driver as simulated.
    pub fn state_variance(&self) -> Result<f64> {
        theoretical_covariance(&self.gaussian, 0)
    }
}

/// One simulated trajectory, index `k` holding time `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvPath {
    pub x: Vec<f64>,
    pub sigma: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    /// `η_1..η_n`, the partners of `z`.
    pub eta: Vec<f64>,
    pub model: SvModel,
    pub seed: u64,
}

impl SvPath {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Same states with the noise sequence permuted; for exchangeability checks.
    pub fn with_permuted_noise(&self, seed: u64) -> SvPath {
        let mut out = self.clone();
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut rng::stream(seed, STREAM_AUX));
        out.z = idx.iter().map(|&k| self.z[k]).collect();
        out.eta = idx.iter().map(|&k| self.eta[k]).collect();
        out.y = out.sigma.iter().zip(&out.z).map(|(s, z)| s * z).collect();
        out
    }
}

/// Reusable simulator for a fixed model and length.
#[derive(Debug, Clone)]
pub struct SvSimulator {
    model: SvModel,
    engine: GaussianEngine,
}

impl SvSimulator {
    pub fn new(model: &SvModel, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("path length must be at least 1"));
        }
        model.validate()?;
        crate::budget::check(6 * 8 * n as u64, crate::budget::memory_budget())?;
        Ok(Self { model: model.clone(), engine: GaussianEngine::new(&model.gaussian, n)? })
    }

    pub fn n(&self) -> usize {
        self.engine.n()
    }

    pub fn model(&self) -> &SvModel {
        &self.model
    }

    pub fn sample(&self, seed: u64) -> Result<SvPath> {
        let g = self.engine.sample(seed);
        let eta = g.aligned_innovations().ok_or(Error::MissingInnovations)?.to_vec();
        let mut zr = rng::stream(seed, STREAM_NOISE);
        let z: Vec<f64> = eta.iter().map(|&e| self.model.noise.sample(e, &mut zr)).collect();
        let sigma: Vec<f64> = g.values.iter().map(|&x| self.model.volatility.eval(x)).collect();
        let y = sigma.iter().zip(&z).map(|(s, z)| s * z).collect();
        Ok(SvPath { x: g.values, sigma, z, y, eta, model: self.model.clone(), seed })
    }
}

/// Simulate `Y_1..Y_n`; `Z_i` is paired with `η_i`, which enters `X_{i+1}, X_{i+2}, …`.
pub fn simulate_sv(model: &SvModel, n: usize, seed: u64) -> Result<SvPath> {
    SvSimulator::new(model, n)?.sample(seed)
}
