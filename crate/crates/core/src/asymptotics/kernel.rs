//! Conditional-expectation kernels of the sample covariances.
//!
//! With `X̂_{0,s} = ς_s^{-1} Σ_{j>s} c_j η_{s−j}` the lag-`s` state splits as
//! `X_s = ϰ_s ζ + c_s η_0 + ς_s X̂_{0,s}`, and every kernel has the form
//! `K(x, y) = A σ^p(x) I(y) − A E[σ^p(X_0) σ^p(X_s) W]` where
//! `I(y) = E[σ^p(ϰ_s ζ + c_s η_0 + ς_s y) W]` and the weight `W` is
//! `Z_0` (plain kernel), `1` (LMSV kernel) or `|Z_0|^p` (leverage kernel).

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use super::hermite::{hermite_coefficients_2d, HermiteRankReport};
use crate::error::{invalid, Error, Result};
use crate::gaussian_lm::{make_coefficients, theoretical_covariance, LongMemorySpec};
use crate::quadrature::{gauss_expect_kinked, gauss_expect_smooth, gauss_hermite};
use crate::sv_model::{SvModel, VolatilityFn};
use crate::tail_laws::{LeverageCoupling, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    /// Kernel of `C_n(s)`, weight `Z_0`, `p = 1`.
    General,
    /// Kernel of the power covariances without leverage.
    Star,
    /// Kernel of the power covariances with leverage.
    Dagger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub variant: KernelVariant,
    pub p: f64,
    pub s: usize,
}

/// Lag-`s` decomposition constants of the Gaussian driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LagConstants {
    pub s: usize,
    pub c_s: f64,
    /// `ς_s = (Σ_{j>s} c_j²)^{1/2}`.
    pub varsigma: f64,
    /// `ϰ_s = (Σ_{j<s} c_j²)^{1/2}`.
    pub varkappa: f64,
    pub rho_s: f64,
    /// `corr(X_0, X̂_{0,s}) = ρ_s / ς_s`.
    pub r_s: f64,
}

impl LagConstants {
    pub fn new(spec: &LongMemorySpec, s: usize) -> Result<Self> {
        if s == 0 {
            return Err(invalid("lag must be at least 1"));
        }
        let c = make_coefficients(spec)?;
        let coef = |j: usize| c.get(j - 1).copied().unwrap_or(0.0);
        let k2: f64 = (1..s).map(|j| coef(j).powi(2)).sum();
        let c_s = coef(s);
        let v2 = (1.0 - k2 - c_s * c_s).max(0.0);
        let rho_s = theoretical_covariance(spec, s)?;
        let varsigma = v2.sqrt();
        if varsigma == 0.0 {
            return Err(Error::Precondition(format!("coefficients vanish beyond lag {s}; X̂ is undefined")));
        }
        Ok(Self { s, c_s, varsigma, varkappa: k2.sqrt(), rho_s, r_s: (rho_s / varsigma).clamp(-1.0, 1.0) })
    }
}

/// `E[σ^p(sd·N + u)]`.
fn smoothed_power(vol: &VolatilityFn, p: f64, sd: f64, u: f64) -> Result<f64> {
    if sd == 0.0 {
        return Ok(vol.eval(u).powf(p));
    }
    match vol {
        VolatilityFn::Exp => Ok((p * u + 0.5 * p * p * sd * sd).exp()),
        _ if p.fract() == 0.0 => {
            let order = (poly_degree(vol) as f64 * p) as usize / 2 + 2;
            Ok(gauss_expect_smooth(|z| vol.eval(sd * z + u).powf(p), order))
        }
        _ => {
            let kinks: Vec<f64> = if vol.eval(0.0) == 0.0 { vec![-u / sd] } else { Vec::new() };
            gauss_expect_kinked(|z| vol.eval(sd * z + u).powf(p), &kinks, 1e-12)
        }
    }
}

fn poly_degree(vol: &VolatilityFn) -> usize {
    match vol {
        VolatilityFn::Exp => usize::MAX,
        VolatilityFn::EvenPower { k } => 2 * *k as usize,
        VolatilityFn::SymPolyPos { coefficients } => 2 * coefficients.len().saturating_sub(1),
    }
}

/// Conditional weight `E[W | η]` of a kernel variant.
enum Weight {
    Constant(f64),
    Conditional { noise: NoiseModel, mean: bool, p: f64 },
}

impl Weight {
    fn eval(&self, eta: f64) -> Result<f64> {
        match self {
            Weight::Constant(c) => Ok(*c),
            Weight::Conditional { noise, mean: true, .. } => noise.cond_mean(eta),
            Weight::Conditional { noise, mean: false, p } => noise.cond_abs_moment(*p, eta),
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match self {
            Weight::Constant(_) => Vec::new(),
            Weight::Conditional { noise, .. } => noise.kinks(),
        }
    }
}

/// Collects the first error raised inside an infallible quadrature callback.
struct ErrSlot(std::cell::RefCell<Option<Error>>);

impl ErrSlot {
    fn new() -> Self {
        Self(std::cell::RefCell::new(None))
    }

    fn take<T>(&self, r: Result<T>, fallback: T) -> T {
        r.unwrap_or_else(|e| {
            self.0.borrow_mut().get_or_insert(e);
            fallback
        })
    }

    fn into_result<T>(self, v: T) -> Result<T> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
}

/// An evaluable kernel for a fixed model, variant, power and lag.
pub struct Kernel {
    spec: KernelSpec,
    vol: VolatilityFn,
    lag: LagConstants,
    amplitude: f64,
    weight: Weight,
    centering: f64,
    /// Last `(y, I(y))`; tensor quadrature visits each `y` many times in a row.
    cache: Cell<(f64, f64)>,
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel")
            .field("spec", &self.spec)
            .field("lag", &self.lag)
            .field("amplitude", &self.amplitude)
            .field("centering", &self.centering)
            .finish()
    }
}

impl Kernel {
    pub fn new(model: &SvModel, spec: KernelSpec) -> Result<Self> {
        model.validate()?;
        let p = spec.p;
        if !(p > 0.0) {
            return Err(invalid(format!("kernel power must be positive, got {p}")));
        }
        let noise = &model.noise;
        let (amplitude, weight) = match spec.variant {
            KernelVariant::General => {
                if p != 1.0 {
                    return Err(invalid("the plain covariance kernel has p = 1"));
                }
                let m = noise.mean()?;
                let w = match noise.coupling {
                    LeverageCoupling::Independent => Weight::Constant(m),
                    _ => Weight::Conditional { noise: noise.clone(), mean: true, p: 1.0 },
                };
                (m, w)
            }
            KernelVariant::Star => {
                let mp = noise.abs_moment(p)?;
                (mp * mp, Weight::Constant(1.0))
            }
            KernelVariant::Dagger => {
                let mp = noise.abs_moment(p)?;
                let w = match noise.coupling {
                    LeverageCoupling::Independent => Weight::Constant(mp),
                    _ => Weight::Conditional { noise: noise.clone(), mean: false, p },
                };
                (mp, w)
            }
        };
        let lag = LagConstants::new(&model.gaussian, spec.s)?;
        let mut k = Self {
            spec,
            vol: model.volatility.clone(),
            lag,
            amplitude,
            weight,
            centering: 0.0,
            cache: Cell::new((f64::NAN, f64::NAN)),
        };
        k.centering = k.direct_centering()?;
        Ok(k)
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn lag_constants(&self) -> LagConstants {
        self.lag
    }

    /// `A E[σ^p(X_0) σ^p(X_s) W]`, computed without the kernel's projection.
    pub fn centering(&self) -> f64 {
        self.centering
    }

    /// `I(y)` without the amplitude.
    pub fn inner(&self, y: f64) -> Result<f64> {
        let LagConstants { c_s, varsigma, varkappa, .. } = self.lag;
        let p = self.spec.p;
        match &self.weight {
            Weight::Constant(w) => {
                let sd = (varkappa * varkappa + c_s * c_s).sqrt();
                Ok(w * smoothed_power(&self.vol, p, sd, varsigma * y)?)
            }
            weight => {
                let mut kinks = weight.kinks();
                if varkappa == 0.0 && c_s != 0.0 && self.vol.eval(0.0) == 0.0 {
                    kinks.push(-varsigma * y / c_s);
                }
                let slot = ErrSlot::new();
                let v = gauss_expect_kinked(
                    |eta| {
                        let w = slot.take(weight.eval(eta), 0.0);
                        let g = slot.take(smoothed_power(&self.vol, p, varkappa, c_s * eta + varsigma * y), 0.0);
                        w * g
                    },
                    &kinks,
                    1e-11,
                )?;
                slot.into_result(v)
            }
        }
    }

    fn cached_inner(&self, y: f64) -> Result<f64> {
        let (cy, cv) = self.cache.get();
        if cy == y {
            return Ok(cv);
        }
        let v = self.inner(y)?;
        self.cache.set((y, v));
        Ok(v)
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.amplitude * self.vol.eval(x).powf(self.spec.p) * self.cached_inner(y)? - self.centering)
    }

    fn direct_centering(&self) -> Result<f64> {
        let LagConstants { c_s, rho_s, .. } = self.lag;
        let p = self.spec.p;
        if let Weight::Constant(w) = self.weight {
            return Ok(self.amplitude * w * self.vol.gaussian_joint_moment(p, 1.0, rho_s)?);
        }
        // Condition on η_0: X_s = c_s η_0 + V with (X_0, V) Gaussian,
        // Var V = 1 − c_s², cov(X_0, V) = ρ_s.
        let var_v = 1.0 - c_s * c_s;
        let joint: Box<dyn Fn(f64) -> Result<f64>> = match self.vol {
            VolatilityFn::Exp => {
                let base = 0.5 * p * p * (1.0 + var_v + 2.0 * rho_s);
                Box::new(move |eta| Ok((base + p * c_s * eta).exp()))
            }
            _ => {
                let order = if p.fract() == 0.0 { (poly_degree(&self.vol) as f64 * p) as usize + 2 } else { 200 };
                let rule = gauss_hermite(order);
                let resid = (var_v - rho_s * rho_s).max(0.0).sqrt();
                let vol = self.vol.clone();
                Box::new(move |eta| {
                    let mut acc = 0.0;
                    for (u, wu) in rule.nodes.iter().zip(&rule.weights) {
                        let a = vol.eval(*u).powf(p);
                        for (v, wv) in rule.nodes.iter().zip(&rule.weights) {
                            acc += wu * wv * a * vol.eval(c_s * eta + rho_s * u + resid * v).powf(p);
                        }
                    }
                    Ok(acc)
                })
            }
        };
        let slot = ErrSlot::new();
        let v = gauss_expect_kinked(
            |eta| slot.take(self.weight.eval(eta), 0.0) * slot.take(joint(eta), 0.0),
            &self.weight.kinks(),
            1e-10,
        )?;
        slot.into_result(self.amplitude * v)
    }

    /// Hermite coefficients with respect to `(X_0, X̂_{0,s})`.
    pub fn hermite_report(&self, q_max: u32, order: usize) -> Result<HermiteRankReport> {
        let slot = ErrSlot::new();
        let rep = hermite_coefficients_2d(|x, y| slot.take(self.eval(x, y), f64::NAN), self.lag.r_s, q_max, order)?;
        slot.into_result(rep)
    }
}

/// `K(x, y)` for a single point. Building a [`Kernel`] once is cheaper for
/// repeated evaluation.
pub fn kernel_eval(model: &SvModel, spec: KernelSpec, x: f64, y: f64) -> Result<f64> {
    Kernel::new(model, spec)?.eval(x, y)
}
