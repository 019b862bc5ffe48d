//! Regularly varying innovations `Z` with balanced tails, and the joint law of
//! `(Z_i, η_i)` that produces leverage.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{gauss_expect_kinked, gauss_expect_smooth, tanh_sinh, NORMAL_RANGE};
use crate::stable;

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

/// Shape of the law of `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailFamily {
    /// `P(|Z| > x) = (x / x_min)^{−α}` for `x ≥ x_min`; the sign is `+` with probability `β`.
    TwoSidedPareto {
        #[serde(default = "one")]
        x_min: f64,
    },
    /// S1 α-stable law with skewness `2β − 1` and the given scale.
    StableInnovation {
        #[serde(default = "one")]
        scale: f64,
    },
}

/// Law of the innovation `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailLaw {
    pub alpha: f64,
    /// Right-tail balance: `P(Z > x) / P(|Z| > x) → β`.
    pub beta: f64,
    pub family: TailFamily,
    /// Shift the law by its mean (requires `α > 1`).
    #[serde(default)]
    pub centered: bool,
}

impl TailLaw {
    pub fn pareto(alpha: f64, beta: f64, x_min: f64) -> Self {
        Self { alpha, beta, family: TailFamily::TwoSidedPareto { x_min }, centered: false }
    }

    pub fn stable(alpha: f64, beta: f64, scale: f64) -> Self {
        Self { alpha, beta, family: TailFamily::StableInnovation { scale }, centered: false }
    }

    pub fn centered(mut self) -> Self {
        self.centered = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("tail index must be positive, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid(format!("tail balance must lie in [0, 1], got {}", self.beta)));
        }
        match self.family {
            TailFamily::TwoSidedPareto { x_min } if !(x_min > 0.0 && x_min.is_finite()) => {
                return Err(invalid(format!("x_min must be positive, got {x_min}")));
            }
            TailFamily::StableInnovation { scale } => {
                if self.alpha >= 2.0 {
                    return Err(invalid(format!("stable innovations need alpha < 2, got {}", self.alpha)));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(invalid(format!("stable scale must be positive, got {scale}")));
                }
            }
            _ => {}
        }
        if self.centered && self.alpha <= 1.0 {
            return Err(invalid("centering needs a finite mean (alpha > 1)"));
        }
        Ok(())
    }

    pub fn stable_skew(&self) -> f64 {
        2.0 * self.beta - 1.0
    }

    /// `L` in `P(|Z| > x) ~ L x^{−α}`.
    pub fn tail_constant(&self) -> f64 {
        match self.family {
            TailFamily::TwoSidedPareto { x_min } => x_min.powf(self.alpha),
            TailFamily::StableInnovation { scale } => {
                2.0 * gamma(self.alpha) * (PI * self.alpha / 2.0).sin() / PI * scale.powf(self.alpha)
            }
        }
    }

    /// Mean of the law before centering, when finite.
    fn raw_mean(&self) -> Option<f64> {
        if self.alpha <= 1.0 {
            return None;
        }
        match self.family {
            TailFamily::TwoSidedPareto { x_min } => Some(self.stable_skew() * self.alpha * x_min / (self.alpha - 1.0)),
            // S1 location is the mean when α > 1.
            TailFamily::StableInnovation { .. } => Some(0.0),
        }
    }

    /// Amount subtracted from raw draws.
    pub fn shift(&self) -> f64 {
        if self.centered { self.raw_mean().unwrap_or(0.0) } else { 0.0 }
    }

    /// `E[Z]`, or `None` when `α ≤ 1`.
    pub fn mean(&self) -> Option<f64> {
        self.raw_mean().map(|m| m - self.shift())
    }

    /// Quantile of a two-sided Pareto law at level `u ∈ (0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        let TailFamily::TwoSidedPareto { x_min } = self.family else {
            return Err(invalid("closed-form quantiles exist for the Pareto family only"));
        };
        if !(u > 0.0 && u < 1.0) {
            return Err(invalid(format!("quantile level must lie in (0, 1), got {u}")));
        }
        let q = if u < 1.0 - self.beta {
            -x_min * (u / (1.0 - self.beta)).powf(-1.0 / self.alpha)
        } else {
            x_min * ((1.0 - u) / self.beta).powf(-1.0 / self.alpha)
        };
        Ok(q - self.shift())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            TailFamily::TwoSidedPareto { x_min } => {
                // 1 − U ∈ (0, 1] avoids an infinite draw.
                let u: f64 = 1.0 - rng.random::<f64>();
                let mag = x_min * u.powf(-1.0 / self.alpha);
                let sign = if rng.random::<f64>() < self.beta { 1.0 } else { -1.0 };
                sign * mag - self.shift()
            }
            TailFamily::StableInnovation { scale } => {
                scale * stable::sample_standard(self.alpha, self.stable_skew(), rng) - self.shift()
            }
        }
    }

    /// `(P(Z > x), P(Z < −x))` for `x > 0`.
    pub fn tail_function(&self, x: f64) -> Result<(f64, f64)> {
        let s = self.shift();
        match self.family {
            TailFamily::TwoSidedPareto { x_min } => {
                let right = self.pareto_sf(x + s, x_min);
                let left = 1.0 - self.pareto_sf(s - x, x_min);
                Ok((right, left.max(0.0)))
            }
            TailFamily::StableInnovation { scale } => {
                let right = stable::sf(self.alpha, self.stable_skew(), (x + s) / scale)?;
                let left = stable::sf(self.alpha, -self.stable_skew(), (x - s) / scale)?;
                Ok((right, left))
            }
        }
    }

    /// `P(W > t)` for the uncentered Pareto variable `W`.
    fn pareto_sf(&self, t: f64, x_min: f64) -> f64 {
        if t >= x_min {
            self.beta * (t / x_min).powf(-self.alpha)
        } else if t > -x_min {
            self.beta
        } else {
            1.0 - (1.0 - self.beta) * (-t / x_min).powf(-self.alpha)
        }
    }

    /// `E|Z|^p`; an error when `p ≥ α`.
    pub fn moment(&self, p: f64) -> Result<f64> {
        self.shifted_abs_moment(p, 0.0)
    }

    /// `E|Z − c|^p` for `0 < p < α`.
    pub fn shifted_abs_moment(&self, p: f64, c: f64) -> Result<f64> {
        if p >= self.alpha {
            return Err(Error::InfiniteMoment { p, alpha: self.alpha });
        }
        if p <= 0.0 {
            return Ok(1.0);
        }
        let d = c + self.shift();
        match self.family {
            TailFamily::TwoSidedPareto { x_min } => {
                let right = one_sided_pareto_abs_moment(self.alpha, x_min, p, d)?;
                let left = one_sided_pareto_abs_moment(self.alpha, x_min, p, -d)?;
                Ok(self.beta * right + (1.0 - self.beta) * left)
            }
            TailFamily::StableInnovation { scale } => {
                if d != 0.0 {
                    return Err(invalid("shifted absolute moments of stable innovations are not supported"));
                }
                Ok(scale.powf(p) * stable::abs_moment(self.alpha, self.stable_skew(), p)?)
            }
        }
    }
}

/// `E|P − d|^p` for `P` Pareto on `[x_min, ∞)` with index `α > p`.
fn one_sided_pareto_abs_moment(alpha: f64, x_min: f64, p: f64, d: f64) -> Result<f64> {
    if d == 0.0 {
        return Ok(x_min.powf(p) * alpha / (alpha - p));
    }
    // P = x_min v^{−1/α} with v uniform on (0, 1].
    let f = |v: f64| (x_min * v.powf(-1.0 / alpha) - d).abs().powf(p);
    if d > x_min {
        let v_star = (x_min / d).powf(alpha);
        Ok(tanh_sinh(f, 0.0, v_star, 1e-11)? + tanh_sinh(f, v_star, 1.0, 1e-11)?)
    } else {
        tanh_sinh(f, 0.0, 1.0, 1e-11)
    }
}

/// Joint law of `(Z_i, η_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LeverageCoupling {
    /// `Z` independent of `η`.
    #[default]
    Independent,
    /// `Z = |η|^{−1/α} U` with `U = S·|N|`, `N` standard normal and `S = +1`
    /// with probability `u_positive_prob`. Only `α` of the tail law is used.
    InversePower {
        #[serde(default = "half")]
        u_positive_prob: f64,
    },
    /// `Z = Z'·Ψ₁(η) + Ψ₂(η)` with `Z'` drawn from the tail law and
    /// polynomial coefficients listed in increasing degree.
    PolynomialMix {
        psi1: Vec<f64>,
        #[serde(default)]
        psi2: Vec<f64>,
    },
}

pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Real roots of a polynomial inside the normal quadrature range.
pub fn poly_real_roots(coeffs: &[f64]) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    while c.last() == Some(&0.0) {
        c.pop();
    }
    match c.len() {
        0 | 1 => Vec::new(),
        2 => vec![-c[0] / c[1]],
        3 => {
            let disc = c[1] * c[1] - 4.0 * c[2] * c[0];
            if disc < 0.0 {
                Vec::new()
            } else {
                let sign = if c[1] >= 0.0 { 1.0 } else { -1.0 };
                let q = -0.5 * (c[1] + sign * disc.sqrt());
                let mut r = vec![q / c[2]];
                if q != 0.0 {
                    r.push(c[0] / q);
                }
                r
            }
        }
        _ => {
            let steps = 20_000;
            let h = 2.0 * NORMAL_RANGE / steps as f64;
            let mut roots = Vec::new();
            let mut a = -NORMAL_RANGE;
            let mut fa = poly_eval(&c, a);
            for k in 1..=steps {
                let b = -NORMAL_RANGE + k as f64 * h;
                let fb = poly_eval(&c, b);
                if fa == 0.0 {
                    roots.push(a);
                } else if fa.signum() != fb.signum() && fb != 0.0 {
                    let (mut lo, mut hi) = (a, b);
                    for _ in 0..80 {
                        let m = 0.5 * (lo + hi);
                        if poly_eval(&c, m).signum() == fa.signum() {
                            lo = m;
                        } else {
                            hi = m;
                        }
                    }
                    roots.push(0.5 * (lo + hi));
                }
                a = b;
                fa = fb;
            }
            roots
        }
    }
}

/// `E|N|^p` for a standard normal `N`, `p > −1`.
pub fn normal_abs_moment(p: f64) -> f64 {
    2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / PI.sqrt()
}

/// Draw `Z` paired with the same-index Gaussian innovation `eta`.
pub fn sample_pair<R: Rng + ?Sized>(law: &TailLaw, coupling: &LeverageCoupling, eta: f64, rng: &mut R) -> f64 {
    match coupling {
        LeverageCoupling::Independent => law.sample(rng),
        LeverageCoupling::InversePower { u_positive_prob } => {
            let n: f64 = rng.sample(StandardNormal);
            let sign = if rng.random::<f64>() < *u_positive_prob { 1.0 } else { -1.0 };
            eta.abs().max(1e-300).powf(-1.0 / law.alpha) * sign * n.abs()
        }
        LeverageCoupling::PolynomialMix { psi1, psi2 } => {
            law.sample(rng) * poly_eval(psi1, eta) + poly_eval(psi2, eta)
        }
    }
}

/// A tail law together with its coupling to the Gaussian innovations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub law: TailLaw,
    #[serde(default)]
    pub coupling: LeverageCoupling,
}

impl NoiseModel {
    pub fn new(law: TailLaw, coupling: LeverageCoupling) -> Self {
        Self { law, coupling }
    }

    pub fn independent(law: TailLaw) -> Self {
        Self { law, coupling: LeverageCoupling::Independent }
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        match &self.coupling {
            LeverageCoupling::InversePower { u_positive_prob } if !(0.0..=1.0).contains(u_positive_prob) => {
                Err(invalid(format!("u_positive_prob must lie in [0, 1], got {u_positive_prob}")))
            }
            LeverageCoupling::PolynomialMix { psi1, .. } if psi1.iter().all(|c| *c == 0.0) => {
                Err(invalid("psi1 must not vanish identically"))
            }
            _ => Ok(()),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.law.alpha
    }

    pub fn has_leverage(&self) -> bool {
        !matches!(self.coupling, LeverageCoupling::Independent)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, eta: f64, rng: &mut R) -> f64 {
        sample_pair(&self.law, &self.coupling, eta, rng)
    }

    /// Points where the conditional moments are not smooth in `η`.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.coupling {
            LeverageCoupling::Independent => Vec::new(),
            LeverageCoupling::InversePower { .. } => vec![0.0],
            LeverageCoupling::PolynomialMix { psi1, psi2 } => {
                let mut k = poly_real_roots(psi1);
                k.extend(poly_real_roots(psi2));
                k
            }
        }
    }

    /// `E[|Z|^p | η = eta]`.
    pub fn cond_abs_moment(&self, p: f64, eta: f64) -> Result<f64> {
        match &self.coupling {
            LeverageCoupling::Independent => self.law.moment(p),
            LeverageCoupling::InversePower { .. } => {
                Ok(eta.abs().max(1e-300).powf(-p / self.law.alpha) * normal_abs_moment(p))
            }
            LeverageCoupling::PolynomialMix { psi1, psi2 } => {
                let a = poly_eval(psi1, eta);
                let b = poly_eval(psi2, eta);
                if a == 0.0 {
                    Ok(b.abs().powf(p))
                } else if b == 0.0 {
                    Ok(a.abs().powf(p) * self.law.moment(p)?)
                } else {
                    Ok(a.abs().powf(p) * self.law.shifted_abs_moment(p, -b / a)?)
                }
            }
        }
    }

    /// `E[Z | η = eta]`.
    pub fn cond_mean(&self, eta: f64) -> Result<f64> {
        let m = self.law.mean().ok_or(Error::InfiniteMoment { p: 1.0, alpha: self.law.alpha })?;
        match &self.coupling {
            LeverageCoupling::Independent => Ok(m),
            LeverageCoupling::InversePower { u_positive_prob } => {
                Ok(eta.abs().max(1e-300).powf(-1.0 / self.law.alpha)
                    * (2.0 * u_positive_prob - 1.0)
                    * normal_abs_moment(1.0))
            }
            LeverageCoupling::PolynomialMix { psi1, psi2 } => Ok(m * poly_eval(psi1, eta) + poly_eval(psi2, eta)),
        }
    }

    /// Marginal `E|Z|^p`.
    pub fn abs_moment(&self, p: f64) -> Result<f64> {
        if p >= self.law.alpha {
            return Err(Error::InfiniteMoment { p, alpha: self.law.alpha });
        }
        match &self.coupling {
            LeverageCoupling::Independent => self.law.moment(p),
            LeverageCoupling::InversePower { .. } => {
                Ok(normal_abs_moment(-p / self.law.alpha) * normal_abs_moment(p))
            }
            LeverageCoupling::PolynomialMix { .. } => self.expect_over_eta(|eta| self.cond_abs_moment(p, eta)),
        }
    }

    /// Marginal `E[Z]`.
    pub fn mean(&self) -> Result<f64> {
        match &self.coupling {
            LeverageCoupling::Independent => {
                self.law.mean().ok_or(Error::InfiniteMoment { p: 1.0, alpha: self.law.alpha })
            }
            LeverageCoupling::InversePower { u_positive_prob } => {
                if self.law.alpha <= 1.0 {
                    return Err(Error::InfiniteMoment { p: 1.0, alpha: self.law.alpha });
                }
                Ok(normal_abs_moment(-1.0 / self.law.alpha) * (2.0 * u_positive_prob - 1.0) * normal_abs_moment(1.0))
            }
            LeverageCoupling::PolynomialMix { psi1, psi2 } => {
                let m = self.law.mean().ok_or(Error::InfiniteMoment { p: 1.0, alpha: self.law.alpha })?;
                let order = psi1.len().max(psi2.len()) + 2;
                Ok(gauss_expect_smooth(|x| m * poly_eval(psi1, x) + poly_eval(psi2, x), order))
            }
        }
    }

    /// `E[η |Z|^p]`, the quantity whose sign decides whether leverage lowers
    /// the Hermite rank of the covariance kernels.
    pub fn eta_abs_moment(&self, p: f64) -> Result<f64> {
        self.expect_over_eta(|eta| Ok(eta * self.cond_abs_moment(p, eta)?))
    }

    /// Limit of `P(Z > x) / P(|Z| > x)`.
    pub fn tail_balance(&self) -> Result<f64> {
        let a = self.law.alpha;
        match &self.coupling {
            LeverageCoupling::Independent => Ok(self.law.beta),
            LeverageCoupling::InversePower { u_positive_prob } => Ok(*u_positive_prob),
            LeverageCoupling::PolynomialMix { psi1, .. } => {
                let kinks = poly_real_roots(psi1);
                let pos = gauss_expect_kinked(|x| poly_eval(psi1, x).max(0.0).powf(a), &kinks, 1e-10)?;
                let neg = gauss_expect_kinked(|x| (-poly_eval(psi1, x)).max(0.0).powf(a), &kinks, 1e-10)?;
                Ok((self.law.beta * pos + (1.0 - self.law.beta) * neg) / (pos + neg))
            }
        }
    }

    fn expect_over_eta(&self, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        let err = std::cell::RefCell::new(None);
        let v = gauss_expect_kinked(
            |x| match f(x) {
                Ok(v) => v,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e.to_string());
                    0.0
                }
            },
            &self.kinks(),
            1e-10,
        )?;
        match err.into_inner() {
            Some(e) => Err(Error::Quadrature(e)),
            None => Ok(v),
        }
    }
}

/// Result of checking `P(yZ > x) / P(Z > x) ≤ C (y ∨ 1)^{α+ε}` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotterReport {
    /// Constant calibrated on the training half of the grid.
    pub c: f64,
    /// Largest `ratio / bound` over the held-out half.
    pub max_quotient: f64,
    pub violated: bool,
}

/// Check the Potter-type bound on the right tail of `law`. Grid points are
/// split alternately into a calibration half (to fit `C`) and a test half.
pub fn potter_bound_check(law: &TailLaw, eps: f64, xs: &[f64], ys: &[f64]) -> Result<PotterReport> {
    if eps <= 0.0 {
        return Err(invalid("eps must be positive"));
    }
    let mut quotients = Vec::new();
    for &x in xs {
        for &y in ys {
            if x < 1.0 || y <= 0.0 {
                return Err(invalid("grid needs x ≥ 1 and y > 0"));
            }
            let base = law.tail_function(x)?.0;
            if base <= 0.0 {
                continue;
            }
            let ratio = law.tail_function(x / y)?.0 / base;
            quotients.push(ratio / y.max(1.0).powf(law.alpha + eps));
        }
    }
    let c = quotients.iter().step_by(2).fold(1.0f64, |a, &q| a.max(q));
    let max_quotient = quotients.iter().skip(1).step_by(2).fold(0.0f64, |a, &q| a.max(q / c));
    Ok(PotterReport { c, max_quotient, violated: max_quotient > 1.0 + 1e-12 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use approx::assert_relative_eq;

    fn top_tail_slope(xs: &[f64], frac: f64) -> f64 {
        let mut a: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
        a.sort_by(|x, y| y.total_cmp(x));
        let k = (a.len() as f64 * frac) as usize;
        let lx: Vec<f64> = a[..k].iter().map(|x| x.ln()).collect();
        let ly: Vec<f64> = (1..=k).map(|r| (r as f64 / a.len() as f64).ln()).collect();
        stats::ols(&lx, &ly).unwrap().slope
    }

    #[test]
    fn pareto_quantile_example() {
        let law = TailLaw::pareto(1.5, 1.0, 1.0);
        assert_relative_eq!(law.quantile(0.5).unwrap(), 2f64.powf(1.0 / 1.5), max_relative = 1e-15);
    }

    #[test]
    fn inverse_power_with_unit_u() {
        // At η = 1 the draw is U itself.
        let law = TailLaw::pareto(1.5, 0.5, 1.0);
        let c = LeverageCoupling::InversePower { u_positive_prob: 1.0 };
        let mut rng = crate::rng::stream(1, 0);
        let z = sample_pair(&law, &c, 1.0, &mut rng);
        assert!(z > 0.0);
        // The magnitude is |N|, so its average over many draws is E|N|.
        let m = (0..20_000).map(|_| sample_pair(&law, &c, 1.0, &mut rng)).sum::<f64>() / 20_000.0;
        assert!((m - normal_abs_moment(1.0)).abs() < 0.02);
    }

    #[test]
    fn degenerate_mix_is_identity() {
        let law = TailLaw::pareto(1.5, 0.3, 1.0);
        let c = LeverageCoupling::PolynomialMix { psi1: vec![1.0], psi2: vec![] };
        let mut a = crate::rng::stream(8, 1);
        let mut b = crate::rng::stream(8, 1);
        for _ in 0..100 {
            assert_eq!(sample_pair(&law, &c, 0.7, &mut a), law.sample(&mut b));
        }
    }

    #[test]
    fn pareto_tail_function() {
        let law = TailLaw::pareto(2.0, 0.5, 1.0);
        let (r, l) = law.tail_function(2.0).unwrap();
        assert_relative_eq!(r, 0.125);
        assert_relative_eq!(l, 0.125);
        let (r, l) = law.tail_function(1.0).unwrap();
        assert_relative_eq!(r + l, 1.0);
        let one_sided = TailLaw::pareto(1.5, 1.0, 1.0);
        for x in [1.0, 3.0, 100.0] {
            assert_eq!(one_sided.tail_function(x).unwrap().1, 0.0);
        }
    }

    #[test]
    fn centered_tail_function_is_consistent_with_sampler() {
        let law = TailLaw::pareto(1.5, 0.7, 1.0).centered();
        let mut rng = crate::rng::stream(4, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| law.sample(&mut rng)).collect();
        for x in [0.5, 2.0, 10.0] {
            let (r, l) = law.tail_function(x).unwrap();
            let er = xs.iter().filter(|v| **v > x).count() as f64 / xs.len() as f64;
            let el = xs.iter().filter(|v| **v < -x).count() as f64 / xs.len() as f64;
            assert!((er - r).abs() < 4.0 * (r * (1.0 - r) / xs.len() as f64).sqrt() + 1e-4, "{x}: {er} vs {r}");
            assert!((el - l).abs() < 4.0 * (l * (1.0 - l) / xs.len() as f64).sqrt() + 1e-4, "{x}: {el} vs {l}");
        }
        assert!(stats::mean(&xs).abs() < 0.1);
    }

    #[test]
    fn pareto_moments() {
        let law = TailLaw::pareto(1.5, 0.5, 1.0);
        assert_relative_eq!(law.moment(1.0).unwrap(), 3.0, max_relative = 1e-14);
        assert!(matches!(law.moment(1.5), Err(Error::InfiniteMoment { .. })));
        assert_relative_eq!(law.moment(1e-9).unwrap(), 1.0, max_relative = 1e-8);
        assert_relative_eq!(law.moment(0.0).unwrap(), 1.0);
    }

    #[test]
    fn shifted_moment_matches_direct_quadrature() {
        // E|P − d| for Pareto α = 3, x_min = 1, d = 2, split at x = d.
        let alpha: f64 = 3.0;
        let d: f64 = 2.0;
        let lower = 2.0 * (1.0 - d.powf(-alpha)) - alpha / (alpha - 1.0) * (1.0 - d.powf(1.0 - alpha));
        let upper = alpha / (alpha - 1.0) * d.powf(1.0 - alpha) - d * d.powf(-alpha);
        let v = one_sided_pareto_abs_moment(alpha, 1.0, 1.0, d).unwrap();
        assert_relative_eq!(v, lower + upper, max_relative = 1e-10);
        let centered = TailLaw::pareto(1.5, 0.5, 1.0).centered();
        assert_relative_eq!(centered.moment(1.0).unwrap(), TailLaw::pareto(1.5, 0.5, 1.0).moment(1.0).unwrap(), max_relative = 1e-10);
    }

    #[test]
    fn potter_examples() {
        let law = TailLaw::pareto(1.5, 0.6, 1.0);
        let r = potter_bound_check(&law, 0.1, &[1.0, 2.0, 5.0], &[0.1, 0.5, 1.0]).unwrap();
        assert_eq!(r.c, 1.0);
        assert!(!r.violated);
        let (a, b) = (law.tail_function(4.0 / 2.0).unwrap().0, law.tail_function(4.0).unwrap().0);
        assert_relative_eq!(a / b, 2f64.powf(1.5), max_relative = 1e-14);
        let xs: Vec<f64> = (0..8).map(|k| 10f64.powi(k)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sqrt()).collect();
        let r = potter_bound_check(&law, 0.1, &xs, &ys).unwrap();
        assert!(r.max_quotient.is_finite() && !r.violated);
    }

    #[test]
    fn inverse_power_moments() {
        let m = NoiseModel::new(TailLaw::pareto(1.5, 0.5, 1.0), LeverageCoupling::InversePower { u_positive_prob: 0.5 });
        let direct = gauss_expect_kinked(|x| m.cond_abs_moment(0.5, x).unwrap(), &[0.0], 1e-11).unwrap();
        assert_relative_eq!(m.abs_moment(0.5).unwrap(), direct, max_relative = 1e-8);
        assert!(m.eta_abs_moment(1.0).unwrap().abs() < 1e-10);
        assert_eq!(m.mean().unwrap(), 0.0);
    }

    #[test]
    fn polynomial_mix_has_leverage_moment() {
        // Z = Z'(1 + η/2): E[η|Z|] = m'_1 E[η|1 + η/2|].
        let law = TailLaw::pareto(1.5, 0.5, 1.0);
        let m = NoiseModel::new(law.clone(), LeverageCoupling::PolynomialMix { psi1: vec![1.0, 0.5], psi2: vec![] });
        let direct = gauss_expect_kinked(|x| x * (1.0 + 0.5 * x).abs(), &[-2.0], 1e-12).unwrap();
        assert_relative_eq!(m.eta_abs_moment(1.0).unwrap(), 3.0 * direct, max_relative = 1e-9);
        assert!(m.eta_abs_moment(1.0).unwrap() > 1.0);
    }

    #[test]
    fn mixed_shift_conditional_moment() {
        let law = TailLaw::pareto(2.5, 0.4, 1.0).centered();
        let m = NoiseModel::new(law.clone(), LeverageCoupling::PolynomialMix { psi1: vec![1.0], psi2: vec![0.0, 1.0] });
        let eta = 0.8;
        let mut rng = crate::rng::stream(12, 0);
        let draws: Vec<f64> = (0..400_000).map(|_| m.sample(eta, &mut rng).abs()).collect();
        let se = (stats::variance(&draws) / draws.len() as f64).sqrt();
        assert!((stats::mean(&draws) - m.cond_abs_moment(1.0, eta).unwrap()).abs() < 4.0 * se);
    }

    #[test]
    fn tail_index_and_balance_for_every_coupling() {
        let law = TailLaw::pareto(1.5, 0.7, 1.0);
        let couplings = [
            LeverageCoupling::Independent,
            LeverageCoupling::InversePower { u_positive_prob: 0.7 },
            LeverageCoupling::PolynomialMix { psi1: vec![1.0, 0.5], psi2: vec![] },
        ];
        for (k, coupling) in couplings.into_iter().enumerate() {
            let model = NoiseModel::new(law.clone(), coupling);
            let mut rng = crate::rng::stream(100 + k as u64, 0);
            let mut erng = crate::rng::stream(100 + k as u64, 1);
            let zs: Vec<f64> = (0..1_000_000)
                .map(|_| {
                    let eta: f64 = erng.sample(StandardNormal);
                    model.sample(eta, &mut rng)
                })
                .collect();
            let slope = top_tail_slope(&zs, 0.01);
            assert!((slope + 1.5).abs() < 0.1, "coupling {k}: slope {slope}");
            let mut mags: Vec<f64> = zs.iter().map(|z| z.abs()).collect();
            mags.sort_by(f64::total_cmp);
            let thr = stats::quantile_sorted(&mags, 0.999);
            let exc: Vec<&f64> = zs.iter().filter(|z| z.abs() > thr).collect();
            let frac = exc.iter().filter(|z| ***z > 0.0).count() as f64 / exc.len() as f64;
            let beta = model.tail_balance().unwrap();
            let se = (beta * (1.0 - beta) / exc.len() as f64).sqrt();
            assert!((frac - beta).abs() < 3.0 * se, "coupling {k}: {frac} vs {beta}");
        }
    }

    #[test]
    fn stable_family_tail_and_moment() {
        let law = TailLaw::stable(1.5, 0.75, 2.0);
        let (r, l) = law.tail_function(1e4).unwrap();
        let x: f64 = 1e4;
        // Balanced tails with total constant L.
        assert_relative_eq!((r + l) * x.powf(1.5), law.tail_constant(), max_relative = 1e-3);
        assert_relative_eq!(r / (r + l), 0.75, max_relative = 1e-3);
        assert_relative_eq!(law.moment(1.0).unwrap(), 2.0 * stable::abs_moment(1.5, 0.5, 1.0).unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn tail_equivalence_of_bounded_multiplier() {
        // g(z) = 2 + 1/(1 + |z|) → 2, so Z g(Z) has right tail ~ 2^α P(Z > x).
        let law = TailLaw::pareto(1.5, 0.5, 1.0);
        let mut rng = crate::rng::stream(77, 0);
        let zs: Vec<f64> = (0..2_000_000).map(|_| law.sample(&mut rng)).collect();
        let x = stats::quantile(&zs, 0.9999);
        let gz = zs.iter().filter(|z| **z * (2.0 + 1.0 / (1.0 + z.abs())) > x).count() as f64;
        let base = zs.iter().filter(|z| **z > x).count() as f64;
        assert!((gz / base / 2f64.powf(1.5) - 1.0).abs() < 0.2);
    }

    #[test]
    fn quadratic_roots() {
        let mut r = poly_real_roots(&[-1.0, 0.0, 1.0]);
        r.sort_by(f64::total_cmp);
        assert_relative_eq!(r[0], -1.0);
        assert_relative_eq!(r[1], 1.0);
        assert!(poly_real_roots(&[1.0, 0.0, 1.0]).is_empty());
        let r = poly_real_roots(&[0.0, -1.0, 0.0, 1.0]);
        assert_eq!(r.len(), 3);
    }
}
