//! α-stable laws in the S1 parametrization: Chambers–Mallows–Stuck sampling,
//! tail probabilities by Nolan's integral representation, and absolute moments.
//!
//! "Standard" means unit scale and zero location. In S1 the characteristic
//! function is `exp(−|t|^α (1 − iβ sign(t) tan(πα/2)))` for `α ≠ 1`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Result};
use crate::quadrature::tanh_sinh;

fn check(alpha: f64, skew: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(invalid(format!("stable index must lie in (0, 2], got {alpha}")));
    }
    if !(-1.0..=1.0).contains(&skew) {
        return Err(invalid(format!("stable skewness must lie in [-1, 1], got {skew}")));
    }
    Ok(())
}

/// Chambers–Mallows–Stuck transform of `v ~ U(−π/2, π/2)` and `w ~ Exp(1)`.
pub fn cms(alpha: f64, skew: f64, v: f64, w: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-12 {
        let a = FRAC_PI_2 + skew * v;
        return (a * v.tan() - skew * (FRAC_PI_2 * w * v.cos() / a).ln()) / FRAC_PI_2;
    }
    let t = skew * (PI * alpha / 2.0).tan();
    let b = t.atan() / alpha;
    let s = (1.0 + t * t).powf(1.0 / (2.0 * alpha));
    let av = alpha * (v + b);
    s * av.sin() / v.cos().powf(1.0 / alpha) * ((v - av).cos() / w).powf((1.0 - alpha) / alpha)
}

/// One standard S1 stable variate.
pub fn sample_standard<R: Rng + ?Sized>(alpha: f64, skew: f64, rng: &mut R) -> f64 {
    let v = (rng.random::<f64>() - 0.5) * PI;
    let w: f64 = Exp1.sample(rng);
    cms(alpha, skew, v, w.max(f64::MIN_POSITIVE))
}

/// `P(X > x)` for a standard S1 stable variable.
pub fn sf(alpha: f64, skew: f64, x: f64) -> Result<f64> {
    check(alpha, skew)?;
    if alpha == 2.0 {
        // N(0, 2)
        return Ok(0.5 * statrs::function::erf::erfc(x / 2.0));
    }
    if (alpha - 1.0).abs() < 1e-12 {
        return sf_unit_index(skew, x);
    }
    if x < 0.0 {
        return Ok(1.0 - sf(alpha, -skew, -x)?);
    }
    let t = skew * (PI * alpha / 2.0).tan();
    let theta0 = t.atan() / alpha;
    if x == 0.0 {
        return Ok(0.5 + theta0 / PI);
    }
    let expo = alpha / (alpha - 1.0);
    let c0 = (alpha * theta0).cos().powf(1.0 / (alpha - 1.0));
    let log_xe = expo * x.ln();
    let log_g = |th: f64| -> f64 {
        let a = (th.cos() / (alpha * (theta0 + th)).sin()).ln() * expo;
        let b = ((alpha * theta0 + (alpha - 1.0) * th).cos() / th.cos()).ln();
        log_xe + c0.ln() + a + b
    };
    let v = if alpha > 1.0 {
        integrate_split(&log_g, -theta0, FRAC_PI_2, &|g| (-g).exp())?
    } else {
        integrate_split(&log_g, -theta0, FRAC_PI_2, &|g| -(-g).exp_m1())?
    };
    Ok(v.clamp(0.0, 1.0))
}

/// Point where `log g` crosses zero, if the sign changes over the interval.
fn peak(log_g: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Option<f64> {
    let span = hi - lo;
    let (mut a, mut b) = (lo + 1e-12 * span, hi - 1e-12 * span);
    let (fa, fb) = (log_g(a), log_g(b));
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        let fm = log_g(m);
        if fm.is_nan() {
            return None;
        }
        if fm.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

fn sf_unit_index(skew: f64, x: f64) -> Result<f64> {
    if skew == 0.0 {
        return Ok(0.5 - x.atan() / PI);
    }
    if skew < 0.0 {
        return Ok(1.0 - sf_unit_index(-skew, -x)?);
    }
    let log_scale = -PI * x / (2.0 * skew);
    let log_g = |th: f64| -> f64 {
        let a = FRAC_PI_2 + skew * th;
        log_scale + (2.0 / PI * a / th.cos()).ln() + a * th.tan() / skew
    };
    let v = integrate_split(&log_g, -FRAC_PI_2, FRAC_PI_2, &|g| -(-g).exp_m1())?;
    Ok(v.clamp(0.0, 1.0))
}

/// `(1/π) ∫ h(g(θ)) dθ` with the interval split where `g = 1`, which is where
/// the integrand of Nolan's representation concentrates.
fn integrate_split(log_g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, h: &dyn Fn(f64) -> f64) -> Result<f64> {
    let f = |th: f64| {
        let lg = log_g(th);
        h(if lg.is_nan() { f64::INFINITY } else { lg.exp() })
    };
    let total = match peak(log_g, lo, hi) {
        Some(s) => tanh_sinh(f, lo, s, 1e-11)? + tanh_sinh(f, s, hi, 1e-11)?,
        None => tanh_sinh(f, lo, hi, 1e-11)?,
    };
    Ok(total / PI)
}

/// `P(X ≤ x)` for a standard S1 stable variable.
pub fn cdf(alpha: f64, skew: f64, x: f64) -> Result<f64> {
    Ok(1.0 - sf(alpha, skew, x)?)
}

/// `E|X|^p` for a standard S1 stable variable with `α ≠ 1`, `0 < p < α`.
pub fn abs_moment(alpha: f64, skew: f64, p: f64) -> Result<f64> {
    check(alpha, skew)?;
    if p <= 0.0 || p >= alpha {
        return Err(invalid(format!("stable absolute moment needs 0 < p < alpha, got p = {p}")));
    }
    if (alpha - 1.0).abs() < 1e-12 {
        if skew != 0.0 {
            return Err(invalid("absolute moments of skewed unit-index stable laws are not supported"));
        }
        // Cauchy: E|X|^p = 1 / cos(pπ/2)
        return Ok(1.0 / (p * FRAC_PI_2).cos());
    }
    if alpha == 2.0 {
        // N(0, 2)
        return Ok(2f64.powf(p) * gamma((p + 1.0) / 2.0) / PI.sqrt());
    }
    let t = skew * (PI * alpha / 2.0).tan();
    let denom = if (p - 1.0).abs() < 1e-12 { FRAC_PI_2 } else { gamma(1.0 - p) * (p * FRAC_PI_2).cos() };
    Ok(gamma(1.0 - p / alpha) / denom * (1.0 + t * t).powf(p / (2.0 * alpha)) * ((p / alpha) * t.atan()).cos())
}
