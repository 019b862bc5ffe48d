//! Stable versus Hermite dichotomy for partial sums and sample covariances.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Exponents closer than this are treated as equal.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Statistic {
    /// `S_n = Σ Y_i` with centered noise.
    PartialSum,
    /// `S_{p,n} = Σ |Y_i|^p`.
    PartialSumPower { p: f64 },
    /// Sample covariance of `|Y|^p` at lag `s`.
    SampleCov { p: f64, s: usize },
}

impl Statistic {
    pub fn power(&self) -> f64 {
        match *self {
            Statistic::PartialSum => 1.0,
            Statistic::PartialSumPower { p } | Statistic::SampleCov { p, .. } => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    StableLevy,
    HermiteLimit { tau: u32 },
    ShortMemGaussian,
    PositiveStableNoCentering,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeVerdict {
    pub statistic: Statistic,
    pub regime: Regime,
    /// Growth exponent of the normalization: `n^{rate_exponent}`.
    pub rate_exponent: f64,
    pub p: f64,
    pub alpha: f64,
    pub hurst: Option<f64>,
    pub tau: Option<u32>,
}

/// Classify the limit of `statistic` for tail index `alpha`, Hurst index
/// `hurst` (`None` for short memory) and Hermite rank `tau` of the relevant
/// function (`None` when it vanishes identically).
pub fn classify_regime(statistic: Statistic, alpha: f64, hurst: Option<f64>, tau: Option<u32>) -> Result<RegimeVerdict> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    if let Some(h) = hurst {
        if !(h > 0.5 && h < 1.0) {
            return Err(invalid(format!("hurst must lie in (1/2, 1), got {h}")));
        }
    }
    if tau == Some(0) {
        return Err(invalid("Hermite rank is at least 1"));
    }
    let p = statistic.power();
    if !(p > 0.0) {
        return Err(invalid(format!("power must be positive, got {p}")));
    }
    let verdict = |regime, rate_exponent| RegimeVerdict { statistic, regime, rate_exponent, p, alpha, hurst, tau };

    if let Statistic::PartialSum = statistic {
        if alpha >= 2.0 {
            return Err(invalid("the signed partial sum needs alpha < 2"));
        }
        return Ok(verdict(Regime::StableLevy, 1.0 / alpha));
    }
    if (p - alpha).abs() < BOUNDARY_TOL {
        return Err(Error::Boundary { hermite_exponent: p / alpha, stable_exponent: 1.0 });
    }
    if p > alpha {
        return Ok(verdict(Regime::PositiveStableNoCentering, p / alpha));
    }
    // Exponent of the martingale (i.i.d.-like) part.
    let (iid_regime, iid_exponent) = if alpha < 2.0 * p {
        (Regime::StableLevy, p / alpha)
    } else {
        (Regime::ShortMemGaussian, 0.5)
    };
    if (alpha - 2.0 * p).abs() < BOUNDARY_TOL {
        return Err(Error::Boundary { hermite_exponent: p / alpha, stable_exponent: 0.5 });
    }
    let hermite = match (hurst, tau) {
        (Some(h), Some(t)) => Some((t, 1.0 - t as f64 * (1.0 - h))),
        _ => None,
    };
    match hermite {
        Some((_, e)) if (e - iid_exponent).abs() < BOUNDARY_TOL => {
            Err(Error::Boundary { hermite_exponent: e, stable_exponent: iid_exponent })
        }
        Some((t, e)) if e > iid_exponent => Ok(verdict(Regime::HermiteLimit { tau: t }, e)),
        _ => Ok(verdict(iid_regime, iid_exponent)),
    }
}

/// One cell of a regime map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeCell {
    pub alpha: f64,
    pub hurst: f64,
    /// `None` on a boundary.
    pub regime: Option<Regime>,
    pub rate_exponent: Option<f64>,
}

pub fn regime_map(statistic: Statistic, tau: Option<u32>, alphas: &[f64], hursts: &[f64]) -> Result<Vec<RegimeCell>> {
    let mut out = Vec::with_capacity(alphas.len() * hursts.len());
    for &alpha in alphas {
        for &hurst in hursts {
            let cell = match classify_regime(statistic, alpha, Some(hurst), tau) {
                Ok(v) => RegimeCell { alpha, hurst, regime: Some(v.regime), rate_exponent: Some(v.rate_exponent) },
                Err(Error::Boundary { .. }) => RegimeCell { alpha, hurst, regime: None, rate_exponent: None },
                Err(e) => return Err(e),
            };
            out.push(cell);
        }
    }
    Ok(out)
}
