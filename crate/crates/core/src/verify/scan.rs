use serde::{Deserialize, Serialize};

use super::{run_plan, statistic_rank, ExperimentPlan, RunOptions};
use crate::asymptotics::{classify_regime, Regime, Statistic};
use crate::error::{invalid, Error, Result};
use crate::tail_laws::LeverageCoupling;

/// Rows whose Hurst index lies this close to the predicted boundary are excluded.
pub const DEFAULT_BOUNDARY_MARGIN: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedCoupling {
    pub name: String,
    pub coupling: LeverageCoupling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    /// Model, statistic, sizes, replicates and seed shared by every row; its
    /// coupling and Hurst index are overridden per row.
    pub template: ExperimentPlan,
    pub hursts: Vec<f64>,
    pub couplings: Vec<NamedCoupling>,
    /// Simulate each row; otherwise only the predictions are reported.
    #[serde(default = "yes")]
    pub simulate: bool,
    #[serde(default = "default_margin")]
    pub boundary_margin: f64,
}

fn yes() -> bool {
    true
}
fn default_margin() -> f64 {
    DEFAULT_BOUNDARY_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub coupling: String,
    pub hurst: f64,
    pub tau: Option<u32>,
    pub boundary_hurst: Option<f64>,
    pub predicted_regime: Option<Regime>,
    pub predicted_exponent: Option<f64>,
    pub excluded: bool,
    pub fitted_exponent: Option<f64>,
    pub fitted_se: Option<f64>,
    pub r2: Option<f64>,
    pub fitted_regime: Option<Regime>,
    pub agrees: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanTable {
    pub statistic: Statistic,
    pub alpha: f64,
    pub p: f64,
    pub rows: Vec<ScanRow>,
}

/// Hermite versus stable exponents along a Hurst grid for each coupling.
/// Needs `p < α < 2p`, where both limits are non-Gaussian.
pub fn dichotomy_scan(spec: &ScanSpec, opts: &RunOptions) -> Result<ScanTable> {
    let statistic = spec.template.statistic;
    let model = &spec.template.model;
    let alpha = model.noise.alpha();
    let p = statistic.power();
    if matches!(statistic, Statistic::PartialSum) {
        return Err(invalid("the signed partial sum has no dichotomy"));
    }
    if !(p < alpha && alpha < 2.0 * p) {
        return Err(Error::Precondition(format!("dichotomy scan needs p < α < 2p, got p = {p}, α = {alpha}")));
    }
    if !model.gaussian.is_long_memory() {
        return Err(Error::Precondition("dichotomy scan needs a long-memory driver".into()));
    }
    if spec.hursts.is_empty() || spec.couplings.is_empty() {
        return Err(invalid("scan needs at least one Hurst index and one coupling"));
    }
    let stable_exponent = p / alpha;
    let mut rows = Vec::new();
    for c in &spec.couplings {
        for &hurst in &spec.hursts {
            let mut plan = spec.template.clone();
            plan.model.noise.coupling = c.coupling.clone();
            plan.model.gaussian.hurst = Some(hurst);
            let tau = statistic_rank(&plan.model, statistic)?;
            let boundary_hurst = tau.map(|t| 1.0 - (1.0 - stable_exponent) / t as f64);
            let predicted = match classify_regime(statistic, alpha, Some(hurst), tau) {
                Ok(v) => Some(v),
                Err(Error::Boundary { .. }) => None,
                Err(e) => return Err(e),
            };
            let excluded = predicted.is_none() || boundary_hurst.is_some_and(|b| (hurst - b).abs() < spec.boundary_margin);
            let mut row = ScanRow {
                coupling: c.name.clone(),
                hurst,
                tau,
                boundary_hurst,
                predicted_regime: predicted.as_ref().map(|v| v.regime),
                predicted_exponent: predicted.as_ref().map(|v| v.rate_exponent),
                excluded,
                fitted_exponent: None,
                fitted_se: None,
                r2: None,
                fitted_regime: None,
                agrees: None,
            };
            if spec.simulate && !excluded {
                let summary = run_plan(&plan, opts)?;
                if let Some(e) = summary.exponent {
                    let hermite = tau.map(|t| 1.0 - t as f64 * (1.0 - hurst));
                    let fitted_regime = match (tau, hermite) {
                        (Some(t), Some(h)) if (e.fit.slope - h).abs() < (e.fit.slope - stable_exponent).abs() => {
                            Regime::HermiteLimit { tau: t }
                        }
                        _ => Regime::StableLevy,
                    };
                    row.fitted_exponent = Some(e.fit.slope);
                    row.fitted_se = Some(e.fit.slope_se);
                    row.r2 = Some(e.fit.r2);
                    row.fitted_regime = Some(fitted_regime);
                    row.agrees = row.predicted_regime.map(|r| r == fitted_regime);
                }
            }
            rows.push(row);
        }
    }
    Ok(ScanTable { statistic, alpha, p, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_lm::LongMemorySpec;
    use crate::sv_model::{SvModel, VolatilityFn};
    use crate::tail_laws::{NoiseModel, TailLaw};

    fn spec(alpha: f64, hursts: Vec<f64>) -> ScanSpec {
        let model = SvModel {
            gaussian: LongMemorySpec::arfima(0.8),
            noise: NoiseModel::independent(TailLaw::pareto(alpha, 0.5, 1.0)),
            volatility: VolatilityFn::EvenPower { k: 1 },
        };
        ScanSpec {
            template: ExperimentPlan::new(model, Statistic::PartialSumPower { p: 1.0 }, vec![256, 512, 1024], 20, 1),
            hursts,
            couplings: vec![
                NamedCoupling { name: "lmsv".into(), coupling: LeverageCoupling::Independent },
                NamedCoupling { name: "lev".into(), coupling: LeverageCoupling::PolynomialMix { psi1: vec![1.0, 0.5], psi2: vec![] } },
            ],
            simulate: false,
            boundary_margin: DEFAULT_BOUNDARY_MARGIN,
        }
    }

    #[test]
    fn refuses_outside_the_dichotomy_range() {
        assert!(matches!(dichotomy_scan(&spec(2.5, vec![0.8]), &RunOptions::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn predictions_and_boundary_exclusion() {
        // x² volatility: rank 2, boundary 1 - (1 - 2/3)/2 = 5/6.
        let t = dichotomy_scan(&spec(1.5, vec![0.7, 5.0 / 6.0 + 0.01, 0.95]), &RunOptions::default()).unwrap();
        assert_eq!(t.rows.len(), 6);
        let lmsv: Vec<&ScanRow> = t.rows.iter().filter(|r| r.coupling == "lmsv").collect();
        assert!(lmsv.iter().all(|r| r.tau == Some(2)));
        assert_eq!(lmsv[0].predicted_regime, Some(Regime::StableLevy));
        assert!(lmsv[1].excluded);
        assert_eq!(lmsv[2].predicted_regime, Some(Regime::HermiteLimit { tau: 2 }));
        assert!(t.rows.iter().all(|r| r.fitted_exponent.is_none()));
    }
}
