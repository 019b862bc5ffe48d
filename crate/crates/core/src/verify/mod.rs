//! Monte Carlo verification of limit theorems: scaling exponents, distance
//! to the predicted limit law, Hermite scale, dichotomy scans and Poisson
//! diagnostics of extremal point patterns.

mod points;
mod scan;

pub use points::*;
pub use scan::*;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{classify_regime, hermite_coefficients_1d, partial_sum_variance, Kernel, KernelSpec, Regime, RegimeVerdict, Statistic};
use crate::error::{invalid, Error, Result};
use crate::estimators::{default_variant, gamma_p_quadrature, summand_mean, SumPower};
use crate::gaussian_lm::covariance_sequence;
use crate::reference_laws::{stable_sample_vec, HermiteSampler, StableLaw};
use crate::rng::{derive_seed, stream, STREAM_AUX};
use crate::stats::{self, LineFit, TestResult};
use crate::sv_model::{SvModel, SvSimulator};

/// Replicates below which no distributional test is run.
pub const MIN_DISTRIBUTION_REPLICATES: usize = 200;

/// Quadrature order for kernel ranks in experiment plans.
const KERNEL_RANK_ORDER: usize = 100;

/// `IQR / sd` of a standard normal.
const NORMAL_IQR: f64 = 1.348_979_500_392_163_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    Ks,
    AndersonDarling,
}

/// Limit law the largest-`n` sample is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceChoice {
    /// Whatever the regime verdict predicts.
    #[default]
    Auto,
    Stable { index: f64, skewness: f64 },
    Gaussian,
    Hermite { tau: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_exponent_tol")]
    pub exponent: f64,
    #[serde(default = "default_p_threshold")]
    pub p_value: f64,
    #[serde(default = "default_r2_min")]
    pub r2_min: f64,
    /// Relative tolerance of the Hermite scale check.
    #[serde(default = "default_scale_tol")]
    pub scale: f64,
}

fn default_exponent_tol() -> f64 {
    0.07
}
fn default_p_threshold() -> f64 {
    0.01
}
fn default_r2_min() -> f64 {
    0.95
}
fn default_scale_tol() -> f64 {
    0.15
}
fn default_true() -> bool {
    true
}
fn default_reference_samples() -> usize {
    2000
}
fn default_hermite_n_internal() -> usize {
    1 << 14
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { exponent: 0.07, p_value: 0.01, r2_min: 0.95, scale: 0.15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub model: SvModel,
    pub statistic: Statistic,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub distance: Distance,
    /// Standardize both samples by median and IQR before the distance test.
    #[serde(default = "default_true")]
    pub affine_fit: bool,
    #[serde(default)]
    pub reference: ReferenceChoice,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_reference_samples")]
    pub reference_samples: usize,
    #[serde(default = "default_hermite_n_internal")]
    pub hermite_n_internal: usize,
}

impl ExperimentPlan {
    pub fn new(model: SvModel, statistic: Statistic, n_grid: Vec<usize>, replicates: usize, master_seed: u64) -> Self {
        Self {
            model,
            statistic,
            n_grid,
            replicates,
            master_seed,
            distance: Distance::Ks,
            affine_fit: true,
            reference: ReferenceChoice::Auto,
            tolerances: Tolerances::default(),
            reference_samples: default_reference_samples(),
            hermite_n_internal: default_hermite_n_internal(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.n_grid.len() < 2 {
            return Err(invalid("n_grid needs at least two sizes"));
        }
        if self.n_grid[0] < 2 || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("n_grid must be strictly increasing and start at 2 or more"));
        }
        if self.replicates < 2 {
            return Err(invalid("need at least two replicates"));
        }
        if self.reference_samples < 2 {
            return Err(invalid("need at least two reference samples"));
        }
        let t = &self.tolerances;
        if !(t.exponent > 0.0 && t.p_value > 0.0 && t.p_value < 1.0 && t.r2_min < 1.0 && t.scale > 0.0) {
            return Err(invalid("tolerances out of range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Match,
    Mismatch,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McCell {
    pub n: usize,
    pub values: Vec<f64>,
    pub median: f64,
    pub iqr: f64,
    /// Some replicate overflowed; the cell is left out of the regression.
    pub infinite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub fit: LineFit,
    pub predicted: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub distance: Distance,
    pub reference: ReferenceChoice,
    pub n: usize,
    pub test: TestResult,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleCheck {
    pub observed_iqr: f64,
    pub expected_iqr: f64,
    pub ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Runtime {
    pub seconds: f64,
    pub workers: Option<usize>,
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub verdict: RegimeVerdict,
    pub cells: Vec<McCell>,
    pub exponent: Option<ExponentFit>,
    pub distance: Option<DistanceReport>,
    pub scale: Option<ScaleCheck>,
    pub status: VerdictStatus,
    pub verdict_match: bool,
    pub notes: Vec<String>,
    pub runtime: Runtime,
}

/// Hermite rank of the function whose long-memory part drives `statistic`;
/// `None` for short memory, the signed sum, or a rank above 4.
pub fn statistic_rank(model: &SvModel, statistic: Statistic) -> Result<Option<u32>> {
    if !model.gaussian.is_long_memory() {
        return Ok(None);
    }
    match statistic {
        Statistic::PartialSum => Ok(None),
        Statistic::PartialSumPower { p } => {
            let sd = model.state_variance()?.sqrt();
            let vol = &model.volatility;
            Ok(hermite_coefficients_1d(|x| vol.eval(sd * x).powf(p), 4, &[0.0])?.rank)
        }
        Statistic::SampleCov { p, s } => {
            let spec = KernelSpec { variant: default_variant(model, false), p, s };
            match Kernel::new(model, spec) {
                Ok(k) => Ok(k.hermite_report(3, KERNEL_RANK_ORDER)?.rank),
                Err(Error::Precondition(_)) => Ok(None),
                Err(e) => Err(e),
            }
        }
    }
}

/// Regime verdict for `model` and `statistic`; a boundary is an error.
pub fn verdict_for(model: &SvModel, statistic: Statistic) -> Result<RegimeVerdict> {
    let tau = statistic_rank(model, statistic)?;
    let hurst = if model.gaussian.is_long_memory() { model.gaussian.hurst } else { None };
    classify_regime(statistic, model.noise.alpha(), hurst, tau)
}

/// Per-replicate statistic with its centering constant fixed once.
struct Evaluator {
    statistic: Statistic,
    center: f64,
}

impl Evaluator {
    fn new(model: &SvModel, statistic: Statistic) -> Result<Self> {
        let alpha = model.noise.alpha();
        let center = match statistic {
            Statistic::PartialSum if alpha > 1.0 => summand_mean(model, SumPower::Signed)?,
            Statistic::PartialSum => 0.0,
            Statistic::PartialSumPower { p } if p < alpha => summand_mean(model, SumPower::Abs { p })?,
            Statistic::SampleCov { p, s } if p < alpha => {
                let m = summand_mean(model, SumPower::Abs { p })?;
                gamma_p_quadrature(model, p, s)? + m * m
            }
            _ => 0.0,
        };
        Ok(Self { statistic, center })
    }

    fn path_len(&self, n: usize) -> usize {
        match self.statistic {
            Statistic::SampleCov { s, .. } => n + s,
            _ => n,
        }
    }

    fn eval(&self, y: &[f64], n: usize) -> f64 {
        let mut acc = stats::CompensatedSum::new();
        match self.statistic {
            Statistic::PartialSum => y[..n].iter().for_each(|v| acc.add(v - self.center)),
            Statistic::PartialSumPower { p } => y[..n].iter().for_each(|v| acc.add(v.abs().powf(p) - self.center)),
            Statistic::SampleCov { p, s } => (0..n).for_each(|k| acc.add((y[k] * y[k + s]).abs().powf(p) - self.center)),
        }
        acc.value()
    }
}

/// Simulate `replicates` statistics at length `n`; replicate `r` uses seed
/// `derive_seed(master, [n, r])` whatever the worker count.
pub fn replicate_values(plan: &ExperimentPlan, n: usize, opts: &RunOptions) -> Result<Vec<f64>> {
    let ev = Evaluator::new(&plan.model, plan.statistic)?;
    let sim = SvSimulator::new(&plan.model, ev.path_len(n))?;
    let out = crate::par::map_indexed(plan.replicates, opts.workers, |r| {
        let path = sim.sample(derive_seed(plan.master_seed, &[n as u64, r as u64]))?;
        Ok(ev.eval(&path.y, n))
    });
    out.into_iter().collect()
}

fn resolve_reference(plan: &ExperimentPlan, verdict: &RegimeVerdict) -> Result<ReferenceChoice> {
    if plan.reference != ReferenceChoice::Auto {
        return Ok(plan.reference);
    }
    let alpha = verdict.alpha;
    Ok(match (verdict.statistic, verdict.regime) {
        (Statistic::PartialSum, _) => {
            ReferenceChoice::Stable { index: alpha, skewness: 2.0 * plan.model.noise.tail_balance()? - 1.0 }
        }
        (_, Regime::StableLevy | Regime::PositiveStableNoCentering) => {
            ReferenceChoice::Stable { index: alpha / verdict.p, skewness: 1.0 }
        }
        (_, Regime::ShortMemGaussian | Regime::HermiteLimit { tau: 1 }) => ReferenceChoice::Gaussian,
        (_, Regime::HermiteLimit { tau }) => ReferenceChoice::Hermite { tau },
    })
}

fn reference_sample(plan: &ExperimentPlan, reference: ReferenceChoice, opts: &RunOptions) -> Result<Vec<f64>> {
    let seed = derive_seed(plan.master_seed, &[u64::MAX]);
    let m = plan.reference_samples;
    match reference {
        ReferenceChoice::Auto => Err(invalid("reference not resolved")),
        ReferenceChoice::Stable { index, skewness } => stable_sample_vec(&StableLaw::new(index, skewness), m, seed),
        ReferenceChoice::Gaussian => {
            use rand::Rng;
            let mut r = stream(seed, STREAM_AUX);
            Ok((0..m).map(|_| r.sample::<f64, _>(rand_distr::StandardNormal)).collect())
        }
        ReferenceChoice::Hermite { tau } => {
            let hurst = plan.model.gaussian.hurst.ok_or_else(|| invalid("Hermite reference needs a Hurst index"))?;
            let sampler = HermiteSampler::new(tau, hurst, plan.hermite_n_internal)?;
            crate::par::map_indexed(m, opts.workers, |k| Ok(sampler.sample_at(&[1.0], derive_seed(seed, &[k as u64]))?[0]))
                .into_iter()
                .collect()
        }
    }
}

fn distance_test(kind: Distance, a: &[f64], b: &[f64]) -> TestResult {
    match kind {
        Distance::Ks => stats::ks_two_sample(a, b),
        Distance::AndersonDarling => stats::ad_two_sample(a, b),
    }
}

/// Expected IQR of the rank-`τ` Hermite part of a power sum at length `n`.
fn hermite_expected_iqr(plan: &ExperimentPlan, p: f64, tau: u32, n: usize, reference: &[f64]) -> Result<f64> {
    let model = &plan.model;
    let sd = model.state_variance()?.sqrt();
    let vol = &model.volatility;
    let rep = hermite_coefficients_1d(|x| vol.eval(sd * x).powf(p), tau, &[0.0])?;
    let j = rep.coefficient(&[tau]).ok_or_else(|| invalid("missing Hermite coefficient"))?;
    let rho = covariance_sequence(&model.gaussian, n)?;
    let r: Vec<f64> = rho.iter().map(|v| (v / rho[0]).powi(tau as i32)).collect();
    let fact: f64 = (1..=tau).map(f64::from).product();
    let sum_sd = (fact * partial_sum_variance(&r, n)?).sqrt();
    let ratio = if tau == 1 { NORMAL_IQR } else { stats::iqr(reference) / stats::variance(reference).sqrt() };
    Ok(j.abs() * model.noise.abs_moment(p)? / fact * sum_sd * ratio)
}

/// Run an experiment plan: simulate every cell, fit the scaling exponent,
/// test the largest cell against the predicted limit law and, for Hermite
/// limits of power sums, its scale.
pub fn run_plan(plan: &ExperimentPlan, opts: &RunOptions) -> Result<McSummary> {
    plan.validate()?;
    let start = Instant::now();
    let verdict = verdict_for(&plan.model, plan.statistic)?;
    let mut notes = Vec::new();

    let mut cells = Vec::with_capacity(plan.n_grid.len());
    for &n in &plan.n_grid {
        let values = replicate_values(plan, n, opts)?;
        let infinite = values.iter().any(|v| !v.is_finite());
        if infinite {
            log::warn!("non-finite statistic at n = {n}; cell excluded from the regression");
            notes.push(format!("n = {n}: non-finite values, excluded"));
        }
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let (median, iqr) = if finite.is_empty() { (f64::NAN, f64::NAN) } else { (stats::median(&finite), stats::iqr(&finite)) };
        cells.push(McCell { n, values, median, iqr, infinite });
    }

    let usable: Vec<&McCell> = cells.iter().filter(|c| !c.infinite && c.iqr > 0.0).collect();
    let exponent = if usable.len() >= 3 {
        let lx: Vec<f64> = usable.iter().map(|c| (c.n as f64).ln()).collect();
        let ly: Vec<f64> = usable.iter().map(|c| c.iqr.ln()).collect();
        let fit = stats::ols(&lx, &ly)?;
        let within = (fit.slope - verdict.rate_exponent).abs() <= plan.tolerances.exponent;
        Some(ExponentFit { fit, predicted: verdict.rate_exponent, within_tolerance: within })
    } else {
        notes.push(format!("{} usable cells; exponent not fitted", usable.len()));
        None
    };

    let last = cells.last().filter(|c| !c.infinite);
    let mut distance = None;
    let mut scale = None;
    if plan.replicates < MIN_DISTRIBUTION_REPLICATES {
        notes.push(format!("{} replicates; distance test needs {MIN_DISTRIBUTION_REPLICATES}", plan.replicates));
    } else if let Some(cell) = last {
        let reference = resolve_reference(plan, &verdict)?;
        let refs = reference_sample(plan, reference, opts)?;
        let (a, b) = if plan.affine_fit {
            (stats::robust_standardize(&cell.values), stats::robust_standardize(&refs))
        } else {
            let norm = (cell.n as f64).powf(verdict.rate_exponent);
            (cell.values.iter().map(|v| v / norm).collect(), refs.clone())
        };
        let test = distance_test(plan.distance, &a, &b);
        distance = Some(DistanceReport {
            distance: plan.distance,
            reference,
            n: cell.n,
            test,
            passed: test.p_value > plan.tolerances.p_value,
        });
        if let (Statistic::PartialSumPower { p }, Regime::HermiteLimit { tau }) = (plan.statistic, verdict.regime) {
            let expected = hermite_expected_iqr(plan, p, tau, cell.n, &refs)?;
            let ratio = cell.iqr / expected;
            scale = Some(ScaleCheck {
                observed_iqr: cell.iqr,
                expected_iqr: expected,
                ratio,
                passed: (ratio - 1.0).abs() <= plan.tolerances.scale,
            });
        }
    }

    let status = match &exponent {
        None => VerdictStatus::Inconclusive,
        Some(e) if e.fit.r2 <= plan.tolerances.r2_min => {
            notes.push(format!("exponent fit R² = {:.3}", e.fit.r2));
            VerdictStatus::Inconclusive
        }
        Some(e) => {
            let dist_ok = distance.as_ref().is_none_or(|d| d.passed);
            let scale_ok = scale.as_ref().is_none_or(|s| s.passed);
            if e.within_tolerance && dist_ok && scale_ok {
                VerdictStatus::Match
            } else {
                VerdictStatus::Mismatch
            }
        }
    };
    Ok(McSummary {
        verdict,
        cells,
        exponent,
        distance,
        scale,
        status,
        verdict_match: status == VerdictStatus::Match,
        notes,
        runtime: Runtime { seconds: start.elapsed().as_secs_f64(), workers: opts.workers, parallel: crate::par::is_parallel() },
    })
}
