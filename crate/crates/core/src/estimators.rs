//! Statistics computed from a simulated path: partial sums, sample
//! covariances of powers, the martingale / long-memory split of the sample
//! covariances, exceedance point patterns and empirical tail ratios.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{Kernel, KernelSpec, KernelVariant};
use crate::error::{invalid, Error, Result};
use crate::gaussian_lm::make_coefficients;
use crate::stats::{self, CompensatedSum};
use crate::sv_model::{SvModel, SvPath};

/// Summand of a partial sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SumPower {
    /// `Y_i`.
    Signed,
    /// `|Y_i|^p`.
    Abs { p: f64 },
}

impl SumPower {
    #[inline]
    pub fn apply(&self, y: f64) -> f64 {
        match *self {
            SumPower::Signed => y,
            SumPower::Abs { p } => y.abs().powf(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    #[default]
    None,
    /// Subtract `[nt] E[summand]`.
    MeanCentered,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialSumProcess {
    pub power: SumPower,
    pub n: usize,
    pub grid: Vec<f64>,
    /// Sum over `i ≤ [n t]` for each grid point.
    pub values: Vec<f64>,
    pub centering: Centering,
    /// The subtracted mean per summand (0 without centering).
    pub mean: f64,
}

/// `E[Y_0]` or `E|Y_0|^p`. `σ(X_0)` is independent of `Z_0` even under
/// leverage, since `X_0` only involves `η_j`, `j < 0`.
pub fn summand_mean(model: &SvModel, power: SumPower) -> Result<f64> {
    let var = model.state_variance()?;
    match power {
        SumPower::Signed => Ok(model.volatility.gaussian_moment(1.0, var)? * model.noise.mean()?),
        SumPower::Abs { p } => Ok(model.volatility.gaussian_moment(p, var)? * model.noise.abs_moment(p)?),
    }
}

/// Prefix sums of `power(Y_i)` at `[n t]` for `t` in `grid`, with
/// compensated accumulation.
pub fn partial_sums(path: &SvPath, power: SumPower, grid: &[f64], centering: Centering) -> Result<PartialSumProcess> {
    if let SumPower::Abs { p } = power {
        if !(p > 0.0) {
            return Err(invalid(format!("power must be positive, got {p}")));
        }
    }
    if let Some(t) = grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(invalid(format!("grid point {t} outside [0, 1]")));
    }
    let mean = match centering {
        Centering::None => 0.0,
        Centering::MeanCentered => {
            let alpha = path.model.noise.alpha();
            let p = match power {
                SumPower::Signed => 1.0,
                SumPower::Abs { p } => p,
            };
            if p >= alpha {
                return Err(Error::InfiniteMoment { p, alpha });
            }
            summand_mean(&path.model, power)?
        }
    };
    let n = path.len();
    let mut order: Vec<(usize, usize)> = grid.iter().enumerate().map(|(g, t)| ((t * n as f64).floor() as usize, g)).collect();
    order.sort_unstable();
    let mut values = vec![0.0; grid.len()];
    let mut acc = CompensatedSum::new();
    let mut done = 0;
    for (k, g) in order {
        while done < k {
            acc.add(power.apply(path.y[done]) - mean);
            done += 1;
        }
        values[g] = acc.value();
    }
    Ok(PartialSumProcess { power, n, grid: grid.to_vec(), values, centering, mean })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovOracle {
    /// Bivariate Gaussian quadrature of the moments of `σ`.
    Quadrature,
    MonteCarlo { pairs: u64, se: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleCovReport {
    pub p: f64,
    pub n: usize,
    /// Lags `1..=h`.
    pub lags: Vec<usize>,
    pub gamma_hat: Vec<f64>,
    pub gamma_true: Vec<f64>,
    pub oracle: CovOracle,
    pub mean_bar: f64,
}

/// `γ̂_{p,n}(s) = n^{-1} Σ_{i=1}^n (|Y_i|^p − Ȳ)(|Y_{i+s}|^p − Ȳ)`, every lag
/// summed over the same range `1..=n`.
pub fn sample_cov_values(values: &[f64], n: usize, h: usize) -> Result<(Vec<f64>, f64)> {
    if n == 0 || values.len() < n + h {
        return Err(invalid(format!("need n + h = {} values, got {}", n + h, values.len())));
    }
    let mean = stats::compensated_sum(&values[..n]) / n as f64;
    let gam = (1..=h)
        .map(|s| {
            let mut acc = CompensatedSum::new();
            for i in 0..n {
                acc.add((values[i] - mean) * (values[i + s] - mean));
            }
            acc.value() / n as f64
        })
        .collect();
    Ok((gam, mean))
}

/// `γ_p(s) = E|Y_0 Y_s|^p − (E|Y_0|^p)²` by quadrature.
pub fn gamma_p_quadrature(model: &SvModel, p: f64, s: usize) -> Result<f64> {
    let first = summand_mean(model, SumPower::Abs { p })?;
    let joint = if model.noise.has_leverage() {
        Kernel::new(model, KernelSpec { variant: KernelVariant::Dagger, p, s })?.centering()
    } else {
        let var = model.state_variance()?;
        let rho = crate::gaussian_lm::theoretical_covariance(&model.gaussian, s)?;
        model.noise.abs_moment(p)?.powi(2) * model.volatility.gaussian_joint_moment(p, var, rho * var)?
    };
    Ok(joint - first * first)
}

/// Sample covariances of `|Y|^p` at lags `1..=h` over the first `len − h` indices.
pub fn sample_cov(path: &SvPath, p: f64, h: usize) -> Result<SampleCovReport> {
    let alpha = path.model.noise.alpha();
    if p >= alpha {
        return Err(Error::InfiniteMoment { p, alpha });
    }
    if p <= alpha / 2.0 {
        log::warn!("p = {p} ≤ α/2: |Y|^p has finite variance, outside the heavy-tailed covariance regime");
    }
    if h == 0 {
        return Err(invalid("need at least one lag"));
    }
    let n = path.len().checked_sub(h).filter(|n| *n > 0).ok_or_else(|| invalid("path shorter than the lag range"))?;
    let vals: Vec<f64> = path.y.iter().map(|y| y.abs().powf(p)).collect();
    let (gamma_hat, mean_bar) = sample_cov_values(&vals, n, h)?;
    let gamma_true = (1..=h).map(|s| gamma_p_quadrature(&path.model, p, s)).collect::<Result<Vec<_>>>()?;
    Ok(SampleCovReport { p, n, lags: (1..=h).collect(), gamma_hat, gamma_true, oracle: CovOracle::Quadrature, mean_bar })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MtDecomposition {
    pub s: usize,
    pub p: f64,
    pub n: usize,
    pub variant: KernelVariant,
    /// `Σ (U_i^p − E[U_i^p | F_{i−1}])`.
    pub m: f64,
    /// `Σ K(X_i, X̂_{i,s})`.
    pub t: f64,
    /// `Σ (U_i^p − E U_0^p)`.
    pub raw: f64,
    pub residual: f64,
}

/// `X̂_{i,s} = ς_s^{-1}(X_{i+s} − Σ_{j=1}^s c_j η_{i+s−j})` for `i = 1..=n`.
///
/// Subtracting the recent innovations from the stored state is exact for any
/// truncation and for the exact far past.
pub fn reconstruct_xhat(path: &SvPath, s: usize, n: usize, varsigma: f64) -> Result<Vec<f64>> {
    if path.eta.len() != path.len() {
        return Err(Error::MissingInnovations);
    }
    if path.len() < n + s {
        return Err(invalid(format!("need {} states, got {}", n + s, path.len())));
    }
    let c = make_coefficients(&path.model.gaussian)?;
    let coef = |j: usize| c.get(j - 1).copied().unwrap_or(0.0);
    // Index k holds time k + 1.
    Ok((0..n)
        .map(|k| {
            let mut recent = 0.0;
            for j in 1..=s {
                recent += coef(j) * path.eta[k + s - j];
            }
            (path.x[k + s] - recent) / varsigma
        })
        .collect())
}

/// Kernel variant matching the coupling and power of `path`.
pub fn default_variant(model: &SvModel, signed: bool) -> KernelVariant {
    match (signed, model.noise.has_leverage()) {
        (true, _) => KernelVariant::General,
        (false, false) => KernelVariant::Star,
        (false, true) => KernelVariant::Dagger,
    }
}

/// `E[U_i^p | F_{i−1}]` for `i = 1..=n`, through the kernel.
pub fn conditional_expectations(path: &SvPath, kernel: &Kernel, n: usize) -> Result<Vec<f64>> {
    let spec = kernel.spec();
    let xhat = reconstruct_xhat(path, spec.s, n, kernel.lag_constants().varsigma)?;
    (0..n).map(|k| Ok(kernel.eval(path.x[k], xhat[k])? + kernel.centering())).collect()
}

/// Split `Σ (U_i^p − E U_0^p)` with `U_i = |Y_i Y_{i+s}|` (or the signed
/// product for the plain kernel) into martingale and long-memory parts.
pub fn mt_decompose(path: &SvPath, spec: KernelSpec) -> Result<MtDecomposition> {
    if spec.variant == KernelVariant::Star && path.model.noise.has_leverage() {
        return Err(Error::Precondition("the LMSV kernel ignores leverage; use the leverage kernel".into()));
    }
    let n = path.len().checked_sub(spec.s).filter(|n| *n > 0).ok_or_else(|| invalid("path shorter than the lag"))?;
    let kernel = Kernel::new(&path.model, spec)?;
    let cond = conditional_expectations(path, &kernel, n)?;
    let mean = kernel.centering();
    let (mut m, mut t, mut raw) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for k in 0..n {
        let prod = path.y[k] * path.y[k + spec.s];
        let u = match spec.variant {
            KernelVariant::General => prod,
            _ => prod.abs().powf(spec.p),
        };
        m.add(u - cond[k]);
        t.add(cond[k] - mean);
        raw.add(u - mean);
    }
    let (m, t, raw) = (m.value(), t.value(), raw.value());
    Ok(MtDecomposition { s: spec.s, p: spec.p, n, variant: spec.variant, m, t, raw, residual: (m + t - raw).abs() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternPoint {
    pub t: f64,
    /// `(Y_i/a_n, Y_i Y_{i+1}/b_n, …, Y_i Y_{i+h}/b_n)`.
    pub marks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointPattern {
    pub n: usize,
    pub h: usize,
    pub a_n: f64,
    pub b_n: f64,
    pub threshold: f64,
    pub points: Vec<PatternPoint>,
}

impl PointPattern {
    /// Number of points with `|mark_k| > u`.
    pub fn count_exceeding(&self, k: usize, u: f64) -> usize {
        self.points.iter().filter(|p| p.marks[k].abs() > u).count()
    }

    /// Fraction of points with two or more product marks above `u`.
    pub fn joint_product_fraction(&self, u: f64) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        let joint = self.points.iter().filter(|p| p.marks[1..].iter().filter(|m| m.abs() > u).count() >= 2).count();
        joint as f64 / self.points.len() as f64
    }
}

/// Points `(i/n, Y_{n,i})` for `i = 1..=n` (with `n = len − h`) whose marks
/// exceed `u` in absolute value in at least one coordinate.
pub fn extract_point_pattern(path: &SvPath, a_n: f64, b_n: f64, h: usize, u: f64) -> Result<PointPattern> {
    if !(u > 0.0) {
        return Err(invalid(format!("threshold must be positive, got {u}")));
    }
    if !(a_n > 0.0 && b_n > 0.0) {
        return Err(invalid("normalizations must be positive"));
    }
    let n = path.len().checked_sub(h).filter(|n| *n > 0).ok_or_else(|| invalid("path shorter than the lag range"))?;
    let y = &path.y;
    let mut points = Vec::new();
    let mut marks = vec![0.0; h + 1];
    for k in 0..n {
        marks[0] = y[k] / a_n;
        for j in 1..=h {
            marks[j] = y[k] * y[k + j] / b_n;
        }
        if marks.iter().any(|m| m.abs() > u) {
            points.push(PatternPoint { t: (k + 1) as f64 / n as f64, marks: marks.clone() });
        }
    }
    Ok(PointPattern { n, h, a_n, b_n, threshold: u, points })
}

/// Draws per sample below which the tail-ratio curve is flagged.
pub const TAIL_RATIO_MIN_DRAWS: usize = 10_000_000;

/// Grid points with fewer exceedances than this are flagged.
pub const TAIL_RATIO_MIN_EXCEED: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRatioPoint {
    pub level: f64,
    pub x: f64,
    pub ratio: f64,
    pub se: f64,
    pub exceed_a: usize,
    pub exceed_b: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRatioCurve {
    pub points: Vec<TailRatioPoint>,
    /// Either sample is smaller than [`TAIL_RATIO_MIN_DRAWS`].
    pub small_sample: bool,
}

/// `P̂(A > x) / P̂(B > x)` at the `levels`-quantiles `x` of `B`, with
/// delta-method binomial standard errors.
pub fn tail_ratio_curve(a: &[f64], b: &[f64], levels: &[f64]) -> Result<TailRatioCurve> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("empty sample"));
    }
    if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(invalid(format!("quantile level {l} outside (0, 1)")));
    }
    let sa = stats::sorted(a);
    let sb = stats::sorted(b);
    let above = |s: &[f64], x: f64| s.len() - s.partition_point(|v| *v <= x);
    let points = levels
        .iter()
        .map(|&level| {
            let x = stats::quantile_sorted(&sb, level);
            let (ka, kb) = (above(&sa, x), above(&sb, x));
            let (pa, pb) = (ka as f64 / sa.len() as f64, kb as f64 / sb.len() as f64);
            let ratio = if kb == 0 { f64::NAN } else { pa / pb };
            let rel2 = if ka == 0 || kb == 0 {
                f64::INFINITY
            } else {
                (1.0 - pa) / (sa.len() as f64 * pa) + (1.0 - pb) / (sb.len() as f64 * pb)
            };
            TailRatioPoint {
                level,
                x,
                ratio,
                se: ratio.abs() * rel2.sqrt(),
                exceed_a: ka,
                exceed_b: kb,
                flagged: ka < TAIL_RATIO_MIN_EXCEED || kb < TAIL_RATIO_MIN_EXCEED,
            }
        })
        .collect();
    Ok(TailRatioCurve { points, small_sample: a.len().min(b.len()) < TAIL_RATIO_MIN_DRAWS })
}
