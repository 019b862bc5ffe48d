//! Stationary, zero-mean, unit-variance Gaussian processes with short or long
//! memory, built from the causal moving average `X_i = Σ_{j≥1} c_j η_{i−j}`.
//!
//! Two syntheses are provided. [`GaussianEngine`] convolves an explicit
//! innovation stream with the coefficients and keeps the innovations, which
//! the leverage models need. [`CirculantEngine`] draws a path with the exact
//! target covariance by circulant embedding and keeps no innovations.
//!
//! Long-memory laws can be run in two ways. `FarPast::Truncated` cuts the
//! moving average at `truncation_m` and renormalizes, which biases the
//! covariance at long lags. `FarPast::Exact` keeps `B = max(n, 1024)` past
//! innovations explicitly and adds the contribution of the infinite remote
//! past as a smooth Gaussian field, sampled on Chebyshev nodes with its exact
//! covariance and interpolated. The resulting path has the covariance of the
//! untruncated series up to quadrature error.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::budget;
use crate::error::{invalid, Error, Result};
use crate::quadrature::composite_legendre;
use crate::rng::{self, STREAM_FAR_PAST, STREAM_INNOVATIONS};
use crate::special::{gamma_ratio, zeta};

/// Family of moving-average coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoeffLaw {
    /// `c_j ∝ j^{H−3/2}`.
    FractionalPower,
    /// Fractionally integrated noise, `c_j ∝ Γ(j−1+d)/(Γ(d)Γ(j))` with `d = H − 1/2`.
    /// Its covariance is known in closed form and follows `ρ_n ∝ n^{2H−2}`
    /// without the slowly decaying correction of the pure power law.
    Arfima,
    /// Finite list of coefficients, normalized to unit sum of squares.
    ExplicitList { coefficients: Vec<f64> },
    /// `c_j ∝ exp(−rate·(j−1))`, `j = 1..m`. `rate = inf` gives `[1, 0, …]`.
    Exponential { rate: f64 },
}

/// Treatment of the innovations beyond the explicitly simulated window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarPast {
    /// Cut the moving average at `truncation_m` and renormalize.
    #[default]
    Truncated,
    /// Keep the full infinite moving average (long-memory laws only).
    Exact,
}

pub const DEFAULT_TRUNCATION: usize = 1_000_000;

fn default_truncation() -> usize {
    DEFAULT_TRUNCATION
}

/// Covariance law of the Gaussian driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LongMemorySpec {
    /// Hurst index in `(1/2, 1)`; absent for short memory.
    #[serde(default)]
    pub hurst: Option<f64>,
    pub coeff_law: CoeffLaw,
    #[serde(default = "default_truncation")]
    pub truncation_m: usize,
    #[serde(default)]
    pub far_past: FarPast,
}

impl LongMemorySpec {
    pub fn fractional_power(hurst: f64, m: usize) -> Self {
        Self { hurst: Some(hurst), coeff_law: CoeffLaw::FractionalPower, truncation_m: m, far_past: FarPast::Truncated }
    }

    /// Fractionally integrated noise with the exact far past.
    pub fn arfima(hurst: f64) -> Self {
        Self { hurst: Some(hurst), coeff_law: CoeffLaw::Arfima, truncation_m: DEFAULT_TRUNCATION, far_past: FarPast::Exact }
    }

    pub fn explicit(coefficients: Vec<f64>) -> Self {
        let m = coefficients.len().max(1);
        Self { hurst: None, coeff_law: CoeffLaw::ExplicitList { coefficients }, truncation_m: m, far_past: FarPast::Truncated }
    }

    pub fn exponential(rate: f64, m: usize) -> Self {
        Self { hurst: None, coeff_law: CoeffLaw::Exponential { rate }, truncation_m: m, far_past: FarPast::Truncated }
    }

    /// Independent standard normals.
    pub fn white_noise() -> Self {
        Self::explicit(vec![1.0])
    }

    pub fn with_far_past(mut self, far_past: FarPast) -> Self {
        self.far_past = far_past;
        self
    }

    pub fn is_long_memory(&self) -> bool {
        matches!(self.coeff_law, CoeffLaw::FractionalPower | CoeffLaw::Arfima)
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation_m == 0 {
            return Err(invalid("truncation_m must be at least 1"));
        }
        match &self.coeff_law {
            CoeffLaw::FractionalPower | CoeffLaw::Arfima => match self.hurst {
                Some(h) if h > 0.5 && h < 1.0 => {}
                Some(h) => return Err(invalid(format!("hurst must lie in (1/2, 1), got {h}"))),
                None => return Err(invalid("long-memory coefficient law needs a hurst index")),
            },
            CoeffLaw::ExplicitList { coefficients } => {
                if coefficients.is_empty() {
                    return Err(invalid("explicit coefficient list is empty"));
                }
                if coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(invalid("explicit coefficients must be finite"));
                }
                if coefficients.iter().all(|c| *c == 0.0) {
                    return Err(invalid("explicit coefficients are all zero"));
                }
            }
            CoeffLaw::Exponential { rate } => {
                if rate.is_nan() || *rate < 0.0 {
                    return Err(invalid(format!("exponential decay rate must be nonnegative, got {rate}")));
                }
            }
        }
        if !self.is_long_memory() {
            if self.hurst.is_some() {
                return Err(invalid("short-memory coefficient laws take no hurst index"));
            }
            if self.far_past == FarPast::Exact {
                return Err(invalid("the exact far past applies to long-memory laws only"));
            }
        }
        Ok(())
    }

    /// The constant `ℓ` in `ρ_n ~ ℓ·n^{2H−2}` for the untruncated law.
    pub fn ell_const(&self) -> Option<f64> {
        let h = self.hurst?;
        match self.coeff_law {
            CoeffLaw::FractionalPower => {
                let beta = (ln_gamma(h - 0.5) + ln_gamma(2.0 - 2.0 * h) - ln_gamma(1.5 - h)).exp();
                Some(beta / zeta(3.0 - 2.0 * h))
            }
            CoeffLaw::Arfima => {
                let d = h - 0.5;
                Some(gamma(1.0 - d) / gamma(d))
            }
            _ => None,
        }
    }

    fn power_law(&self) -> Option<PowerLaw> {
        let h = self.hurst?;
        match self.coeff_law {
            CoeffLaw::FractionalPower => Some(PowerLaw::Fractional { h, scale: zeta(3.0 - 2.0 * h).sqrt().recip() }),
            CoeffLaw::Arfima => {
                let d = h - 0.5;
                // Σ ψ_k² = Γ(1−2d)/Γ(1−d)²
                let norm = gamma(1.0 - d) / gamma(1.0 - 2.0 * d).sqrt();
                Some(PowerLaw::Arfima { d, scale: norm / gamma(d) })
            }
            _ => None,
        }
    }
}

/// Continuous-index coefficient function of an untruncated long-memory law.
#[derive(Debug, Clone, Copy)]
enum PowerLaw {
    Fractional { h: f64, scale: f64 },
    Arfima { d: f64, scale: f64 },
}

impl PowerLaw {
    fn eval(&self, x: f64) -> f64 {
        match *self {
            PowerLaw::Fractional { h, scale } => scale * x.powf(h - 1.5),
            PowerLaw::Arfima { d, scale } => scale * gamma_ratio(x, d - 1.0, 0.0),
        }
    }

    /// `a` in `c(x) ~ C x^a`.
    fn exponent(&self) -> f64 {
        match *self {
            PowerLaw::Fractional { h, .. } => h - 1.5,
            PowerLaw::Arfima { d, .. } => d - 1.0,
        }
    }

    /// `C` in `c(x) ~ C x^a`.
    fn constant(&self) -> f64 {
        match *self {
            PowerLaw::Fractional { scale, .. } | PowerLaw::Arfima { scale, .. } => scale,
        }
    }

    /// `Σ_{l ≥ b} c(t1 + l) c(t2 + l)` by the midpoint Euler–Maclaurin formula.
    fn tail_cross_sum(&self, t1: f64, t2: f64, b: f64) -> f64 {
        const U_MAX: f64 = 27.631_021_115_928_547; // ln 1e12
        let x0 = b - 0.5;
        let g = |x: f64| self.eval(t1 + x) * self.eval(t2 + x);
        let body = composite_legendre(
            |u| {
                let x = x0 * u.exp();
                g(x) * x
            },
            0.0,
            U_MAX,
            56,
            12,
        );
        let x_end = x0 * U_MAX.exp();
        let e = 2.0 * self.exponent() + 1.0;
        let far = self.constant().powi(2) * x_end.powf(e) / -e;
        let step = 1e-3 * x0;
        let slope = (g(x0 + step) - g(x0 - step)) / (2.0 * step);
        body + far + slope / 24.0
    }
}

/// `c_1..c_len` of the configured law. Finite laws are normalized over their
/// support; long-memory laws use the untruncated normalization.
fn raw_coefficients(spec: &LongMemorySpec, len: usize) -> Vec<f64> {
    match (&spec.coeff_law, spec.power_law()) {
        (CoeffLaw::FractionalPower | CoeffLaw::Arfima, Some(law)) => (1..=len).map(|j| law.eval(j as f64)).collect(),
        (CoeffLaw::ExplicitList { coefficients }, _) => {
            let mut c = coefficients.clone();
            c.resize(len, 0.0);
            c
        }
        (CoeffLaw::Exponential { rate }, _) => (0..len)
            .map(|k| if k == 0 { 1.0 } else if rate.is_infinite() { 0.0 } else { (-rate * k as f64).exp() })
            .collect(),
        _ => unreachable!("validated spec"),
    }
}

fn normalize(c: &mut [f64]) {
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    c.iter_mut().for_each(|x| *x /= norm);
}

fn support_len(spec: &LongMemorySpec) -> usize {
    match &spec.coeff_law {
        CoeffLaw::ExplicitList { coefficients } => coefficients.len(),
        _ => spec.truncation_m,
    }
}

/// Moving-average coefficients `c_1..c_m`.
///
/// With the truncated far past these satisfy `Σ c_j² = 1`. With the exact far
/// past they are the first `m` coefficients of the infinite series, whose full
/// sum of squares is 1.
pub fn make_coefficients(spec: &LongMemorySpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let m = support_len(spec);
    let mut c = raw_coefficients(spec, m);
    if spec.far_past == FarPast::Truncated {
        normalize(&mut c);
    }
    Ok(c)
}

/// `ρ_lag = Σ_j c_j c_{j+lag}` of the law actually simulated.
pub fn theoretical_covariance(spec: &LongMemorySpec, lag: usize) -> Result<f64> {
    if lag == 0 {
        spec.validate()?;
        return Ok(1.0);
    }
    match (spec.far_past, spec.power_law()) {
        (FarPast::Exact, Some(law)) => Ok(exact_covariance(spec, &law, lag)),
        _ => {
            let c = make_coefficients(spec)?;
            if lag >= c.len() {
                return Ok(0.0);
            }
            Ok(c.iter().zip(&c[lag..]).map(|(a, b)| a * b).sum())
        }
    }
}

const EXACT_HEAD: usize = 1024;

fn exact_covariance(spec: &LongMemorySpec, law: &PowerLaw, lag: usize) -> f64 {
    match *law {
        PowerLaw::Arfima { d, .. } => arfima_covariance(d, lag),
        PowerLaw::Fractional { .. } => {
            let c = raw_coefficients(spec, EXACT_HEAD - 1 + lag);
            let head: f64 = (0..EXACT_HEAD - 1).map(|j| c[j] * c[j + lag]).sum();
            head + law.tail_cross_sum(0.0, lag as f64, EXACT_HEAD as f64)
        }
    }
}

/// Closed-form covariance of fractionally integrated noise.
fn arfima_covariance(d: f64, lag: usize) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    // Γ(k+d)Γ(1−d) / (Γ(k−d+1)Γ(d))
    gamma(1.0 - d) / gamma(d) * gamma_ratio(lag as f64, d, 1.0 - d)
}

/// `ρ_0..ρ_max_lag` of the law actually simulated.
pub fn covariance_sequence(spec: &LongMemorySpec, max_lag: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    match (spec.far_past, spec.power_law()) {
        (FarPast::Exact, Some(PowerLaw::Arfima { d, .. })) => Ok((0..=max_lag).map(|k| arfima_covariance(d, k)).collect()),
        (FarPast::Exact, Some(law)) => {
            let b = EXACT_HEAD;
            let head_coeffs = raw_coefficients(spec, b - 1);
            let all = raw_coefficients(spec, b - 1 + max_lag);
            let head = cross_correlate(&head_coeffs, &all, max_lag);
            let mut out: Vec<f64> =
                (0..=max_lag).map(|k| head[k] + law.tail_cross_sum(0.0, k as f64, b as f64)).collect();
            out[0] = 1.0;
            Ok(out)
        }
        _ => {
            let c = make_coefficients(spec)?;
            let mut out = cross_correlate(&c, &c, max_lag.min(c.len().saturating_sub(1)));
            out.resize(max_lag + 1, 0.0);
            out[0] = 1.0;
            Ok(out)
        }
    }
}

/// `r_k = Σ_j a_j b_{j+k}` for `k = 0..=max_lag`.
fn cross_correlate(a: &[f64], b: &[f64], max_lag: usize) -> Vec<f64> {
    if (a.len() as u64) * (max_lag as u64 + 1) <= 1 << 22 {
        return (0..=max_lag)
            .map(|k| a.iter().zip(b.iter().skip(k)).map(|(x, y)| x * y).sum())
            .collect();
    }
    let n = (a.len() + b.len()).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fa.resize(n, Complex::default());
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fb.resize(n, Complex::default());
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let mut prod: Vec<Complex<f64>> = fa.iter().zip(&fb).map(|(x, y)| x.conj() * y).collect();
    inv.process(&mut prod);
    (0..=max_lag).map(|k| prod[k].re / n as f64).collect()
}

/// A realized Gaussian path `X_1..X_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPath {
    pub values: Vec<f64>,
    /// `η_{1−burn}..η_n`; empty for circulant-embedding paths.
    pub innovations: Vec<f64>,
    /// Number of stored innovations before time 1.
    pub burn: usize,
    pub spec: LongMemorySpec,
    pub seed: u64,
    /// Largest negative circulant eigenvalue clipped to zero (0 when none).
    pub max_clip: f64,
}

impl GaussianPath {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn has_innovations(&self) -> bool {
        !self.innovations.is_empty()
    }

    /// Innovation `η_i` for `1 − burn ≤ i ≤ n`.
    #[inline]
    pub fn eta(&self, i: i64) -> f64 {
        self.innovations[(i + self.burn as i64 - 1) as usize]
    }

    /// Same-index innovations `η_1..η_n`, aligned with `values`.
    pub fn aligned_innovations(&self) -> Option<&[f64]> {
        self.has_innovations().then(|| &self.innovations[self.burn..])
    }
}

/// Chebyshev-interpolated Gaussian field for the remote past.
#[derive(Debug, Clone)]
struct FarPastField {
    nodes: Vec<f64>,
    bary: Vec<f64>,
    factor: DMatrix<f64>,
}

const FAR_PAST_NODES: usize = 20;

impl FarPastField {
    fn new(law: &PowerLaw, n: usize, b: usize) -> Self {
        let k = FAR_PAST_NODES.min(n);
        let (nodes, bary): (Vec<f64>, Vec<f64>) = if n <= FAR_PAST_NODES {
            ((1..=n).map(|i| i as f64).collect(), vec![0.0; n])
        } else {
            let half = 0.5 * (n as f64 - 1.0);
            (0..k)
                .map(|j| {
                    let t = 0.5 * (n as f64 + 1.0) + half * (std::f64::consts::PI * j as f64 / (k - 1) as f64).cos();
                    let w = if j % 2 == 0 { 1.0 } else { -1.0 } * if j == 0 || j == k - 1 { 0.5 } else { 1.0 };
                    (t, w)
                })
                .unzip()
        };
        let mut cov = DMatrix::<f64>::zeros(k, k);
        for a in 0..k {
            for c in a..k {
                let v = law.tail_cross_sum(nodes[a], nodes[c], b as f64);
                cov[(a, c)] = v;
                cov[(c, a)] = v;
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut factor = eig.eigenvectors.clone();
        for (j, lambda) in eig.eigenvalues.iter().enumerate() {
            let s = lambda.max(0.0).sqrt();
            factor.column_mut(j).scale_mut(s);
        }
        Self { nodes, bary, factor }
    }

    fn add_to(&self, values: &mut [f64], rng: &mut rng::StreamRng) {
        let k = self.nodes.len();
        let xi = DVector::<f64>::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let v = &self.factor * xi;
        if self.bary.iter().all(|w| *w == 0.0) {
            for (x, r) in values.iter_mut().zip(v.iter()) {
                *x += r;
            }
            return;
        }
        for (idx, x) in values.iter_mut().enumerate() {
            let t = (idx + 1) as f64;
            let mut num = 0.0;
            let mut den = 0.0;
            let mut hit = None;
            for j in 0..k {
                let diff = t - self.nodes[j];
                if diff == 0.0 {
                    hit = Some(v[j]);
                    break;
                }
                let w = self.bary[j] / diff;
                num += w * v[j];
                den += w;
            }
            *x += hit.unwrap_or(num / den);
        }
    }
}

#[derive(Clone)]
enum Convolution {
    Direct,
    Fft { len: usize, spectrum: Arc<Vec<Complex<f64>>>, forward: Arc<dyn Fft<f64>>, inverse: Arc<dyn Fft<f64>> },
}

impl std::fmt::Debug for Convolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Convolution::Direct => write!(f, "Direct"),
            Convolution::Fft { len, .. } => write!(f, "Fft({len})"),
        }
    }
}

/// Work below which the moving average is evaluated by direct summation.
pub const DIRECT_WORK_LIMIT: u64 = 1 << 22;

/// Reusable moving-average synthesizer for a fixed `(spec, n)`.
#[derive(Debug, Clone)]
pub struct GaussianEngine {
    spec: LongMemorySpec,
    n: usize,
    burn: usize,
    /// `coeffs[j] = c_j`, `coeffs[0] = 0`.
    coeffs: Vec<f64>,
    conv: Convolution,
    far: Option<FarPastField>,
}

impl GaussianEngine {
    pub fn new(spec: &LongMemorySpec, n: usize) -> Result<Self> {
        spec.validate()?;
        if n == 0 {
            return Err(invalid("path length must be at least 1"));
        }
        let exact = spec.far_past == FarPast::Exact;
        let (burn, c) = if exact {
            let b = n.max(EXACT_HEAD);
            (b, raw_coefficients(spec, b + n - 1))
        } else {
            let c = make_coefficients(spec)?;
            (c.len(), c)
        };
        let mut coeffs = Vec::with_capacity(c.len() + 1);
        coeffs.push(0.0);
        coeffs.extend(c);

        let stream_len = burn + n;
        let work = n as u64 * (coeffs.len() as u64);
        let fft_len = (coeffs.len() + stream_len - 1).next_power_of_two();
        let needed = 8 * (2 * stream_len as u64 + coeffs.len() as u64)
            + if work > DIRECT_WORK_LIMIT { 2 * 16 * fft_len as u64 } else { 0 };
        budget::check(needed, budget::memory_budget())?;

        let conv = if work <= DIRECT_WORK_LIMIT {
            Convolution::Direct
        } else {
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(fft_len);
            let inverse = planner.plan_fft_inverse(fft_len);
            let mut spectrum: Vec<Complex<f64>> = coeffs.iter().map(|&x| Complex::new(x, 0.0)).collect();
            spectrum.resize(fft_len, Complex::default());
            forward.process(&mut spectrum);
            Convolution::Fft { len: fft_len, spectrum: Arc::new(spectrum), forward, inverse }
        };
        let far = if exact { spec.power_law().map(|law| FarPastField::new(&law, n, burn)) } else { None };
        Ok(Self { spec: spec.clone(), n, burn, coeffs, conv, far })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn burn(&self) -> usize {
        self.burn
    }

    /// `c_1..c_L` used by the moving average.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs[1..]
    }

    pub fn spec(&self) -> &LongMemorySpec {
        &self.spec
    }

    pub fn sample(&self, seed: u64) -> GaussianPath {
        let mut rng = rng::stream(seed, STREAM_INNOVATIONS);
        let stream_len = self.burn + self.n;
        let innovations: Vec<f64> = (0..stream_len).map(|_| rng.sample(StandardNormal)).collect();
        let mut values = vec![0.0; self.n];
        match &self.conv {
            Convolution::Direct => {
                for (idx, x) in values.iter_mut().enumerate() {
                    // X_i with i = idx + 1 sits at stream position idx + burn.
                    let t = idx + self.burn;
                    let top = self.coeffs.len().min(t + 1);
                    let mut acc = 0.0;
                    for j in 1..top {
                        acc += self.coeffs[j] * innovations[t - j];
                    }
                    *x = acc;
                }
            }
            Convolution::Fft { len, spectrum, forward, inverse } => {
                let mut buf: Vec<Complex<f64>> = innovations.iter().map(|&x| Complex::new(x, 0.0)).collect();
                buf.resize(*len, Complex::default());
                forward.process(&mut buf);
                buf.iter_mut().zip(spectrum.iter()).for_each(|(a, b)| *a *= b);
                inverse.process(&mut buf);
                let scale = 1.0 / *len as f64;
                for (idx, x) in values.iter_mut().enumerate() {
                    *x = buf[idx + self.burn].re * scale;
                }
            }
        }
        if let Some(far) = &self.far {
            let mut frng = rng::stream(seed, STREAM_FAR_PAST);
            far.add_to(&mut values, &mut frng);
        }
        GaussianPath { values, innovations, burn: self.burn, spec: self.spec.clone(), seed, max_clip: 0.0 }
    }
}

/// Moving-average path `X_1..X_n` together with its innovations.
pub fn simulate_path(spec: &LongMemorySpec, n: usize, seed: u64) -> Result<GaussianPath> {
    Ok(GaussianEngine::new(spec, n)?.sample(seed))
}

/// Reusable circulant-embedding synthesizer for a fixed `(spec, n)`.
#[derive(Clone)]
pub struct CirculantEngine {
    spec: LongMemorySpec,
    n: usize,
    /// `sqrt(λ_k / N)` after clipping.
    amplitude: Vec<f64>,
    eigenvalues: Vec<f64>,
    max_clip: f64,
    forward: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantEngine").field("n", &self.n).field("max_clip", &self.max_clip).finish()
    }
}

impl CirculantEngine {
    pub fn new(spec: &LongMemorySpec, n: usize) -> Result<Self> {
        spec.validate()?;
        if n == 0 {
            return Err(invalid("path length must be at least 1"));
        }
        let big_n = 2 * n;
        budget::check(3 * 16 * big_n as u64, budget::memory_budget())?;
        let rho = covariance_sequence(spec, n)?;
        let mut row: Vec<Complex<f64>> = vec![Complex::default(); big_n];
        for k in 0..=n {
            row[k] = Complex::new(rho[k], 0.0);
        }
        for k in 1..n {
            row[big_n - k] = Complex::new(rho[k], 0.0);
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(big_n);
        forward.process(&mut row);
        let eigenvalues: Vec<f64> = row.iter().map(|z| z.re).collect();
        let max_clip = eigenvalues.iter().fold(0.0f64, |acc, &l| acc.max(-l));
        if max_clip > 0.0 {
            log::warn!("circulant embedding: clipped negative eigenvalues, largest magnitude {max_clip:e}");
        }
        let amplitude = eigenvalues.iter().map(|&l| (l.max(0.0) / big_n as f64).sqrt()).collect();
        Ok(Self { spec: spec.clone(), n, amplitude, eigenvalues, max_clip, forward })
    }

    /// Circulant eigenvalues before clipping. Their mean equals `ρ_0 = 1`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn max_clip(&self) -> f64 {
        self.max_clip
    }

    /// Like [`CirculantEngine::new`] but refuses a spectrum that needs clipping.
    pub fn new_strict(spec: &LongMemorySpec, n: usize) -> Result<Self> {
        let engine = Self::new(spec, n)?;
        if engine.max_clip > 0.0 {
            return Err(Error::NegativeSpectrum { min_eigenvalue: -engine.max_clip });
        }
        Ok(engine)
    }

    pub fn sample(&self, seed: u64) -> GaussianPath {
        let mut rng = rng::stream(seed, STREAM_INNOVATIONS);
        let mut buf: Vec<Complex<f64>> = self
            .amplitude
            .iter()
            .map(|&a| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(a * re, a * im)
            })
            .collect();
        self.forward.process(&mut buf);
        GaussianPath {
            values: buf[..self.n].iter().map(|z| z.re).collect(),
            innovations: Vec::new(),
            burn: 0,
            spec: self.spec.clone(),
            seed,
            max_clip: self.max_clip,
        }
    }
}

/// Exact-covariance path by circulant embedding. Negative eigenvalues are
/// clipped with a warning and the largest clip is recorded in the path.
pub fn simulate_exact(spec: &LongMemorySpec, n: usize, seed: u64) -> Result<GaussianPath> {
    Ok(CirculantEngine::new(spec, n)?.sample(seed))
}
