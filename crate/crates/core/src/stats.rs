//! Descriptive statistics, regression and goodness-of-fit tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::special::big_phi;

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    xs.iter().for_each(|&x| acc.add(x));
    acc.value()
}

pub fn mean(xs: &[f64]) -> f64 {
    compensated_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let mut acc = CompensatedSum::new();
    xs.iter().for_each(|&x| acc.add((x - m) * (x - m)));
    acc.value() / (xs.len() as f64 - 1.0)
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    assert!(!s.is_empty());
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

pub fn quantile(xs: &[f64], q: f64) -> f64 {
    quantile_sorted(&sorted(xs), q)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

pub fn iqr(xs: &[f64]) -> f64 {
    let s = sorted(xs);
    quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)
}

/// Standardize by median and interquartile range.
pub fn robust_standardize(xs: &[f64]) -> Vec<f64> {
    let s = sorted(xs);
    let med = quantile_sorted(&s, 0.5);
    let spread = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let spread = if spread > 0.0 { spread } else { 1.0 };
    xs.iter().map(|x| (x - med) / spread).collect()
}

/// Ordinary least squares fit `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r2: f64,
}

pub fn ols(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return Err(Error::InsufficientSample(format!("regression needs >= 3 paired points, got {n}")));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientSample("regressor is constant".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = (rss / (n as f64 - 2.0) / sxx).sqrt();
    let r2 = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    Ok(LineFit { slope, intercept, slope_se, r2 })
}

/// Kolmogorov survival function `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut acc = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        acc += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * acc).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test with the Stephens small-sample correction.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestResult {
    let sa = sorted(a);
    let sb = sorted(b);
    let (n, m) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    TestResult { statistic: d, p_value: kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d) }
}

/// One-sample Kolmogorov–Smirnov test against a continuous distribution function.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let s = sorted(xs);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max(f - i as f64 / n).max((i as f64 + 1.0) / n - f);
    }
    let ne = n.sqrt();
    TestResult { statistic: d, p_value: kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d) }
}

/// Two-sample Anderson–Darling test (continuous version of the k-sample statistic).
/// Returns the standardized statistic and a p-value interpolated from the
/// critical-value table, clipped to `[0.001, 0.25]`.
pub fn ad_two_sample(a: &[f64], b: &[f64]) -> TestResult {
    let mut pooled: Vec<(f64, u8)> = a.iter().map(|&x| (x, 0)).chain(b.iter().map(|&x| (x, 1))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let nn = pooled.len();
    let ns = [a.len() as f64, b.len() as f64];
    let nf = nn as f64;
    let mut counts = [0.0f64; 2];
    let mut a2 = 0.0;
    for j in 1..nn {
        counts[pooled[j - 1].1 as usize] += 1.0;
        let jf = j as f64;
        let denom = jf * (nf - jf);
        for i in 0..2 {
            a2 += (nf * counts[i] - jf * ns[i]).powi(2) / (ns[i] * denom);
        }
    }
    a2 /= nf;

    let k = 2.0;
    let h_big: f64 = ns.iter().map(|n| 1.0 / n).sum();
    let h: f64 = (1..nn).map(|i| 1.0 / i as f64).sum();
    // g = Σ_{i<j<N} 1 / ((N - i) j)
    let mut g = 0.0;
    let mut inner = 0.0;
    for j in 2..nn {
        inner += 1.0 / (nf - (j - 1) as f64);
        g += inner / j as f64;
    }
    let ca = (4.0 * g - 6.0) * (k - 1.0) + (10.0 - 6.0 * g) * h_big;
    let cb = (2.0 * g - 4.0) * k * k + 8.0 * h * k + (2.0 * g - 14.0 * h - 4.0) * h_big - 8.0 * h + 4.0 * g - 6.0;
    let cc = (6.0 * h + 2.0 * g - 2.0) * k * k + (4.0 * h - 4.0 * g + 6.0) * k + (2.0 * h - 6.0) * h_big + 4.0 * h;
    let cd = (2.0 * h + 6.0) * k * k - 4.0 * h * k;
    let var = (ca * nf.powi(3) + cb * nf * nf + cc * nf + cd) / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0));
    let t = (a2 - (k - 1.0)) / var.sqrt();

    const SIG: [f64; 7] = [0.25, 0.1, 0.05, 0.025, 0.01, 0.005, 0.001];
    const B0: [f64; 7] = [0.675, 1.281, 1.645, 1.96, 2.326, 2.573, 3.085];
    const B1: [f64; 7] = [-0.245, 0.25, 0.678, 1.149, 1.822, 2.364, 3.615];
    const B2: [f64; 7] = [-0.105, -0.305, -0.362, -0.391, -0.396, -0.345, -0.154];
    let m = k - 1.0;
    let crit: Vec<f64> = (0..7).map(|i| B0[i] + B1[i] / m.sqrt() + B2[i] / m).collect();
    let logsig: Vec<f64> = SIG.iter().map(|s| s.ln()).collect();
    let coef = quadratic_fit(&crit, &logsig);
    let p = (coef[0] + coef[1] * t + coef[2] * t * t).exp().clamp(0.001, 0.25);
    TestResult { statistic: t, p_value: p }
}

/// Least-squares quadratic `c0 + c1 x + c2 x^2`.
fn quadratic_fit(x: &[f64], y: &[f64]) -> [f64; 3] {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for (xi, yi) in x.iter().zip(y) {
        let row = nalgebra::Vector3::new(1.0, *xi, xi * xi);
        ata += row * row.transpose();
        aty += row * *yi;
    }
    let c = ata.lu().solve(&aty).expect("quadratic fit is well posed for distinct abscissae");
    [c[0], c[1], c[2]]
}

/// Anderson–Darling normality test with estimated mean and variance.
/// Returns the small-sample-adjusted statistic and its approximate p-value.
pub fn ad_normality(xs: &[f64]) -> TestResult {
    let n = xs.len();
    let nf = n as f64;
    let m = mean(xs);
    let sd = variance(xs).sqrt();
    let s = sorted(xs);
    let z: Vec<f64> = s.iter().map(|x| (x - m) / sd).collect();
    let mut acc = 0.0;
    for i in 0..n {
        let lo = big_phi(z[i]).max(1e-300).ln();
        let hi = big_phi(-z[n - 1 - i]).max(1e-300).ln();
        acc += (2.0 * i as f64 + 1.0) * (lo + hi);
    }
    let a2 = -nf - acc / nf;
    let a = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let p = if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    TestResult { statistic: a, p_value: p.clamp(0.0, 1.0) }
}

/// Dispersion index `var / mean` of counts with a two-sided chi-square
/// confidence interval at level `1 - level`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Dispersion {
    pub index: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn dispersion_index(counts: &[f64], level: f64) -> Result<Dispersion> {
    let r = counts.len();
    if r < 2 {
        return Err(Error::InsufficientSample("dispersion needs at least two replicates".into()));
    }
    let m = mean(counts);
    if m <= 0.0 {
        return Err(Error::InsufficientSample("all counts are zero".into()));
    }
    let index = variance(counts) / m;
    let df = (r - 1) as f64;
    let chi = ChiSquared::new(df).map_err(|e| Error::Precondition(e.to_string()))?;
    let q_hi = chi.inverse_cdf(1.0 - level / 2.0);
    let q_lo = chi.inverse_cdf(level / 2.0);
    Ok(Dispersion { index, ci_low: index * df / q_hi, ci_high: index * df / q_lo })
}

/// Sample autocorrelations at lags `0..=max_lag` (biased normalization).
pub fn acf(xs: &[f64], max_lag: usize) -> Vec<f64> {
    let n = xs.len();
    let m = mean(xs);
    let c0: f64 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
    (0..=max_lag.min(n - 1))
        .map(|h| {
            let mut acc = CompensatedSum::new();
            for i in 0..n - h {
                acc.add((xs[i] - m) * (xs[i + h] - m));
            }
            acc.value() / n as f64 / c0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut v = vec![1e16, 1.0, -1e16];
        v.extend(std::iter::repeat_n(1e-3, 1000));
        assert_relative_eq!(compensated_sum(&v), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [4.0, 1.0, 3.0, 2.0];
        assert_relative_eq!(median(&xs), 2.5);
        assert_relative_eq!(quantile(&xs, 0.25), 1.75);
        assert_relative_eq!(iqr(&xs), 1.5);
    }

    #[test]
    fn ols_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let fit = ols(&x, &y).unwrap();
        assert_relative_eq!(fit.slope, -0.5, epsilon = 1e-14);
        assert_relative_eq!(fit.intercept, 2.0, epsilon = 1e-13);
        assert!(fit.slope_se < 1e-12 && fit.r2 > 0.999_999);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // P(K > 1.358) is the classical 5% point.
        assert_relative_eq!(kolmogorov_sf(1.358_1), 0.05, max_relative = 2e-3);
        assert_relative_eq!(kolmogorov_sf(1.627_6), 0.01, max_relative = 5e-3);
    }

    #[test]
    fn ks_and_ad_accept_same_law_and_reject_shift() {
        let mut rng = crate::rng::stream(11, 0);
        let a: Vec<f64> = (0..800).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..800).map(|_| rng.sample(StandardNormal)).collect();
        let c: Vec<f64> = b.iter().map(|x: &f64| x + 0.4).collect();
        assert!(ks_two_sample(&a, &b).p_value > 0.01);
        assert!(ks_two_sample(&a, &c).p_value < 1e-4);
        assert!(ad_two_sample(&a, &b).p_value > 0.01);
        assert_relative_eq!(ad_two_sample(&a, &c).p_value, 0.001);
        assert!(ad_normality(&a).p_value > 0.01);
        let skewed: Vec<f64> = a.iter().map(|x| x.exp()).collect();
        assert!(ad_normality(&skewed).p_value < 1e-6);
    }

    #[test]
    fn ad_two_sample_standardization_matches_reference() {
        // Reference values from the k-sample variance formula: for k = 2,
        // n1 = n2 = 5 the standardized statistic at A2 = 1 equals (1 - 1)/sigma = 0.
        let a = [0.1, 0.5, 0.9, 1.3, 1.7];
        let b = [0.3, 0.7, 1.1, 1.5, 1.9];
        let r = ad_two_sample(&a, &b);
        assert!(r.statistic < 0.0, "interleaved samples should sit below the mean");
        assert_relative_eq!(r.p_value, 0.25);
    }

    fn reference_samples() -> (Vec<f64>, Vec<f64>) {
        let a = (1..41).map(|i| (1.7 * i as f64).sin() * (1.0 + 0.01 * i as f64)).collect();
        let b = (1..31).map(|i| (2.3 * i as f64).cos() * 1.3 + 0.2).collect();
        (a, b)
    }

    #[test]
    fn two_sample_tests_match_frozen_reference() {
        // Frozen from an independent implementation (scipy 1.15, no midranks).
        let (a, b) = reference_samples();
        let ad = ad_two_sample(&a, &b);
        assert_relative_eq!(ad.statistic, 0.333_699_829_711_437_6, max_relative = 1e-10);
        assert_relative_eq!(ad.p_value, 0.243_609_473_730_498_4, max_relative = 1e-8);
        let ks = ks_two_sample(&a, &b);
        assert_relative_eq!(ks.statistic, 1.0 / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn normality_statistic_matches_frozen_reference() {
        let (a, _) = reference_samples();
        let raw = ad_normality(&a).statistic / (1.0 + 0.75 / 40.0 + 2.25 / 1600.0);
        assert_relative_eq!(raw, 0.970_607_453_829_522_6, max_relative = 1e-9);
    }

    #[test]
    fn dispersion_of_poisson_counts_is_near_one() {
        let mut rng = crate::rng::stream(5, 0);
        let pois = rand_distr::Poisson::new(6.0).unwrap();
        let counts: Vec<f64> = (0..4000).map(|_| rng.sample(pois)).collect();
        let d = dispersion_index(&counts, 0.05).unwrap();
        assert!(d.ci_low < 1.0 && d.ci_high > 1.0, "{d:?}");
    }

    #[test]
    fn acf_of_white_noise_is_small() {
        let mut rng = crate::rng::stream(9, 0);
        let x: Vec<f64> = (0..20000).map(|_| rng.sample(StandardNormal)).collect();
        let r = acf(&x, 5);
        assert_relative_eq!(r[0], 1.0, epsilon = 1e-12);
        assert!(r[1..].iter().all(|v| v.abs() < 0.03));
    }
}
