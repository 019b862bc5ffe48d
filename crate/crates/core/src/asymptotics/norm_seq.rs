//! Normalizing sequences `a_n` (quantiles of `|Y_0|`) and `b_n` (quantiles of `|Y_0 Y_1|`).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::par;
use crate::quadrature::gauss_expect_kinked;
use crate::rng::derive_seed;
use crate::sv_model::{SvModel, SvSimulator};
use crate::tail_laws::{LeverageCoupling, TailFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Marginal: `a_n = inf{x : P(|Y_0| > x) < 1/n}`.
    A,
    /// Product: `b_n = inf{x : P(|Y_0 Y_1| > x) ≤ 1/n}`.
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormMethod {
    ClosedForm,
    McQuantile {
        sample_size: u64,
        /// Approximate relative standard error of the quantile, `1 / (α sqrt(k))`
        /// with `k` the number of exceedances.
        quantile_rel_se: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormValue {
    pub kind: NormKind,
    pub n: u64,
    pub value: f64,
    pub method: NormMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    /// Monte Carlo sample size as a multiple of `n`.
    pub factor: u64,
    pub seed: u64,
    /// Length of each simulated path.
    pub chunk: usize,
    pub workers: Option<usize>,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { factor: 100, seed: 0, chunk: 1 << 20, workers: None }
    }
}

/// Smallest factor accepted for Monte Carlo quantiles.
pub const MIN_FACTOR: u64 = 10;

/// Closed form for uncentered Pareto noise without leverage: `a_n` for any
/// volatility, `b_n` for constant volatility.
pub fn closed_form(model: &SvModel, kind: NormKind, n: u64) -> Option<f64> {
    let law = &model.noise.law;
    let TailFamily::TwoSidedPareto { x_min } = law.family else { return None };
    if law.centered || !matches!(model.noise.coupling, LeverageCoupling::Independent) {
        return None;
    }
    if !model.volatility.is_constant() {
        return match kind {
            NormKind::A => pareto_mixture_quantile(model, x_min, n),
            NormKind::B => None,
        };
    }
    let c = model.volatility.eval(0.0);
    let alpha = law.alpha;
    let nf = n as f64;
    match kind {
        NormKind::A => Some(c * x_min * nf.powf(1.0 / alpha)),
        NormKind::B => {
            // P(UV > t) = t^{−α}(1 + α ln t) for independent standard Pareto U, V.
            let target = -nf.ln();
            let f = |lt: f64| -alpha * lt + (alpha * lt).ln_1p() - target;
            let (mut lo, mut hi) = (0.0, 1.0);
            while f(hi) > 0.0 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Some(c * c * x_min * x_min * (0.5 * (lo + hi)).exp())
        }
    }
}

/// Solve `n E[min(1, (σ(X) x_min / x)^α)] = 1`, the exact `P(|σ(X) Z| > x)`
/// for Pareto `Z` independent of `X`, by bisection in `ln x`.
fn pareto_mixture_quantile(model: &SvModel, x_min: f64, n: u64) -> Option<f64> {
    let alpha = model.noise.law.alpha;
    let sd = model.state_variance().ok()?.sqrt();
    let vol = &model.volatility;
    let excess = |lx: f64| -> Option<f64> {
        let h = |g: f64| (vol.eval(sd * g) * x_min).ln() - lx;
        let p = gauss_expect_kinked(|g| (alpha * h(g).min(0.0)).exp(), &sign_changes(h), 1e-10).ok()?;
        Some((n as f64 * p).ln())
    };
    let start = (x_min * vol.gaussian_moment(alpha, sd * sd).ok()?.powf(1.0 / alpha)).ln() + (n as f64).ln() / alpha;
    let (mut lo, mut hi) = (start - 1.0, start + 1.0);
    while excess(lo)? < 0.0 {
        lo -= 1.0;
    }
    while excess(hi)? > 0.0 {
        hi += 1.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if excess(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((0.5 * (lo + hi)).exp())
}

/// Roots of `h` on the normal range, located on a 1/4 grid and refined by bisection.
fn sign_changes(h: impl Fn(f64) -> f64) -> Vec<f64> {
    let grid: Vec<f64> = (-152..=152).map(|k| k as f64 / 4.0).collect();
    let mut roots = Vec::new();
    for w in grid.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        if (h(a) < 0.0) == (h(b) < 0.0) {
            continue;
        }
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if (h(m) < 0.0) == (h(a) < 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}

struct Ordered(f64);

impl PartialEq for Ordered {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Ordered {}

impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// The `k` largest values, descending.
fn top_k(values: impl Iterator<Item = f64>, k: usize) -> Vec<f64> {
    let mut heap: BinaryHeap<Reverse<Ordered>> = BinaryHeap::with_capacity(k + 1);
    for v in values {
        if heap.len() < k {
            heap.push(Reverse(Ordered(v)));
        } else if let Some(Reverse(Ordered(min))) = heap.peek() {
            if v > *min {
                heap.pop();
                heap.push(Reverse(Ordered(v)));
            }
        }
    }
    let mut out: Vec<f64> = heap.into_iter().map(|Reverse(Ordered(v))| v).collect();
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// Simulate `total` draws of `|Y_0|` or `|Y_0 Y_1|` in independent paths and
/// keep the `k` largest. Returns the values and the exact sample size.
pub(crate) fn simulated_top(model: &SvModel, kind: NormKind, total: u64, k: usize, opts: &McOptions) -> Result<(Vec<f64>, u64)> {
    let (len, chunks) = chunking(total, opts.chunk);
    let sim = SvSimulator::new(model, len)?;
    let parts = par::map_indexed(chunks, opts.workers, |c| -> Result<Vec<f64>> {
        let path = sim.sample(derive_seed(opts.seed, &[c as u64]))?;
        Ok(match kind {
            NormKind::A => top_k(path.y.iter().map(|v| v.abs()), k),
            NormKind::B => top_k(path.y.windows(2).map(|w| (w[0] * w[1]).abs()), k),
        })
    });
    let mut all = Vec::with_capacity(k * chunks);
    for p in parts {
        all.extend(p?);
    }
    Ok((top_k(all.into_iter(), k), sample_size(kind, total, opts.chunk)))
}

/// Path length and number of paths used to draw `total` values.
pub(crate) fn chunking(total: u64, chunk: usize) -> (usize, usize) {
    let len = (chunk as u64).min(total).max(2) as usize;
    (len, total.div_ceil(len as u64) as usize)
}

fn sample_size(kind: NormKind, total: u64, chunk: usize) -> u64 {
    let (len, chunks) = chunking(total, chunk);
    let per_chunk = match kind {
        NormKind::A => len,
        NormKind::B => len - 1,
    };
    (per_chunk * chunks) as u64
}

/// `a_n` or `b_n` for each `n` in `ns`; Monte Carlo estimates share one sample
/// of size `factor · max(ns)`.
pub fn norm_seq_many(model: &SvModel, kind: NormKind, ns: &[u64], opts: &McOptions) -> Result<Vec<NormValue>> {
    if ns.contains(&0) {
        return Err(invalid("n must be at least 1"));
    }
    if ns.iter().all(|&n| closed_form(model, kind, n).is_some()) {
        return Ok(ns
            .iter()
            .map(|&n| NormValue { kind, n, value: closed_form(model, kind, n).unwrap_or(f64::NAN), method: NormMethod::ClosedForm })
            .collect());
    }
    if opts.factor < MIN_FACTOR {
        return Err(Error::InsufficientSample(format!(
            "Monte Carlo quantile needs at least {MIN_FACTOR}·n draws, got factor {}",
            opts.factor
        )));
    }
    let n_max = ns.iter().copied().max().unwrap_or(1);
    let n_min = ns.iter().copied().min().unwrap_or(1);
    let total = opts.factor.saturating_mul(n_max);
    let k = (sample_size(kind, total, opts.chunk) / n_min) as usize + 1;
    let (top, size) = simulated_top(model, kind, total, k, opts)?;
    let alpha = model.noise.alpha();
    ns.iter()
        .map(|&n| {
            let rank = ((size as f64 / n as f64).round() as usize).max(1);
            let value = *top.get(rank - 1).ok_or_else(|| Error::InsufficientSample("quantile rank beyond sample".into()))?;
            Ok(NormValue {
                kind,
                n,
                value,
                method: NormMethod::McQuantile { sample_size: size, quantile_rel_se: 1.0 / (alpha * (rank as f64).sqrt()) },
            })
        })
        .collect()
}

pub fn norm_seq(model: &SvModel, kind: NormKind, n: u64, opts: &McOptions) -> Result<NormValue> {
    Ok(norm_seq_many(model, kind, &[n], opts)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_lm::LongMemorySpec;
    use crate::stats;
    use crate::sv_model::VolatilityFn;
    use crate::tail_laws::{NoiseModel, TailLaw};
    use approx::assert_relative_eq;

    fn iid(alpha: f64) -> SvModel {
        SvModel {
            gaussian: LongMemorySpec::white_noise(),
            noise: NoiseModel::independent(TailLaw::pareto(alpha, 0.5, 1.0)),
            volatility: VolatilityFn::constant(1.0),
        }
    }

    #[test]
    fn closed_form_examples() {
        let o = McOptions::default();
        assert_relative_eq!(norm_seq(&iid(2.0), NormKind::A, 10_000, &o).unwrap().value, 100.0, max_relative = 1e-12);
        assert_eq!(norm_seq(&iid(1.5), NormKind::A, 1, &o).unwrap().value, 1.0);
        assert_relative_eq!(norm_seq(&iid(1.5), NormKind::B, 1, &o).unwrap().value, 1.0, max_relative = 1e-12);
        // P(UV > b) = 1/n at the returned b.
        let b = norm_seq(&iid(1.5), NormKind::B, 1000, &o).unwrap().value;
        assert_relative_eq!(b.powf(-1.5) * (1.0 + 1.5 * b.ln()), 1e-3, max_relative = 1e-10);
    }

    #[test]
    fn closed_form_is_regularly_varying_and_dominated() {
        let m = iid(1.5);
        let ns: Vec<u64> = (10..=20).map(|k| 1u64 << k).collect();
        let a = norm_seq_many(&m, NormKind::A, &ns, &McOptions::default()).unwrap();
        let b = norm_seq_many(&m, NormKind::B, &ns, &McOptions::default()).unwrap();
        let lx: Vec<f64> = ns.iter().map(|n| (*n as f64).ln()).collect();
        let la: Vec<f64> = a.iter().map(|v| v.value.ln()).collect();
        let lb: Vec<f64> = b.iter().map(|v| v.value.ln()).collect();
        assert!((stats::ols(&lx, &la).unwrap().slope - 1.0 / 1.5).abs() < 0.05);
        // b_n ~ (n ln n)^{1/α}: the logarithm adds a little to the local slope.
        let sb = stats::ols(&lx, &lb).unwrap().slope;
        assert!(sb > 1.0 / 1.5 && sb < 1.0 / 1.5 + 0.12, "{sb}");
        let ratios: Vec<f64> = a.iter().zip(&b).map(|(a, b)| a.value / b.value).collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        // Centering removes the closed form but barely moves the far quantile.
        let mut m = iid(1.5);
        m.noise.law = m.noise.law.centered();
        let opts = McOptions { factor: 200, seed: 3, chunk: 1 << 16, workers: None };
        let v = norm_seq(&m, NormKind::A, 1000, &opts).unwrap();
        assert!(matches!(v.method, NormMethod::McQuantile { .. }));
        assert!((v.value / 1000f64.powf(1.0 / 1.5) - 1.0).abs() < 0.1, "{v:?}");
        let low = McOptions { factor: 5, ..opts };
        assert!(matches!(norm_seq(&m, NormKind::A, 1000, &low), Err(Error::InsufficientSample(_))));
    }

    #[test]
    fn volatility_mixture_quantile() {
        let m = SvModel { volatility: VolatilityFn::Exp, ..iid(1.5) };
        // Far above the bulk of σ the mixture tail is E[σ^α] x^{−α}.
        let far = norm_seq(&m, NormKind::A, 1_000_000, &McOptions::default()).unwrap();
        assert_eq!(far.method, NormMethod::ClosedForm);
        assert_relative_eq!(far.value, (1e6 * (1.125f64).exp()).powf(1.0 / 1.5), max_relative = 1e-8);
        let v = norm_seq(&m, NormKind::A, 1000, &McOptions::default()).unwrap();
        let mut c = m.clone();
        c.noise.law = c.noise.law.centered();
        let mc = norm_seq(&c, NormKind::A, 1000, &McOptions { factor: 400, seed: 4, chunk: 1 << 16, workers: None }).unwrap();
        assert!((mc.value / v.value - 1.0).abs() < 0.1, "{mc:?} vs {v:?}");
    }

    #[test]
    fn top_k_orders_descending() {
        assert_eq!(top_k([3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0].into_iter(), 3), vec![9.0, 5.0, 4.0]);
    }
}
