//! Numerical integration: Gauss rules built by Golub–Welsch, tanh-sinh for
//! integrands with endpoint singularities, and Gaussian expectations.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::special::phi;

/// Nodes and weights of an interpolatory rule, nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Family {
    Hermite,
    Legendre,
}

fn golub_welsch(n: usize, offdiag: impl Fn(usize) -> f64, mu0: f64) -> GaussRule {
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = offdiag(k);
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrize: both families are even, so this removes eigen-solver asymmetry.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

type RuleCache = Mutex<HashMap<(Family, usize), Arc<GaussRule>>>;

fn cached(family: Family, n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(rule) = cache.lock().expect("quadrature cache poisoned").get(&(family, n)) {
        return rule.clone();
    }
    let rule = Arc::new(match family {
        Family::Hermite => golub_welsch(n, |k| (k as f64).sqrt(), 1.0),
        Family::Legendre => golub_welsch(n, |k| k as f64 / ((4 * k * k - 1) as f64).sqrt(), 2.0),
    });
    cache.lock().expect("quadrature cache poisoned").insert((family, n), rule.clone());
    rule
}

/// Gauss–Hermite rule for the standard normal weight: `Σ w_i f(x_i) ≈ E f(N(0,1))`.
pub fn gauss_hermite(n: usize) -> Arc<GaussRule> {
    cached(Family::Hermite, n)
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    cached(Family::Legendre, n)
}

/// Composite Gauss–Legendre on `[a, b]` with `panels` equal panels.
pub fn composite_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let rule = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let mut s = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            s += w * f(mid + 0.5 * h * x);
        }
        acc += 0.5 * h * s;
    }
    acc
}

/// Tanh-sinh quadrature on a finite interval. The integrand is never
/// evaluated at the endpoints, so integrable endpoint singularities are fine.
/// Returns the estimate or an error when the relative tolerance is not met.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    const T_MAX: f64 = 4.0;
    const MAX_LEVEL: u32 = 11;
    let half = 0.5 * (b - a);
    let hp = std::f64::consts::FRAC_PI_2;
    let term = |t: f64| -> f64 {
        let s = hp * t.sinh();
        let c = s.cosh();
        let w = hp * t.cosh() / (c * c);
        // Distance from the nearer endpoint, computed without cancellation.
        let d = half / (s.abs().exp() * c);
        let x = if t < 0.0 { a + d } else { b - d };
        if d <= 0.0 || !(x > a && x < b) {
            return 0.0;
        }
        let v = f(x);
        if v.is_finite() { w * v } else { 0.0 }
    };
    let mut h = 1.0;
    let mut sum = term(0.0);
    let mut k = 1.0;
    while k <= T_MAX {
        sum += term(k) + term(-k);
        k += 1.0;
    }
    let mut est = half * h * sum;
    let mut level = 1;
    loop {
        h *= 0.5;
        let mut t = h;
        let mut add = 0.0;
        while t <= T_MAX {
            add += term(t) + term(-t);
            t += 2.0 * h;
        }
        sum += add;
        let new = half * h * sum;
        let diff = (new - est).abs();
        est = new;
        if level >= 4 && diff <= rel_tol * est.abs().max(1e-300) || diff == 0.0 && level >= 3 {
            return Ok(est);
        }
        if level >= MAX_LEVEL {
            if diff <= 1e3 * rel_tol * est.abs() || diff < 1e-14 {
                return Ok(est);
            }
            return Err(Error::Quadrature(format!(
                "tanh-sinh on [{a}, {b}] stalled at {est} (last change {diff})"
            )));
        }
        level += 1;
    }
}

/// Range beyond which the normal density is negligible in double precision.
pub const NORMAL_RANGE: f64 = 38.0;

/// `E f(N(0,1))` for smooth `f` of moderate growth, by Gauss–Hermite of order `order`.
pub fn gauss_expect_smooth(f: impl Fn(f64) -> f64, order: usize) -> f64 {
    let rule = gauss_hermite(order);
    rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * f(*x)).sum()
}

/// `E f(N(0,1))` for `f` that is only piecewise smooth. `kinks` lists the points
/// where `f` or a derivative is discontinuous or singular.
pub fn gauss_expect_kinked(f: impl Fn(f64) -> f64, kinks: &[f64], rel_tol: f64) -> Result<f64> {
    let mut cuts: Vec<f64> = vec![-NORMAL_RANGE, -10.0, -4.0, 0.0, 4.0, 10.0, NORMAL_RANGE];
    cuts.extend(kinks.iter().copied().filter(|k| k.abs() < NORMAL_RANGE));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let g = |x: f64| f(x) * phi(x);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += tanh_sinh(g, w[0], w[1], rel_tol)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_rule_reproduces_normal_moments() {
        let rule = gauss_hermite(40);
        let m = |p: i32| -> f64 { rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(p)).sum() };
        assert_relative_eq!(m(0), 1.0, max_relative = 1e-13);
        assert_relative_eq!(m(2), 1.0, max_relative = 1e-12);
        assert_relative_eq!(m(4), 3.0, max_relative = 1e-12);
        assert_relative_eq!(m(8), 105.0, max_relative = 1e-11);
        assert!(m(3).abs() < 1e-12);
    }

    #[test]
    fn hermite_rule_exponential_moment() {
        let v = gauss_expect_smooth(|x| (1.3 * x).exp(), 120);
        assert_relative_eq!(v, (1.3f64 * 1.3 / 2.0).exp(), max_relative = 1e-12);
    }

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let v = composite_legendre(|x| x.powi(5) - 2.0 * x, 0.0, 3.0, 3, 8);
        assert_relative_eq!(v, 3f64.powi(6) / 6.0 - 9.0, max_relative = 1e-13);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        let v = tanh_sinh(|x| x.powf(-0.7), 0.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(v, 1.0 / 0.3, max_relative = 1e-9);
        let v = tanh_sinh(|x| (1.0 - x * x).sqrt().recip(), -1.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(v, std::f64::consts::PI, max_relative = 1e-6);
    }

    #[test]
    fn kinked_expectation_of_absolute_power() {
        // E|N|^p = 2^{p/2} Γ((p+1)/2) / sqrt(pi)
        let p = 0.6;
        let exact = 2f64.powf(p / 2.0) * statrs::function::gamma::gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt();
        let v = gauss_expect_kinked(|x| x.abs().powf(p), &[0.0], 1e-12).unwrap();
        assert_relative_eq!(v, exact, max_relative = 1e-10);
        let v = gauss_expect_kinked(|x| x.abs().powf(-0.4), &[0.0], 1e-12).unwrap();
        let exact = 2f64.powf(-0.2) * statrs::function::gamma::gamma(0.3) / std::f64::consts::PI.sqrt();
        assert_relative_eq!(v, exact, max_relative = 1e-9);
    }
}
