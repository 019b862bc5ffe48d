//! Special functions not covered by `statrs`: gamma ratios at large argument,
//! Euler–Maclaurin zeta tails and probabilists' Hermite polynomials.

use statrs::function::gamma::ln_gamma;

const STIRLING: [f64; 5] = [1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0, 1.0 / 1188.0];

/// Bernoulli numbers B_2, B_4, ..., B_12.
const BERNOULLI: [f64; 6] = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0];

fn stirling_series(z: f64) -> f64 {
    let z2 = 1.0 / (z * z);
    let mut acc = 0.0;
    let mut zp = 1.0 / z;
    for c in STIRLING {
        acc += c * zp;
        zp *= z2;
    }
    acc
}

/// `ln Γ(x + a) − ln Γ(x + b)` for `x + min(a, b) > 0`, accurate when `x ≫ |a − b|`.
pub fn ln_gamma_ratio(x: f64, a: f64, b: f64) -> f64 {
    let lo = x + a.min(b);
    debug_assert!(lo > 0.0, "gamma ratio needs positive arguments");
    if lo < 12.0 {
        // Shift upwards with the recurrence Γ(z + 1) = z Γ(z).
        let shift = (12.0 - lo).ceil();
        let mut corr = 0.0;
        for k in 0..shift as usize {
            let k = k as f64;
            corr += (x + b + k).ln() - (x + a + k).ln();
        }
        return ln_gamma_ratio(x + shift, a, b) + corr;
    }
    let za = x + a;
    let zb = x + b;
    let d = a - b;
    (zb - 0.5) * (d / zb).ln_1p() + d * za.ln() - d + stirling_series(za) - stirling_series(zb)
}

/// `Γ(x + a) / Γ(x + b)`.
pub fn gamma_ratio(x: f64, a: f64, b: f64) -> f64 {
    ln_gamma_ratio(x, a, b).exp()
}

/// `Σ_{j ≥ n} j^{-s}` for `s > 1`, `n ≥ 1`.
pub fn zeta_tail(s: f64, n: u64) -> f64 {
    assert!(s > 1.0, "zeta tail needs s > 1");
    const START: u64 = 16;
    let mut head = 0.0;
    let mut m = n.max(1);
    while m < START {
        head += (m as f64).powf(-s);
        m += 1;
    }
    let nf = m as f64;
    let mut acc = nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    // B_{2k}/(2k)! * s (s+1) ... (s+2k-2) * N^{-s-2k+1}
    let mut rising = s;
    let mut fact = 2.0;
    let mut pow = nf.powf(-s - 1.0);
    for (k, b) in BERNOULLI.iter().enumerate() {
        let k = k as f64 + 1.0;
        acc += b / fact * rising * pow;
        rising *= (s + 2.0 * k - 1.0) * (s + 2.0 * k);
        fact *= (2.0 * k + 1.0) * (2.0 * k + 2.0);
        pow /= nf * nf;
    }
    head + acc
}

/// Riemann zeta function for real `s > 1`.
pub fn zeta(s: f64) -> f64 {
    zeta_tail(s, 1)
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub fn ln_factorial(n: u32) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Probabilists' Hermite polynomial `He_q(x)`.
pub fn hermite_he(q: u32, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if q == 0 {
        return h0;
    }
    for k in 1..q {
        let h2 = x * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Fill `out[q] = He_q(x)` for `q = 0..out.len()`.
pub fn hermite_he_all(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 2..out.len() {
        out[k] = x * out[k - 1] - (k - 1) as f64 * out[k - 2];
    }
}

/// Standard normal density.
#[inline]
pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() * std::f64::consts::FRAC_1_SQRT_2 * 0.5 * std::f64::consts::FRAC_2_SQRT_PI
}

/// Standard normal distribution function.
pub fn big_phi(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}
