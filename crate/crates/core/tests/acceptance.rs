//! Acceptance suite. Prints one PASS/FAIL line per criterion and always exits
//! zero unless the harness itself breaks; read the lines, not the exit code.
//!
//! `cargo test --release -p lmsv-core --test acceptance -- ac4 ac5` runs a subset.

use std::time::{Duration, Instant};

use lmsv_core::asymptotics::{breiman_constant, classify_regime, norm_seq, Kernel, KernelSpec, KernelVariant, McOptions, NormKind, Regime, Statistic};
use lmsv_core::error::{Error, Result};
use lmsv_core::estimators::{extract_point_pattern, mt_decompose, reconstruct_xhat, tail_ratio_curve};
use lmsv_core::gaussian_lm::{covariance_sequence, make_coefficients, CirculantEngine, FarPast, GaussianEngine, LongMemorySpec};
use lmsv_core::par::map_indexed;
use lmsv_core::rng::{derive_seed, stream, STREAM_AUX};
use lmsv_core::stats;
use lmsv_core::sv_model::{simulate_sv, SvModel, SvSimulator, VolatilityFn};
use lmsv_core::tail_laws::{LeverageCoupling, NoiseModel, TailLaw};
use lmsv_core::verify::{
    no_common_jump_test, poisson_diagnostics, run_plan, statistic_rank, Distance, ExperimentPlan, MarkBox, McSummary, ReferenceChoice,
    RunOptions,
};
use rand::Rng;
use rand_distr::StandardNormal;

type Check = fn() -> Result<(bool, String)>;

const CRITERIA: &[(&str, &str, u64, Check)] = &[
    ("ac1", "Hermite ranks of the covariance kernels", 60, ac1),
    ("ac2", "regime classifier on the example boundaries", 120, ac2),
    ("ac3", "Breiman constant from the tail ratio", 300, ac3),
    ("ac4", "stable limit of the i.i.d. partial sum", 1800, ac4),
    ("ac5", "Hermite limit of the power sum (exp volatility)", 7200, ac5),
    ("nc", "Gaussian reference rejected for stable-regime sums", 1800, negative_control),
    ("ac6", "covariance dichotomy flips under leverage", 10800, ac6),
    ("ac7", "M + T against brute-force conditional expectations", 600, ac7),
    ("ac8", "extremal point process diagnostics", 3600, ac8),
    ("ac9", "moving-average versus circulant Gaussian paths", 600, ac9),
];

fn main() {
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).map(|a| a.to_lowercase()).collect();
    let (mut passed, mut total) = (0, 0);
    for (id, what, limit, check) in CRITERIA {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == id) {
            continue;
        }
        total += 1;
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(*limit);
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        passed += ok as usize;
        let verdict = if ok { "PASS" } else { "FAIL" };
        let time_note = if in_time { String::new() } else { format!(" (over the {limit} s limit)") };
        println!("{} {verdict} {what}: {detail} [{:.1} s{time_note}]", id.to_uppercase(), took.as_secs_f64());
    }
    println!("acceptance: {passed}/{total} PASS");
}

fn pareto(alpha: f64) -> TailLaw {
    TailLaw::pareto(alpha, 0.5, 1.0)
}

fn leverage(law: TailLaw) -> NoiseModel {
    NoiseModel::new(law, LeverageCoupling::PolynomialMix { psi1: vec![1.0, 0.5], psi2: vec![] })
}

fn model(gaussian: LongMemorySpec, noise: NoiseModel, volatility: VolatilityFn) -> SvModel {
    SvModel { gaussian, noise, volatility }
}

fn ac1() -> Result<(bool, String)> {
    let square = VolatilityFn::EvenPower { k: 1 };
    let lmsv = |vol: &VolatilityFn| model(LongMemorySpec::arfima(0.8), NoiseModel::independent(pareto(3.0)), vol.clone());
    let rank = |m: &SvModel, variant, p, s| -> Result<Option<u32>> { Kernel::new(m, KernelSpec { variant, p, s })?.hermite_report(3, 100).map(|r| r.rank) };
    let mut bad = Vec::new();
    for s in 1..=5 {
        for p in [1.0, 1.5] {
            for (vol, want) in [(VolatilityFn::Exp, 1), (square.clone(), 2)] {
                let got = rank(&lmsv(&vol), KernelVariant::Star, p, s)?;
                if got != Some(want) {
                    bad.push(format!("{vol:?} p={p} s={s}: {got:?}"));
                }
            }
        }
    }
    let lev = model(LongMemorySpec::arfima(0.8), leverage(TailLaw::pareto(3.0, 0.8, 1.0)), square);
    let cross = lev.noise.eta_abs_moment(1.0)?;
    for s in 1..=5 {
        let got = rank(&lev, KernelVariant::Dagger, 1.0, s)?;
        if got != Some(1) {
            bad.push(format!("leverage s={s}: {got:?}"));
        }
    }
    Ok((bad.is_empty() && cross.abs() > 0.0, format!("25 ranks checked, E[η|Z|] = {cross:.4}, mismatches {bad:?}")))
}

fn ac2() -> Result<(bool, String)> {
    let alphas = [1.1, 1.3, 1.5, 1.7, 1.9];
    let hursts: Vec<f64> = (0..10).map(|k| 0.52 + 0.05 * k as f64).collect();
    let square = VolatilityFn::EvenPower { k: 1 };
    let cov = Statistic::SampleCov { p: 1.0, s: 1 };
    // (label, statistic, rank, coupling, volatility)
    let examples: [(&str, Statistic, u32, bool, VolatilityFn); 3] = [
        ("exp power sum", Statistic::PartialSumPower { p: 1.0 }, 1, false, VolatilityFn::Exp),
        ("x² covariance", cov, 2, false, square.clone()),
        ("x² covariance with leverage", cov, 1, true, square),
    ];
    // Ranks come from quadrature first; only the classification is timed.
    let mut cases = Vec::new();
    let mut bad = Vec::new();
    for (label, stat, tau, lev, vol) in &examples {
        for &alpha in &alphas {
            for &h in &hursts {
                let noise = if *lev { leverage(pareto(alpha)) } else { NoiseModel::independent(pareto(alpha)) };
                let rank = statistic_rank(&model(LongMemorySpec::arfima(h), noise, vol.clone()), *stat)?;
                if rank != Some(*tau) {
                    bad.push(format!("{label} α={alpha} H={h}: rank {rank:?}"));
                }
                cases.push((*label, *stat, *tau, alpha, h));
            }
        }
    }
    let start = Instant::now();
    let mut boundaries = 0;
    for &(label, stat, tau, alpha, h) in &cases {
        let hermite = 1.0 - tau as f64 * (1.0 - h);
        let want = if hermite > 1.0 / alpha { (Regime::HermiteLimit { tau }, hermite) } else { (Regime::StableLevy, 1.0 / alpha) };
        let v = classify_regime(stat, alpha, Some(h), Some(tau))?;
        if v.regime != want.0 || (v.rate_exponent - want.1).abs() > 1e-12 {
            bad.push(format!("{label} α={alpha} H={h}: {:?}", v.regime));
        }
        // The boundary itself must be refused.
        let h_star = 1.0 - (1.0 - 1.0 / alpha) / tau as f64;
        if h == cases[0].4 && h_star > 0.5 && h_star < 1.0 {
            boundaries += 1;
            if !matches!(classify_regime(stat, alpha, Some(h_star), Some(tau)), Err(Error::Boundary { .. })) {
                bad.push(format!("{label} α={alpha}: boundary H={h_star} not refused"));
            }
        }
    }
    let took = start.elapsed();
    let ok = bad.is_empty() && took < Duration::from_secs(1);
    Ok((ok, format!("{} cells and {boundaries} boundaries classified in {:.2} ms, mismatches {bad:?}", cases.len(), took.as_secs_f64() * 1e3)))
}

fn ac3() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, alpha) in [1.0f64, 1.5].into_iter().enumerate() {
        let m = model(LongMemorySpec::white_noise(), NoiseModel::independent(pareto(alpha)), VolatilityFn::Exp);
        let chunk = 1_000_000;
        let sim = SvSimulator::new(&m, chunk)?;
        let (mut y, mut z) = (Vec::with_capacity(10 * chunk), Vec::with_capacity(10 * chunk));
        for c in 0..10u64 {
            let p = sim.sample(derive_seed(3, &[k as u64, c]))?;
            y.extend_from_slice(&p.y);
            z.extend_from_slice(&p.z);
        }
        let pt = tail_ratio_curve(&y, &z, &[0.9999])?.points[0].clone();
        let closed = (alpha * alpha / 2.0).exp();
        let quad = breiman_constant(&m.volatility, alpha)?;
        let rel = (pt.ratio / closed - 1.0).abs();
        ok &= rel < 0.2 && (quad / closed - 1.0).abs() < 1e-8;
        parts.push(format!("α={alpha}: ratio {:.3} vs e^(α²/2) {closed:.3} (rel {rel:.3}, quadrature {quad:.6})", pt.ratio));
    }
    Ok((ok, parts.join("; ")))
}

fn describe(s: &McSummary) -> String {
    let e = s.exponent.as_ref().map(|e| format!("slope {:.3} ± {:.3} vs {:.3} (R² {:.3})", e.fit.slope, e.fit.slope_se, e.predicted, e.fit.r2));
    let d = s.distance.as_ref().map(|d| format!("{:?} p = {:.4}", d.distance, d.test.p_value));
    let sc = s.scale.as_ref().map(|c| format!("scale ratio {:.3}", c.ratio));
    let parts: Vec<String> = [e, d, sc].into_iter().flatten().collect();
    format!("{:?}, {}", s.status, parts.join(", "))
}

fn ac4() -> Result<(bool, String)> {
    let mut plan = stable_plan();
    plan.tolerances.exponent = 0.05;
    let s = run_plan(&plan, &RunOptions::default())?;
    let slope_ok = s.exponent.as_ref().is_some_and(|e| (e.fit.slope - 2.0 / 3.0).abs() <= 0.05);
    let ks_ok = s.distance.as_ref().is_some_and(|d| d.distance == Distance::Ks && d.test.p_value > 0.01);
    Ok((slope_ok && ks_ok, describe(&s)))
}

fn hermite_plan() -> ExperimentPlan {
    let m = model(LongMemorySpec::arfima(0.9), NoiseModel::independent(pareto(1.5)), VolatilityFn::Exp);
    ExperimentPlan::new(m, Statistic::PartialSumPower { p: 1.0 }, vec![1 << 12, 1 << 14, 1 << 16, 1 << 18], 500, 5)
}

fn ac5() -> Result<(bool, String)> {
    let s = run_plan(&hermite_plan(), &RunOptions::default())?;
    let slope_ok = s.exponent.as_ref().is_some_and(|e| (e.fit.slope - 0.9).abs() <= 0.07);
    let gauss_ok = s.distance.as_ref().is_some_and(|d| d.test.p_value > 0.01);
    let scale_ok = s.scale.as_ref().is_some_and(|c| (c.ratio - 1.0).abs() <= 0.15);
    Ok((slope_ok && gauss_ok && scale_ok, describe(&s)))
}

fn stable_plan() -> ExperimentPlan {
    let m = model(LongMemorySpec::white_noise(), NoiseModel::independent(pareto(1.5).centered()), VolatilityFn::constant(1.0));
    ExperimentPlan::new(m, Statistic::PartialSum, vec![1 << 10, 1 << 12, 1 << 14, 1 << 16], 2000, 4)
}

fn negative_control() -> Result<(bool, String)> {
    // Stable-regime sums against the rank-one Hermite (Gaussian) limit.
    let mut plan = stable_plan();
    plan.reference = ReferenceChoice::Gaussian;
    plan.distance = Distance::AndersonDarling;
    let s = run_plan(&plan, &RunOptions::default())?;
    let rejected = s.distance.as_ref().is_some_and(|d| !d.passed);
    Ok((rejected, describe(&s)))
}

fn ac6() -> Result<(bool, String)> {
    let square = VolatilityFn::EvenPower { k: 1 };
    let run = |noise: NoiseModel, seed: u64| {
        let m = model(LongMemorySpec::arfima(0.85), noise, square.clone());
        let plan = ExperimentPlan::new(m, Statistic::SampleCov { p: 1.0, s: 1 }, vec![1 << 12, 1 << 14, 1 << 16, 1 << 18], 500, seed);
        run_plan(&plan, &RunOptions::default())
    };
    let lmsv = run(NoiseModel::independent(pareto(1.5)), 61)?;
    let lev = run(leverage(pareto(1.5)), 62)?;
    let (a, b) = match (&lmsv.exponent, &lev.exponent) {
        (Some(a), Some(b)) => (a, b),
        _ => return Ok((false, "exponent fit unavailable".into())),
    };
    // Leverage lowers the rank from 2 to 1, so its exponent is the larger one.
    let predicted_up = b.predicted > a.predicted;
    let gap = b.fit.slope - a.fit.slope;
    let separated = b.fit.slope - 2.0 * b.fit.slope_se > a.fit.slope + 2.0 * a.fit.slope_se;
    let ok = predicted_up && gap >= 0.1 && separated;
    Ok((ok, format!("LMSV [{}]; leverage [{}]; gap {gap:.3}", describe(&lmsv), describe(&lev))))
}

/// `E[|Y_i Y_{i+s}| | F_{i−1}]` by redrawing everything from time `i` on with
/// the past fixed through `(X_i, X̂_{i,s})`.
fn nested_mc(m: &SvModel, c: &[f64], s: usize, x_i: f64, xhat: f64, draws: usize, seed: u64) -> (f64, f64) {
    let varsigma = (1.0 - c[..s].iter().map(|v| v * v).sum::<f64>()).sqrt();
    let mut rng = stream(seed, STREAM_AUX);
    let mut eta = vec![0.0; s + 1];
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..draws {
        for e in eta.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        let z_i = m.noise.sample(eta[0], &mut rng);
        let z_is = m.noise.sample(eta[s], &mut rng);
        let x_is: f64 = (1..=s).map(|j| c[j - 1] * eta[s - j]).sum::<f64>() + varsigma * xhat;
        let u = (m.volatility.eval(x_i) * z_i * m.volatility.eval(x_is) * z_is).abs();
        sum += u;
        sq += u * u;
    }
    let mean = sum / draws as f64;
    (mean, ((sq / draws as f64 - mean * mean) / draws as f64).sqrt())
}

fn ac7() -> Result<(bool, String)> {
    // α = 3 keeps the inner draws square-integrable.
    let m = model(LongMemorySpec::fractional_power(0.8, 300), leverage(TailLaw::pareto(3.0, 0.5, 1.0).centered()), VolatilityFn::Exp);
    let (n, s, trials, inner) = (10, 1, 100, 1_000_000);
    let spec = KernelSpec { variant: KernelVariant::Dagger, p: 1.0, s };
    let c = make_coefficients(&m.gaussian)?;
    let z: Vec<Result<f64>> = map_indexed(trials, None, |t| {
        let kernel = Kernel::new(&m, spec)?;
        let path = simulate_sv(&m, n + s, derive_seed(7, &[t as u64]))?;
        let d = mt_decompose(&path, spec)?;
        let xhat = reconstruct_xhat(&path, s, n, kernel.lag_constants().varsigma)?;
        let (mut cond, mut var) = (0.0, 0.0);
        for (k, (&x, &xh)) in path.x.iter().zip(&xhat).enumerate() {
            let (mc, se) = nested_mc(&m, &c, s, x, xh, inner, derive_seed(7, &[t as u64, k as u64]));
            cond += mc;
            var += se * se;
        }
        let raw: f64 = (0..n).map(|k| (path.y[k] * path.y[k + s]).abs()).sum::<f64>() - n as f64 * kernel.centering();
        // Martingale part from the oracle, long-memory part from the kernel.
        let m_oracle = raw + n as f64 * kernel.centering() - cond;
        Ok((m_oracle + d.t - raw) / var.sqrt())
    });
    let z = z.into_iter().collect::<Result<Vec<_>>>()?;
    let within = z.iter().filter(|v| v.abs() < 3.0).count();
    let frac = within as f64 / trials as f64;
    let max = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok((frac >= 0.95, format!("{within}/{trials} trials within 3 SE (max |z| {max:.2})")))
}

fn ac8() -> Result<(bool, String)> {
    let u = 0.3;
    let ns = [1usize << 14, 1 << 16, 1 << 18];
    let replicates = 200;
    let configs = [
        ("LMSV", NoiseModel::independent(pareto(1.5))),
        ("leverage", leverage(pareto(1.5))),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, (label, noise)) in configs.into_iter().enumerate() {
        let m = model(LongMemorySpec::arfima(0.8), noise, VolatilityFn::Exp);
        let mut groups = Vec::new();
        for (j, &n) in ns.iter().enumerate() {
            let mc = McOptions { factor: 20, seed: derive_seed(8, &[k as u64, j as u64]), chunk: n, workers: None };
            let a_n = norm_seq(&m, NormKind::A, n as u64, &mc)?.value;
            let b_n = norm_seq(&m, NormKind::B, n as u64, &mc)?.value;
            let pats = map_indexed(replicates, None, |r| {
                extract_point_pattern(&simulate_sv(&m, n + 2, derive_seed(8, &[k as u64, n as u64, r as u64]))?, a_n, b_n, 2, u)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            groups.push((n, pats));
        }
        let jumps = no_common_jump_test(&groups, u, 0.01)?;
        let boxes = [MarkBox { t0: 0.0, t1: 1.0, coord: 0, lo: u, hi: f64::INFINITY }];
        let rep = poisson_diagnostics(&groups[groups.len() - 1].1, &boxes, None, 0.01)?;
        let d = rep.boxes[0].dispersion;
        let covers = d.is_some_and(|d| d.ci_low <= 1.0 && 1.0 <= d.ci_high);
        ok &= covers && jumps.passed;
        let fr: Vec<String> = jumps.rows.iter().map(|r| format!("{:.4}", r.fraction)).collect();
        let di = d.map_or("n/a".into(), |d| format!("{:.2} [{:.2}, {:.2}]", d.index, d.ci_low, d.ci_high));
        parts.push(format!(
            "{label}: dispersion {di}, multi-exceedance fractions [{}] (decreasing {}, below 0.01 {})",
            fr.join(", "),
            jumps.decreasing,
            jumps.below_bound
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn ac9() -> Result<(bool, String)> {
    let (n, reps, lags) = (1usize << 16, 100u64, 50);
    let mut ok = true;
    let mut parts = Vec::new();
    for hurst in [0.7, 0.9] {
        let spec = LongMemorySpec::fractional_power(hurst, 1000).with_far_past(FarPast::Exact);
        let ma = GaussianEngine::new(&spec, n)?;
        let circ = CirculantEngine::new(&spec, n)?;
        let acfs = |draw: &dyn Fn(u64) -> Vec<f64>| -> Vec<Vec<f64>> {
            let runs: Vec<Vec<f64>> = (0..reps).map(|r| stats::acf(&draw(r), lags)).collect();
            (1..=lags).map(|h| runs.iter().map(|a| a[h]).collect()).collect()
        };
        let a = acfs(&|r| ma.sample(derive_seed(9, &[0, r])).values);
        let b = acfs(&|r| circ.sample(derive_seed(9, &[1, r])).values);
        let zmax = a
            .iter()
            .zip(&b)
            .map(|(x, y)| {
                let se = ((stats::variance(x) + stats::variance(y)) / reps as f64).sqrt();
                ((stats::mean(x) - stats::mean(y)) / se).abs()
            })
            .fold(0.0f64, f64::max);
        let slope = log_covariance_slope(&spec)?;
        let target = 2.0 * hurst - 2.0;
        ok &= zmax < 4.0 && (slope - target).abs() <= 0.03;
        // The ARFIMA law reaches its asymptotic slope much sooner; shown for contrast only.
        let arfima = log_covariance_slope(&LongMemorySpec::arfima(hurst))?;
        parts.push(format!("H={hurst}: max |z| {zmax:.2}, slope {slope:.4} vs {target:.1} (arfima {arfima:.4})"));
    }
    Ok((ok, parts.join("; ")))
}

/// OLS slope of `ln ρ_k` on `ln k` over 41 log-spaced lags in `[10², 10⁴]`.
fn log_covariance_slope(spec: &LongMemorySpec) -> Result<f64> {
    let rho = covariance_sequence(spec, 10_000)?;
    let grid: Vec<usize> = (0..=40).map(|k| (100.0 * 100f64.powf(k as f64 / 40.0)).round() as usize).collect();
    let lx: Vec<f64> = grid.iter().map(|&l| (l as f64).ln()).collect();
    let ly: Vec<f64> = grid.iter().map(|&l| rho[l].ln()).collect();
    Ok(stats::ols(&lx, &ly)?.slope)
}
