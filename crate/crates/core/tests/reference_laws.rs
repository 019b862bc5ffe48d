use lmsv_core::gaussian_lm::LongMemorySpec;
use lmsv_core::reference_laws::*;
use lmsv_core::rng::derive_seed;
use lmsv_core::special::big_phi;
use lmsv_core::stats;
use lmsv_core::sv_model::{SvModel, SvSimulator, VolatilityFn};
use lmsv_core::tail_laws::{NoiseModel, TailLaw};

fn skewness(xs: &[f64]) -> f64 {
    let m = stats::mean(xs);
    let v = stats::variance(xs);
    xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / xs.len() as f64 / v.powf(1.5)
}

fn bowley(xs: &[f64]) -> f64 {
    let s = stats::sorted(xs);
    let (q1, q2, q3) = (stats::quantile_sorted(&s, 0.25), stats::quantile_sorted(&s, 0.5), stats::quantile_sorted(&s, 0.75));
    (q3 + q1 - 2.0 * q2) / (q3 - q1)
}

#[test]
fn stable_tail_slope_matches_index() {
    let law = StableLaw::new(1.5, 0.3);
    let xs: Vec<f64> = stable_sample_vec(&law, 2_000_000, 11).unwrap().iter().map(|x| x.abs()).collect();
    let s = stats::sorted(&xs);
    let n = s.len() as f64;
    // Survival levels 10^-2 .. 10^-3.
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for k in 0..=10 {
        let p = 10f64.powf(-2.0 - k as f64 / 10.0);
        let x = stats::quantile_sorted(&s, 1.0 - p);
        lx.push(x.ln());
        ly.push(((s.len() - s.partition_point(|v| *v <= x)) as f64 / n).ln());
    }
    let slope = stats::ols(&lx, &ly).unwrap().slope;
    assert!((slope + 1.5).abs() < 0.1, "{slope}");
}

#[test]
fn stable_skewness_sign_follows_parameter() {
    for skew in [-0.8, 0.8] {
        let xs = stable_sample_vec(&StableLaw::new(1.5, skew), 500_000, 12).unwrap();
        let x = 20.0;
        let right = xs.iter().filter(|v| **v > x).count() as f64;
        let left = xs.iter().filter(|v| **v < -x).count() as f64;
        assert_eq!(right > left, skew > 0.0, "skew {skew}: right {right}, left {left}");
    }
}

#[test]
fn rank_one_hermite_marginal_is_gaussian_with_fbm_variance() {
    let h = 0.8;
    let sampler = HermiteSampler::new(1, h, 1 << 14).unwrap();
    let xs: Vec<f64> = (0..2000u64).map(|r| sampler.sample_at(&[1.0], derive_seed(3, &[r])).unwrap()[0]).collect();
    let target = 1.0 / (h * (2.0 * h - 1.0));
    let v = stats::variance(&xs);
    assert!((v / target - 1.0).abs() < 3.0 * (2.0 / 2000.0f64).sqrt(), "{v} vs {target}");
    let sd = target.sqrt();
    assert!(stats::ks_one_sample(&xs, |x| big_phi(x / sd)).p_value > 0.01);
    assert!(stats::ad_normality(&xs).p_value > 0.01);
}

#[test]
fn hermite_marginals_are_self_similar() {
    for (tau, h) in [(1u32, 0.75), (2, 0.9)] {
        let sampler = HermiteSampler::new(tau, h, 1 << 14).unwrap();
        let draws: Vec<Vec<f64>> = (0..1500u64).map(|r| sampler.sample_at(&[0.5, 1.0], derive_seed(4, &[r])).unwrap()).collect();
        let half: Vec<f64> = draws.iter().map(|d| d[0]).collect();
        let full: Vec<f64> = draws.iter().map(|d| d[1]).collect();
        let ratio = stats::iqr(&full) / stats::iqr(&half);
        let expect = 2f64.powf(1.0 - tau as f64 * (1.0 - h));
        assert!((ratio / expect - 1.0).abs() < 0.1, "tau={tau}: {ratio} vs {expect}");
    }
}

#[test]
fn rosenblatt_marginal_is_right_skewed_at_every_resolution() {
    let mut skews = Vec::new();
    for e in [16u32, 18] {
        let sampler = HermiteSampler::new(2, 0.9, 1 << e).unwrap();
        let xs: Vec<f64> = (0..400u64).map(|r| sampler.sample_at(&[1.0], derive_seed(5 + e as u64, &[r])).unwrap()[0]).collect();
        let g = skewness(&xs);
        // Gaussian sample skewness has sd sqrt(6/400) ≈ 0.12.
        assert!(g > 0.5, "n_internal=2^{e}: skewness {g}");
        skews.push(bowley(&xs));
    }
    // Moment skewness is too noisy for this heavy right tail; compare the
    // quartile skewness, whose sd here is about 0.05.
    assert!(skews.iter().all(|b| *b > 0.0));
    assert!((skews[0] - skews[1]).abs() < 0.15, "{skews:?}");
}

#[test]
fn long_run_variance_matches_simulated_partial_sums() {
    let spec = LongMemorySpec::exponential(0.5, 50);
    let p = 0.5;
    let lrv = long_run_variance(&spec, &VolatilityFn::Exp, p, 200).unwrap();
    assert!(!lrv.truncation_flag);
    let model = SvModel {
        gaussian: spec,
        noise: NoiseModel::independent(TailLaw::pareto(1.5, 0.5, 1.0)),
        volatility: VolatilityFn::Exp,
    };
    let n = 4096;
    let sim = SvSimulator::new(&model, n).unwrap();
    let sums: Vec<f64> = (0..2000u64)
        .map(|r| sim.sample(derive_seed(6, &[r])).unwrap().sigma.iter().map(|s| s.powf(p)).sum::<f64>())
        .collect();
    let ratio = stats::variance(&sums) / n as f64 / lrv.value;
    assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
}
