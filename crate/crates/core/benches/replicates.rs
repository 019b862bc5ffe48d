use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use lmsv_core::asymptotics::Statistic;
use lmsv_core::gaussian_lm::LongMemorySpec;
use lmsv_core::sv_model::{SvModel, VolatilityFn};
use lmsv_core::tail_laws::{NoiseModel, TailLaw};
use lmsv_core::verify::{replicate_values, ExperimentPlan, RunOptions};

fn replicates(c: &mut Criterion) {
    let model = SvModel {
        gaussian: LongMemorySpec::arfima(0.8),
        noise: NoiseModel::independent(TailLaw::pareto(1.5, 0.5, 1.0)),
        volatility: VolatilityFn::Exp,
    };
    let n = 1 << 12;
    let plan = ExperimentPlan::new(model, Statistic::PartialSumPower { p: 1.0 }, vec![n / 2, n], 64, 1);
    let mut group = c.benchmark_group("replicate_values");
    group.sample_size(10);
    for (name, workers) in [("rayon", None), ("sequential", Some(1))] {
        let opts = RunOptions { workers };
        group.bench_with_input(BenchmarkId::new(name, n), &opts, |b, opts| b.iter(|| replicate_values(&plan, n, opts).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, replicates);
criterion_main!(benches);
