use lmsv_core::asymptotics::{classify_regime, norm_seq, regime_map, McOptions, NormKind, Regime, TailMcOptions};
use lmsv_core::error::{Error, Result};
use lmsv_core::estimators::{extract_point_pattern, sample_cov, PointPattern};
use lmsv_core::io::{self, Columns};
use lmsv_core::par::map_indexed;
use lmsv_core::rng::derive_seed;
use lmsv_core::stats;
use lmsv_core::sv_model::{simulate_sv, SvModel};
use lmsv_core::verify::{
    dichotomy_scan, mean_measure, no_common_jump_test, poisson_diagnostics, run_plan, statistic_rank, ExperimentPlan,
    RunOptions, ScanSpec, VerdictStatus,
};
use serde::Serialize;

use crate::config::{CovSection, PathFormat, PointSection, RegimeSection, ScanSection, SimulateSection, VerifySection};
use crate::run::{file_stem, Run};

/// Exit code for a verdict mismatch in `verify`.
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 5;

pub struct Ctx<'a> {
    pub model: Option<&'a SvModel>,
    pub seed: u64,
    pub workers: Option<usize>,
    pub strict: bool,
}

impl Ctx<'_> {
    fn model(&self) -> Result<&SvModel> {
        self.model.ok_or_else(|| Error::InvalidParameter("missing [model] table".into()))
    }

    fn opts(&self) -> RunOptions {
        RunOptions { workers: self.workers }
    }
}

fn f(v: f64) -> String {
    format!("{v:e}")
}

fn regime_name(r: Option<Regime>) -> String {
    r.and_then(|r| serde_json::to_value(r).ok()).and_then(|v| v["kind"].as_str().map(String::from)).unwrap_or_default()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct SimulateSummary {
    n: usize,
    files: Vec<(String, String)>,
    mean_abs_y: f64,
    max_abs_y: f64,
}

pub fn simulate(ctx: &Ctx, sec: &SimulateSection, run: &mut Run) -> Result<i32> {
    let path = simulate_sv(ctx.model()?, sec.n, ctx.seed)?;
    let mut files = Vec::new();
    if matches!(sec.format, PathFormat::Csv | PathFormat::Both) {
        let t = (1..=path.len()).map(|k| k as f64).collect();
        let cols = Columns::new(
            ["i", "x", "sigma", "z", "y"].map(String::from).to_vec(),
            vec![t, path.x.clone(), path.sigma.clone(), path.z.clone(), path.y.clone()],
        )?;
        io::write_csv(&run.path("path.csv"), run.hash(), &cols)?;
        files.push("path.csv".to_string());
    }
    if matches!(sec.format, PathFormat::Binary | PathFormat::Both) {
        io::write_cache(&run.path("path.bin"), &Columns::from_path(&path))?;
        files.push("path.bin".to_string());
    }
    let files = files
        .into_iter()
        .map(|name| {
            let hash = io::sha256_hex(&std::fs::read(run.path(&name))?);
            Ok((name, hash))
        })
        .collect::<Result<Vec<(String, String)>>>()?;
    let abs: Vec<f64> = path.y.iter().map(|y| y.abs()).collect();
    let summary = SimulateSummary { n: sec.n, files, mean_abs_y: stats::mean(&abs), max_abs_y: abs.iter().copied().fold(0.0, f64::max) };
    run.write_json("summary.json", &summary)?;
    Ok(0)
}

pub fn regime(ctx: &Ctx, sec: &RegimeSection, run: &mut Run) -> Result<i32> {
    let model = ctx.model()?;
    let tau = match sec.tau {
        Some(t) => Some(t),
        None => statistic_rank(model, sec.statistic)?,
    };
    let hurst = if model.gaussian.is_long_memory() { model.gaussian.hurst } else { None };
    if !sec.alphas.is_empty() && !sec.hursts.is_empty() {
        let cells = regime_map(sec.statistic, tau, &sec.alphas, &sec.hursts)?;
        let rows: Vec<Vec<String>> = cells
            .iter()
            .map(|c| {
                let regime = if c.regime.is_some() { regime_name(c.regime) } else { "boundary".into() };
                vec![c.alpha.to_string(), c.hurst.to_string(), regime, opt(c.rate_exponent)]
            })
            .collect();
        io::write_csv_rows(&run.path("regime_map.csv"), run.hash(), &["alpha", "hurst", "regime", "rate_exponent"], &rows)?;
    }
    let verdict = classify_regime(sec.statistic, model.noise.alpha(), hurst, tau)?;
    run.write_json("regime.json", &verdict)?;
    println!("{}", serde_json::to_string(&verdict)?);
    Ok(0)
}

#[derive(Serialize)]
struct CovSummary {
    n: usize,
    p: f64,
    replicates: usize,
    gamma_hat_mean: Vec<f64>,
    gamma_hat_se: Vec<f64>,
    gamma_true: Vec<f64>,
}

pub fn cov(ctx: &Ctx, sec: &CovSection, run: &mut Run) -> Result<i32> {
    let model = ctx.model()?;
    if sec.replicates == 0 {
        return Err(Error::InvalidParameter("replicates must be at least 1".into()));
    }
    let reports = map_indexed(sec.replicates, ctx.workers, |r| {
        sample_cov(&simulate_sv(model, sec.n + sec.lags, derive_seed(ctx.seed, &[r as u64]))?, sec.p, sec.lags)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let gamma_true = reports[0].gamma_true.clone();
    let by_lag: Vec<Vec<f64>> = (0..sec.lags).map(|k| reports.iter().map(|r| r.gamma_hat[k]).collect()).collect();
    let mean: Vec<f64> = by_lag.iter().map(|v| stats::mean(v)).collect();
    let se: Vec<f64> = by_lag
        .iter()
        .map(|v| if v.len() > 1 { (stats::variance(v) / v.len() as f64).sqrt() } else { f64::NAN })
        .collect();
    let rows: Vec<Vec<String>> = (0..sec.lags).map(|k| vec![(k + 1).to_string(), f(mean[k]), f(se[k]), f(gamma_true[k])]).collect();
    io::write_csv_rows(&run.path("cov.csv"), run.hash(), &["lag", "gamma_hat", "gamma_hat_se", "gamma_true"], &rows)?;
    let summary = CovSummary { n: sec.n, p: sec.p, replicates: sec.replicates, gamma_hat_mean: mean, gamma_hat_se: se, gamma_true };
    run.write_json("cov.json", &summary)?;
    Ok(0)
}

pub fn scan(ctx: &Ctx, sec: &ScanSection, run: &mut Run) -> Result<i32> {
    let mut template = ExperimentPlan::new(ctx.model()?.clone(), sec.statistic, sec.n_grid.clone(), sec.replicates, ctx.seed);
    template.tolerances = sec.tolerances;
    let spec = ScanSpec {
        template,
        hursts: sec.hursts.clone(),
        couplings: sec.couplings.clone(),
        simulate: sec.simulate,
        boundary_margin: sec.boundary_margin,
    };
    let table = dichotomy_scan(&spec, &ctx.opts())?;
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.coupling.clone(),
                r.hurst.to_string(),
                opt(r.tau),
                opt(r.boundary_hurst),
                regime_name(r.predicted_regime),
                opt(r.predicted_exponent),
                r.excluded.to_string(),
                opt(r.fitted_exponent),
                opt(r.fitted_se),
                opt(r.r2),
                regime_name(r.fitted_regime),
                opt(r.agrees),
            ]
        })
        .collect();
    let header = [
        "coupling",
        "hurst",
        "tau",
        "boundary_hurst",
        "predicted_regime",
        "predicted_exponent",
        "excluded",
        "fitted_exponent",
        "fitted_se",
        "r2",
        "fitted_regime",
        "agrees",
    ];
    io::write_csv_rows(&run.path("scan.csv"), run.hash(), &header, &rows)?;
    run.write_json("scan.json", &table)?;
    Ok(0)
}

#[derive(Serialize)]
struct PlanOutcome {
    name: String,
    status: VerdictStatus,
    verdict_match: bool,
}

pub fn verify(ctx: &Ctx, sec: &VerifySection, run: &mut Run) -> Result<i32> {
    if sec.plans.is_empty() {
        return Err(Error::InvalidParameter("[verify] needs at least one plan".into()));
    }
    let mut outcomes = Vec::new();
    for (k, p) in sec.plans.iter().enumerate() {
        let model = match &p.model {
            Some(m) => m.clone(),
            None => ctx.model()?.clone(),
        };
        let plan = ExperimentPlan {
            model,
            statistic: p.statistic,
            n_grid: p.n_grid.clone(),
            replicates: p.replicates,
            master_seed: derive_seed(ctx.seed, &[k as u64]),
            distance: p.distance,
            affine_fit: p.affine_fit,
            reference: p.reference,
            tolerances: p.tolerances,
            reference_samples: p.reference_samples,
            hermite_n_internal: p.hermite_n_internal,
        };
        let summary = run_plan(&plan, &ctx.opts())?;
        let stem = file_stem(&p.name);
        let rows: Vec<Vec<String>> = summary
            .cells
            .iter()
            .flat_map(|c| c.values.iter().enumerate().map(move |(r, v)| vec![c.n.to_string(), r.to_string(), f(*v)]))
            .collect();
        io::write_csv_rows(&run.path(&format!("verify_{stem}_replicates.csv")), run.hash(), &["n", "replicate", "value"], &rows)?;
        if summary.status == VerdictStatus::Inconclusive {
            run.warn(format!("plan {}: inconclusive ({})", p.name, summary.notes.join("; ")));
        }
        run.write_json(&format!("verify_{stem}.json"), &summary)?;
        outcomes.push(PlanOutcome { name: p.name.clone(), status: summary.status, verdict_match: summary.verdict_match });
    }
    let code = if outcomes.iter().any(|o| o.status == VerdictStatus::Mismatch) {
        EXIT_MISMATCH
    } else if ctx.strict && outcomes.iter().any(|o| o.status == VerdictStatus::Inconclusive) {
        EXIT_INCONCLUSIVE
    } else {
        0
    };
    for o in &outcomes {
        println!("{}: {:?}", o.name, o.status);
    }
    #[derive(Serialize)]
    struct VerifyDoc<'a> {
        plans: &'a [PlanOutcome],
        exit_code: i32,
    }
    run.write_json("verify.json", &VerifyDoc { plans: &outcomes, exit_code: code })?;
    Ok(code)
}

#[derive(Serialize)]
struct NormRow {
    n: usize,
    a_n: f64,
    b_n: f64,
}

pub fn pointprocess(ctx: &Ctx, sec: &PointSection, run: &mut Run) -> Result<i32> {
    let model = ctx.model()?;
    if sec.replicates < 2 {
        return Err(Error::InvalidParameter("pointprocess needs at least two replicates".into()));
    }
    let mut norms = Vec::new();
    let mut groups: Vec<(usize, Vec<PointPattern>)> = Vec::new();
    for (k, &n) in sec.n_grid.iter().enumerate() {
        let mc = McOptions { factor: sec.norm_factor, seed: derive_seed(ctx.seed, &[u64::MAX, k as u64]), chunk: n, workers: ctx.workers };
        let a_n = norm_seq(model, NormKind::A, n as u64, &mc)?.value;
        let b_n = norm_seq(model, NormKind::B, n as u64, &mc)?.value;
        norms.push(NormRow { n, a_n, b_n });
        let pats = map_indexed(sec.replicates, ctx.workers, |r| {
            extract_point_pattern(&simulate_sv(model, n + sec.h, derive_seed(ctx.seed, &[n as u64, r as u64]))?, a_n, b_n, sec.h, sec.u)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        groups.push((n, pats));
    }
    let jumps = no_common_jump_test(&groups, sec.u, sec.bound)?;
    let poisson = match (sec.boxes.is_empty(), groups.last()) {
        (false, Some((_, pats))) => {
            let mut mc = TailMcOptions { seed: derive_seed(ctx.seed, &[u64::MAX - 1]), workers: ctx.workers, ..Default::default() };
            if let Some(d) = sec.tail_draws {
                mc.draws = d;
            }
            let expected = sec.boxes.iter().map(|b| mean_measure(model, b, &mc)).collect::<Result<Vec<_>>>()?;
            Some(poisson_diagnostics(pats, &sec.boxes, Some(&expected), sec.level)?)
        }
        _ => None,
    };
    if let Some(p) = &poisson {
        let rows: Vec<Vec<String>> = p
            .boxes
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let d = b.dispersion;
                vec![
                    k.to_string(),
                    f(b.mean),
                    f(b.variance),
                    opt(d.map(|d| d.index)),
                    opt(d.map(|d| d.ci_low)),
                    opt(d.map(|d| d.ci_high)),
                    opt(b.expected),
                    opt(b.z),
                ]
            })
            .collect();
        let header = ["box", "mean", "variance", "dispersion", "ci_low", "ci_high", "expected", "z"];
        io::write_csv_rows(&run.path("poisson.csv"), run.hash(), &header, &rows)?;
        if p.mean_measure_mismatch {
            run.warn("observed counts contradict the limiting mean measure in at least one box");
        }
    }
    let rows: Vec<Vec<String>> =
        jumps.rows.iter().map(|r| vec![r.n.to_string(), r.points.to_string(), r.multi.to_string(), f(r.fraction)]).collect();
    io::write_csv_rows(&run.path("common_jumps.csv"), run.hash(), &["n", "points", "multi", "fraction"], &rows)?;
    #[derive(Serialize)]
    struct PointDoc<'a, P: Serialize, J: Serialize> {
        norms: &'a [NormRow],
        poisson: &'a P,
        common_jumps: &'a J,
    }
    run.write_json("points.json", &PointDoc { norms: &norms, poisson: &poisson, common_jumps: &jumps })?;
    Ok(0)
}
