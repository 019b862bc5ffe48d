use serde::{Deserialize, Serialize};

use crate::asymptotics::{product_tail_constants, TailMcOptions};
use crate::error::{invalid, Error, Result};
use crate::estimators::PointPattern;
use crate::stats::{self, Dispersion};
use crate::sv_model::SvModel;

/// Boxes with an expected count below this are flagged.
pub const LOW_COUNT: f64 = 5.0;

/// `|z|` above which an observed mean count contradicts the mean measure.
pub const MEAN_MEASURE_Z: f64 = 4.0;

/// `[t0, t1] × (lo, hi]` in mark coordinate `coord` (0 for `Y_i/a_n`,
/// `k ≥ 1` for `Y_i Y_{i+k}/b_n`). The mark interval must avoid zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkBox {
    pub t0: f64,
    pub t1: f64,
    pub coord: usize,
    pub lo: f64,
    pub hi: f64,
}

impl MarkBox {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.t0 && self.t0 < self.t1 && self.t1 <= 1.0) {
            return Err(invalid("box times must satisfy 0 ≤ t0 < t1 ≤ 1"));
        }
        if !(self.lo < self.hi && (self.lo > 0.0 || self.hi < 0.0)) {
            return Err(invalid("box marks need lo < hi, bounded away from zero"));
        }
        Ok(())
    }

    fn contains(&self, t: f64, marks: &[f64]) -> bool {
        let m = marks[self.coord];
        t > self.t0 && t <= self.t1 && m > self.lo && m <= self.hi
    }

    fn count(&self, pattern: &PointPattern) -> usize {
        pattern.points.iter().filter(|p| self.contains(p.t, &p.marks)).count()
    }
}

/// Intensity of the limiting Poisson process on `box`.
pub fn mean_measure(model: &SvModel, b: &MarkBox, mc: &TailMcOptions) -> Result<f64> {
    b.validate()?;
    let alpha = model.noise.alpha();
    let (plus, minus) = if b.coord == 0 {
        let beta = model.noise.tail_balance()?;
        (beta, 1.0 - beta)
    } else {
        let pt = product_tail_constants(model, b.coord, mc)?;
        (pt.d_plus, pt.d_minus)
    };
    let side = |lo: f64, hi: f64| lo.powf(-alpha) - if hi.is_finite() { hi.powf(-alpha) } else { 0.0 };
    let mass = if b.lo > 0.0 { plus * side(b.lo, b.hi) } else { minus * side(-b.hi, -b.lo) };
    Ok(mass * (b.t1 - b.t0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxStats {
    pub mark_box: MarkBox,
    pub mean: f64,
    pub variance: f64,
    pub dispersion: Option<Dispersion>,
    pub expected: Option<f64>,
    /// `(mean − expected) / sqrt(expected / R)`.
    pub z: Option<f64>,
    pub mismatch: bool,
    pub low_count: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxCorrelation {
    pub i: usize,
    pub j: usize,
    pub corr: f64,
    /// `1/sqrt(R)` under independence.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonReport {
    pub replicates: usize,
    pub boxes: Vec<BoxStats>,
    pub correlations: Vec<BoxCorrelation>,
    pub mean_measure_mismatch: bool,
}

/// Counts per box across replicate patterns: dispersion index with a
/// confidence interval at level `1 − level`, comparison with `expected`
/// (one value per box) and pairwise count correlations.
pub fn poisson_diagnostics(patterns: &[PointPattern], boxes: &[MarkBox], expected: Option<&[f64]>, level: f64) -> Result<PoissonReport> {
    let r = patterns.len();
    if r < 2 {
        return Err(Error::InsufficientSample("Poisson diagnostics need at least two patterns".into()));
    }
    if let Some(e) = expected {
        if e.len() != boxes.len() {
            return Err(invalid("one expected count per box"));
        }
    }
    for b in boxes {
        b.validate()?;
        if let Some(p) = patterns.iter().find(|p| b.coord > p.h) {
            return Err(invalid(format!("box coordinate {} beyond pattern lag {}", b.coord, p.h)));
        }
        if let Some(p) = patterns.iter().find(|p| b.lo.abs().min(b.hi.abs()) < p.threshold) {
            log::warn!("box ({}, {}] reaches below the extraction threshold {}; counts are truncated", b.lo, b.hi, p.threshold);
        }
    }
    let counts: Vec<Vec<f64>> = boxes.iter().map(|b| patterns.iter().map(|p| b.count(p) as f64).collect()).collect();
    let mut out = Vec::with_capacity(boxes.len());
    for (k, b) in boxes.iter().enumerate() {
        let c = &counts[k];
        let mean = stats::mean(c);
        let exp = expected.map(|e| e[k]);
        let z = exp.filter(|e| *e > 0.0).map(|e| (mean - e) / (e / r as f64).sqrt());
        let low = exp.unwrap_or(mean) < LOW_COUNT;
        if low {
            log::warn!("box {k} has expected count below {LOW_COUNT}");
        }
        out.push(BoxStats {
            mark_box: *b,
            mean,
            variance: stats::variance(c),
            dispersion: stats::dispersion_index(c, level).ok(),
            expected: exp,
            z,
            mismatch: z.is_some_and(|z| z.abs() > MEAN_MEASURE_Z),
            low_count: low,
        });
    }
    let mut correlations = Vec::new();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            let (a, b) = (&counts[i], &counts[j]);
            let (ma, mb) = (stats::mean(a), stats::mean(b));
            let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (r - 1) as f64;
            let denom = (stats::variance(a) * stats::variance(b)).sqrt();
            let corr = if denom > 0.0 { cov / denom } else { 0.0 };
            correlations.push(BoxCorrelation { i, j, corr, se: 1.0 / (r as f64).sqrt() });
        }
    }
    let mismatch = out.iter().any(|b| b.mismatch);
    Ok(PoissonReport { replicates: r, boxes: out, correlations, mean_measure_mismatch: mismatch })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommonJumpRow {
    pub n: usize,
    pub points: usize,
    pub multi: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoCommonJumpReport {
    pub threshold: f64,
    pub bound: f64,
    pub rows: Vec<CommonJumpRow>,
    pub decreasing: bool,
    pub below_bound: bool,
    pub passed: bool,
}

/// Among points with some mark above `u`, the fraction with two or more such
/// marks, pooled over the replicate patterns of each `n`. Passes when the
/// fraction strictly decreases in `n` and ends below `bound`.
pub fn no_common_jump_test(groups: &[(usize, Vec<PointPattern>)], u: f64, bound: f64) -> Result<NoCommonJumpReport> {
    if groups.is_empty() || groups.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(invalid("pattern groups must have strictly increasing n"));
    }
    let rows: Vec<CommonJumpRow> = groups
        .iter()
        .map(|(n, pats)| {
            let (mut points, mut multi) = (0, 0);
            for p in pats.iter().flat_map(|pat| pat.points.iter()) {
                let k = p.marks.iter().filter(|m| m.abs() > u).count();
                if k >= 1 {
                    points += 1;
                }
                if k >= 2 {
                    multi += 1;
                }
            }
            let fraction = if points > 0 { multi as f64 / points as f64 } else { 0.0 };
            CommonJumpRow { n: *n, points, multi, fraction }
        })
        .collect();
    let decreasing = rows.windows(2).all(|w| w[1].fraction < w[0].fraction);
    let below = rows.last().is_some_and(|r| r.fraction < bound);
    Ok(NoCommonJumpReport { threshold: u, bound, rows, decreasing, below_bound: below, passed: decreasing && below })
}
