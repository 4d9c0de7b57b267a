use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::{fmt_f64, RunReport, Seeds, Series, Table};
use super::sigma::Truncation;
use super::check_version;
use crate::aa_prefs::{
    act_grid, aggregator_distance, ce_lottery, rep_distance, AAPreference, BernoulliIndex, CostFunction, PrefKind,
    Prior,
};
use crate::error::{Error, Result};
use crate::lotteries::{merged_support, Lottery, LotteryRepr};

fn default_k_max() -> u32 {
    12
}

fn default_ratio() -> f64 {
    0.5
}

fn default_steps() -> u32 {
    8
}

/// A preference sequence `⪰^k` running from `start` (k = 0) to `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceCase {
    pub name: String,
    pub target: AAPreference,
    pub start: AAPreference,
}

/// A lottery sequence `p^k` running from `start` to `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LotteryPath {
    pub target: LotteryRepr,
    pub start: LotteryRepr,
}

/// Sequence members are the mixtures `(1 - t_k)·target + t_k·start` with
/// `t_k = ratio^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub version: u32,
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    /// Resolution of the `[0,1]^S` grid for the aggregator distance.
    #[serde(default = "default_steps")]
    pub aggregator_steps: u32,
    pub rep_grid: Truncation,
    pub cases: Vec<ConvergenceCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lottery: Option<LotteryPath>,
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    (1.0 - t) * a + t * b
}

/// `(1 - t)·u + t·g` on the union of the knots.
pub fn mix_index(u: &BernoulliIndex, g: &BernoulliIndex, t: f64) -> Result<BernoulliIndex> {
    if u.interval() != g.interval() {
        return Err(Error::IntervalMismatch);
    }
    if t == 0.0 {
        return Ok(u.clone());
    }
    let mut knots: Vec<f64> = u.knots().iter().chain(g.knots()).copied().collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let last = knots.len() - 1;
    let values = knots
        .iter()
        .enumerate()
        .map(|(i, &x)| match i {
            0 => 0.0,
            i if i == last => 1.0,
            _ => lerp(u.eval(x), g.eval(x), t),
        })
        .collect();
    BernoulliIndex::new(knots, values)
}

fn mix_prior(p: &Prior, q: &Prior, t: f64) -> Result<Prior> {
    if p.len() != q.len() {
        return Err(Error::ShapeMismatch("priors of different length".into()));
    }
    let w: Vec<f64> = p.weights().iter().zip(q.weights()).map(|(a, b)| lerp(*a, *b, t)).collect();
    let total: f64 = w.iter().sum();
    Prior::new(w.into_iter().map(|x| x / total).collect())
}

/// Mixes two preferences of the same kind: index, priors and costs are
/// interpolated separately.
pub fn mix_preference(target: &AAPreference, start: &AAPreference, t: f64) -> Result<AAPreference> {
    let index = mix_index(target.index(), start.index(), t)?;
    match (target.kind(), start.kind()) {
        (PrefKind::Eu(p), PrefKind::Eu(q)) => AAPreference::eu(mix_prior(p, q, t)?, index),
        (PrefKind::MaxMin(ps), PrefKind::MaxMin(qs)) if ps.len() == qs.len() => {
            AAPreference::maxmin(ps.iter().zip(qs).map(|(p, q)| mix_prior(p, q, t)).collect::<Result<_>>()?, index)
        }
        (PrefKind::Variational(c), PrefKind::Variational(d)) if c.grid() == d.grid() => {
            let costs = c
                .costs()
                .iter()
                .zip(d.costs())
                .map(|(a, b)| if t == 0.0 { *a } else if a.is_infinite() || b.is_infinite() { f64::INFINITY } else { lerp(*a, *b, t) })
                .collect();
            AAPreference::variational(CostFunction::new(c.grid().to_vec(), costs)?, index)
        }
        _ => Err(Error::Config(format!(
            "cannot interpolate a {} preference towards a {} one (kinds, prior counts or cost grids differ)",
            target.kind_name(),
            start.kind_name()
        ))),
    }
}

/// `(1 - t)·p + t·q` on the merged support.
pub fn mix_lottery(p: &Lottery, q: &Lottery, t: f64) -> Result<Lottery> {
    if p.interval() != q.interval() {
        return Err(Error::IntervalMismatch);
    }
    if t == 0.0 {
        return Ok(p.clone());
    }
    let mass = |l: &Lottery, x: f64| l.support().iter().position(|s| *s == x).map_or(0.0, |i| l.probs()[i]);
    let (support, probs): (Vec<f64>, Vec<f64>) = merged_support(p, q)
        .into_iter()
        .map(|x| (x, lerp(mass(p, x), mass(q, x), t)))
        .filter(|(_, m)| *m > 0.0)
        .unzip();
    Lottery::new(p.interval(), support, probs)
}

fn check(cfg: &ConvergenceConfig) -> Result<()> {
    check_version(cfg.version)?;
    if !(cfg.ratio > 0.0 && cfg.ratio < 1.0) {
        return Err(Error::Config(format!("ratio must lie in (0,1), got {}", cfg.ratio)));
    }
    if cfg.cases.is_empty() {
        return Err(Error::Config("at least one case is required".into()));
    }
    Ok(())
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

pub fn run_theorem2_demo(cfg: &ConvergenceConfig) -> Result<RunReport> {
    check(cfg)?;
    let mut report = RunReport::new("theorem2", cfg, Seeds { base: 0, replicates: vec![] })?;
    report.notes.push(
        "Distances between the k-th representation and the target: du is the sup distance of the indices, dV \
the sup distance of the act values over the act grid, dH the sup distance of the aggregators over the \
statewise-utility grid."
            .to_string(),
    );
    let mut table = Table::new("case,k,t,du,dV,dH");
    let mut summary = serde_json::Map::new();
    for case in &cfg.cases {
        let grid = act_grid(
            case.target.n_states(),
            case.target.interval(),
            cfg.rep_grid.denominator_bound,
            cfg.rep_grid.grid_count,
        )?;
        let mut series: Vec<Series> =
            ["du", "dV", "dH"].iter().map(|s| Series::new(&format!("{}/{s}", case.name), "k")).collect();
        let mut columns: [Vec<f64>; 3] = Default::default();
        for k in 0..=cfg.k_max {
            let t = cfg.ratio.powi(k as i32);
            let pref = mix_preference(&case.target, &case.start, t)?;
            let (dv, du) = rep_distance(&pref, &case.target, &grid)?;
            let dh = aggregator_distance(&pref, &case.target, cfg.aggregator_steps)?;
            table.push(vec![case.name.clone(), k.to_string(), fmt_f64(t), fmt_f64(du), fmt_f64(dv), fmt_f64(dh)]);
            for (i, v) in [du, dv, dh].into_iter().enumerate() {
                series[i].push(k as f64, &[v])?;
                columns[i].push(v);
            }
        }
        summary.insert(
            case.name.clone(),
            json!({
                "final": {"du": columns[0].last(), "dV": columns[1].last(), "dH": columns[2].last()},
                "strictly_decreasing": {
                    "du": strictly_decreasing(&columns[0]),
                    "dV": strictly_decreasing(&columns[1]),
                    "dH": strictly_decreasing(&columns[2]),
                },
            }),
        );
        report.series.extend(series);
    }
    report.summary = serde_json::Value::Object(summary);
    report.table = table;
    Ok(report)
}

pub fn run_ce_continuity(cfg: &ConvergenceConfig) -> Result<RunReport> {
    check(cfg)?;
    let path = cfg.lottery.as_ref().ok_or_else(|| Error::Config("ce-continuity needs a \"lottery\" path".into()))?;
    let mut report = RunReport::new("ce-continuity", cfg, Seeds { base: 0, replicates: vec![] })?;
    report.notes.push("Certainty equivalents of p^k under the k-th preference against that of p under the target.".to_string());
    let mut table = Table::new("case,k,t,ce,ce_target,abs_error");
    let mut summary = serde_json::Map::new();
    for case in &cfg.cases {
        let interval = case.target.interval();
        let p = Lottery::from_repr(interval, path.target.clone())?;
        let p0 = Lottery::from_repr(interval, path.start.clone())?;
        let ce_target = ce_lottery(case.target.index(), &p)?;
        let mut series = Series::new(&format!("{}/ce_error", case.name), "k");
        let mut errors = Vec::new();
        for k in 0..=cfg.k_max {
            let t = cfg.ratio.powi(k as i32);
            let pref = mix_preference(&case.target, &case.start, t)?;
            let ce = ce_lottery(pref.index(), &mix_lottery(&p, &p0, t)?)?;
            let err = (ce - ce_target).abs();
            table.push(vec![case.name.clone(), k.to_string(), fmt_f64(t), fmt_f64(ce), fmt_f64(ce_target), fmt_f64(err)]);
            series.push(k as f64, &[err])?;
            errors.push(err);
        }
        summary.insert(
            case.name.clone(),
            json!({"final": errors.last(), "strictly_decreasing": strictly_decreasing(&errors)}),
        );
        report.series.push(series);
    }
    report.summary = serde_json::Value::Object(summary);
    report.table = table;
    Ok(report)
}
