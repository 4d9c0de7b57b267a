use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::grid::EuGridSpec;
use super::report::{RunReport, Seeds, Series, Table};
use super::sigma::{act_universe, Truncation, TIE_TOL};
use super::check_version;
use crate::aa_prefs::act_value;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessConfig {
    pub version: u32,
    pub candidates: EuGridSpec,
    /// Truncation levels, tried in order.
    pub schedule: Vec<Truncation>,
}

fn ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

/// Whether some acts `a, b` have `vi(a) > vi(b)` and `vj(b) > vj(a)`, both
/// beyond the tie tolerance. `order_i` sorts the acts by `vi`.
fn separated_sorted(vi: &[f64], vj: &[f64], order_i: &[usize]) -> bool {
    let mut prefix = 0;
    let mut best = f64::NEG_INFINITY;
    for &p in order_i {
        while prefix < order_i.len() && vi[order_i[prefix]] < vi[p] - TIE_TOL {
            best = best.max(vj[order_i[prefix]]);
            prefix += 1;
        }
        if best > vj[p] + TIE_TOL {
            return true;
        }
    }
    false
}

/// Strict disagreement of two value profiles on a common set of acts.
pub fn separated(vi: &[f64], vj: &[f64]) -> bool {
    separated_sorted(vi, vj, &ascending(vi))
}

pub fn run_dense_uniqueness_check(cfg: &UniquenessConfig) -> Result<RunReport> {
    check_version(cfg.version)?;
    if cfg.schedule.is_empty() {
        return Err(Error::Config("truncation schedule must not be empty".into()));
    }
    let members = cfg.candidates.members()?;
    let interval = members[0].interval();
    let mut pending: Vec<(usize, usize)> = Vec::new();
    let mut identical = 0;
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            if members[i] == members[j] {
                identical += 1;
            } else {
                pending.push((i, j));
            }
        }
    }
    let total = pending.len();
    let mut level_of: Vec<((usize, usize), usize)> = Vec::with_capacity(total);
    let mut per_level = Vec::with_capacity(cfg.schedule.len());
    for (level, trunc) in cfg.schedule.iter().enumerate() {
        let universe = act_universe(cfg.candidates.states, interval, *trunc)?;
        let values: Vec<Vec<f64>> = members
            .par_iter()
            .map(|m| universe.iter().map(|f| act_value(m, f)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let orders: Vec<Vec<usize>> = values.par_iter().map(|v| ascending(v)).collect();
        let hit: Vec<bool> = pending.par_iter().map(|&(i, j)| separated_sorted(&values[i], &values[j], &orders[i])).collect();
        let mut rest = Vec::with_capacity(pending.len());
        let mut count = 0;
        for (pair, h) in pending.into_iter().zip(hit) {
            if h {
                level_of.push((pair, level));
                count += 1;
            } else {
                rest.push(pair);
            }
        }
        per_level.push((universe.len(), count));
        pending = rest;
    }
    level_of.sort_unstable();

    let mut report = RunReport::new("uniqueness", cfg, Seeds { base: 0, replicates: vec![] })?;
    report.notes.push(
        "For every pair of distinct grid members, the first truncation level whose act universe contains a \
pair of acts they rank strictly in opposite directions."
            .to_string(),
    );
    let mut table = Table::new("first,second,level");
    for ((i, j), level) in &level_of {
        table.push(vec![i.to_string(), j.to_string(), level.to_string()]);
    }
    for (i, j) in &pending {
        table.push(vec![i.to_string(), j.to_string(), "none".to_string()]);
        report.flags.push(format!("members {i} and {j} are not separated within the schedule"));
    }
    let mut series = Series::new("separated_fraction", "level");
    let mut cumulative = 0;
    for (level, (_, count)) in per_level.iter().enumerate() {
        cumulative += count;
        series.push(level as f64, &[if total == 0 { 1.0 } else { cumulative as f64 / total as f64 }])?;
    }
    report.summary = json!({
        "grid_size": members.len(),
        "pairs": total,
        "skipped_identical": identical,
        "unseparated": pending.len(),
        "max_level": level_of.iter().map(|(_, l)| *l).max(),
        "separated_per_level": per_level.iter().map(|(_, c)| *c).collect::<Vec<_>>(),
        "universe_sizes": per_level.iter().map(|(n, _)| *n).collect::<Vec<_>>(),
    });
    report.series = vec![series];
    report.table = table;
    Ok(report)
}
