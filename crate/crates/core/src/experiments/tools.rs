use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::consistency::default_exponent;
use super::report::{fmt_f64, RunReport, Seeds, Series, Table};
use super::check_version;
use crate::error::{Error, Result};
use crate::estimation::{
    bound_eval, empirical_score, erm_fit, evaluation_grid, rho, separation_exponent_check, vc_lower_bound,
    BoundParams, DEFAULT_REFINEMENT_PASSES, DEFAULT_RHO_GRID,
};
use crate::noisy_choice::{generate_dataset, ChoiceSpace, Dataset, NoiseModel, Preference, Utility};
use crate::wald_env::{Domain, FamilySpec, UtilityFamily, WaldUtility};

fn default_levels() -> u32 {
    DEFAULT_REFINEMENT_PASSES
}

fn default_rho_grid() -> usize {
    DEFAULT_RHO_GRID
}

fn default_lattice() -> usize {
    5
}

fn params_cell(u: &WaldUtility) -> String {
    u.params().iter().map(|p| fmt_f64(*p)).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub version: u32,
    pub seed: u64,
    pub space: ChoiceSpace,
    pub preference: Preference,
    pub noise: NoiseModel,
    pub n: usize,
}

/// Generates a dataset and a per-record utility table.
pub fn run_gen(cfg: &GenConfig) -> Result<(RunReport, Dataset)> {
    check_version(cfg.version)?;
    let ds = generate_dataset(&cfg.space, &cfg.preference, &cfg.noise, cfg.n, cfg.seed)?;
    let mut report = RunReport::new("gen", cfg, Seeds { base: cfg.seed, replicates: vec![] })?;
    let mut table = Table::new("record,u_chosen,u_rejected");
    let mut followed = 0;
    for (i, rec) in ds.records.iter().enumerate() {
        let (a, b) = (cfg.preference.utility(&rec.chosen)?, cfg.preference.utility(&rec.rejected)?);
        followed += (a >= b) as usize;
        table.push(vec![i.to_string(), fmt_f64(a), fmt_f64(b)]);
    }
    report.summary = json!({
        "n": ds.len(),
        "rationalized_by_truth": if ds.is_empty() { 1.0 } else { followed as f64 / ds.len() as f64 },
    });
    report.table = table;
    Ok((report, ds))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub version: u32,
    /// Dataset file; relative paths are resolved against the config file.
    pub dataset: PathBuf,
    pub family: FamilySpec,
    #[serde(default = "default_levels")]
    pub refinement_levels: u32,
    /// When given, `ρ(u_n, truth)` is reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<WaldUtility>,
    #[serde(default = "default_rho_grid")]
    pub rho_grid_per_axis: usize,
}

/// ERM on a dataset; the table lists the score of every grid member.
pub fn run_fit(cfg: &FitConfig, ds: &Dataset) -> Result<RunReport> {
    check_version(cfg.version)?;
    let ChoiceSpace::Domain(domain) = &ds.meta.space else {
        return Err(Error::Config("fit needs a dataset over a Euclidean domain".into()));
    };
    let family = UtilityFamily::new(cfg.family.clone(), domain.dim())?;
    let fit = erm_fit(&family, ds, cfg.refinement_levels)?;
    let mut report = RunReport::new("fit", cfg, Seeds { base: ds.meta.seed, replicates: vec![] })?;
    let mut table = Table::new("member,params,score");
    for (i, u) in family.members().iter().enumerate() {
        table.push(vec![i.to_string(), params_cell(u), fmt_f64(empirical_score(u, ds)?)]);
    }
    let rho_truth = match &cfg.truth {
        Some(t) => Some(rho(&fit.best, t, &evaluation_grid(domain, cfg.rho_grid_per_axis))?),
        None => None,
    };
    report.summary = json!({ "erm": fit, "rho_to_truth": rho_truth });
    report.table = table;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationConfig {
    pub version: u32,
    pub seed: u64,
    pub domain: Domain,
    pub family: FamilySpec,
    pub noise: NoiseModel,
    pub n_pairs: usize,
    pub m: usize,
    /// Defaults to `d` on a box and `2d` on a cone.
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<u32>,
    #[serde(default = "default_rho_grid")]
    pub rho_grid_per_axis: usize,
}

pub fn run_separation(cfg: &SeparationConfig) -> Result<RunReport> {
    check_version(cfg.version)?;
    let family = UtilityFamily::new(cfg.family.clone(), cfg.domain.dim())?;
    let grid = evaluation_grid(&cfg.domain, cfg.rho_grid_per_axis);
    let exponent = cfg.exponent.unwrap_or_else(|| default_exponent(&cfg.domain));
    let sep = separation_exponent_check(&family, &cfg.noise, &cfg.domain, cfg.n_pairs, cfg.m, exponent, cfg.seed, &grid)?;
    let mut report = RunReport::new("separation", cfg, Seeds { base: cfg.seed, replicates: vec![] })?;
    report.notes.push(sep.note.clone());
    let mut table = Table::new("rho,gap,stderr");
    let mut series = Series::new("gap", "rho");
    let mut rows = sep.rows.clone();
    rows.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    for r in &sep.rows {
        table.push(vec![fmt_f64(r.rho), fmt_f64(r.gap), fmt_f64(r.stderr)]);
    }
    for r in &rows {
        series.push(r.rho, &[r.gap])?;
    }
    if sep.violations > 0 {
        report.flags.push(format!("{} pairs have gap + 3 stderr < 0", sep.violations));
    }
    report.summary = json!({
        "exponent": sep.exponent,
        "pairs": sep.rows.len(),
        "skipped": sep.skipped,
        "empirical_c": if sep.rows.is_empty() { None } else { Some(sep.empirical_c) },
        "violations": sep.violations,
        "significant": sep.significant,
        "pass": sep.pass,
        "rows": sep.rows,
    });
    report.series = vec![series];
    report.table = table;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VcConfig {
    pub version: u32,
    pub seed: u64,
    pub domain: Domain,
    pub family: FamilySpec,
    pub k: usize,
    pub trials: usize,
    #[serde(default = "default_lattice")]
    pub lattice_per_axis: usize,
}

pub fn run_vc(cfg: &VcConfig) -> Result<RunReport> {
    check_version(cfg.version)?;
    let family = UtilityFamily::new(cfg.family.clone(), cfg.domain.dim())?;
    let vc = vc_lower_bound(&family, &cfg.domain, cfg.k, cfg.trials, cfg.seed, cfg.lattice_per_axis)?;
    let mut report = RunReport::new("vc", cfg, Seeds { base: cfg.seed, replicates: vec![] })?;
    report.notes.push(
        "A lower bound: random lattice pairs are tested for shattering. A member indifferent on a pair \
realizes both of its labels."
            .to_string(),
    );
    let mut table = Table::new("size,shattered");
    for (i, f) in vc.found.iter().enumerate() {
        table.push(vec![(i + 1).to_string(), f.to_string()]);
    }
    report.summary = json!({ "lower_bound": vc.bound, "witness": vc.witness, "trials_run": vc.trials_run, "grid_size": family.len() });
    report.table = table;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub version: u32,
    pub bound: BoundParams,
    pub n_values: Vec<u64>,
}

pub fn run_bound(cfg: &BoundConfig) -> Result<RunReport> {
    check_version(cfg.version)?;
    cfg.bound.validate()?;
    if cfg.n_values.is_empty() || cfg.n_values.contains(&0) {
        return Err(Error::Config("n_values must be a nonempty list of positive integers".into()));
    }
    let mut ns = cfg.n_values.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut report = RunReport::new("bound", cfg, Seeds { base: 0, replicates: vec![] })?;
    let mut table = Table::new("n,bound");
    let mut series = Series::new("bound", "n");
    for n in ns {
        let b = bound_eval(&cfg.bound, n);
        table.push(vec![n.to_string(), fmt_f64(b)]);
        series.push(n as f64, &[b])?;
    }
    report.series = vec![series];
    report.table = table;
    Ok(report)
}
