//! Finite-experiment machinery and the sweeps behind every CLI subcommand.
//! Each `run_*` returns a [`RunReport`] whose JSON and CSV are
//! byte-identical across reruns and thread counts.

mod consistency;
mod convergence;
mod grid;
mod nonid;
mod recovery;
mod report;
mod sigma;
mod tools;
mod uniqueness;

use std::path::Path;

use serde::de::DeserializeOwned;

pub use consistency::{default_exponent, run_consistency, BoundSettings, ConsistencyConfig};
pub use convergence::{
    mix_index, mix_lottery, mix_preference, run_ce_continuity, run_theorem2_demo, ConvergenceCase, ConvergenceConfig,
    LotteryPath,
};
pub use grid::EuGridSpec;
pub use nonid::{normalized_shift, run_nonidentification_demo, NonidConfig};
pub use recovery::{
    disagreement_profile, replicate_sigma, run_recovery, survivor_sets, DisagreementSpec, RecoveryConfig,
};
pub use report::{fmt_f64, quantile, render_svg, Cell, RunReport, Seeds, Series, Table, REPORT_FORMAT_VERSION};
pub use sigma::{
    act_universe, build_sigma, choice_set, contained, generated_choices, strongly_rationalizes, weakly_rationalizes,
    ChoiceFunctionData, Chosen, SigmaSequence, Truncation, TIE_TOL,
};
pub use tools::{
    run_bound, run_fit, run_gen, run_separation, run_vc, BoundConfig, FitConfig, GenConfig, SeparationConfig, VcConfig,
};
pub use uniqueness::{run_dense_uniqueness_check, separated, UniquenessConfig};

use crate::error::{Error, Result};
use crate::rng::derive_seed;

pub const CONFIG_VERSION: u32 = 1;

pub(crate) const CLOSED_CONVERGENCE_NOTE: &str = "Closed convergence of preferences is measured through the \
probability that two preferences strictly disagree on a random pair, together with the distance between \
representations.";

pub(crate) fn check_version(version: u32) -> Result<()> {
    if version != CONFIG_VERSION {
        return Err(Error::Config(format!("unsupported config version {version}, expected {CONFIG_VERSION}")));
    }
    Ok(())
}

/// Seed of replicate `r`.
pub fn replicate_seed(base: u64, r: usize) -> u64 {
    derive_seed(base, r as u64)
}

pub fn replicate_seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count).map(|r| replicate_seed(base, r)).collect()
}

/// Reads a JSON config; unknown fields and a wrong version are errors.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) => check_version(v as u32)?,
        None => return Err(Error::Config(format!("{}: missing \"version\" field", path.display()))),
    }
    serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
