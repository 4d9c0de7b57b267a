use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::grid::EuGridSpec;
use super::report::{fmt_f64, RunReport, Seeds, Series, Table};
use super::sigma::{build_sigma, choice_set, SigmaSequence, Truncation};
use super::{check_version, replicate_seed, replicate_seeds, CLOSED_CONVERGENCE_NOTE};
use crate::aa_prefs::{act_grid, act_value, rep_distance, AAPreference};
use crate::error::{Error, Result};
use crate::estimation::pairwise_sum;
use crate::noisy_choice::{sample_problem, ActSpace, Alternative, ChoiceSpace, Utility};
use crate::rng::{derive_seed, stream};

const DISAGREEMENT_TAG: u64 = 0xd15a;

fn default_replicates() -> usize {
    3
}

/// Monte Carlo settings for the strict-disagreement proxy on random acts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisagreementSpec {
    pub samples: usize,
    pub support_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryConfig {
    pub version: u32,
    pub seed: u64,
    pub truth: AAPreference,
    pub candidates: EuGridSpec,
    pub truncation: Truncation,
    pub k_values: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub disagreement: DisagreementSpec,
    /// Act grid for the representation distance.
    pub rep_grid: Truncation,
}

/// Strict-disagreement probability of each candidate against `truth`, all on
/// the same `m` act pairs. Matches `estimation::disagreement` with the same
/// space and seed.
pub fn disagreement_profile(
    truth: &AAPreference,
    candidates: &[AAPreference],
    space: &ChoiceSpace,
    m: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::Config("disagreement needs at least one sample".into()));
    }
    let pairs: Vec<(Alternative, Alternative)> =
        (0..m).into_par_iter().map(|i| sample_problem(space, &mut stream(seed, i as u64))).collect::<Result<_>>()?;
    let truth_diff: Vec<f64> =
        pairs.par_iter().map(|(x, y)| Ok(truth.utility(x)? - truth.utility(y)?)).collect::<Result<_>>()?;
    candidates
        .par_iter()
        .map(|c| {
            let mut terms = Vec::with_capacity(m);
            for ((x, y), t) in pairs.iter().zip(&truth_diff) {
                let d = c.utility(x)? - c.utility(y)?;
                terms.push(((d > 0.0 && *t < 0.0) || (d < 0.0 && *t > 0.0)) as u8 as f64);
            }
            Ok(pairwise_sum(&terms) / m as f64)
        })
        .collect()
}

/// Surviving candidate indices after each requested `k`: the candidates
/// whose choice sets equal the truth's on the first `k` pairs.
pub fn survivor_sets(
    truth: &AAPreference,
    candidates: &[AAPreference],
    sigma: &SigmaSequence,
    k_values: &[usize],
) -> Result<Vec<Vec<usize>>> {
    let values = |pref: &AAPreference| -> Result<Vec<f64>> { sigma.universe.iter().map(|f| act_value(pref, f)).collect() };
    let truth_values = values(truth)?;
    let cand_values: Vec<Vec<f64>> = candidates.par_iter().map(values).collect::<Result<_>>()?;
    let mut alive: Vec<usize> = (0..candidates.len()).collect();
    let mut out = Vec::with_capacity(k_values.len());
    let mut done = 0;
    for &k in k_values {
        for &(a, b) in &sigma.pairs[done..k] {
            let observed = choice_set(truth_values[a], truth_values[b]);
            alive.retain(|&c| choice_set(cand_values[c][a], cand_values[c][b]) == observed);
        }
        done = k;
        out.push(alive.clone());
    }
    Ok(out)
}

fn sorted_k(k_values: &[usize]) -> Result<Vec<usize>> {
    let mut ks = k_values.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::Config("k_values must not be empty".into()));
    }
    Ok(ks)
}

/// The Σ sequence of replicate `r`: canonical order for `r = 0`, a seeded
/// permutation of the universe otherwise.
pub fn replicate_sigma(cfg: &RecoveryConfig, replicate: usize) -> Result<SigmaSequence> {
    let ks = sorted_k(&cfg.k_values)?;
    let k_max = *ks.last().unwrap();
    let interval = cfg.truth.interval();
    if replicate == 0 {
        build_sigma(cfg.truth.n_states(), interval, cfg.truncation, k_max, None)
    } else {
        let mut rng = stream(replicate_seed(cfg.seed, replicate), 0);
        build_sigma(cfg.truth.n_states(), interval, cfg.truncation, k_max, Some(&mut rng))
    }
}

pub fn run_recovery(cfg: &RecoveryConfig) -> Result<RunReport> {
    check_version(cfg.version)?;
    if cfg.replicates == 0 {
        return Err(Error::Config("replicates must be at least 1".into()));
    }
    let ks = sorted_k(&cfg.k_values)?;
    let candidates = cfg.candidates.members()?;
    if candidates.iter().any(|c| c.n_states() != cfg.truth.n_states() || c.interval() != cfg.truth.interval()) {
        return Err(Error::Config("candidate grid and truth must share states and money interval".into()));
    }
    let truth_on_grid = candidates.contains(&cfg.truth);

    let space = ChoiceSpace::Acts(ActSpace::new(
        cfg.truth.n_states(),
        cfg.truth.interval(),
        cfg.disagreement.support_size,
    )?);
    let mc_seed = derive_seed(cfg.seed, DISAGREEMENT_TAG);
    let disagreement = disagreement_profile(&cfg.truth, &candidates, &space, cfg.disagreement.samples, mc_seed)?;
    let grid = act_grid(
        cfg.truth.n_states(),
        cfg.truth.interval(),
        cfg.rep_grid.denominator_bound,
        cfg.rep_grid.grid_count,
    )?;
    let rep: Vec<(f64, f64)> = candidates.par_iter().map(|c| rep_distance(c, &cfg.truth, &grid)).collect::<Result<_>>()?;

    let seeds = replicate_seeds(cfg.seed, cfg.replicates);
    let per_replicate: Vec<(usize, Vec<Vec<usize>>)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let sigma = replicate_sigma(cfg, r)?;
            Ok((sigma.universe.len(), survivor_sets(&cfg.truth, &candidates, &sigma, &ks)?))
        })
        .collect::<Result<_>>()?;

    let mut report = RunReport::new("recovery", cfg, Seeds { base: cfg.seed, replicates: seeds })?;
    report.notes.push(CLOSED_CONVERGENCE_NOTE.to_string());
    report.notes.push(
        "Pairs follow the Cantor-diagonal enumeration over the lexicographically ordered act universe; \
replicates other than 0 permute the universe before enumerating. Choices are noiseless."
            .to_string(),
    );
    let mut table = Table::new("replicate,k,survivors,max_disagreement,max_rep_dV,max_rep_du");
    let mut s_count = Series::new("survivors", "k");
    let mut s_dis = Series::new("max_disagreement", "k");
    let mut s_dv = Series::new("max_rep_dV", "k");
    let mut s_du = Series::new("max_rep_du", "k");
    let mut nesting = true;
    for (ki, &k) in ks.iter().enumerate() {
        let (mut counts, mut dis, mut dv, mut du) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (r, (_, sets)) in per_replicate.iter().enumerate() {
            let alive = &sets[ki];
            if ki > 0 && !alive.iter().all(|c| sets[ki - 1].binary_search(c).is_ok()) {
                nesting = false;
            }
            if alive.is_empty() {
                report.flags.push(format!("replicate {r}: no candidate strongly rationalizes the first {k} pairs"));
            }
            let worst = |f: &dyn Fn(usize) -> f64| alive.iter().map(|&c| f(c)).fold(0.0, f64::max);
            let row = (alive.len() as f64, worst(&|c| disagreement[c]), worst(&|c| rep[c].0), worst(&|c| rep[c].1));
            table.push(vec![r.to_string(), k.to_string(), alive.len().to_string(), fmt_f64(row.1), fmt_f64(row.2), fmt_f64(row.3)]);
            counts.push(row.0);
            dis.push(row.1);
            dv.push(row.2);
            du.push(row.3);
        }
        s_count.push(k as f64, &counts)?;
        s_dis.push(k as f64, &dis)?;
        s_dv.push(k as f64, &dv)?;
        s_du.push(k as f64, &du)?;
    }
    if !truth_on_grid {
        report.flags.push("true preference is not a member of the candidate grid".to_string());
    }
    let medians = s_dis.medians();
    report.summary = json!({
        "grid_size": candidates.len(),
        "truth_on_grid": truth_on_grid,
        "universe_size": per_replicate[0].0,
        "grid_diameter": disagreement.iter().copied().fold(0.0, f64::max),
        "nesting_holds": nesting,
        "max_disagreement_weakly_decreasing": medians.windows(2).all(|w| w[1] <= w[0]),
    });
    report.series = vec![s_dis, s_dv, s_du, s_count];
    report.table = table;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::disagreement;
    use crate::experiments::sigma::{generated_choices, strongly_rationalizes};

    fn small_config() -> RecoveryConfig {
        serde_json::from_value(json!({
            "version": 1,
            "seed": 7,
            "truth": {"kind": "eu", "states": 2, "priors": [[0.5, 0.5]], "index": {"knots": [0, 0.5, 1], "values": [0, 0.75, 1]}},
            "candidates": {"states": 2, "prior_steps": 4, "knots": [0, 0.5, 1], "value_steps": 8},
            "truncation": {"denominator_bound": 2, "grid_count": 3},
            "k_values": [0, 5, 20, 60],
            "replicates": 2,
            "disagreement": {"samples": 500, "support_size": 2},
            "rep_grid": {"denominator_bound": 1, "grid_count": 3}
        }))
        .unwrap()
    }

    #[test]
    fn profile_matches_estimator() {
        let cfg = small_config();
        let cands = cfg.candidates.members().unwrap();
        let space = ChoiceSpace::Acts(ActSpace::new(2, cfg.truth.interval(), 2).unwrap());
        let prof = disagreement_profile(&cfg.truth, &cands[..4], &space, 300, 3).unwrap();
        for (c, p) in cands[..4].iter().zip(&prof) {
            assert_eq!(*p, disagreement(c, &cfg.truth, &space, 300, 3).unwrap().estimate);
        }
    }

    #[test]
    fn survivors_agree_with_rationalization_check() {
        let cfg = small_config();
        let cands = cfg.candidates.members().unwrap();
        let sigma = replicate_sigma(&cfg, 1).unwrap();
        let sets = survivor_sets(&cfg.truth, &cands, &sigma, &[0, 5, 20, 60]).unwrap();
        assert_eq!(sets[0].len(), cands.len());
        for (set, k) in sets.iter().zip([0, 5, 20, 60]) {
            let prefix = SigmaSequence { pairs: sigma.pairs[..k].to_vec(), ..sigma.clone() };
            let data = generated_choices(&cfg.truth, &prefix).unwrap();
            let direct: Vec<usize> = (0..cands.len()).filter(|&c| strongly_rationalizes(&cands[c], &data).unwrap()).collect();
            assert_eq!(set, &direct);
        }
        for w in sets.windows(2) {
            assert!(w[1].iter().all(|c| w[0].contains(c)));
        }
    }

    #[test]
    fn report_contract() {
        let cfg = small_config();
        let r = run_recovery(&cfg).unwrap();
        assert_eq!(r.summary["truth_on_grid"], true);
        assert_eq!(r.summary["nesting_holds"], true);
        let dis = r.series("max_disagreement").unwrap();
        // k = 0 keeps every candidate, so the worst survivor is the grid diameter.
        assert_eq!(dis.cells[0].q50, r.summary["grid_diameter"].as_f64().unwrap());
        assert!(dis.medians().windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.table.rows.len(), 4 * 2);
        assert!(r.flags.is_empty());
        assert_eq!(r, run_recovery(&cfg).unwrap());
    }
}
