use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noisy_choice::{Alternative, ChoiceRecord, Dataset, Utility};
use crate::wald_env::{cmp_params, UtilityFamily, WaldUtility};

/// A point of a parametric family: kind plus parameter vector.
pub type ParamPoint = WaldUtility;

pub const DEFAULT_REFINEMENT_PASSES: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErmResult {
    pub best: ParamPoint,
    pub score: f64,
    /// Number of rationalized records, `score · n`.
    pub count: usize,
    pub n: usize,
    /// Grid members attaining the grid maximum.
    pub ties: usize,
    pub grid_size: usize,
    pub refinement_levels: u32,
    /// Refinement candidates scored in total.
    pub refinement_evaluations: usize,
}

fn rationalized<U: Utility + ?Sized>(u: &U, rec: &ChoiceRecord) -> Result<bool> {
    Ok(u.utility(&rec.chosen)? >= u.utility(&rec.rejected)?)
}

fn count_rationalized<U: Utility + ?Sized>(u: &U, records: &[ChoiceRecord]) -> Result<usize> {
    let mut count = 0;
    for rec in records {
        count += rationalized(u, rec)? as usize;
    }
    Ok(count)
}

/// Fraction of records with `u(chosen) >= u(rejected)`; 1.0 on an empty
/// dataset.
pub fn empirical_score<U: Utility + ?Sized>(u: &U, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Ok(1.0);
    }
    Ok(count_rationalized(u, &ds.records)? as f64 / ds.len() as f64)
}

fn score_all(candidates: &[WaldUtility], records: &[ChoiceRecord]) -> Result<Vec<usize>> {
    candidates.par_iter().map(|u| count_rationalized(u, records)).collect()
}

/// Index of the best count, lexicographically smallest parameters on ties.
fn pick(candidates: &[WaldUtility], counts: &[usize]) -> (usize, usize) {
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut best: Option<usize> = None;
    let mut ties = 0;
    for (i, c) in counts.iter().enumerate() {
        if *c != max {
            continue;
        }
        ties += 1;
        best = match best {
            Some(b) if cmp_params(&candidates[b].params(), &candidates[i].params()).is_le() => Some(b),
            _ => Some(i),
        };
    }
    (best.unwrap_or(0), ties)
}

/// Exhaustive grid search, then `levels` local refinement passes that move
/// only to strictly better neighbours.
pub fn erm_fit(family: &UtilityFamily, ds: &Dataset, levels: u32) -> Result<ErmResult> {
    let members = family.members();
    if members.is_empty() {
        return Err(Error::Empty("parameter grid"));
    }
    if let Some(rec) = ds.records.first() {
        if let Alternative::Act(_) = rec.chosen {
            return Err(Error::ShapeMismatch("ERM over a Euclidean family needs bundle data".into()));
        }
    }
    let counts = score_all(members, &ds.records)?;
    let (idx, ties) = pick(members, &counts);
    let mut best = members[idx].clone();
    let mut count = counts[idx];
    let mut evaluations = 0;
    for level in 1..=levels {
        let neighbors = family.refinement_neighbors(&best, level);
        if neighbors.is_empty() {
            continue;
        }
        evaluations += neighbors.len();
        let counts = score_all(&neighbors, &ds.records)?;
        let (i, _) = pick(&neighbors, &counts);
        if counts[i] > count {
            best = neighbors[i].clone();
            count = counts[i];
        }
    }
    let n = ds.len();
    let score = if n == 0 { 1.0 } else { count as f64 / n as f64 };
    Ok(ErmResult {
        best,
        score,
        count,
        n,
        ties,
        grid_size: members.len(),
        refinement_levels: levels,
        refinement_evaluations: evaluations,
    })
}

/// Sup-norm distance over an evaluation grid.
pub fn rho(u1: &WaldUtility, u2: &WaldUtility, grid: &[Vec<f64>]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Empty("evaluation grid"));
    }
    let mut worst: f64 = 0.0;
    for x in grid {
        worst = worst.max((u1.u_eval(x)? - u2.u_eval(x)?).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noisy_choice::{generate_dataset, ChoiceSpace, DatasetMeta, NoiseModel, Preference};
    use crate::rng::stream;
    use crate::wald_env::{Domain, FamilySpec};
    use proptest::prelude::*;
    use rand::Rng;

    fn linear_family(steps: u32) -> UtilityFamily {
        UtilityFamily::new(FamilySpec::Linear { weight_steps: steps, kappa: None }, 2).unwrap()
    }

    fn dataset(records: Vec<ChoiceRecord>) -> Dataset {
        let u = WaldUtility::linear(vec![0.5, 0.5]).unwrap();
        Dataset {
            meta: DatasetMeta {
                version: 1,
                space: ChoiceSpace::Domain(Domain::unit(2)),
                preference: Preference::Wald(u),
                noise: NoiseModel::Noiseless,
                seed: 0,
                n: records.len(),
            },
            records,
        }
    }

    fn bundle(v: &[f64]) -> Alternative {
        Alternative::Bundle(v.to_vec())
    }

    #[test]
    fn noiseless_data_is_fully_rationalized() {
        let family = linear_family(8);
        let truth = family.members()[3].clone();
        let space = ChoiceSpace::Domain(Domain::unit(2));
        let noise = NoiseModel::Noiseless;
        let ds = generate_dataset(&space, &Preference::Wald(truth.clone()), &noise, 500, 5).unwrap();
        assert_eq!(empirical_score(&truth, &ds).unwrap(), 1.0);
        let fit = erm_fit(&family, &ds, 0).unwrap();
        assert_eq!(fit.score, 1.0);
        assert_eq!(fit.count, 500);
        let winners: Vec<_> = family
            .members()
            .iter()
            .filter(|u| empirical_score(*u, &ds).unwrap() == 1.0)
            .collect();
        assert!(winners.contains(&&truth));
        assert_eq!(fit.ties, winners.len());
    }

    #[test]
    fn empty_and_contradictory_data() {
        let family = linear_family(4);
        let lexmin = family
            .members()
            .iter()
            .min_by(|a, b| cmp_params(&a.params(), &b.params()))
            .unwrap()
            .clone();
        let fit = erm_fit(&family, &dataset(vec![]), 2).unwrap();
        assert_eq!((fit.score, fit.best.clone()), (1.0, lexmin.clone()));

        let (x, y) = (bundle(&[0.9, 0.2]), bundle(&[0.1, 0.7]));
        let ds = dataset(vec![
            ChoiceRecord { chosen: x.clone(), rejected: y.clone() },
            ChoiceRecord { chosen: y, rejected: x },
        ]);
        let strict = WaldUtility::linear(vec![0.75, 0.25]).unwrap();
        assert_eq!(empirical_score(&strict, &ds).unwrap(), 0.5);
        let fit = erm_fit(&family, &ds, 2).unwrap();
        assert_eq!(fit.score, 0.5);
        assert_eq!(fit.best, lexmin);
        assert_eq!(fit.ties, family.len());
    }

    #[test]
    fn refinement_only_moves_on_strict_improvement() {
        // Truth sits between grid points; refinement should find it.
        let family = linear_family(2);
        let truth = WaldUtility::linear(vec![0.25, 0.75]).unwrap();
        let space = ChoiceSpace::Domain(Domain::unit(2));
        let noise = NoiseModel::Noiseless;
        let ds = generate_dataset(&space, &Preference::Wald(truth.clone()), &noise, 400, 9).unwrap();
        let coarse = erm_fit(&family, &ds, 0).unwrap();
        let fine = erm_fit(&family, &ds, 1).unwrap();
        assert!(fine.score > coarse.score);
        assert_eq!(fine.best, truth);
        assert_eq!(fine.score, 1.0);
    }

    #[test]
    fn erm_beats_every_grid_member() {
        let family = UtilityFamily::new(
            FamilySpec::Ces { rho_grid: vec![-1.0, 0.5, 2.0], weight_steps: 5, kappa: None },
            2,
        )
        .unwrap();
        let truth = WaldUtility::ces(vec![0.3, 0.7], 0.5).unwrap();
        let space = ChoiceSpace::Domain(Domain::unit(2));
        let noise = NoiseModel::constant_flip(0.8).unwrap();
        let ds = generate_dataset(&space, &Preference::Wald(truth), &noise, 300, 2).unwrap();
        let fit = erm_fit(&family, &ds, 2).unwrap();
        for u in family.members() {
            assert!(empirical_score(&fit.best, &ds).unwrap() >= empirical_score(u, &ds).unwrap());
        }
        assert_eq!((fit.score * fit.n as f64).round() as usize, fit.count);
        assert_eq!(fit, erm_fit(&family, &ds, 2).unwrap());
    }

    #[test]
    fn rho_examples() {
        let grid = Domain::unit(2).lattice(3);
        let a = WaldUtility::linear(vec![1.0, 0.0]).unwrap();
        let b = WaldUtility::linear(vec![0.0, 1.0]).unwrap();
        assert_eq!(rho(&a, &a, &grid).unwrap(), 0.0);
        assert_eq!(rho(&a, &b, &grid).unwrap(), 1.0);
        let ces = WaldUtility::ces(vec![0.5, 0.5], 2.0).unwrap();
        let lin = WaldUtility::linear(vec![0.5, 0.5]).unwrap();
        assert!(rho(&ces, &lin, &grid).unwrap() >= 0.5f64.sqrt() - 0.5 - 1e-12);
        assert!(rho(&a, &b, &[]).is_err());
    }

    #[test]
    fn score_is_ordinal() {
        // A strictly increasing transform of the utility leaves every term unchanged.
        let u = WaldUtility::cobb_douglas(vec![0.4, 0.6]).unwrap();
        let space = ChoiceSpace::Domain(Domain::unit(2));
        let noise = NoiseModel::constant_flip(0.7).unwrap();
        let ds = generate_dataset(&space, &Preference::Wald(u.clone()), &noise, 200, 3).unwrap();
        for rec in &ds.records {
            let (a, b) = (u.utility(&rec.chosen).unwrap(), u.utility(&rec.rejected).unwrap());
            let g = |t: f64| t.powi(3) + 2.0 * t;
            assert_eq!(a >= b, g(a) >= g(b));
            assert_eq!(a >= b, a.exp() >= b.exp());
        }
    }

    proptest! {
        #[test]
        fn rho_is_a_pseudometric(seed in 0u64..500) {
            let family = linear_family(6);
            let grid = Domain::unit(2).lattice(5);
            let mut rng = stream(seed, 0);
            let mut draw = || family.members()[rng.gen_range(0..family.len())].clone();
            let (a, b, c) = (draw(), draw(), draw());
            let ab = rho(&a, &b, &grid).unwrap();
            prop_assert_eq!(ab, rho(&b, &a, &grid).unwrap());
            prop_assert_eq!(rho(&a, &a, &grid).unwrap(), 0.0);
            prop_assert!(rho(&a, &c, &grid).unwrap() <= ab + rho(&b, &c, &grid).unwrap() + 1e-12);
        }
    }
}
