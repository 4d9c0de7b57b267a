use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};
use crate::wald_env::{Domain, UtilityFamily, WaldUtility};

/// Largest admissible `k · 2^k · grid size` for the search.
pub const VC_BUDGET: u128 = 1 << 34;

/// Attempts at drawing one informative lattice pair before giving up.
const PAIR_ATTEMPTS: usize = 10_000;

pub type BundlePair = (Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VcResult {
    pub bound: usize,
    /// A shattered set of size `bound`.
    pub witness: Vec<BundlePair>,
    /// Entry `s - 1` tells whether a shattered set of size `s` was found.
    pub found: Vec<bool>,
    pub trials_run: usize,
}

/// Whether every labeling of the pairs is perfectly rationalized by some
/// member. Label 1 on pair `(x, y)` means `x` was chosen; a member
/// rationalizes it when `u(x) >= u(y)`, so ties realize both labels.
pub fn shatters(members: &[WaldUtility], pairs: &[BundlePair]) -> Result<bool> {
    let k = pairs.len();
    if k > 24 {
        return Err(Error::Config(format!("cannot enumerate labelings of {k} pairs")));
    }
    let mut realized = vec![false; 1usize << k];
    for u in members {
        let mut strict = 0usize;
        let mut tied = 0usize;
        for (i, (x, y)) in pairs.iter().enumerate() {
            let (a, b) = (u.u_eval(x)?, u.u_eval(y)?);
            if a > b {
                strict |= 1 << i;
            } else if a == b {
                tied |= 1 << i;
            }
        }
        // Every labeling agreeing with `strict` outside the tied bits.
        let mut sub = tied;
        loop {
            realized[strict | sub] = true;
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & tied;
        }
    }
    Ok(realized.into_iter().all(|r| r))
}

fn informative(members: &[WaldUtility], x: &[f64], y: &[f64]) -> Result<bool> {
    for u in members {
        if u.u_eval(x)? != u.u_eval(y)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Random search for shattered sets of lattice pairs. Pairs on which every
/// member is indifferent are never drawn, so a single preference shatters
/// nothing.
pub fn vc_lower_bound(
    family: &UtilityFamily,
    domain: &Domain,
    k: usize,
    trials: usize,
    seed: u64,
    per_axis: usize,
) -> Result<VcResult> {
    if k == 0 || trials == 0 {
        return Err(Error::Config("VC search needs k >= 1 and trials >= 1".into()));
    }
    let members = family.members();
    let work = (k as u128).saturating_mul(1u128 << k.min(100)).saturating_mul(members.len() as u128);
    if k > 24 || work > VC_BUDGET {
        return Err(Error::EnumerationCap { count: work, cap: VC_BUDGET as usize });
    }
    let lattice = domain.lattice(per_axis);
    if lattice.len() < 2 {
        return Err(Error::InvalidDomain("lattice has fewer than two points".into()));
    }
    let mut result = VcResult { bound: 0, witness: Vec::new(), found: vec![false; k], trials_run: 0 };
    for size in 1..=k {
        for t in 0..trials {
            result.trials_run += 1;
            let mut rng = stream(derive_seed(seed, size as u64), t as u64);
            let mut pairs = Vec::with_capacity(size);
            for _ in 0..size {
                let mut found = None;
                for _ in 0..PAIR_ATTEMPTS {
                    let x = lattice.choose(&mut rng).expect("nonempty lattice");
                    let y = lattice.choose(&mut rng).expect("nonempty lattice");
                    if x != y && informative(members, x, y)? {
                        found = Some((x.clone(), y.clone()));
                        break;
                    }
                }
                match found {
                    Some(p) => pairs.push(p),
                    None => return Ok(result),
                }
            }
            if shatters(members, &pairs)? {
                result.bound = size;
                result.witness = pairs;
                result.found[size - 1] = true;
                break;
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::empirical_score;
    use crate::noisy_choice::{Alternative, ChoiceRecord, ChoiceSpace, Dataset, DatasetMeta, NoiseModel, Preference};
    use crate::wald_env::FamilySpec;

    fn linear(steps: u32) -> UtilityFamily {
        UtilityFamily::new(FamilySpec::Linear { weight_steps: steps, kappa: None }, 2).unwrap()
    }

    /// Brute force: build the ordered dataset of each labeling and look for
    /// a member scoring 1.0.
    fn shatters_by_scoring(members: &[WaldUtility], pairs: &[BundlePair]) -> bool {
        (0..1usize << pairs.len()).all(|labels| {
            let records = pairs
                .iter()
                .enumerate()
                .map(|(i, (x, y))| {
                    let (x, y) = (Alternative::Bundle(x.clone()), Alternative::Bundle(y.clone()));
                    if labels >> i & 1 == 1 {
                        ChoiceRecord { chosen: x, rejected: y }
                    } else {
                        ChoiceRecord { chosen: y, rejected: x }
                    }
                })
                .collect::<Vec<_>>();
            let ds = Dataset {
                meta: DatasetMeta {
                    version: 1,
                    space: ChoiceSpace::Domain(Domain::unit(2)),
                    preference: Preference::Wald(members[0].clone()),
                    noise: NoiseModel::Noiseless,
                    seed: 0,
                    n: records.len(),
                },
                records,
            };
            members.iter().any(|u| empirical_score(u, &ds).unwrap() == 1.0)
        })
    }

    #[test]
    fn explicit_witnesses() {
        let fam = linear(4);
        let one = vec![(vec![1.0, 0.0], vec![0.0, 1.0])];
        assert!(shatters(fam.members(), &one).unwrap());
        assert!(shatters_by_scoring(fam.members(), &one));
        // Both pairs are tied at equal weights.
        let two = vec![(vec![1.0, 0.0], vec![0.0, 1.0]), (vec![0.0, 0.5], vec![0.5, 0.0])];
        assert!(shatters(fam.members(), &two).unwrap());
        assert!(shatters_by_scoring(fam.members(), &two));
        let strict = vec![(vec![1.0, 1.0], vec![0.0, 0.0])];
        assert!(!shatters(fam.members(), &strict).unwrap());
        assert!(!shatters_by_scoring(fam.members(), &strict));
    }

    #[test]
    fn mask_enumeration_agrees_with_scoring() {
        let fam = linear(4);
        let lattice = Domain::unit(2).lattice(3);
        let mut rng = stream(11, 0);
        for _ in 0..200 {
            let pairs: Vec<_> = (0..3)
                .map(|_| (lattice.choose(&mut rng).unwrap().clone(), lattice.choose(&mut rng).unwrap().clone()))
                .collect();
            assert_eq!(shatters(fam.members(), &pairs).unwrap(), shatters_by_scoring(fam.members(), &pairs));
        }
    }

    #[test]
    fn search_bounds() {
        let domain = Domain::unit(2);
        let single = UtilityFamily::new(
            FamilySpec::Explicit { members: vec![WaldUtility::linear(vec![0.3, 0.7]).unwrap()] },
            2,
        )
        .unwrap();
        assert_eq!(vc_lower_bound(&single, &domain, 3, 50, 1, 5).unwrap().bound, 0);
        let fam = linear(4);
        assert!(vc_lower_bound(&fam, &domain, 1, 50, 1, 5).unwrap().bound >= 1);
        let r = vc_lower_bound(&fam, &domain, 2, 200, 1, 5).unwrap();
        assert!(r.bound >= 2, "{r:?}");
        assert!(shatters_by_scoring(fam.members(), &r.witness));
    }

    #[test]
    fn budget_guard() {
        let fam = linear(4);
        assert!(matches!(
            vc_lower_bound(&fam, &Domain::unit(2), 40, 1, 1, 5),
            Err(Error::EnumerationCap { .. })
        ));
    }
}
