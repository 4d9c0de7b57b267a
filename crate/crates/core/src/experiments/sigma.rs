use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::aa_prefs::{act_value, product_acts, AAPreference, Act};
use crate::error::{Error, Result};
use crate::lotteries::{enumerate_rational_lotteries, Interval, DEFAULT_ENUMERATION_CAP};
use crate::rng::StreamRng;

/// Act values closer than this are treated as indifferent.
pub const TIE_TOL: f64 = 1e-12;

/// Truncation level of the rational-lottery universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    pub denominator_bound: u32,
    pub grid_count: usize,
}

/// The `i`-th unordered pair `{i, j}`, `i < j`, in Cantor-diagonal order:
/// by `i + j`, then by `i`.
fn diagonal_pairs(n: usize, k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(k);
    let mut s = 1;
    while out.len() < k && s <= 2 * n.saturating_sub(1) {
        let lo = s.saturating_sub(n - 1);
        let mut i = lo;
        while 2 * i < s && out.len() < k {
            out.push((i, s - i));
            i += 1;
        }
        s += 1;
    }
    out
}

/// A finite prefix of a Σ_∞ sequence: the act universe `B` at a truncation
/// level and its first `k` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSequence {
    pub universe: Vec<Act>,
    pub pairs: Vec<(usize, usize)>,
    pub truncation: Truncation,
}

impl SigmaSequence {
    pub fn total_pairs(&self) -> usize {
        let n = self.universe.len();
        n * n.saturating_sub(1) / 2
    }

    pub fn pair(&self, i: usize) -> (&Act, &Act) {
        let (a, b) = self.pairs[i];
        (&self.universe[a], &self.universe[b])
    }
}

/// All acts whose statewise lotteries lie in the rational-lottery set of
/// the truncation, in lexicographic order.
pub fn act_universe(states: usize, interval: Interval, truncation: Truncation) -> Result<Vec<Act>> {
    let lotteries = enumerate_rational_lotteries(
        interval,
        truncation.denominator_bound,
        truncation.grid_count,
        DEFAULT_ENUMERATION_CAP,
    )?;
    product_acts(&lotteries, states)
}

/// First `k` pairs of the diagonal enumeration over the act universe. With
/// `shuffle`, the universe order is permuted first.
pub fn build_sigma(
    states: usize,
    interval: Interval,
    truncation: Truncation,
    k: usize,
    shuffle: Option<&mut StreamRng>,
) -> Result<SigmaSequence> {
    let mut universe = act_universe(states, interval, truncation)?;
    if let Some(rng) = shuffle {
        universe.shuffle(rng);
    }
    let total = universe.len() * universe.len().saturating_sub(1) / 2;
    if k > total {
        return Err(Error::Config(format!(
            "{k} pairs requested but the truncation only has {total}; raise the truncation level"
        )));
    }
    let pairs = diagonal_pairs(universe.len(), k);
    Ok(SigmaSequence { universe, pairs, truncation })
}

/// `c(B)` for a two-element menu.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chosen {
    First,
    Second,
    Both,
}

/// The maximal elements of `{a, b}` given their values.
pub fn choice_set(va: f64, vb: f64) -> Chosen {
    if (va - vb).abs() <= TIE_TOL {
        Chosen::Both
    } else if va > vb {
        Chosen::First
    } else {
        Chosen::Second
    }
}

/// Whether `observed ⊆ predicted` as subsets of a two-element menu.
pub fn contained(observed: Chosen, predicted: Chosen) -> bool {
    observed == predicted || predicted == Chosen::Both
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceFunctionData {
    pub pairs: Vec<(Act, Act)>,
    pub chosen: Vec<Chosen>,
}

fn predicted(pref: &AAPreference, a: &Act, b: &Act) -> Result<Chosen> {
    Ok(choice_set(act_value(pref, a)?, act_value(pref, b)?))
}

/// The choice function of `pref` on the pairs of `sigma`.
pub fn generated_choices(pref: &AAPreference, sigma: &SigmaSequence) -> Result<ChoiceFunctionData> {
    let mut pairs = Vec::with_capacity(sigma.pairs.len());
    let mut chosen = Vec::with_capacity(sigma.pairs.len());
    for i in 0..sigma.pairs.len() {
        let (a, b) = sigma.pair(i);
        chosen.push(predicted(pref, a, b)?);
        pairs.push((a.clone(), b.clone()));
    }
    Ok(ChoiceFunctionData { pairs, chosen })
}

/// `c(B) = c_⪰(B)` on every pair.
pub fn strongly_rationalizes(pref: &AAPreference, data: &ChoiceFunctionData) -> Result<bool> {
    for ((a, b), c) in data.pairs.iter().zip(&data.chosen) {
        if predicted(pref, a, b)? != *c {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `c(B) ⊆ c_⪰(B)` on every pair.
pub fn weakly_rationalizes(pref: &AAPreference, data: &ChoiceFunctionData) -> Result<bool> {
    for ((a, b), c) in data.pairs.iter().zip(&data.chosen) {
        if !contained(*c, predicted(pref, a, b)?) {
            return Ok(false);
        }
    }
    Ok(true)
}
