//! Finite-support monetary lotteries, first-order stochastic dominance and
//! the FOSD lattice.
//!
//! A lottery keeps its cumulative distribution alongside the atom masses.
//! Lattice operations build their result directly from CDF values (pointwise
//! min for the join, pointwise max for the meet), so the CDF of a join is
//! bit-for-bit the minimum of the operands' CDFs.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance used when comparing probabilities.
pub const PROB_TOL: f64 = 1e-12;

/// Default cap on the size of a rational-lottery enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 2_000_000;

/// A closed money interval `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInterval { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn unit() -> Self {
        Self { a: 0.0, b: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.a
    }

    pub fn hi(&self) -> f64 {
        self.b
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }

    /// `count` evenly spaced points from `a` to `b`, endpoints exact.
    pub fn grid(&self, count: usize) -> Vec<f64> {
        match count {
            0 => Vec::new(),
            1 => vec![self.a],
            _ => (0..count)
                .map(|j| {
                    if j + 1 == count {
                        self.b
                    } else {
                        self.a + (self.b - self.a) * j as f64 / (count - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

/// Outcome of comparing two lotteries (or acts) under FOSD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DominanceVerdict {
    Equal,
    Dominates,
    StrictlyDominates,
    DominatedBy,
    StrictlyDominatedBy,
    Incomparable,
}

impl DominanceVerdict {
    /// The verdict with the arguments swapped.
    pub fn flip(self) -> Self {
        use DominanceVerdict::*;
        match self {
            Equal => Equal,
            Dominates => DominatedBy,
            StrictlyDominates => StrictlyDominatedBy,
            DominatedBy => Dominates,
            StrictlyDominatedBy => StrictlyDominates,
            Incomparable => Incomparable,
        }
    }

    /// True for `Equal`, `Dominates` and `StrictlyDominates`.
    pub fn weakly_dominates(self) -> bool {
        matches!(
            self,
            DominanceVerdict::Equal | DominanceVerdict::Dominates | DominanceVerdict::StrictlyDominates
        )
    }
}

/// A probability distribution with finitely many atoms in an [`Interval`].
#[derive(Debug, Clone)]
pub struct Lottery {
    interval: Interval,
    support: Vec<f64>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

/// Wire form of a lottery: `{"support": [...], "probs": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LotteryRepr {
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Serialize for Lottery {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        LotteryRepr { support: self.support.clone(), probs: self.probs.clone() }.serialize(serializer)
    }
}

impl PartialEq for Lottery {
    /// Representation equality: same interval, atoms and masses.
    fn eq(&self, other: &Self) -> bool {
        self.interval == other.interval && self.support == other.support && self.probs == other.probs
    }
}

impl Lottery {
    pub fn new(interval: Interval, support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidLottery("empty support".into()));
        }
        if support.len() != probs.len() {
            return Err(Error::InvalidLottery(format!(
                "{} support points but {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        if let Some(x) = support.iter().find(|x| !interval.contains(**x)) {
            return Err(Error::InvalidLottery(format!(
                "support point {x} outside [{}, {}]",
                interval.lo(),
                interval.hi()
            )));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidLottery("support must be strictly increasing".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidLottery("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidLottery(format!("probabilities sum to {total}, not 1")));
        }
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc.min(1.0));
        }
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self { interval, support, probs, cdf })
    }

    pub fn from_repr(interval: Interval, repr: LotteryRepr) -> Result<Self> {
        Self::new(interval, repr.support, repr.probs)
    }

    /// The point mass at `x`.
    pub fn degenerate(interval: Interval, x: f64) -> Result<Self> {
        Self::new(interval, vec![x], vec![1.0])
    }

    /// Builds a lottery from CDF values on sorted points, dropping atoms of
    /// zero mass. The stored CDF values are the given ones, untouched.
    fn from_cdf(interval: Interval, points: &[f64], values: &[f64]) -> Self {
        let mut support = Vec::new();
        let mut probs = Vec::new();
        let mut cdf = Vec::new();
        let mut prev = 0.0;
        for (&x, &f) in points.iter().zip(values) {
            if f > prev {
                support.push(x);
                probs.push(f - prev);
                cdf.push(f);
                prev = f;
            }
        }
        Self { interval, support, probs, cdf }
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn is_degenerate(&self) -> bool {
        self.cdf.first() == Some(&1.0)
    }

    /// `P[X <= r]`, right-continuous.
    pub fn cdf_eval(&self, r: f64) -> f64 {
        let idx = self.support.partition_point(|&x| x <= r);
        if idx == 0 {
            0.0
        } else {
            self.cdf[idx - 1]
        }
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(x, p)| x * p).sum()
    }

    fn check_interval(&self, other: &Lottery) -> Result<()> {
        if self.interval != other.interval {
            return Err(Error::IntervalMismatch);
        }
        Ok(())
    }
}

/// Sorted union of the two supports.
pub fn merged_support(p: &Lottery, q: &Lottery) -> Vec<f64> {
    let mut points: Vec<f64> = p.support.iter().chain(&q.support).copied().collect();
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();
    points
}

/// First-order stochastic dominance of `p` over `q`, via CDFs on the merged
/// support (the CDFs are constant between support points).
pub fn fosd_compare(p: &Lottery, q: &Lottery) -> Result<DominanceVerdict> {
    p.check_interval(q)?;
    let mut p_below = false;
    let mut q_below = false;
    for r in merged_support(p, q) {
        let diff = p.cdf_eval(r) - q.cdf_eval(r);
        if diff < -PROB_TOL {
            p_below = true;
        } else if diff > PROB_TOL {
            q_below = true;
        }
    }
    Ok(match (p_below, q_below) {
        (false, false) => DominanceVerdict::Equal,
        (true, false) => DominanceVerdict::StrictlyDominates,
        (false, true) => DominanceVerdict::StrictlyDominatedBy,
        (true, true) => DominanceVerdict::Incomparable,
    })
}

fn combine(p: &Lottery, q: &Lottery, pick: fn(f64, f64) -> f64) -> Result<Lottery> {
    p.check_interval(q)?;
    let points = merged_support(p, q);
    let values: Vec<f64> = points.iter().map(|&r| pick(p.cdf_eval(r), q.cdf_eval(r))).collect();
    Ok(Lottery::from_cdf(p.interval, &points, &values))
}

/// FOSD supremum: pointwise minimum of the CDFs.
pub fn lottery_join(p: &Lottery, q: &Lottery) -> Result<Lottery> {
    combine(p, q, f64::min)
}

/// FOSD infimum: pointwise maximum of the CDFs. On finite supports the max of
/// two right-continuous step functions is already right-continuous.
pub fn lottery_meet(p: &Lottery, q: &Lottery) -> Result<Lottery> {
    combine(p, q, f64::max)
}

/// Tail meets and tail joins of a finite sequence:
/// `lower[n] = meet(seq[n..])`, `upper[n] = join(seq[n..])`.
pub fn squeeze_bounds(seq: &[Lottery]) -> Result<(Vec<Lottery>, Vec<Lottery>)> {
    let last = seq.last().ok_or(Error::Empty("squeeze_bounds needs a nonempty sequence"))?;
    let mut lower = vec![last.clone()];
    let mut upper = vec![last.clone()];
    for p in seq.iter().rev().skip(1) {
        let lo = lottery_meet(p, lower.last().unwrap())?;
        let hi = lottery_join(p, upper.last().unwrap())?;
        lower.push(lo);
        upper.push(hi);
    }
    lower.reverse();
    upper.reverse();
    Ok((lower, upper))
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Calls `visit` with every weak composition of `total` into `bins` parts,
/// in lexicographically descending order.
fn for_each_composition(total: u32, bins: usize, visit: &mut impl FnMut(&[u32])) {
    fn rec(remaining: u32, slot: usize, parts: &mut Vec<u32>, visit: &mut impl FnMut(&[u32])) {
        if slot + 1 == parts.len() {
            parts[slot] = remaining;
            visit(parts);
            return;
        }
        for k in (0..=remaining).rev() {
            parts[slot] = k;
            rec(remaining - k, slot + 1, parts, visit);
        }
    }
    let mut parts = vec![0; bins];
    rec(total, 0, &mut parts, visit);
}

/// All lotteries on `grid_count` evenly spaced points of the interval whose
/// probabilities are rationals with denominator at most `denominator_bound`.
///
/// Each distribution appears once. Order is lexicographically descending in
/// the probability vector over the grid, so `δ_a` comes first and `δ_b` last.
/// The sets are nested: raising either parameter keeps every earlier lottery.
pub fn enumerate_rational_lotteries(
    interval: Interval,
    denominator_bound: u32,
    grid_count: usize,
    cap: usize,
) -> Result<Vec<Lottery>> {
    if denominator_bound < 1 {
        return Err(Error::InvalidLottery("denominator bound must be at least 1".into()));
    }
    if grid_count < 2 {
        return Err(Error::InvalidLottery("grid needs at least 2 points".into()));
    }
    let bins = grid_count as u64;
    let upper: u128 = (1..=denominator_bound as u64)
        .map(|d| binomial(d + bins - 1, bins - 1))
        .fold(0u128, |acc, c| acc.saturating_add(c));
    if upper > cap as u128 {
        return Err(Error::EnumerationCap { count: upper, cap });
    }

    // (counts, denominator) with the counts in lowest terms
    let mut entries: Vec<(Vec<u32>, u32)> = Vec::new();
    for d in 1..=denominator_bound {
        for_each_composition(d, grid_count, &mut |parts| {
            if parts.iter().fold(0, |g, &k| gcd(g, k)) == 1 {
                entries.push((parts.to_vec(), d));
            }
        });
    }
    entries.sort_by(|(ka, da), (kb, db)| {
        for (x, y) in ka.iter().zip(kb) {
            let lhs = *x as u64 * *db as u64;
            let rhs = *y as u64 * *da as u64;
            match rhs.cmp(&lhs) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        Ordering::Equal
    });

    let points = interval.grid(grid_count);
    entries
        .into_iter()
        .map(|(counts, d)| {
            let (support, probs): (Vec<f64>, Vec<f64>) = points
                .iter()
                .zip(&counts)
                .filter(|(_, k)| **k > 0)
                .map(|(x, k)| (*x, *k as f64 / d as f64))
                .unzip();
            Lottery::new(interval, support, probs)
        })
        .collect()
}
