//! Anscombe–Aumann acts and the aggregative preference families built on
//! them: subjective expected utility, max-min expected utility and
//! variational preferences, all of the form `V(f) = H((∫ u df(s))_s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lotteries::{
    enumerate_rational_lotteries, fosd_compare, DominanceVerdict, Interval, Lottery, LotteryRepr,
    DEFAULT_ENUMERATION_CAP, PROB_TOL,
};

/// Bisection tolerance for certainty equivalents.
pub const CE_TOL: f64 = 1e-10;

/// Default simplex resolution for variational cost grids (step 1/32).
pub const DEFAULT_COST_STEPS: u32 = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new(n_states: usize) -> Result<Self> {
        Self::with_labels((1..=n_states).map(|i| format!("s{i}")).collect())
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidPreference("state space must have at least one state".into()));
        }
        Ok(Self { labels })
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// A state-contingent lottery.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Act {
    per_state: Vec<Lottery>,
}

impl Act {
    pub fn new(per_state: Vec<Lottery>) -> Result<Self> {
        let first = per_state.first().ok_or(Error::Empty("an act needs at least one state"))?;
        if per_state.iter().any(|p| p.interval() != first.interval()) {
            return Err(Error::IntervalMismatch);
        }
        Ok(Self { per_state })
    }

    pub fn constant(p: &Lottery, n_states: usize) -> Result<Self> {
        Self::new(vec![p.clone(); n_states])
    }

    pub fn from_reprs(interval: Interval, reprs: Vec<LotteryRepr>) -> Result<Self> {
        Self::new(reprs.into_iter().map(|r| Lottery::from_repr(interval, r)).collect::<Result<_>>()?)
    }

    pub fn n_states(&self) -> usize {
        self.per_state.len()
    }

    pub fn interval(&self) -> Interval {
        self.per_state[0].interval()
    }

    pub fn state(&self, s: usize) -> &Lottery {
        &self.per_state[s]
    }

    pub fn lotteries(&self) -> &[Lottery] {
        &self.per_state
    }
}

/// Piecewise-linear utility of money, normalised to `u(a) = 0`, `u(b) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliIndex {
    interval: Interval,
    knots: Vec<f64>,
    values: Vec<f64>,
    strict: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BernoulliIndexRepr {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl BernoulliIndex {
    /// Knots must run from `a` to `b` strictly increasing; values must be
    /// nondecreasing from exactly 0 to exactly 1.
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(Error::InvalidPreference(
                "index needs at least two knots and one value per knot".into(),
            ));
        }
        let interval = Interval::new(knots[0], *knots.last().unwrap())?;
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPreference("index knots must be strictly increasing".into()));
        }
        if values[0] != 0.0 || *values.last().unwrap() != 1.0 {
            return Err(Error::InvalidPreference("index must satisfy u(a) = 0 and u(b) = 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidPreference("index values must be nondecreasing".into()));
        }
        let strict = values.windows(2).all(|w| w[0] < w[1]);
        Ok(Self { interval, knots, values, strict })
    }

    /// The linear index `u(x) = (x - a) / (b - a)`.
    pub fn identity(interval: Interval) -> Self {
        Self {
            interval,
            knots: vec![interval.lo(), interval.hi()],
            values: vec![0.0, 1.0],
            strict: true,
        }
    }

    pub fn from_repr(repr: BernoulliIndexRepr) -> Result<Self> {
        Self::new(repr.knots, repr.values)
    }

    pub fn to_repr(&self) -> BernoulliIndexRepr {
        BernoulliIndexRepr { knots: self.knots.clone(), values: self.values.clone() }
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.strict
    }

    /// Linear interpolation between knots; clamped outside `[a, b]`.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.knots[0] {
            return 0.0;
        }
        if x >= *self.knots.last().unwrap() {
            return 1.0;
        }
        let i = self.knots.partition_point(|&k| k <= x);
        let (k0, k1) = (self.knots[i - 1], self.knots[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (x - k0) / (k1 - k0)
    }

    /// Solves `u(x) = target` by bisection on `[a, b]`.
    fn invert(&self, target: f64) -> Result<f64> {
        if !self.strict {
            return Err(Error::NotStrictlyIncreasing);
        }
        let target = target.clamp(0.0, 1.0);
        let (mut lo, mut hi) = (self.interval.lo(), self.interval.hi());
        while hi - lo > CE_TOL {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // u is linear on the bracket unless it straddles a knot; the secant
        // step then lands on the exact root and otherwise stays inside.
        let (ulo, uhi) = (self.eval(lo), self.eval(hi));
        if uhi > ulo {
            let x = lo + (hi - lo) * (target - ulo) / (uhi - ulo);
            return Ok(x.clamp(lo, hi));
        }
        Ok(0.5 * (lo + hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Prior {
    weights: Vec<f64>,
}

impl Prior {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidPreference("prior weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidPreference(format!("prior weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Self {
        Self { weights: vec![1.0 / n as f64; n] }
    }

    /// Point mass on state `s`.
    pub fn degenerate(n: usize, s: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[s] = 1.0;
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dot(&self, z: &[f64]) -> f64 {
        self.weights.iter().zip(z).map(|(w, x)| w * x).sum()
    }
}

impl<'de> Deserialize<'de> for Prior {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let weights = Vec::<f64>::deserialize(d)?;
        Prior::new(weights).map_err(serde::de::Error::custom)
    }
}

/// All priors on `n` states with coordinates in multiples of `1/steps`,
/// in lexicographically descending order.
pub fn simplex_grid(n: usize, steps: u32) -> Vec<Prior> {
    fn rec(remaining: u32, slot: usize, parts: &mut Vec<u32>, steps: u32, out: &mut Vec<Prior>) {
        if slot + 1 == parts.len() {
            parts[slot] = remaining;
            let weights = parts.iter().map(|k| *k as f64 / steps as f64).collect();
            out.push(Prior { weights });
            return;
        }
        for k in (0..=remaining).rev() {
            parts[slot] = k;
            rec(remaining - k, slot + 1, parts, steps, out);
        }
    }
    let mut out = Vec::new();
    if n > 0 && steps > 0 {
        rec(steps, 0, &mut vec![0; n], steps, &mut out);
    }
    out
}

/// A grounded cost over a finite set of priors. `f64::INFINITY` marks priors
/// that are never used.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFunction {
    grid: Vec<Prior>,
    costs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticCostRepr {
    pub center: Vec<f64>,
    pub scale: f64,
    #[serde(default = "default_cost_steps")]
    pub steps: u32,
}

fn default_cost_steps() -> u32 {
    DEFAULT_COST_STEPS
}

/// Wire form of a cost: either an explicit table (`null` = +inf) or a
/// quadratic `scale * |π - center|²` on a simplex grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostRepr {
    Table { grid: Vec<Vec<f64>>, costs: Vec<Option<f64>> },
    Quadratic { quadratic: QuadraticCostRepr },
}

impl CostFunction {
    /// Validates shapes and shifts the costs so their minimum is exactly 0.
    pub fn new(grid: Vec<Prior>, costs: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.len() != costs.len() {
            return Err(Error::InvalidPreference("cost grid and cost values must match and be nonempty".into()));
        }
        let n = grid[0].len();
        if grid.iter().any(|p| p.len() != n) {
            return Err(Error::InvalidPreference("cost grid priors have different lengths".into()));
        }
        if costs.iter().any(|c| c.is_nan() || *c < 0.0) {
            return Err(Error::InvalidPreference("costs must be nonnegative".into()));
        }
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        if !min.is_finite() {
            return Err(Error::InvalidPreference("cost is +inf everywhere".into()));
        }
        let costs = costs.into_iter().map(|c| c - min).collect();
        Ok(Self { grid, costs })
    }

    /// Evaluates `cost` on the simplex grid of resolution `1/steps`.
    pub fn from_fn(n_states: usize, steps: u32, cost: impl Fn(&Prior) -> f64) -> Result<Self> {
        let grid = simplex_grid(n_states, steps);
        let costs = grid.iter().map(&cost).collect();
        Self::new(grid, costs)
    }

    /// `scale * |π - center|²` on a simplex grid.
    pub fn quadratic(center: &[f64], scale: f64, steps: u32) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidPreference("quadratic cost scale must be nonnegative".into()));
        }
        Self::from_fn(center.len(), steps, |p| {
            scale * p.weights().iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
    }

    /// The indicator of a set of priors: 0 on the set, +inf elsewhere.
    /// Only the finite part is stored, which gives the same infimum.
    pub fn indicator(priors: &[Prior]) -> Result<Self> {
        Self::new(priors.to_vec(), vec![0.0; priors.len()])
    }

    pub fn from_repr(repr: CostRepr) -> Result<Self> {
        match repr {
            CostRepr::Table { grid, costs } => {
                let grid = grid.into_iter().map(Prior::new).collect::<Result<Vec<_>>>()?;
                Self::new(grid, costs.into_iter().map(|c| c.unwrap_or(f64::INFINITY)).collect())
            }
            CostRepr::Quadratic { quadratic } => {
                Self::quadratic(&quadratic.center, quadratic.scale, quadratic.steps)
            }
        }
    }

    pub fn to_repr(&self) -> CostRepr {
        CostRepr::Table {
            grid: self.grid.iter().map(|p| p.weights.clone()).collect(),
            costs: self.costs.iter().map(|c| c.is_finite().then_some(*c)).collect(),
        }
    }

    pub fn grid(&self) -> &[Prior] {
        &self.grid
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn n_states(&self) -> usize {
        self.grid[0].len()
    }

    pub fn max_finite_cost(&self) -> f64 {
        self.costs.iter().copied().filter(|c| c.is_finite()).fold(0.0, f64::max)
    }

    /// Midpoint convexity over every grid triple `(p, (p+q)/2, q)`.
    /// Reported only; variational preferences do not require it here.
    pub fn is_convex_on_grid(&self) -> bool {
        let find = |target: &[f64]| {
            self.grid.iter().position(|p| p.weights.iter().zip(target).all(|(a, b)| (a - b).abs() < 1e-12))
        };
        for i in 0..self.grid.len() {
            for j in (i + 1)..self.grid.len() {
                let mid: Vec<f64> = self.grid[i]
                    .weights
                    .iter()
                    .zip(&self.grid[j].weights)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                if let Some(k) = find(&mid) {
                    let (ci, cj, ck) = (self.costs[i], self.costs[j], self.costs[k]);
                    if ci.is_finite() && cj.is_finite() && ck > 0.5 * (ci + cj) + 1e-12 {
                        return false;
                    }
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrefKind {
    Eu(Prior),
    MaxMin(Vec<Prior>),
    Variational(CostFunction),
}

/// A standard aggregative representation `(V, u, H)` over acts.
#[derive(Debug, Clone, PartialEq)]
pub struct AAPreference {
    kind: PrefKind,
    index: BernoulliIndex,
    states: StateSpace,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AAPreferenceRepr {
    pub kind: String,
    pub index: BernoulliIndexRepr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostRepr>,
    pub states: usize,
}

impl AAPreference {
    pub fn new(kind: PrefKind, index: BernoulliIndex, states: StateSpace) -> Result<Self> {
        let n = states.n_states();
        let ok = match &kind {
            PrefKind::Eu(p) => p.len() == n,
            PrefKind::MaxMin(ps) => !ps.is_empty() && ps.iter().all(|p| p.len() == n),
            PrefKind::Variational(c) => c.n_states() == n,
        };
        if !ok {
            return Err(Error::InvalidPreference(format!("priors must have {n} entries")));
        }
        Ok(Self { kind, index, states })
    }

    pub fn eu(prior: Prior, index: BernoulliIndex) -> Result<Self> {
        let states = StateSpace::new(prior.len())?;
        Self::new(PrefKind::Eu(prior), index, states)
    }

    pub fn maxmin(priors: Vec<Prior>, index: BernoulliIndex) -> Result<Self> {
        let n = priors.first().ok_or(Error::Empty("max-min needs at least one prior"))?.len();
        Self::new(PrefKind::MaxMin(priors), index, StateSpace::new(n)?)
    }

    pub fn variational(cost: CostFunction, index: BernoulliIndex) -> Result<Self> {
        let n = cost.n_states();
        Self::new(PrefKind::Variational(cost), index, StateSpace::new(n)?)
    }

    pub fn kind(&self) -> &PrefKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            PrefKind::Eu(_) => "eu",
            PrefKind::MaxMin(_) => "maxmin",
            PrefKind::Variational(_) => "variational",
        }
    }

    pub fn index(&self) -> &BernoulliIndex {
        &self.index
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn n_states(&self) -> usize {
        self.states.n_states()
    }

    pub fn interval(&self) -> Interval {
        self.index.interval()
    }

    pub fn from_repr(repr: AAPreferenceRepr) -> Result<Self> {
        let index = BernoulliIndex::from_repr(repr.index)?;
        let states = StateSpace::new(repr.states)?;
        let priors = || -> Result<Vec<Prior>> {
            repr.priors
                .clone()
                .ok_or_else(|| Error::InvalidPreference(format!("kind '{}' needs \"priors\"", repr.kind)))?
                .into_iter()
                .map(Prior::new)
                .collect()
        };
        let kind = match repr.kind.as_str() {
            "eu" => {
                let mut ps = priors()?;
                if ps.len() != 1 || repr.cost.is_some() {
                    return Err(Error::InvalidPreference("eu takes exactly one prior and no cost".into()));
                }
                PrefKind::Eu(ps.remove(0))
            }
            "maxmin" => {
                if repr.cost.is_some() {
                    return Err(Error::InvalidPreference("maxmin takes priors, not a cost".into()));
                }
                PrefKind::MaxMin(priors()?)
            }
            "variational" => {
                if repr.priors.is_some() {
                    return Err(Error::InvalidPreference("variational takes a cost, not priors".into()));
                }
                let cost = repr
                    .cost
                    .ok_or_else(|| Error::InvalidPreference("variational needs \"cost\"".into()))?;
                PrefKind::Variational(CostFunction::from_repr(cost)?)
            }
            other => return Err(Error::InvalidPreference(format!("unknown preference kind '{other}'"))),
        };
        Self::new(kind, index, states)
    }

    pub fn to_repr(&self) -> AAPreferenceRepr {
        let (priors, cost) = match &self.kind {
            PrefKind::Eu(p) => (Some(vec![p.weights.clone()]), None),
            PrefKind::MaxMin(ps) => (Some(ps.iter().map(|p| p.weights.clone()).collect()), None),
            PrefKind::Variational(c) => (None, Some(c.to_repr())),
        };
        AAPreferenceRepr {
            kind: self.kind_name().to_string(),
            index: self.index.to_repr(),
            priors,
            cost,
            states: self.n_states(),
        }
    }
}

impl Serialize for AAPreference {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_repr().serialize(s)
    }
}

impl<'de> Deserialize<'de> for AAPreference {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        AAPreference::from_repr(AAPreferenceRepr::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// `∫ u dp`.
pub fn expected_utility(u: &BernoulliIndex, p: &Lottery) -> Result<f64> {
    if u.interval() != p.interval() {
        return Err(Error::IntervalMismatch);
    }
    Ok(p.support().iter().zip(p.probs()).map(|(x, w)| w * u.eval(*x)).sum())
}

/// The aggregator `H` applied to a vector of statewise utilities.
pub fn aggregator_eval(pref: &AAPreference, z: &[f64]) -> f64 {
    match &pref.kind {
        PrefKind::Eu(p) => p.dot(z),
        PrefKind::MaxMin(ps) => ps.iter().map(|p| p.dot(z)).fold(f64::INFINITY, f64::min),
        PrefKind::Variational(c) => c
            .grid
            .iter()
            .zip(&c.costs)
            .filter(|(_, cost)| cost.is_finite())
            .map(|(p, cost)| p.dot(z) + cost)
            .fold(f64::INFINITY, f64::min),
    }
}

fn check_act(pref: &AAPreference, f: &Act) -> Result<()> {
    if f.n_states() != pref.n_states() {
        return Err(Error::ShapeMismatch(format!(
            "act has {} states, preference has {}",
            f.n_states(),
            pref.n_states()
        )));
    }
    if f.interval() != pref.interval() {
        return Err(Error::IntervalMismatch);
    }
    Ok(())
}

/// Statewise expected utilities `(∫ u df(s))_s`.
pub fn statewise_utilities(pref: &AAPreference, f: &Act) -> Result<Vec<f64>> {
    check_act(pref, f)?;
    f.per_state.iter().map(|p| expected_utility(&pref.index, p)).collect()
}

/// `V(f) = H((∫ u df(s))_s)`.
pub fn act_value(pref: &AAPreference, f: &Act) -> Result<f64> {
    let z = statewise_utilities(pref, f)?;
    Ok(aggregator_eval(pref, &z))
}

/// The sure amount `x` with `u(x) = ∫ u dp`.
pub fn ce_lottery(u: &BernoulliIndex, p: &Lottery) -> Result<f64> {
    if !u.is_strictly_increasing() {
        return Err(Error::NotStrictlyIncreasing);
    }
    u.invert(expected_utility(u, p)?)
}

/// The sure amount `x` with `V(δ_x, …, δ_x) = V(f)`.
pub fn ce_act(pref: &AAPreference, f: &Act) -> Result<f64> {
    if !pref.index.is_strictly_increasing() {
        return Err(Error::NotStrictlyIncreasing);
    }
    pref.index.invert(act_value(pref, f)?)
}

/// Statewise FOSD. Strict dominance needs strict dominance in every state.
pub fn act_dominates(f: &Act, g: &Act) -> Result<DominanceVerdict> {
    if f.n_states() != g.n_states() {
        return Err(Error::ShapeMismatch(format!("acts have {} and {} states", f.n_states(), g.n_states())));
    }
    let verdicts = f
        .per_state
        .iter()
        .zip(&g.per_state)
        .map(|(p, q)| fosd_compare(p, q))
        .collect::<Result<Vec<_>>>()?;
    use DominanceVerdict::*;
    if verdicts.iter().all(|v| *v == Equal) {
        return Ok(Equal);
    }
    if verdicts.iter().all(|v| v.weakly_dominates()) {
        return Ok(if verdicts.iter().all(|v| *v == StrictlyDominates) { StrictlyDominates } else { Dominates });
    }
    if verdicts.iter().all(|v| v.flip().weakly_dominates()) {
        return Ok(if verdicts.iter().all(|v| *v == StrictlyDominatedBy) {
            StrictlyDominatedBy
        } else {
            DominatedBy
        });
    }
    Ok(Incomparable)
}

/// Sup distance of two indices. Both are piecewise linear, so the sup is
/// attained on the union of their knots.
pub fn index_distance(u1: &BernoulliIndex, u2: &BernoulliIndex) -> Result<f64> {
    if u1.interval() != u2.interval() {
        return Err(Error::IntervalMismatch);
    }
    Ok(u1
        .knots
        .iter()
        .chain(&u2.knots)
        .map(|&x| (u1.eval(x) - u2.eval(x)).abs())
        .fold(0.0, f64::max))
}

/// `(dV, du)`: sup distance of the act values over `grid` and of the indices.
pub fn rep_distance(pref1: &AAPreference, pref2: &AAPreference, grid: &[Act]) -> Result<(f64, f64)> {
    if pref1.n_states() != pref2.n_states() {
        return Err(Error::ShapeMismatch("preferences have different state spaces".into()));
    }
    if grid.is_empty() {
        return Err(Error::Empty("rep_distance needs a nonempty act grid"));
    }
    let du = index_distance(&pref1.index, &pref2.index)?;
    let mut dv: f64 = 0.0;
    for f in grid {
        dv = dv.max((act_value(pref1, f)? - act_value(pref2, f)?).abs());
    }
    Ok((dv, du))
}

/// Sup distance of the two aggregators over the grid `{0, 1/steps, …, 1}^S`.
pub fn aggregator_distance(pref1: &AAPreference, pref2: &AAPreference, steps: u32) -> Result<f64> {
    let n = pref1.n_states();
    if n != pref2.n_states() {
        return Err(Error::ShapeMismatch("preferences have different state spaces".into()));
    }
    let side = steps as usize + 1;
    let total = side.checked_pow(n as u32).ok_or(Error::Empty("aggregator grid too large"))?;
    let mut z = vec![0.0; n];
    let mut best: f64 = 0.0;
    for mut code in 0..total {
        for slot in z.iter_mut() {
            *slot = (code % side) as f64 / steps as f64;
            code /= side;
        }
        best = best.max((aggregator_eval(pref1, &z) - aggregator_eval(pref2, &z)).abs());
    }
    Ok(best)
}

/// Product grid of acts whose statewise lotteries range over
/// `enumerate_rational_lotteries(interval, denominator_bound, grid_count)`,
/// in lexicographic product order.
pub fn act_grid(n_states: usize, interval: Interval, denominator_bound: u32, grid_count: usize) -> Result<Vec<Act>> {
    let lotteries = enumerate_rational_lotteries(interval, denominator_bound, grid_count, DEFAULT_ENUMERATION_CAP)?;
    product_acts(&lotteries, n_states)
}

/// All acts with each state drawn from `lotteries`; state 0 varies slowest.
pub fn product_acts(lotteries: &[Lottery], n_states: usize) -> Result<Vec<Act>> {
    let l = lotteries.len();
    let total = l
        .checked_pow(n_states as u32)
        .filter(|t| *t <= DEFAULT_ENUMERATION_CAP)
        .ok_or(Error::EnumerationCap { count: u128::MAX, cap: DEFAULT_ENUMERATION_CAP })?;
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        let mut rest = code;
        let mut idx = vec![0; n_states];
        for s in (0..n_states).rev() {
            idx[s] = rest % l;
            rest /= l;
        }
        out.push(Act::new(idx.into_iter().map(|i| lotteries[i].clone()).collect())?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Interval {
        Interval::unit()
    }

    fn delta(x: f64) -> Lottery {
        Lottery::degenerate(unit(), x).unwrap()
    }

    fn coin() -> Lottery {
        Lottery::new(unit(), vec![0.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    fn concave() -> BernoulliIndex {
        BernoulliIndex::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.8, 1.0]).unwrap()
    }

    fn prior(w: &[f64]) -> Prior {
        Prior::new(w.to_vec()).unwrap()
    }

    fn act(xs: &[f64]) -> Act {
        Act::new(xs.iter().map(|x| delta(*x)).collect()).unwrap()
    }

    #[test]
    fn expected_utility_examples() {
        let id = BernoulliIndex::identity(unit());
        assert_eq!(expected_utility(&id, &coin()).unwrap(), 0.5);
        assert_eq!(expected_utility(&concave(), &delta(0.0)).unwrap(), 0.0);
        assert!((expected_utility(&concave(), &delta(0.25)).unwrap() - 0.4).abs() < 1e-15);
        let wide = Lottery::degenerate(Interval::new(0.0, 2.0).unwrap(), 1.0).unwrap();
        assert!(matches!(expected_utility(&id, &wide), Err(Error::IntervalMismatch)));
    }

    #[test]
    fn index_validation() {
        assert!(BernoulliIndex::new(vec![0.0, 1.0], vec![0.1, 1.0]).is_err());
        assert!(BernoulliIndex::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.7, 0.6]).is_err());
        assert!(BernoulliIndex::new(vec![0.0, 0.0, 1.0], vec![0.0, 0.5, 1.0]).is_err());
        let weak = BernoulliIndex::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.0, 1.0]).unwrap();
        assert!(!weak.is_strictly_increasing());
        assert!(expected_utility(&weak, &coin()).is_ok());
        assert!(matches!(ce_lottery(&weak, &coin()), Err(Error::NotStrictlyIncreasing)));
    }

    #[test]
    fn aggregator_examples() {
        let id = BernoulliIndex::identity(unit());
        let flat = CostFunction::from_fn(2, DEFAULT_COST_STEPS, |_| 0.0).unwrap();
        let v = AAPreference::variational(flat, id.clone()).unwrap();
        assert_eq!(aggregator_eval(&v, &[0.2, 0.9]), 0.2);

        let pi0 = prior(&[0.3, 0.7]);
        let ind = AAPreference::variational(CostFunction::indicator(std::slice::from_ref(&pi0)).unwrap(), id.clone()).unwrap();
        let z = [0.4, 0.1];
        assert_eq!(aggregator_eval(&ind, &z), pi0.dot(&z));

        let quad = CostFunction::from_fn(2, 4, |p| (p.weights()[0] - 0.5).powi(2)).unwrap();
        let v = AAPreference::variational(quad, id).unwrap();
        // grid priors (1,0), (.75,.25), (.5,.5), (.25,.75), (0,1) on z = (0,1):
        // pi_2 + (pi_1 - .5)^2 = 0.25, 0.3125, 0.5, 0.8125, 1.25
        assert!((aggregator_eval(&v, &[0.0, 1.0]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn act_value_examples() {
        let id = BernoulliIndex::identity(unit());
        let eu = AAPreference::eu(prior(&[0.3, 0.7]), id.clone()).unwrap();
        assert!((act_value(&eu, &act(&[1.0, 0.0])).unwrap() - 0.3).abs() < 1e-15);
        let mm = AAPreference::maxmin(vec![prior(&[1.0, 0.0]), prior(&[0.0, 1.0])], id).unwrap();
        assert_eq!(act_value(&mm, &act(&[1.0, 0.0])).unwrap(), 0.0);
        assert!(matches!(act_value(&mm, &act(&[1.0])), Err(Error::ShapeMismatch(_))));

        let c = Act::constant(&coin(), 2).unwrap();
        for pref in [&eu, &mm] {
            let lhs = act_value(pref, &c).unwrap();
            let rhs = expected_utility(pref.index(), &coin()).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn certainty_equivalent_examples() {
        let id = BernoulliIndex::identity(unit());
        assert!((ce_lottery(&id, &coin()).unwrap() - 0.5).abs() <= CE_TOL);
        for x in [0.0, 0.1, 0.37, 0.5, 0.9, 1.0] {
            assert!((ce_lottery(&concave(), &delta(x)).unwrap() - x).abs() <= CE_TOL);
        }
        assert!((ce_lottery(&concave(), &coin()).unwrap() - 0.3125).abs() <= CE_TOL);

        let eu = AAPreference::eu(prior(&[0.3, 0.7]), id.clone()).unwrap();
        assert!((ce_act(&eu, &act(&[1.0, 0.0])).unwrap() - 0.3).abs() <= CE_TOL);
        let mm = AAPreference::maxmin(vec![prior(&[1.0, 0.0]), prior(&[0.0, 1.0])], id).unwrap();
        assert!(ce_act(&mm, &act(&[1.0, 0.0])).unwrap().abs() <= CE_TOL);
        let c = Act::constant(&coin(), 2).unwrap();
        let pref = AAPreference::eu(prior(&[0.5, 0.5]), concave()).unwrap();
        assert!((ce_act(&pref, &c).unwrap() - ce_lottery(&concave(), &coin()).unwrap()).abs() <= CE_TOL);
    }

    #[test]
    fn act_dominance_examples() {
        use DominanceVerdict::*;
        assert_eq!(act_dominates(&act(&[1.0, 1.0]), &act(&[0.0, 0.0])).unwrap(), StrictlyDominates);
        assert_eq!(act_dominates(&act(&[1.0, 0.0]), &act(&[1.0, 0.0])).unwrap(), Equal);
        assert_eq!(act_dominates(&act(&[1.0, 0.0]), &act(&[0.0, 1.0])).unwrap(), Incomparable);
        assert_eq!(act_dominates(&act(&[1.0, 0.5]), &act(&[0.0, 0.5])).unwrap(), Dominates);
        assert_eq!(act_dominates(&act(&[0.0, 0.5]), &act(&[1.0, 0.5])).unwrap(), DominatedBy);
        assert!(act_dominates(&act(&[1.0]), &act(&[0.0, 0.5])).is_err());
    }

    #[test]
    fn rep_distance_examples() {
        let id = BernoulliIndex::identity(unit());
        let grid = act_grid(2, unit(), 1, 2).unwrap();
        let a = AAPreference::eu(prior(&[1.0, 0.0]), id.clone()).unwrap();
        let b = AAPreference::eu(prior(&[0.0, 1.0]), id.clone()).unwrap();
        assert_eq!(rep_distance(&a, &a, &grid).unwrap(), (0.0, 0.0));
        assert!(grid.contains(&act(&[1.0, 0.0])));
        assert_eq!(rep_distance(&a, &b, &grid).unwrap().0, 1.0);

        let u1 = BernoulliIndex::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0]).unwrap();
        let u2 = BernoulliIndex::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.6, 1.0]).unwrap();
        let p1 = AAPreference::eu(prior(&[0.5, 0.5]), u1).unwrap();
        let p2 = AAPreference::eu(prior(&[0.5, 0.5]), u2).unwrap();
        assert!((rep_distance(&p1, &p2, &grid).unwrap().1 - 0.1).abs() < 1e-12);
        assert!(rep_distance(&p1, &p2, &[]).is_err());
    }

    #[test]
    fn aggregator_distance_matches_direct_evaluation() {
        let id = BernoulliIndex::identity(unit());
        let a = AAPreference::eu(prior(&[0.25, 0.75]), id.clone()).unwrap();
        let b = AAPreference::eu(prior(&[0.5, 0.5]), id).unwrap();
        // |(.25 z1 + .75 z2) - (.5 z1 + .5 z2)| = .25 |z2 - z1|, max .25
        assert!((aggregator_distance(&a, &b, 8).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn act_grid_is_a_product() {
        let grid = act_grid(2, unit(), 2, 2).unwrap();
        assert_eq!(grid.len(), 9);
        assert_eq!(grid[0], act(&[0.0, 0.0]));
        assert_eq!(grid[8], act(&[1.0, 1.0]));
    }

    #[test]
    fn cost_is_grounded_and_convexity_reported() {
        let c = CostFunction::from_fn(2, 8, |p| 3.0 + p.weights()[0]).unwrap();
        assert_eq!(c.costs().iter().copied().fold(f64::INFINITY, f64::min), 0.0);
        assert!(c.is_convex_on_grid());
        let bumpy = CostFunction::from_fn(2, 4, |p| if p.weights()[0] == 0.5 { 1.0 } else { 0.0 }).unwrap();
        assert!(!bumpy.is_convex_on_grid());
        assert!(CostFunction::new(vec![Prior::uniform(2)], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn preference_json_round_trip() {
        let prefs = vec![
            AAPreference::eu(prior(&[0.3, 0.7]), concave()).unwrap(),
            AAPreference::maxmin(vec![prior(&[1.0, 0.0]), prior(&[0.4, 0.6])], concave()).unwrap(),
            AAPreference::variational(CostFunction::quadratic(&[0.5, 0.5], 2.0, 4).unwrap(), concave()).unwrap(),
            AAPreference::variational(CostFunction::indicator(&[prior(&[0.2, 0.8])]).unwrap(), concave()).unwrap(),
        ];
        for p in prefs {
            let text = serde_json::to_string(&p).unwrap();
            let back: AAPreference = serde_json::from_str(&text).unwrap();
            assert_eq!(back, p);
        }
        let quad: AAPreference = serde_json::from_str(
            r#"{"kind":"variational","index":{"knots":[0,1],"values":[0,1]},
                "cost":{"quadratic":{"center":[0.5,0.5],"scale":1.0,"steps":4}},"states":2}"#,
        )
        .unwrap();
        assert!(matches!(quad.kind(), PrefKind::Variational(c) if c.grid().len() == 5));
        let bad = r#"{"kind":"eu","index":{"knots":[0,1],"values":[0,1]},"priors":[[0.5,0.5]],"states":2,"extra":1}"#;
        assert!(serde_json::from_str::<AAPreference>(bad).is_err());
        let bad = r#"{"kind":"eu","index":{"knots":[0,1],"values":[0,1]},"priors":[[0.5,0.5]],"states":3}"#;
        assert!(serde_json::from_str::<AAPreference>(bad).is_err());
    }

    fn arb_prior(n: usize) -> impl proptest::strategy::Strategy<Value = Prior> {
        use proptest::prelude::*;
        proptest::collection::vec(0.01f64..1.0, n).prop_map(|raw| {
            let total: f64 = raw.iter().sum();
            let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let head: f64 = w[..w.len() - 1].iter().sum();
            *w.last_mut().unwrap() = (1.0 - head).max(0.0);
            Prior::new(w).unwrap()
        })
    }

    proptest::proptest! {
        #[test]
        fn aggregators_are_normalized_and_monotone(
            priors in proptest::collection::vec(arb_prior(3), 1..4),
            costs in proptest::collection::vec(0.0f64..1.0, 3),
            z in proptest::collection::vec(0.0f64..1.0, 3),
            bump in proptest::collection::vec(0.0f64..0.5, 3),
            t in 0.0f64..1.0,
        ) {
            let id = BernoulliIndex::identity(Interval::unit());
            let k = priors.len();
            let prefs = [
                AAPreference::eu(priors[0].clone(), id.clone()).unwrap(),
                AAPreference::maxmin(priors.clone(), id.clone()).unwrap(),
                AAPreference::variational(CostFunction::new(priors, costs[..k].to_vec()).unwrap(), id).unwrap(),
            ];
            let higher: Vec<f64> = z.iter().zip(&bump).map(|(a, b)| a + b).collect();
            for pref in &prefs {
                proptest::prop_assert!((aggregator_eval(pref, &[t; 3]) - t).abs() <= 1e-12);
                proptest::prop_assert!(aggregator_eval(pref, &higher) >= aggregator_eval(pref, &z));
            }
        }
    }
}
