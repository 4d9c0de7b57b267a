//! Euclidean choice environments: box domains, the homothetic cone section
//! `D^M_α`, and parametric Wald utility families over them.
//!
//! Every family keeps its weights on the probability simplex, which is what
//! makes `u(c·1) = c` hold, i.e. `x ∼ u(x)·1`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attempts before cone rejection sampling gives up.
pub const REJECTION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr")]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxRepr {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<BoxRepr> for BoxDomain {
    type Error = Error;
    fn try_from(r: BoxRepr) -> Result<Self> {
        BoxDomain::new(r.lo, r.hi)
    }
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidDomain("box bounds must be nonempty and of equal length".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l < h)) {
            return Err(Error::InvalidDomain("box needs finite lo < hi in every coordinate".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit(d: usize) -> Self {
        Self { lo: vec![0.0; d], hi: vec![1.0; d] }
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
}

/// `D^M_α = {θx : ‖x‖ = M, x ≥ α·1, θ ∈ [0, 1]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConeRepr")]
pub struct ConeDomain {
    alpha: f64,
    #[serde(rename = "M")]
    radius: f64,
    d: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConeRepr {
    alpha: f64,
    #[serde(rename = "M")]
    radius: f64,
    d: usize,
}

impl TryFrom<ConeRepr> for ConeDomain {
    type Error = Error;
    fn try_from(r: ConeRepr) -> Result<Self> {
        ConeDomain::new(r.alpha, r.radius, r.d)
    }
}

impl ConeDomain {
    pub fn new(alpha: f64, radius: f64, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDomain("cone dimension must be positive".into()));
        }
        if !(alpha.is_finite() && radius.is_finite() && alpha > 0.0 && alpha * (d as f64).sqrt() < radius) {
            return Err(Error::InvalidDomain(format!(
                "cone needs 0 < alpha * sqrt(d) < M, got alpha = {alpha}, M = {radius}, d = {d}"
            )));
        }
        Ok(Self { alpha, radius, d })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Box(BoxDomain),
    Cone(ConeDomain),
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl Domain {
    /// The unit box `[0,1]^d`.
    pub fn unit(d: usize) -> Self {
        Domain::Box(BoxDomain::unit(d))
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box(b) => b.lo.len(),
            Domain::Cone(c) => c.d,
        }
    }

    /// `(lo, hi)` of the smallest axis-aligned box used for sampling.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Box(b) => (b.lo.clone(), b.hi.clone()),
            Domain::Cone(c) => (vec![0.0; c.d], vec![c.radius; c.d]),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box(b) => x.iter().zip(&b.lo).zip(&b.hi).all(|((v, l), h)| v >= l && v <= h),
            Domain::Cone(c) => {
                let n = norm(x);
                let min = x.iter().copied().fold(f64::INFINITY, f64::min);
                n <= c.radius && min >= (c.alpha / c.radius) * n
            }
        }
    }

    /// One uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let (lo, hi) = self.bounding_box();
        let draw = |rng: &mut R| -> Vec<f64> {
            lo.iter().zip(&hi).map(|(l, h)| l + (h - l) * rng.gen::<f64>()).collect()
        };
        match self {
            Domain::Box(_) => Ok(draw(rng)),
            Domain::Cone(_) => {
                for _ in 0..REJECTION_CAP {
                    let x = draw(rng);
                    if self.contains_unchecked(&x) {
                        return Ok(x);
                    }
                }
                Err(Error::RejectionCap(REJECTION_CAP))
            }
        }
    }

    /// Lattice points of the bounding box with `per_axis` points per axis
    /// that lie in the domain, in row-major order.
    pub fn lattice(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.bounding_box();
        let d = self.dim();
        let per_axis = per_axis.max(2);
        let coord = |i: usize, k: usize| {
            if k + 1 == per_axis {
                hi[i]
            } else {
                lo[i] + (hi[i] - lo[i]) * k as f64 / (per_axis - 1) as f64
            }
        };
        let total = per_axis.pow(d as u32);
        let mut out = Vec::new();
        for code in 0..total {
            let mut rest = code;
            let mut x = vec![0.0; d];
            for i in (0..d).rev() {
                x[i] = coord(i, rest % per_axis);
                rest /= per_axis;
            }
            if self.contains_unchecked(&x) {
                out.push(x);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaldKind {
    Linear,
    Ces { rho: f64 },
    CobbDouglas,
}

/// A Wald utility `u` with `u(c·1) = c`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaldUtility {
    kind: WaldKind,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum WaldRepr {
    Linear { weights: Vec<f64> },
    Ces { weights: Vec<f64>, rho: f64 },
    CobbDouglas { weights: Vec<f64> },
}

impl Serialize for WaldUtility {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let weights = self.weights.clone();
        match self.kind {
            WaldKind::Linear => WaldRepr::Linear { weights },
            WaldKind::Ces { rho } => WaldRepr::Ces { weights, rho },
            WaldKind::CobbDouglas => WaldRepr::CobbDouglas { weights },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WaldUtility {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (kind, weights) = match WaldRepr::deserialize(d)? {
            WaldRepr::Linear { weights } => (WaldKind::Linear, weights),
            WaldRepr::Ces { weights, rho } => (WaldKind::Ces { rho }, weights),
            WaldRepr::CobbDouglas { weights } => (WaldKind::CobbDouglas, weights),
        };
        WaldUtility::new(kind, weights).map_err(serde::de::Error::custom)
    }
}

const WEIGHT_TOL: f64 = 1e-12;

impl WaldUtility {
    pub fn new(kind: WaldKind, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidFamily("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidFamily(format!("weights sum to {total}, not 1")));
        }
        match kind {
            WaldKind::Ces { rho } if !rho.is_finite() || rho == 0.0 => {
                return Err(Error::InvalidFamily("CES needs a finite rho != 0".into()));
            }
            WaldKind::CobbDouglas if weights.iter().any(|w| *w <= 0.0) => {
                return Err(Error::InvalidFamily("Cobb-Douglas weights must be strictly positive".into()));
            }
            _ => {}
        }
        Ok(Self { kind, weights })
    }

    pub fn linear(weights: Vec<f64>) -> Result<Self> {
        Self::new(WaldKind::Linear, weights)
    }

    pub fn ces(weights: Vec<f64>, rho: f64) -> Result<Self> {
        Self::new(WaldKind::Ces { rho }, weights)
    }

    pub fn cobb_douglas(weights: Vec<f64>) -> Result<Self> {
        Self::new(WaldKind::CobbDouglas, weights)
    }

    pub fn kind(&self) -> &WaldKind {
        &self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Parameter vector: the weights, followed by `rho` for CES.
    pub fn params(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        if let WaldKind::Ces { rho } = self.kind {
            v.push(rho);
        }
        v
    }

    fn needs_nonnegative(&self) -> bool {
        !matches!(self.kind, WaldKind::Linear)
    }

    pub fn u_eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if self.needs_nonnegative() && x.iter().any(|v| *v < 0.0 || v.is_nan()) {
            return Err(Error::DomainViolation(format!("{:?} needs a nonnegative bundle", self.kind)));
        }
        Ok(self.value(x))
    }

    /// Evaluation without shape or sign checks.
    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        let w = &self.weights;
        match self.kind {
            WaldKind::Linear => w.iter().zip(x).map(|(a, b)| a * b).sum(),
            WaldKind::Ces { rho } => {
                if rho < 0.0 && x.contains(&0.0) {
                    return 0.0;
                }
                let inner: f64 = w.iter().zip(x).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * b.powf(rho)).sum();
                inner.powf(1.0 / rho)
            }
            WaldKind::CobbDouglas => {
                if x.contains(&0.0) {
                    return 0.0;
                }
                w.iter().zip(x).map(|(a, b)| a * b.ln()).sum::<f64>().exp()
            }
        }
    }
}

/// Grid specification of a parametric family, as written in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Linear {
        weight_steps: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<f64>,
    },
    Ces {
        rho_grid: Vec<f64>,
        weight_steps: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<f64>,
    },
    CobbDouglas {
        weight_steps: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<f64>,
    },
    Explicit {
        members: Vec<WaldUtility>,
    },
}

/// A finite grid of Wald utilities on `ℝ^d`, sorted by parameter vector.
#[derive(Debug, Clone)]
pub struct UtilityFamily {
    spec: FamilySpec,
    dim: usize,
    members: Vec<WaldUtility>,
}

/// Lexicographic order on parameter vectors.
pub fn cmp_params(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn simplex_points(d: usize, steps: u32) -> Vec<Vec<f64>> {
    crate::aa_prefs::simplex_grid(d, steps).into_iter().map(|p| p.weights().to_vec()).collect()
}

impl UtilityFamily {
    pub fn new(spec: FamilySpec, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidFamily("dimension must be positive".into()));
        }
        let mut members = Vec::new();
        match &spec {
            FamilySpec::Linear { weight_steps, .. } => {
                check_steps(*weight_steps)?;
                for w in simplex_points(dim, *weight_steps) {
                    members.push(WaldUtility::linear(w)?);
                }
            }
            FamilySpec::Ces { rho_grid, weight_steps, .. } => {
                check_steps(*weight_steps)?;
                if rho_grid.is_empty() {
                    return Err(Error::InvalidFamily("rho grid is empty".into()));
                }
                for w in simplex_points(dim, *weight_steps) {
                    for rho in rho_grid {
                        members.push(WaldUtility::ces(w.clone(), *rho)?);
                    }
                }
            }
            FamilySpec::CobbDouglas { weight_steps, .. } => {
                check_steps(*weight_steps)?;
                for w in simplex_points(dim, *weight_steps) {
                    if w.iter().all(|v| *v > 0.0) {
                        members.push(WaldUtility::cobb_douglas(w)?);
                    }
                }
            }
            FamilySpec::Explicit { members: m } => {
                if let Some(u) = m.iter().find(|u| u.dim() != dim) {
                    return Err(Error::DimensionMismatch { expected: dim, got: u.dim() });
                }
                members = m.clone();
            }
        }
        if members.is_empty() {
            return Err(Error::InvalidFamily("parameter grid is empty".into()));
        }
        members.sort_by(|a, b| cmp_params(&a.params(), &b.params()));
        members.dedup_by(|a, b| a == b);
        Ok(Self { spec, dim, members })
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn members(&self) -> &[WaldUtility] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn kappa(&self) -> Option<f64> {
        match &self.spec {
            FamilySpec::Linear { kappa, .. }
            | FamilySpec::Ces { kappa, .. }
            | FamilySpec::CobbDouglas { kappa, .. } => *kappa,
            FamilySpec::Explicit { .. } => None,
        }
    }

    /// Parameter neighbours of `u` at refinement level `level >= 1`: weight
    /// moves of `1/(steps·2^level)` between coordinate pairs, and `rho` moves
    /// of half the smallest grid spacing per level.
    pub fn refinement_neighbors(&self, u: &WaldUtility, level: u32) -> Vec<WaldUtility> {
        let (steps, rho_step) = match &self.spec {
            FamilySpec::Linear { weight_steps, .. } | FamilySpec::CobbDouglas { weight_steps, .. } => {
                (*weight_steps, None)
            }
            FamilySpec::Ces { weight_steps, rho_grid, .. } => {
                let mut sorted = rho_grid.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let spacing = sorted.windows(2).map(|w| w[1] - w[0]).filter(|s| *s > 0.0).fold(f64::INFINITY, f64::min);
                let spacing = if spacing.is_finite() { spacing } else { sorted[0].abs().max(0.5) };
                (*weight_steps, Some(spacing / 2f64.powi(level as i32)))
            }
            FamilySpec::Explicit { .. } => return Vec::new(),
        };
        let h = 1.0 / (steps as f64 * 2f64.powi(level as i32));
        let w = u.weights();
        let mut out = Vec::new();
        for i in 0..w.len() {
            for j in 0..w.len() {
                if i == j || w[j] - h < -WEIGHT_TOL {
                    continue;
                }
                let mut next = w.to_vec();
                next[i] += h;
                next[j] = (next[j] - h).max(0.0);
                let total: f64 = next.iter().sum();
                let last = next.len() - 1;
                next[last] += 1.0 - total;
                if next[last] < 0.0 {
                    continue;
                }
                if let Ok(v) = WaldUtility::new(u.kind.clone(), next) {
                    out.push(v);
                }
            }
        }
        if let (Some(hr), WaldKind::Ces { rho }) = (rho_step, &u.kind) {
            for r in [rho - hr, rho + hr] {
                if r != 0.0 && r.signum() == rho.signum() {
                    if let Ok(v) = WaldUtility::ces(w.to_vec(), r) {
                        out.push(v);
                    }
                }
            }
        }
        out
    }

    /// Largest grid-estimated Lipschitz constant over the members; fails if
    /// it exceeds the declared `kappa` by more than a relative 1e-6.
    pub fn validate_lipschitz(&self, domain: &Domain, grid_step: f64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for u in &self.members {
            worst = worst.max(lipschitz_estimate(u, domain, grid_step)?);
        }
        if let Some(kappa) = self.kappa() {
            if worst > kappa * (1.0 + 1e-6) {
                return Err(Error::InvalidFamily(format!(
                    "estimated Lipschitz constant {worst} exceeds kappa = {kappa}"
                )));
            }
        }
        Ok(worst)
    }
}

fn check_steps(steps: u32) -> Result<()> {
    if steps == 0 {
        return Err(Error::InvalidFamily("weight_steps must be at least 1".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldCheckReport {
    /// max `|u(u(x)·1) - u(x)|`
    pub max_wald_violation: f64,
    /// max `|u(θx) - θ u(x)|` over `θ ∈ {0.25, 0.5, 0.75}`
    pub max_homogeneity_violation: f64,
    /// sampled points whose diagonal image `u(x)·1` falls outside the domain
    pub diagonal_outside: usize,
    pub n_points: usize,
}

pub fn wald_check<R: Rng + ?Sized>(
    u: &WaldUtility,
    domain: &Domain,
    n_points: usize,
    rng: &mut R,
) -> Result<WaldCheckReport> {
    let d = domain.dim();
    let mut report = WaldCheckReport {
        max_wald_violation: 0.0,
        max_homogeneity_violation: 0.0,
        diagonal_outside: 0,
        n_points,
    };
    for _ in 0..n_points {
        let x = domain.sample(rng)?;
        let ux = u.u_eval(&x)?;
        let diag = vec![ux; d];
        if !domain.contains_unchecked(&diag) {
            report.diagonal_outside += 1;
        }
        report.max_wald_violation = report.max_wald_violation.max((u.u_eval(&diag)? - ux).abs());
        for theta in [0.25, 0.5, 0.75] {
            let scaled: Vec<f64> = x.iter().map(|v| theta * v).collect();
            let gap = (u.u_eval(&scaled)? - theta * ux).abs();
            report.max_homogeneity_violation = report.max_homogeneity_violation.max(gap);
        }
    }
    Ok(report)
}

/// Largest difference-quotient gradient norm over lattice cells of side
/// `grid_step` lying in the domain. Each cell's gradient averages the forward
/// differences along the cell edges parallel to each axis, which is exact for
/// linear utilities.
pub fn lipschitz_estimate(u: &WaldUtility, domain: &Domain, grid_step: f64) -> Result<f64> {
    if grid_step.is_nan() || grid_step <= 0.0 {
        return Err(Error::InvalidDomain("grid_step must be positive".into()));
    }
    let d = domain.dim();
    if u.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: u.dim() });
    }
    let (lo, hi) = domain.bounding_box();
    let counts: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| ((h - l) / grid_step).floor() as usize).collect();
    let total: usize = counts.iter().product();
    let n_corners = 1usize << d;
    let mut best: f64 = 0.0;
    let mut base = vec![0.0; d];
    let mut corner = vec![0.0; d];
    let mut values = vec![0.0; n_corners];
    'cells: for code in 0..total {
        let mut rest = code;
        for i in (0..d).rev() {
            base[i] = lo[i] + grid_step * (rest % counts[i]) as f64;
            rest /= counts[i];
        }
        for (mask, value) in values.iter_mut().enumerate() {
            for i in 0..d {
                corner[i] = base[i] + if mask >> i & 1 == 1 { grid_step } else { 0.0 };
            }
            if !domain.contains_unchecked(&corner) {
                continue 'cells;
            }
            *value = u.value(&corner);
        }
        let mut sq = 0.0;
        for i in 0..d {
            let bit = 1usize << i;
            let sum: f64 = (0..n_corners).filter(|m| m & bit == 0).map(|m| values[m | bit] - values[m]).sum();
            let g = sum / (n_corners / 2) as f64 / grid_step;
            sq += g * g;
        }
        best = best.max(sq.sqrt());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn cone() -> Domain {
        Domain::Cone(ConeDomain::new(0.1, 1.0, 2).unwrap())
    }

    #[test]
    fn cone_membership_examples() {
        let c = cone();
        assert!(c.contains(&[0.5, 0.5]).unwrap());
        assert!(c.contains(&[0.0, 0.0]).unwrap());
        assert!(!c.contains(&[1.0, 0.0]).unwrap());
        assert!(!c.contains(&[0.8, 0.8]).unwrap());
        assert!(matches!(c.contains(&[0.5]), Err(Error::DimensionMismatch { .. })));
        assert!(ConeDomain::new(0.8, 1.0, 2).is_err());
        assert!(ConeDomain::new(0.0, 1.0, 2).is_err());
    }

    #[test]
    fn cone_membership_matches_construction() {
        // θ·s with s on the sphere section: s = M (cos φ, sin φ) and both
        // coordinates >= alpha.
        let c = ConeDomain::new(0.1, 1.0, 2).unwrap();
        let dom = Domain::Cone(c.clone());
        let lo_angle = (c.alpha() / c.radius()).asin();
        let hi_angle = std::f64::consts::FRAC_PI_2 - lo_angle;
        for i in 0..=40 {
            let phi = i as f64 * std::f64::consts::FRAC_PI_2 / 40.0;
            for j in 0..=10 {
                let theta = j as f64 / 10.0;
                let x = [theta * phi.cos(), theta * phi.sin()];
                let constructed = phi >= lo_angle - 1e-12 && phi <= hi_angle + 1e-12 || theta == 0.0;
                let inside = (phi - lo_angle).abs() > 1e-9 && (phi - hi_angle).abs() > 1e-9;
                if inside || theta == 0.0 {
                    assert_eq!(dom.contains(&x).unwrap(), constructed, "phi={phi} theta={theta}");
                }
            }
        }
    }

    #[test]
    fn samples_stay_in_domain() {
        let mut rng = stream(1, 0);
        let b = Domain::Box(BoxDomain::unit(2));
        let x = b.sample(&mut rng).unwrap();
        assert!(b.contains(&x).unwrap());
        assert_eq!(x, Domain::Box(BoxDomain::unit(2)).sample(&mut stream(1, 0)).unwrap());
        let c = cone();
        for _ in 0..10_000 {
            assert!(c.contains(&c.sample(&mut rng).unwrap()).unwrap());
        }
    }

    #[test]
    fn utility_examples() {
        let lin = WaldUtility::linear(vec![0.3, 0.7]).unwrap();
        assert_eq!(lin.u_eval(&[1.0, 0.0]).unwrap(), 0.3);
        let ces = WaldUtility::ces(vec![0.5, 0.5], 2.0).unwrap();
        assert!((ces.u_eval(&[1.0, 0.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let cd = WaldUtility::cobb_douglas(vec![0.5, 0.5]).unwrap();
        assert!((cd.u_eval(&[1.0, 4.0]).unwrap() - 2.0).abs() < 1e-14);
        assert!((cd.u_eval(&[0.5, 2.0]).unwrap() - 1.0).abs() < 1e-14);
        for u in [&lin, &ces, &cd] {
            assert!((u.u_eval(&[0.37, 0.37]).unwrap() - 0.37).abs() < 1e-12);
        }
        assert!(matches!(ces.u_eval(&[-1.0, 0.5]), Err(Error::DomainViolation(_))));
        let neg = WaldUtility::ces(vec![0.5, 0.5], -1.0).unwrap();
        assert_eq!(neg.u_eval(&[0.0, 0.5]).unwrap(), 0.0);
        assert!(WaldUtility::ces(vec![0.5, 0.5], 0.0).is_err());
        assert!(WaldUtility::cobb_douglas(vec![1.0, 0.0]).is_err());
        assert!(WaldUtility::linear(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn wald_check_examples() {
        let mut rng = stream(3, 0);
        let lin = WaldUtility::linear(vec![0.25, 0.75]).unwrap();
        let r = wald_check(&lin, &Domain::Box(BoxDomain::unit(2)), 500, &mut rng).unwrap();
        assert!(r.max_wald_violation < 1e-15 && r.max_homogeneity_violation < 1e-15);
        assert_eq!(r.diagonal_outside, 0);
        let ces = WaldUtility::ces(vec![0.3, 0.7], -1.5).unwrap();
        let r = wald_check(&ces, &cone(), 500, &mut rng).unwrap();
        assert!(r.max_wald_violation <= 1e-12 && r.max_homogeneity_violation <= 1e-12);
    }

    #[test]
    fn lipschitz_examples() {
        let b = Domain::Box(BoxDomain::unit(2));
        let lin = WaldUtility::linear(vec![0.3, 0.7]).unwrap();
        let norm_w = (0.09f64 + 0.49).sqrt();
        assert!((lipschitz_estimate(&lin, &b, 0.05).unwrap() - norm_w).abs() < 1e-9);
        let axis = WaldUtility::linear(vec![1.0, 0.0]).unwrap();
        assert!((lipschitz_estimate(&axis, &b, 0.1).unwrap() - 1.0).abs() < 1e-12);

        let inner = Domain::Box(BoxDomain::new(vec![0.1, 0.1], vec![1.0, 1.0]).unwrap());
        let ces = WaldUtility::ces(vec![0.5, 0.5], 2.0).unwrap();
        let coarse = lipschitz_estimate(&ces, &inner, 0.05).unwrap();
        let fine = lipschitz_estimate(&ces, &inner, 0.005).unwrap();
        assert!(coarse.is_finite() && coarse <= 1.01 * fine);
        assert!(lipschitz_estimate(&ces, &inner, 0.0).is_err());
    }

    #[test]
    fn family_grid_and_kappa() {
        let spec = FamilySpec::Linear { weight_steps: 4, kappa: Some(1.0) };
        let fam = UtilityFamily::new(spec, 2).unwrap();
        assert_eq!(fam.len(), 5);
        assert_eq!(fam.members()[0].weights(), &[0.0, 1.0]);
        let b = Domain::Box(BoxDomain::unit(2));
        assert!(fam.validate_lipschitz(&b, 0.1).unwrap() <= 1.0 + 1e-6);
        let tight = UtilityFamily::new(FamilySpec::Linear { weight_steps: 4, kappa: Some(0.5) }, 2).unwrap();
        assert!(tight.validate_lipschitz(&b, 0.1).is_err());

        let cd = UtilityFamily::new(FamilySpec::CobbDouglas { weight_steps: 4, kappa: None }, 2).unwrap();
        assert_eq!(cd.len(), 3);
        let ces = UtilityFamily::new(FamilySpec::Ces { rho_grid: vec![-1.0, 0.5], weight_steps: 2, kappa: None }, 2).unwrap();
        assert_eq!(ces.len(), 6);
        let n = ces.refinement_neighbors(&ces.members()[2], 1);
        assert!(!n.is_empty());
        assert!(n.iter().all(|u| (u.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn descriptors_round_trip() {
        let d: Domain = serde_json::from_str(r#"{"cone": {"alpha": 0.1, "M": 1.0, "d": 2}}"#).unwrap();
        assert_eq!(d, cone());
        assert!(serde_json::from_str::<Domain>(r#"{"cone": {"alpha": 2.0, "M": 1.0, "d": 2}}"#).is_err());
        let f: FamilySpec = serde_json::from_str(r#"{"ces": {"rho_grid": [0.5, 2.0], "weight_steps": 4}}"#).unwrap();
        assert_eq!(UtilityFamily::new(f, 2).unwrap().len(), 10);
        let u = WaldUtility::ces(vec![0.25, 0.75], -0.5).unwrap();
        let back: WaldUtility = serde_json::from_str(&serde_json::to_string(&u).unwrap()).unwrap();
        assert_eq!(back, u);
    }
}
