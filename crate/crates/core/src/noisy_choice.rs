//! The stochastic choice rule and the data-generating process: choice
//! problems are drawn i.i.d. from `λ ⊗ λ` and each one is resolved by the
//! noise model, producing ordered `(chosen, rejected)` records.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aa_prefs::{act_value, AAPreference, Act};
use crate::error::{Error, Result};
use crate::lotteries::{Interval, Lottery, LotteryRepr};
use crate::rng::stream;
use crate::wald_env::{Domain, WaldUtility};

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", try_from = "NoiseRepr")]
pub enum NoiseModel {
    /// The preferred option is chosen with constant probability `theta`.
    ConstantFlip { theta: f64 },
    /// `theta_min + (theta_max - theta_min) * tanh(Δu / tau)` for the
    /// preferred option, where `Δu > 0` is the utility gap.
    BoundedResponse { theta_min: f64, theta_max: f64, tau: f64 },
    /// The preferred option is always chosen; ties are split evenly.
    Noiseless,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum NoiseRepr {
    ConstantFlip { theta: f64 },
    BoundedResponse { theta_min: f64, theta_max: f64, tau: f64 },
    Noiseless,
}

impl TryFrom<NoiseRepr> for NoiseModel {
    type Error = Error;
    fn try_from(r: NoiseRepr) -> Result<Self> {
        match r {
            NoiseRepr::ConstantFlip { theta } => NoiseModel::constant_flip(theta),
            NoiseRepr::BoundedResponse { theta_min, theta_max, tau } => {
                NoiseModel::bounded_response(theta_min, theta_max, tau)
            }
            NoiseRepr::Noiseless => Ok(NoiseModel::Noiseless),
        }
    }
}

impl NoiseModel {
    pub fn constant_flip(theta: f64) -> Result<Self> {
        if !(theta > 0.5 && theta < 1.0) {
            return Err(Error::InvalidNoise(format!("need 1/2 < theta < 1, got {theta}")));
        }
        Ok(NoiseModel::ConstantFlip { theta })
    }

    pub fn bounded_response(theta_min: f64, theta_max: f64, tau: f64) -> Result<Self> {
        if !(theta_min > 0.5 && theta_min <= theta_max && theta_max < 1.0) {
            return Err(Error::InvalidNoise(format!(
                "need 1/2 < theta_min <= theta_max < 1, got {theta_min}, {theta_max}"
            )));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidNoise(format!("need tau > 0, got {tau}")));
        }
        Ok(NoiseModel::BoundedResponse { theta_min, theta_max, tau })
    }

    /// `Θ`: the infimum of the choice probability over strict pairs.
    pub fn floor(&self) -> f64 {
        match *self {
            NoiseModel::ConstantFlip { theta } => theta,
            NoiseModel::BoundedResponse { theta_min, .. } => theta_min,
            NoiseModel::Noiseless => 1.0,
        }
    }
}

/// Probability of choosing the option with utility `ux` over the one with
/// utility `uy`. `q(x, y) + q(y, x) = 1` holds exactly: the preferred side
/// is at least 1/2, so `1 - q` is computed without rounding.
pub fn q_eval(noise: &NoiseModel, ux: f64, uy: f64) -> f64 {
    if ux == uy {
        return 0.5;
    }
    if ux < uy {
        return 1.0 - q_eval(noise, uy, ux);
    }
    match *noise {
        NoiseModel::ConstantFlip { theta } => theta,
        NoiseModel::BoundedResponse { theta_min, theta_max, tau } => {
            theta_min + (theta_max - theta_min) * ((ux - uy) / tau).tanh()
        }
        NoiseModel::Noiseless => 1.0,
    }
}

/// Random Anscombe–Aumann acts: each state gets `support_size` uniform
/// points of the interval with flat-Dirichlet masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActSpace {
    pub states: usize,
    pub interval: Interval,
    pub support_size: usize,
}

impl ActSpace {
    pub fn new(states: usize, interval: Interval, support_size: usize) -> Result<Self> {
        if states == 0 || support_size == 0 {
            return Err(Error::InvalidDomain("act space needs states >= 1 and support_size >= 1".into()));
        }
        Ok(Self { states, interval, support_size })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Act> {
        let (a, b) = (self.interval.lo(), self.interval.hi());
        let mut per_state = Vec::with_capacity(self.states);
        for _ in 0..self.states {
            let mut atoms: Vec<(f64, f64)> = (0..self.support_size)
                .map(|_| (a + (b - a) * rng.gen::<f64>(), -(1.0 - rng.gen::<f64>()).ln()))
                .collect();
            atoms.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            atoms.dedup_by(|x, y| {
                if x.0 == y.0 {
                    y.1 += x.1;
                    true
                } else {
                    false
                }
            });
            let total: f64 = atoms.iter().map(|t| t.1).sum();
            let support: Vec<f64> = atoms.iter().map(|t| t.0).collect();
            let mut probs: Vec<f64> = atoms.iter().map(|t| t.1 / total).collect();
            let last = probs.len() - 1;
            let head: f64 = probs[..last].iter().sum();
            probs[last] = (1.0 - head).max(0.0);
            per_state.push(Lottery::new(self.interval, support, probs)?);
        }
        Act::new(per_state)
    }
}

/// Where choice problems are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceSpace {
    Domain(Domain),
    Acts(ActSpace),
}

impl ChoiceSpace {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Alternative> {
        Ok(match self {
            ChoiceSpace::Domain(d) => Alternative::Bundle(d.sample(rng)?),
            ChoiceSpace::Acts(a) => Alternative::Act(a.sample(rng)?),
        })
    }

    fn parse_alternative(&self, value: serde_json::Value) -> std::result::Result<Alternative, String> {
        match self {
            ChoiceSpace::Domain(d) => {
                let x: Vec<f64> = serde_json::from_value(value).map_err(|e| e.to_string())?;
                if x.len() != d.dim() {
                    return Err(format!("bundle has dimension {}, meta says {}", x.len(), d.dim()));
                }
                Ok(Alternative::Bundle(x))
            }
            ChoiceSpace::Acts(space) => {
                let reprs: Vec<LotteryRepr> = serde_json::from_value(value).map_err(|e| e.to_string())?;
                if reprs.len() != space.states {
                    return Err(format!("act has {} states, meta says {}", reprs.len(), space.states));
                }
                Act::from_reprs(space.interval, reprs).map(Alternative::Act).map_err(|e| e.to_string())
            }
        }
    }
}

/// One option of a choice problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Alternative {
    Bundle(Vec<f64>),
    Act(Act),
}

/// Anything that assigns utilities to alternatives.
pub trait Utility {
    fn utility(&self, x: &Alternative) -> Result<f64>;
}

impl Utility for WaldUtility {
    fn utility(&self, x: &Alternative) -> Result<f64> {
        match x {
            Alternative::Bundle(v) => self.u_eval(v),
            Alternative::Act(_) => Err(Error::ShapeMismatch("Wald utility applied to an act".into())),
        }
    }
}

impl Utility for AAPreference {
    fn utility(&self, x: &Alternative) -> Result<f64> {
        match x {
            Alternative::Act(f) => act_value(self, f),
            Alternative::Bundle(_) => Err(Error::ShapeMismatch("act preference applied to a bundle".into())),
        }
    }
}

/// The true preference behind a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    Wald(WaldUtility),
    Aa(AAPreference),
}

impl Utility for Preference {
    fn utility(&self, x: &Alternative) -> Result<f64> {
        match self {
            Preference::Wald(u) => u.utility(x),
            Preference::Aa(p) => p.utility(x),
        }
    }
}

/// `q(x, y; ⪰)` evaluated through a utility representative.
pub fn q_eval_pref<U: Utility + ?Sized>(noise: &NoiseModel, pref: &U, x: &Alternative, y: &Alternative) -> Result<f64> {
    Ok(q_eval(noise, pref.utility(x)?, pref.utility(y)?))
}

/// Two independent draws from the space.
pub fn sample_problem<R: Rng + ?Sized>(space: &ChoiceSpace, rng: &mut R) -> Result<(Alternative, Alternative)> {
    let x = space.sample(rng)?;
    let y = space.sample(rng)?;
    Ok((x, y))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChoiceRecord {
    pub chosen: Alternative,
    pub rejected: Alternative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub version: u32,
    pub space: ChoiceSpace,
    pub preference: Preference,
    pub noise: NoiseModel,
    pub seed: u64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<ChoiceRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Record `i` uses random stream `(seed, i)`, so datasets are prefix-stable
/// and can be generated in parallel.
pub fn generate_dataset(
    space: &ChoiceSpace,
    pref: &Preference,
    noise: &NoiseModel,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    let records = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let (x, y) = sample_problem(space, &mut rng)?;
            let q = q_eval_pref(noise, pref, &x, &y)?;
            let pick_x = rng.gen::<f64>() < q;
            Ok(if pick_x {
                ChoiceRecord { chosen: x, rejected: y }
            } else {
                ChoiceRecord { chosen: y, rejected: x }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = DatasetMeta {
        version: DATASET_FORMAT_VERSION,
        space: space.clone(),
        preference: pref.clone(),
        noise: *noise,
        seed,
        n,
    };
    Ok(Dataset { meta, records })
}

/// Line-delimited JSON: the meta object, then one `{"chosen", "rejected"}`
/// object per record.
pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &ds.meta)?;
    out.write_all(b"\n")?;
    for r in &ds.records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    chosen: serde_json::Value,
    rejected: serde_json::Value,
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let first = lines.next().ok_or(Error::Parse { line: 1, msg: "missing meta line".into() })??;
    let meta: DatasetMeta =
        serde_json::from_str(&first).map_err(|e| Error::Parse { line: 1, msg: format!("bad meta: {e}") })?;
    let mut records = Vec::with_capacity(meta.n);
    let mut line_no = 1;
    for line in lines {
        line_no += 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse { line: line_no, msg };
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let chosen = meta.space.parse_alternative(raw.chosen).map_err(bad)?;
        let rejected = meta.space.parse_alternative(raw.rejected).map_err(bad)?;
        records.push(ChoiceRecord { chosen, rejected });
    }
    if records.len() != meta.n {
        return Err(Error::Parse {
            line: line_no + 1,
            msg: format!("meta declares {} records, file has {}", meta.n, records.len()),
        });
    }
    Ok(Dataset { meta, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wald_env::{BoxDomain, ConeDomain};

    fn unit_box() -> ChoiceSpace {
        ChoiceSpace::Domain(Domain::Box(BoxDomain::unit(2)))
    }

    fn linear() -> Preference {
        Preference::Wald(WaldUtility::linear(vec![0.3, 0.7]).unwrap())
    }

    #[test]
    fn q_examples() {
        let flip = NoiseModel::constant_flip(0.75).unwrap();
        assert_eq!(q_eval(&flip, 0.9, 0.1), 0.75);
        assert_eq!(q_eval(&flip, 0.1, 0.9), 0.25);
        assert_eq!(q_eval(&flip, 0.4, 0.4), 0.5);
        let br = NoiseModel::bounded_response(0.6, 0.9, 0.5).unwrap();
        assert!((q_eval(&br, 0.75, 0.25) - (0.6 + 0.3 * 1f64.tanh())).abs() < 1e-15);
        assert!((q_eval(&br, 0.75, 0.25) - 0.82848).abs() < 1e-5);
        assert_eq!(q_eval(&br, 0.3, 0.3), 0.5);
        assert_eq!(q_eval(&NoiseModel::Noiseless, 0.2, 0.1), 1.0);
        assert_eq!(q_eval(&NoiseModel::Noiseless, 0.1, 0.2), 0.0);
        assert_eq!(q_eval(&NoiseModel::Noiseless, 0.1, 0.1), 0.5);
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseModel::constant_flip(0.5).is_err());
        assert!(NoiseModel::constant_flip(1.0).is_err());
        assert!(NoiseModel::bounded_response(0.7, 0.6, 1.0).is_err());
        assert!(NoiseModel::bounded_response(0.6, 0.7, 0.0).is_err());
        assert!(serde_json::from_str::<NoiseModel>(r#"{"constant_flip": {"theta": 0.4}}"#).is_err());
        let n: NoiseModel = serde_json::from_str(r#"{"bounded_response": {"theta_min": 0.6, "theta_max": 0.9, "tau": 0.5}}"#).unwrap();
        assert_eq!(n.floor(), 0.6);
        let n: NoiseModel = serde_json::from_str(r#""noiseless""#).unwrap();
        assert_eq!(n, NoiseModel::Noiseless);
    }

    #[test]
    fn empty_dataset_has_meta() {
        let ds = generate_dataset(&unit_box(), &linear(), &NoiseModel::constant_flip(0.75).unwrap(), 0, 9).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.meta.n, 0);
    }

    #[test]
    fn datasets_are_prefix_stable() {
        let noise = NoiseModel::constant_flip(0.75).unwrap();
        let short = generate_dataset(&unit_box(), &linear(), &noise, 10, 4).unwrap();
        let long = generate_dataset(&unit_box(), &linear(), &noise, 25, 4).unwrap();
        assert_eq!(short.records[..], long.records[..10]);
    }

    #[test]
    fn problems_are_reproducible() {
        let a = sample_problem(&unit_box(), &mut stream(5, 0)).unwrap();
        let b = sample_problem(&unit_box(), &mut stream(5, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn act_datasets_round_trip() {
        let space = ChoiceSpace::Acts(ActSpace::new(2, Interval::unit(), 3).unwrap());
        let pref: Preference = serde_json::from_str(
            r#"{"aa": {"kind":"maxmin","index":{"knots":[0,0.5,1],"values":[0,0.7,1]},"priors":[[0.2,0.8],[0.6,0.4]],"states":2}}"#,
        )
        .unwrap();
        let ds = generate_dataset(&space, &pref, &NoiseModel::constant_flip(0.8).unwrap(), 5, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("acts.jsonl");
        write_dataset(&ds, &path).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn read_errors_name_the_line() {
        let ds = generate_dataset(&unit_box(), &linear(), &NoiseModel::constant_flip(0.75).unwrap(), 4, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&ds, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cut = &text[..text.trim_end().len() - 7];
        std::fs::write(&path, cut).unwrap();
        match read_dataset(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }

        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[2] = r#"{"chosen":[0.1,0.2,0.3],"rejected":[0.1,0.2]}"#.into();
        std::fs::write(&path, lines.join("\n")).unwrap();
        match read_dataset(&path) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("dimension"));
            }
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn cone_space_descriptor() {
        let space = ChoiceSpace::Domain(Domain::Cone(ConeDomain::new(0.1, 1.0, 2).unwrap()));
        let text = serde_json::to_string(&space).unwrap();
        assert_eq!(text, r#"{"domain":{"cone":{"alpha":0.1,"M":1.0,"d":2}}}"#);
    }

    proptest::proptest! {
        #[test]
        fn flip_probabilities_are_complementary(
            theta in 0.5001f64..0.9999,
            lo in 0.5001f64..0.9,
            span in 0.0f64..0.0999,
            tau in 0.01f64..5.0,
            ux in -3.0f64..3.0,
            uy in -3.0f64..3.0,
        ) {
            let models = [
                NoiseModel::constant_flip(theta).unwrap(),
                NoiseModel::bounded_response(lo, lo + span, tau).unwrap(),
                NoiseModel::Noiseless,
            ];
            for noise in &models {
                let (q, r) = (q_eval(noise, ux, uy), q_eval(noise, uy, ux));
                proptest::prop_assert_eq!(q + r, 1.0);
                if ux > uy {
                    proptest::prop_assert!(q >= noise.floor());
                }
            }
        }
    }
}
