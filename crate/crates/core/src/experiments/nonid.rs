use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::{fmt_f64, RunReport, Seeds, Series, Table};
use super::check_version;
use crate::error::{Error, Result};
use crate::estimation::pairwise_sum;
use crate::rng::stream;

fn default_values() -> Vec<f64> {
    vec![0.0, 0.6, 1.0]
}

fn default_k_values() -> Vec<u32> {
    vec![1, 2, 5, 10, 20, 50]
}

fn default_samples() -> usize {
    20_000
}

/// Expected utility over a finite prize set, represented by the utility
/// vectors `v^k = β_k·1 + v/k` normalised to unit Euclidean length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonidConfig {
    pub version: u32,
    pub seed: u64,
    /// Utility of each prize.
    #[serde(default = "default_values")]
    pub values: Vec<f64>,
    #[serde(default = "default_k_values")]
    pub k_values: Vec<u32>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

/// The larger root `β` of `|K|β² + 2β(Σv)/k + ‖v‖²/k² = 1`, so that
/// `‖β·1 + v/k‖₂ = 1`. It may be negative for small `k` and tends to
/// `1/√|K|`.
pub fn normalized_shift(values: &[f64], k: u32) -> Result<f64> {
    let n = values.len() as f64;
    let k = k as f64;
    let sum: f64 = values.iter().sum();
    let sq: f64 = values.iter().map(|v| v * v).sum();
    let (a, b, c) = (n, 2.0 * sum / k, sq / (k * k) - 1.0);
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::Numerical(format!("no real normalising shift at k = {k}")));
    }
    Ok((-b + disc.sqrt()) / (2.0 * a))
}

fn flat_dirichlet<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn run_nonidentification_demo(cfg: &NonidConfig) -> Result<RunReport> {
    check_version(cfg.version)?;
    if cfg.values.len() < 2 || cfg.k_values.is_empty() || cfg.k_values.contains(&0) || cfg.samples == 0 {
        return Err(Error::Config("need at least two prizes, positive k values and samples >= 1".into()));
    }
    let n = cfg.values.len();
    let mut ks = cfg.k_values.clone();
    ks.sort_unstable();
    ks.dedup();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, i as u64);
            (flat_dirichlet(n, &mut rng), flat_dirichlet(n, &mut rng))
        })
        .collect();
    let mean = cfg.values.iter().sum::<f64>() / n as f64;
    let spread = cfg.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
    let range = cfg.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - cfg.values.iter().copied().fold(f64::INFINITY, f64::min);

    let mut report = RunReport::new("nonid", cfg, Seeds { base: cfg.seed, replicates: vec![] })?;
    report.notes.push(format!(
        "Finite prize set with {n} prizes. Every v^k represents the same preference, yet the normalised \
representations approach a constant function."
    ));
    let mut table = Table::new("k,beta,disagreement,l2_to_constant,sup_to_constant");
    let mut s_dis = Series::new("disagreement", "k");
    let mut s_l2 = Series::new("l2_to_constant", "k");
    let mut s_sup = Series::new("sup_to_constant", "k");
    let mut norms_ok = true;
    for &k in &ks {
        let beta = normalized_shift(&cfg.values, k)?;
        let vk: Vec<f64> = cfg.values.iter().map(|v| beta + v / k as f64).collect();
        norms_ok &= (dot(&vk, &vk).sqrt() - 1.0).abs() < 1e-12;
        let terms: Vec<f64> = pairs
            .iter()
            .map(|(p, q)| {
                let a = dot(&vk, p) - dot(&vk, q);
                let b = dot(&cfg.values, p) - dot(&cfg.values, q);
                ((a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0)) as u8 as f64
            })
            .collect();
        let dis = pairwise_sum(&terms) / cfg.samples as f64;
        let vmean = vk.iter().sum::<f64>() / n as f64;
        let l2 = vk.iter().map(|v| (v - vmean).powi(2)).sum::<f64>().sqrt();
        // Over lotteries, v^k·p ranges over [min v^k, max v^k].
        let sup = (vk.iter().copied().fold(f64::NEG_INFINITY, f64::max) - vk.iter().copied().fold(f64::INFINITY, f64::min)) / 2.0;
        table.push(vec![k.to_string(), fmt_f64(beta), fmt_f64(dis), fmt_f64(l2), fmt_f64(sup)]);
        s_dis.push(k as f64, &[dis])?;
        s_l2.push(k as f64, &[l2])?;
        s_sup.push(k as f64, &[sup])?;
    }
    let l2 = s_l2.medians();
    report.summary = json!({
        "unit_norm": norms_ok,
        "disagreement_all_zero": s_dis.medians().iter().all(|d| *d == 0.0),
        "l2_reduction_factor": l2[0] / l2[l2.len() - 1],
        "l2_scale": spread,
        "sup_scale": range / 2.0,
    });
    report.series = vec![s_dis, s_l2, s_sup];
    report.table = table;
    Ok(report)
}
