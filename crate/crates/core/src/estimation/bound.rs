use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants of the high-probability bound
/// `ρ(u_n, u*) <= C̄ (K √(V/n) + √(2 ln(1/δ) / n))^{1/D}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "C_bar")]
    pub c_bar: f64,
    #[serde(rename = "V")]
    pub v: u32,
    #[serde(rename = "D")]
    pub d: u32,
    pub delta: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.k > 0.0
            && self.k.is_finite()
            && self.c_bar > 0.0
            && self.c_bar.is_finite()
            && self.v >= 1
            && self.d >= 1
            && self.delta > 0.0
            && self.delta <= 1.0;
        if !ok {
            return Err(Error::Config(format!("invalid bound parameters {self:?}")));
        }
        Ok(())
    }

    /// The bracket `K √(V/n) + √(2 ln(1/δ) / n)`.
    pub fn base(&self, n: u64) -> f64 {
        let n = n as f64;
        self.k * (self.v as f64 / n).sqrt() + (2.0 * (1.0 / self.delta).ln() / n).sqrt()
    }
}

pub fn bound_eval(bp: &BoundParams, n: u64) -> f64 {
    bp.c_bar * bp.base(n.max(1)).powf(1.0 / bp.d as f64)
}

/// Smallest `C̄` for which the bound at `n0` covers every observed `ρ`.
pub fn fit_c_bar(bp: &BoundParams, n0: u64, observed: &[f64]) -> f64 {
    let worst = observed.iter().copied().fold(0.0, f64::max);
    let unit = BoundParams { c_bar: 1.0, ..*bp };
    worst / bound_eval(&unit, n0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> BoundParams {
        BoundParams { k: 1.0, c_bar: 1.0, v: 3, d: 2, delta: 0.1 }
    }

    #[test]
    fn regression_value() {
        // (sqrt(0.03) + sqrt(2 ln 10 / 100))^(1/2)
        let direct = ((0.03f64).sqrt() + (2.0 * 10f64.ln() / 100.0).sqrt()).sqrt();
        assert!((bound_eval(&params(), 100) - direct).abs() < 1e-15);
        assert!((bound_eval(&params(), 100) - 0.62274).abs() < 1e-4);
    }

    #[test]
    fn large_n_and_unit_delta() {
        assert!(bound_eval(&params(), 1_000_000_000_000) < 1e-2);
        let bp = BoundParams { delta: 1.0, ..params() };
        let expected = (3.0f64 / 100.0).sqrt().sqrt();
        assert!((bound_eval(&bp, 100) - expected).abs() < 1e-15);
    }

    #[test]
    fn monotone_in_n_v_and_delta() {
        let bp = params();
        let mut prev = f64::INFINITY;
        for n in [1u64, 10, 100, 1000, 10_000, 100_000] {
            let b = bound_eval(&bp, n);
            assert!(b < prev);
            prev = b;
        }
        let mut prev = 0.0;
        for v in 1..10 {
            let b = bound_eval(&BoundParams { v, ..bp }, 100);
            assert!(b > prev);
            prev = b;
        }
        let mut prev = 0.0;
        for delta in [0.9, 0.5, 0.1, 0.01, 0.001] {
            let b = bound_eval(&BoundParams { delta, ..bp }, 100);
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn fitted_c_bar_covers_the_fit_cell() {
        let bp = params();
        let obs = [0.1, 0.3, 0.2];
        let c = fit_c_bar(&bp, 100, &obs);
        let fitted = BoundParams { c_bar: c, ..bp };
        assert!((bound_eval(&fitted, 100) - 0.3).abs() < 1e-12);
        assert!(BoundParams { delta: 0.0, ..bp }.validate().is_err());
    }
}
