use serde::{Deserialize, Serialize};

use crate::aa_prefs::{simplex_grid, AAPreference, BernoulliIndex};
use crate::error::{Error, Result};

/// A finite grid of expected-utility preferences: priors on a simplex grid
/// times piecewise-linear indices with fixed knots and interior values on
/// the grid `{1/value_steps, …, 1 - 1/value_steps}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EuGridSpec {
    pub states: usize,
    pub prior_steps: u32,
    pub knots: Vec<f64>,
    pub value_steps: u32,
}

fn increasing_values(slots: usize, steps: u32, start: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if current.len() == slots {
        out.push(current.clone());
        return;
    }
    for v in start..steps {
        current.push(v);
        increasing_values(slots, steps, v + 1, current, out);
        current.pop();
    }
}

impl EuGridSpec {
    pub fn indices(&self) -> Result<Vec<BernoulliIndex>> {
        if self.knots.len() < 2 {
            return Err(Error::Config("index grid needs at least the two endpoint knots".into()));
        }
        let interior = self.knots.len() - 2;
        let mut combos = Vec::new();
        increasing_values(interior, self.value_steps, 1, &mut Vec::new(), &mut combos);
        combos
            .into_iter()
            .map(|c| {
                let mut values = Vec::with_capacity(self.knots.len());
                values.push(0.0);
                values.extend(c.iter().map(|v| *v as f64 / self.value_steps as f64));
                values.push(1.0);
                BernoulliIndex::new(self.knots.clone(), values)
            })
            .collect()
    }

    /// Priors vary slowest.
    pub fn members(&self) -> Result<Vec<AAPreference>> {
        if self.states == 0 || self.prior_steps == 0 || self.value_steps < 2 {
            return Err(Error::Config("EU grid needs states, prior_steps >= 1 and value_steps >= 2".into()));
        }
        let indices = self.indices()?;
        let mut out = Vec::new();
        for prior in simplex_grid(self.states, self.prior_steps) {
            for index in &indices {
                out.push(AAPreference::eu(prior.clone(), index.clone())?);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("EU grid is empty".into()));
        }
        Ok(out)
    }
}
