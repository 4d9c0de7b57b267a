//! Estimation from choice data: the ERM estimator `u_n`, the sup-norm
//! metric `ρ`, Monte Carlo estimates of `μ(⪰′, ⪰)` and of the separation gap,
//! VC-shattering search and the sample-complexity bound.

mod bound;
mod erm;
mod monte_carlo;
mod vc;

pub use bound::{bound_eval, fit_c_bar, BoundParams};
pub use erm::{empirical_score, erm_fit, rho, ErmResult, ParamPoint, DEFAULT_REFINEMENT_PASSES};
pub use monte_carlo::{
    disagreement, mu_estimate, paired_mean, pairwise_sum, separation_estimate, separation_exponent_check,
    write_scatter_csv, McEstimate, SeparationEstimate, SeparationReport, SeparationRow,
};
pub use vc::{shatters, vc_lower_bound, VcResult, VC_BUDGET};

use crate::wald_env::Domain;

/// Default evaluation grid resolution for `ρ` (points per axis).
pub const DEFAULT_RHO_GRID: usize = 21;

/// The deterministic evaluation grid used for `ρ`: lattice points of the
/// domain's bounding box that lie in the domain.
pub fn evaluation_grid(domain: &Domain, per_axis: usize) -> Vec<Vec<f64>> {
    domain.lattice(per_axis)
}
