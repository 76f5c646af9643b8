//! Computable forms of the approximation and convergence theory: the
//! network embedding map, the parameter-perturbation constant and its
//! empirical check, entropy and rate calculators, box-counting dimension
//! estimates and an empirical convergence-rate probe.

mod bounds;
mod checks;
mod dimension;
mod embed;
mod lipschitz;
mod rate;

pub use bounds::{
    approx_bound, c1, c2, c3, entropy_bound, rate_exponent, rate_report, rate_value, width_schedule, BoundInputs,
    BoundReport, EntropyPoint, WidthSchedule,
};
pub use checks::{
    covariate_dimension, dimension_suite, embedding_suite, gradient_suite, lipschitz_grid, lipschitz_suite,
    SuiteReport, EMBED_TOL, GRAD_ABS_TOL, GRAD_REL_TOL, GRAD_STEP,
};
pub use dimension::{box_count, default_scales, minkowski_dimension};
pub use embed::{embed_network, embedding_param_budget};
pub use lipschitz::{lipschitz_constant, verify_lipschitz, LipschitzReport, NetFamily};
pub use rate::{empirical_rate_experiment, RateCell, RateConfig, RateSlope, RateTable};
