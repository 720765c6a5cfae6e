//! Unit-level difference-in-differences bounds for short panels.
//!
//! The crate is `no_std` with `alloc`; file formats, the CLI and thread pools
//! live in the `policybound` companion crate.
#![cfg_attr(not(test), no_std)]
// `!(x >= 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bounds;
pub mod cate;
pub mod did;
pub mod error;
pub mod estimands;
pub mod linalg;
pub mod normal;
pub mod panel;
pub mod quadrature;
pub mod sim;
pub mod theory;

pub use bounds::{
    bound_interval, bound_unit, coarsened_untreated_bound, oracle_tau, robustness_grid, tau_from_rule, tipping_z,
    BoundResult, CoarseningStrategy, Norm, RobustnessGrid, Sign, TauOutput, TauRule, TauStyle, TippingPoint,
};
pub use cate::{cate_interval, fit_cate_arrays, fit_cate_projection, twfe_ate, CateFit, CateInterval, TwfeFit};
pub use did::{
    fit_linear_trend_model, group_trend, impute_counterfactual, pre_period_residuals, unit_did, Adjuster, LinearTrend,
    ResidualVector, UnitDidEstimate,
};
pub use error::{Error, Result};
pub use estimands::{
    coarsened_mixture, projection_oracle, treated_design_projection, unit_ite, version_cate, version_cde,
    version_weight, DGPParams, ErrorLaw, EstimandKind, Line, OutcomeProcess,
};
pub use panel::{
    comparator_pool, derive_coarsened, first_difference, ComparatorPool, CovariateValue, Observation, Panel, Target,
};
pub use sim::{
    accept_dataset, draw_dataset, evaluate_intervals, make_illustration, run_replication, run_replications,
    AcceptanceRule, Estimator, SimDataset, SimReport, StudyConfig,
};
pub use theory::{lemma2_inflation, shift_constant, worst_case_halfwidth, Arm};
