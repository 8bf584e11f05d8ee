//! Sub-additive topological pressure for random subshifts of finite type.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod base;
pub mod bowen;
pub mod bundle;
pub mod error;
pub mod fixtures;
pub mod measures;
pub mod numeric;
pub mod potentials;
pub mod pressure;
pub mod varprinciple;

pub use base::{BaseChain, BaseWord};
pub use bowen::{
    dimension_root, lyapunov_spread, pressure_at_t, BowenSettings, DimensionRoot, LyapunovSpread,
};
pub use bundle::{separated, BundleSft, Cylinder};
pub use error::{Error, Result};
pub use measures::{FStarBracket, RandomMarkovMeasure};
pub use numeric::Budget;
pub use potentials::{
    AdditivePotential, CocyclePotential, NormKind, ScaledInverseNormPotential, SubadditivePotential,
};
pub use pressure::{
    estimate_pressure, log_partition_sum, pressure_curve, Estimator, EstimatorKind, Mode,
    PressureCurve, PressureEstimate,
};
pub use varprinciple::{
    empirical_measure_diagnostic, optimize_measure, vp_gap, GapReport, OptimizerSettings,
    VpSettings,
};
