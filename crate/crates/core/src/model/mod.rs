//! Problem definitions, assumption constants, the built-in catalog and
//! randomised validators for the standing assumptions.

pub mod catalog;
mod problem;
mod validate;

pub use catalog::{
    builtin_catalog, cubic_mf, decoupled_cubic, linear, lookup, noise_only, pure_delay_cubic,
    ProblemCatalogEntry, CATALOG_NAMES,
};
pub use problem::{
    AssumptionConstants, DiffusionFn, DriftFn, NeutralDelayProblem, NeutralFn, ProblemBuilder,
    ProblemError, SegmentFn,
};
pub use validate::{
    validate_all, validate_growth, validate_initial_segment, validate_neutral_contraction,
    validate_one_sided, validate_sigma, validate_tamed_one_sided, CheckOutcome, DriftForm,
    ValidationOptions, ValidationReport, Witness,
};
