//! Fractional-Brownian-driven neutral McKean-Vlasov delay equations:
//! fBm sampling, empirical measures, problem definitions with assumption
//! validators, the tamed theta Euler-Maruyama particle scheme, and Monte
//! Carlo convergence studies.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`, with `*32` variants for single precision.

pub mod experiments;
pub mod fbm;
pub mod measure;
pub mod model;
pub mod num;
pub mod rng;
pub mod scheme;

pub use num::Real;

pub type Problem = model::NeutralDelayProblem<f64>;
pub type Problem32 = model::NeutralDelayProblem<f32>;
pub type Config = scheme::SchemeConfig<f64>;
pub type Config32 = scheme::SchemeConfig<f32>;
pub type Output = scheme::SimulationOutput<f64>;
pub type Output32 = scheme::SimulationOutput<f32>;
pub type Measure = measure::EmpiricalMeasure<f64>;
pub type Measure32 = measure::EmpiricalMeasure<f32>;
pub type Hurst = fbm::HurstParam<f64>;
pub type Grid = fbm::TimeGrid<f64>;
pub type Generator = fbm::FbmGenerator<f64>;
pub type Experiment = experiments::ExperimentConfig<f64>;
pub type Table = experiments::ErrorTable<f64>;
