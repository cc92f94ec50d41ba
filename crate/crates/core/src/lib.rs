//! Energy-aware semantic-communication offloading in multi-edge wireless networks.
//!
//! Users extract a fraction `delta` of an encoded sample, upload it to one edge
//! node, and the edge reconstructs and classifies it. The crate models the
//! energy and delay of that pipeline, solves the relaxed joint association and
//! CPU-frequency allocation problem, and provides baselines, a brute-force
//! oracle, calibration from measurements and a sweep harness.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` / `*F32` aliases below name the common concrete types.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod calibration;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod model;
pub mod oracle;
pub mod problem;
pub mod scalar;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{EnergyBreakdown, LatencyBreakdown, QosModel, RadioLink, SystemParams};
pub use problem::{check_original, check_relaxed, objective, DecisionSet, FeasibilityReport, ProblemSpec};
pub use scalar::Scalar;
pub use scenario::config::Config;
pub use scenario::Scenario;
pub use solver::{solve, Solution, SolveMode, SolveOptions};

pub type SystemParamsF64 = SystemParams<f64>;
pub type QosModelF64 = QosModel<f64>;
pub type ScenarioF64 = Scenario<f64>;
pub type ProblemSpecF64 = ProblemSpec<f64>;
pub type DecisionSetF64 = DecisionSet<f64>;
pub type SolveOptionsF64 = SolveOptions<f64>;
pub type SolutionF64 = Solution<f64>;
pub type EnergyBreakdownF64 = EnergyBreakdown<f64>;

pub type SystemParamsF32 = SystemParams<f32>;
pub type QosModelF32 = QosModel<f32>;
pub type ScenarioF32 = Scenario<f32>;
pub type ProblemSpecF32 = ProblemSpec<f32>;
pub type DecisionSetF32 = DecisionSet<f32>;
pub type SolveOptionsF32 = SolveOptions<f32>;
pub type SolutionF32 = Solution<f32>;
pub type EnergyBreakdownF32 = EnergyBreakdown<f32>;
