//! Simulation toolkit for macroscopic spin superposition experiments.
//!
//! The physics modules are generic over [`Real`] (`f32` or `f64`). The
//! aliases below fix the scalar to `f64`, which is what the config, report
//! and CLI layers use.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constants;
pub mod decoherence;
pub mod eigen;
pub mod error;
pub mod feasibility;
pub mod kvfile;
pub mod materials;
pub mod protocol;
pub mod report;
pub mod scalar;
pub mod spinmodel;
pub mod units;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Constants = constants::PhysicalConstants<f64>;
pub type Material = materials::MaterialParams<f64>;
pub type Shell = materials::ShellMaterial<f64>;
pub type Particle = materials::ParticleSpec<f64>;
pub type Counting = materials::SpinCounting<f64>;
pub type Model = spinmodel::DoubleWellModel<f64>;
pub type Protocol = protocol::ProtocolConfig<f64>;
pub type ProtocolOutput = protocol::ProtocolResult<f64>;
pub type Environment = decoherence::EnvironmentConfig<f64>;
pub type Budget = decoherence::DecoherenceBudget<f64>;
pub type Constraints = feasibility::DesignConstraints<f64>;
pub type Candidate = feasibility::DesignCandidate<f64>;
pub type Problem = feasibility::DesignProblem<f64>;
