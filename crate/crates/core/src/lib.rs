//! Spectral Galerkin stochastic Navier–Stokes on the 3-torus, the
//! drift-reduced companion systems and their Girsanov weight, and density
//! estimators for time regularity of finite-dimensional projections.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod basis;
pub mod config;
pub mod density;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod girsanov;
pub mod integrator;
pub mod noise;
pub mod seed;
pub mod stats;

pub use basis::{leray_project, Basis, BasisElement, Parity, VelocityState, WaveVector};
pub use config::{ExperimentConfig, InitialCondition};
pub use density::{DensityEstimate, Grid, GridFunction, HoelderFit, Samples};
pub use diagnostics::{run_diagnostics, DiagnosticReport, DiagnosticRow};
pub use error::{Error, Result};
pub use experiments::{run_besov_holder, run_holder_pair, run_l1_holder, DistanceTable};
pub use girsanov::GirsanovWeight;
pub use integrator::{simulate, Model, NoiseSpec, SystemVariant, Trajectory};
pub use noise::{CovarianceSpec, SubspaceF};
