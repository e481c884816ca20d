//! Discrete optimal control of the Allen–Cahn equation with a dynamic
//! boundary condition.
//!
//! The crate discretizes the bulk/surface coupled state system on the unit
//! square with a lumped-mass variational scheme (implicit Euler in time),
//! and provides the linearized, adjoint and second-derivative solves, the
//! tracking cost with its exact discrete gradient and curvature, first- and
//! second-order optimality diagnostics, and a projected-gradient optimizer
//! for box-constrained controls.
//!
//! Everything here is `no_std` + `alloc`; file formats, configuration and the
//! command line live in the `acopt` crate.
#![no_std]
// `!(a < b)` comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub mod fields;
pub mod geometry;
pub mod linear;
pub mod objective;
pub mod optimizer;
pub mod potential;
pub mod presets;
mod sparse;
pub mod state;

pub use error::Error;
pub use fields::{ControlPair, FieldPair, Trajectory};
pub use geometry::{Discretization, Grid, OperatorSet, TimeAxis};
pub use linear::{CoefficientFields, Linearization};
pub use objective::{ControlProblem, Evaluation, OptimalityReport, Targets, Weights};
pub use optimizer::{IterateRecord, Minimization, OptimizerConfig};
pub use potential::Potential;
pub use sparse::CsrMatrix;
pub use state::{NewtonOptions, StateSolution};

pub type Result<T, E = Error> = core::result::Result<T, E>;
