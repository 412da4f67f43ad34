//! Relaxed variable splitting coarse gradient descent (RVSCGD) for learning a
//! sparse filter in a one-hidden-layer, non-overlapping convolutional network
//! with binarized ReLU activation and Gaussian inputs.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, the command line or a thread pool lives in the `rvscgd`
//! companion crate.
//!
//! Module map:
//!
//! * [`penalties`]: ℓ1, ℓ0 and transformed-ℓ1 penalties with their exact
//!   thresholding operators, plus a grid-search prox oracle.
//! * [`model`]: Gaussian patch sampling, the forward pass, the sample loss,
//!   the coarse (straight-through) gradient and their empirical averages.
//! * [`population`]: closed-form population loss, true gradient and expected
//!   coarse gradient.
//! * [`optimizer`]: the splitting iteration itself, the Lagrangian, step-size
//!   preconditions and limit-point diagnostics.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod penalties;
pub mod population;

pub use error::Error;
pub use model::{Dataset, PatchMatrix};
pub use optimizer::{
    GradientMode, HyperParams, IterState, LimitDiagnostics, PreconditionPolicy, PreconditionReport,
    ProxParameterization, RunChecks, RunOutput, Solver, Termination, TraceRecord,
};
pub use penalties::{Penalty, ProxParam};
pub use population::AngleReport;

pub type Result<T, E = Error> = core::result::Result<T, E>;
