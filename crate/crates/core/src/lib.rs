//! Simulation kernel for a system of two coupled KdV equations on `(0, L)`
//! with localized feedback damping.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: physical parameters, the nonlinearity family, grid, state and
//!   initial data.
//! * [`banded`]: band-stored matrices and a pivoted banded LU.
//! * [`discretization`]: first/third derivative operators with the boundary
//!   closures and the interleaved coupled linear operator.
//! * [`damping`]: the mean-zero localized projection, multiplicative damping
//!   and their quadrature masks.
//! * [`timestepper`]: IMEX time integration and the run loop.
//! * [`diagnostics`]: energy, dissipation identity, decay fits and
//!   observability quotients.

pub mod banded;
pub mod damping;
pub mod diagnostics;
pub mod discretization;
pub mod model;
pub mod timestepper;

pub use damping::{
    BumpProfile, DampingConfig, DampingKind, DampingOperator, DampingTarget, OmegaMask,
};
pub use diagnostics::{DecayFit, EnergyRecord, EnergyRecorder, Observability};
pub use discretization::{BoundarySlopes, LinearSystemOp};
pub use model::{Grid, InitialCondition, Nonlinearity, Profile, State, SystemParams, Window};
pub use timestepper::{
    NonlinearForm, Observer, RunOptions, RunSummary, Scheme, Stepper, StepperConfig, StopReason,
};
