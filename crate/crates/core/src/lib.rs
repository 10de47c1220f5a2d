//! Optimal thermodynamic distillation under thermal operations.
//!
//! Exact single-shot errors and dissipated free energy are computed from a
//! compressed form of the embedded product distribution (see [`atoms`]);
//! second-order closed forms and the Berry-Esseen bound live in
//! [`asymptotics`]. [`pure`] handles identical pure copies and
//! [`applications`] wraps work extraction, erasure and encoding.

pub mod applications;
pub mod asymptotics;
pub mod atoms;
pub mod error;
pub mod majorisation;
pub mod model;
pub mod moments;
pub mod numerics;
pub mod pure;

pub use error::{DistillError, Result};
pub use model::{gibbs_weights, Ensemble, Group, IncoherentState, LocalState, PureState, Spectrum, Subsystem, TargetSpec};
