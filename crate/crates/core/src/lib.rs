//! Spin Calogero-Moser particles with hyperbolic interaction and their
//! integrable hierarchy.
//!
//! Everything is generic over the scalar (`f32` or `f64`); the aliases at the
//! crate root fix it to `f64`.

// `!(a >= b)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod ddouble;
pub mod discrete;
pub mod error;
pub mod flows;
pub mod kp;
pub mod linalg;
pub mod phase;
pub mod random;
pub mod report;
pub mod residue;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use report::{Check, VerificationReport};
pub use scalar::Real;

pub type SpinState = phase::SpinState<f64>;
pub type LaxPair = phase::LaxPair<f64>;
pub type PhaseVector = flows::PhaseVector<f64>;
pub type FlowSpec = flows::FlowSpec<f64>;
pub type Trajectory = flows::Trajectory<f64>;
pub type DiscreteLevel = discrete::DiscreteLevel<f64>;
pub type DiscreteSpec = discrete::DiscreteSpec<f64>;
pub type DiscreteTrajectory = discrete::DiscreteTrajectory<f64>;
pub type KpConstants = kp::KpConstants<f64>;
pub type WaveVectors = kp::WaveVectors<f64>;
