//! Measurement-theoretic relations between finite-dimensional quantum
//! observables and channels.
//!
//! The crate decides post-processing, simulability, observable–channel
//! compatibility and joint measurability through conic feasibility problems
//! with checked witnesses and infeasibility certificates, builds Naimark
//! dilations, least disturbing channels and Stinespring-style realizations,
//! and evaluates the Galois connection induced by compatibility together with
//! its closure maps.
//!
//! Conventions used everywhere:
//! * Choi operators are ordered output ⊗ input:
//!   `J(Λ) = Σ_ab Λ(|a⟩⟨b|) ⊗ |a⟩⟨b|`.
//! * Outcome order is the order of the outcome label list.
//! * Tensor products are first-factor major.

// negated comparisons are written to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conic;
pub mod dilation;
pub mod galois;
pub mod io;
pub mod linops;
pub mod qmodel;
pub mod relations;
pub mod reproduce;
pub mod sample;
pub mod tol;

pub use conic::{ConicProblem, SolverOptions, Status, Verdict};
pub use linops::{ComplexMatrix, HermitianOperator, C64};
pub use qmodel::{Channel, Instrument, Observable, StochasticMatrix, UnbiasedQubitObservable};
pub use relations::{Answer, RelationVerdict};
