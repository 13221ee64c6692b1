//! Numerical tolerances shared across the crate.
//!
//! Construction-time validation is two decades tighter than the decisions
//! taken from solver output.

/// Validation tolerance for hand-built observables, channels and instruments.
pub const CONSTRUCTION: f64 = 1e-9;

/// Absolute constraint residual accepted for a feasibility witness.
pub const FEASIBILITY: f64 = 1e-7;

/// Required negative-definiteness margin of a normalized infeasibility certificate.
pub const CERTIFICATE_MARGIN: f64 = 1e-9;

/// Objective accuracy for optimization queries.
pub const OBJECTIVE_GAP: f64 = 1e-6;

/// Eigenvalues of an effect within this distance of {0, 1} mark a projection.
pub const PROJECTION: f64 = 1e-9;

/// Relative cutoff below which Choi eigenvalues do not count toward the Kraus rank.
pub const KRAUS_RANK: f64 = 1e-10;
