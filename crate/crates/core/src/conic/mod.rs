//! Feasibility and linear optimization over products of Hermitian PSD cones
//! under real affine equality constraints.
//!
//! The primary path is a homogeneous self-dual interior-point method; pure
//! feasibility queries fall back to Dykstra projections when it stalls.
//! Every `Feasible` verdict carries a witness and every `Infeasible` verdict a
//! Farkas certificate, both re-checked against the raw problem terms before
//! they are returned.

mod ipm;
mod presolve;
mod problem;
mod projection;
mod verify;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linops::{ComplexMatrix, HermitianOperator, LinalgError};
use crate::tol;

pub use problem::{ConicProblem, Entry};
pub use verify::{
    check_certificate, check_witness, verify_certificate, verify_witness, CertificateCheck, CertificateKind,
    WitnessCheck,
};

use ipm::{Control, Iterate};
use presolve::Presolved;
use problem::{blocks_inner, identity_blocks, zero_blocks, Blocks, Compiled};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Feasible,
    Infeasible,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Absolute constraint residual and eigenvalue slack accepted for witnesses.
    pub feasibility_tol: f64,
    /// Residual the interior-point path aims for before stopping early.
    pub polish_tol: f64,
    pub certificate_margin: f64,
    pub objective_gap: f64,
    pub max_ipm_iterations: usize,
    pub max_projection_rounds: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: tol::FEASIBILITY,
            polish_tol: 1e-9,
            certificate_margin: tol::CERTIFICATE_MARGIN,
            objective_gap: tol::OBJECTIVE_GAP,
            max_ipm_iterations: 200,
            max_projection_rounds: 5000,
        }
    }
}

/// Dual vector `y` with `b·y = 1` and `Σ_j y_j C_j ⪯ ±margin·1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub y: Vec<f64>,
    pub kind: CertificateKind,
    pub max_eigenvalue: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub ipm_iterations: usize,
    pub projection_rounds: usize,
    pub dropped_rows: usize,
    pub max_residual: f64,
    pub min_eigenvalue: f64,
    pub gap: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub status: Status,
    pub witness: Option<Vec<HermitianOperator>>,
    pub certificate: Option<Certificate>,
    pub diagnostics: Diagnostics,
}

impl Verdict {
    fn indeterminate(diagnostics: Diagnostics) -> Self {
        Verdict { status: Status::Indeterminate, witness: None, certificate: None, diagnostics }
    }
}

/// Result of [`solve_max`]; `value` is set only for a verified optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxResult {
    pub value: Option<f64>,
    pub verdict: Verdict,
}

fn raw_residual(c: &Compiled, x: &Blocks) -> f64 {
    c.apply(x).iter().zip(&c.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

struct Context<'a> {
    raw: &'a ConicProblem,
    compiled: &'a Compiled,
    pre: &'a Presolved,
    opts: &'a SolverOptions,
    /// `A*z ≈ 1` direction used to push bounded certificates into the strict region.
    interior: Option<Vec<f64>>,
}

impl<'a> Context<'a> {
    fn new(raw: &'a ConicProblem, compiled: &'a Compiled, pre: &'a Presolved, opts: &'a SolverOptions) -> Self {
        let interior = pre.gram.as_ref().map(|g| {
            let a_id = pre.reduced.apply(&identity_blocks(&pre.reduced.sizes));
            g.solve(&DVector::from_vec(a_id)).as_slice().to_vec()
        });
        Context { raw, compiled, pre, opts, interior }
    }

    /// Validates a raw-coordinate dual vector, trying to strengthen it when
    /// it only separates weakly.
    fn certificate(&self, y_raw: Vec<f64>) -> Option<Certificate> {
        let margin = self.opts.certificate_margin;
        let check = check_certificate(self.raw, &y_raw);
        let kind = check.kind(margin)?;
        let normalize = |y: Vec<f64>, b: f64| y.into_iter().map(|v| v / b).collect::<Vec<_>>();
        if kind == CertificateKind::Bounded {
            if let Some(z) = &self.interior {
                let z_raw = self.pre.lift(z, self.raw.num_rows());
                let base = normalize(y_raw.clone(), check.b_dot_y);
                for eps in [1e-9, 1e-7, 1e-5, 1e-3, 1e-1] {
                    let cand: Vec<f64> = base.iter().zip(&z_raw).map(|(a, b)| a - eps * b).collect();
                    let c = check_certificate(self.raw, &cand);
                    if c.kind(margin) == Some(CertificateKind::Strict) {
                        return Some(Certificate {
                            y: normalize(cand, c.b_dot_y),
                            kind: CertificateKind::Strict,
                            max_eigenvalue: c.max_eigenvalue,
                        });
                    }
                }
            }
        }
        Some(Certificate { y: normalize(y_raw, check.b_dot_y), kind, max_eigenvalue: check.max_eigenvalue })
    }

    /// Reduced multipliers with positive `b·y` as a certificate.
    fn try_dual(&self, y: &[f64]) -> Option<Certificate> {
        let by: f64 = self.pre.reduced.rhs.iter().zip(y).map(|(b, v)| b * v).sum();
        if !(by > 0.0) {
            return None;
        }
        self.certificate(self.pre.lift(y, self.raw.num_rows()))
    }

    fn feasible(&self, x: Blocks, mut diag: Diagnostics) -> Verdict {
        let check = check_witness(self.raw, &x);
        diag.max_residual = check.max_residual;
        diag.min_eigenvalue = check.min_eigenvalue;
        if !check.passes(self.opts.feasibility_tol) {
            diag.message = format!("witness rejected on re-validation: {check:?}");
            return Verdict::indeterminate(diag);
        }
        let witness = x.into_iter().map(|b| HermitianOperator::new(b).expect("square")).collect();
        Verdict { status: Status::Feasible, witness: Some(witness), certificate: None, diagnostics: diag }
    }

    fn infeasible(&self, cert: Certificate, diag: Diagnostics) -> Verdict {
        Verdict { status: Status::Infeasible, witness: None, certificate: Some(cert), diagnostics: diag }
    }

    /// Trivial outcomes settled by presolve alone.
    fn presolved(&self) -> Option<Verdict> {
        let diag = Diagnostics { dropped_rows: self.pre.dropped, ..Default::default() };
        if let Some(y) = &self.pre.contradiction {
            if let Some(cert) = self.certificate(y.clone()) {
                let mut diag = diag;
                diag.message = "inconsistent dependent rows".into();
                return Some(self.infeasible(cert, diag));
            }
        }
        if self.pre.kept.is_empty() {
            let mut diag = diag;
            diag.message = "no effective constraints".into();
            return Some(self.feasible(zero_blocks(&self.compiled.sizes), diag));
        }
        None
    }
}

enum Outcome {
    Point(Blocks),
    Dual(Certificate),
    Unbounded,
}

/// Certificate `y = e_j / b_j` for a row whose coefficients vanish but whose
/// right-hand side does not; such problems are rejected as malformed by the
/// solvers, yet are infeasible outright.
pub fn empty_row_certificate(p: &ConicProblem, opts: &SolverOptions) -> Option<Certificate> {
    let j = p.rows.iter().position(|r| problem::hermitize(&r.terms).is_empty() && r.rhs.abs() > 1e-12)?;
    let mut y = vec![0.0; p.num_rows()];
    y[j] = 1.0 / p.rows[j].rhs;
    let check = check_certificate(p, &y);
    let kind = check.kind(opts.certificate_margin)?;
    Some(Certificate { y, kind, max_eigenvalue: check.max_eigenvalue })
}

/// Decides whether the constraint set has a PSD point.
pub fn solve_feasibility(p: &ConicProblem, opts: &SolverOptions) -> Result<Verdict, ConicError> {
    if p.has_objective() {
        return Err(ConicError::Malformed("feasibility problems carry no objective; use solve_max".into()));
    }
    let compiled = p.compile()?;
    let pre = presolve::presolve(&compiled);
    let ctx = Context::new(p, &compiled, &pre, opts);
    if let Some(v) = ctx.presolved() {
        return Ok(v);
    }

    let mut best: Option<(f64, Blocks)> = None;
    let zero_cost = zero_blocks(&compiled.sizes);
    let run = ipm::run(&pre.reduced, &zero_cost, opts.max_ipm_iterations, |it: &Iterate| {
        if it.tau > 0.0 {
            let x: Blocks = it.x.iter().map(|b| b.scale_real(1.0 / it.tau)).collect();
            let res = raw_residual(&compiled, &x);
            if res <= opts.polish_tol {
                return Control::Stop(Outcome::Point(x));
            }
            if best.as_ref().is_none_or(|(r, _)| res < *r) {
                best = Some((res, x));
            }
        }
        match ctx.try_dual(it.y) {
            Some(cert) => Control::Stop(Outcome::Dual(cert)),
            None => Control::Continue,
        }
    });
    let mut diag = Diagnostics { ipm_iterations: run.iterations, dropped_rows: pre.dropped, ..Default::default() };
    match run.result {
        Some(Outcome::Point(x)) => return Ok(ctx.feasible(x, diag)),
        Some(Outcome::Dual(cert)) => return Ok(ctx.infeasible(cert, diag)),
        Some(Outcome::Unbounded) | None => {}
    }
    if let Some((res, x)) = best {
        if res <= opts.feasibility_tol {
            diag.message = format!("interior-point path ended ({}) with an acceptable point", run.reason);
            return Ok(ctx.feasible(x, diag));
        }
    }
    if let Some(gram) = &pre.gram {
        let (found, rounds) = projection::dykstra(&pre.reduced, gram, opts.max_projection_rounds, |z| {
            raw_residual(&compiled, z) <= opts.feasibility_tol
        });
        diag.projection_rounds = rounds;
        if let Some(z) = found {
            diag.message = "found by alternating projections".into();
            return Ok(ctx.feasible(z, diag));
        }
    }
    diag.message = format!("interior-point path ended ({}); projections did not converge", run.reason);
    Ok(Verdict::indeterminate(diag))
}

/// Maximizes the objective over the constraint set.
pub fn solve_max(p: &ConicProblem, opts: &SolverOptions) -> Result<MaxResult, ConicError> {
    let Some(objective_terms) = &p.objective else {
        return Err(ConicError::Malformed("solve_max needs an objective".into()));
    };
    let compiled = p.compile()?;
    let pre = presolve::presolve(&compiled);
    let ctx = Context::new(p, &compiled, &pre, opts);
    let objective_value = |x: &[ComplexMatrix]| -> f64 {
        objective_terms.iter().map(|t| (t.weight * x[t.block][(t.row, t.col)]).re).sum()
    };
    if let Some(v) = ctx.presolved() {
        if v.status == Status::Feasible {
            // no effective constraints: the objective is bounded only if it vanishes
            let bounded = compiled.objective.iter().all(|c| c.max_abs() == 0.0);
            if !bounded {
                let diag = Diagnostics { message: "objective unbounded above".into(), ..v.diagnostics };
                return Ok(MaxResult { value: None, verdict: Verdict::indeterminate(diag) });
            }
            return Ok(MaxResult { value: Some(0.0), verdict: v });
        }
        return Ok(MaxResult { value: None, verdict: v });
    }

    let cost: Blocks = compiled.objective.iter().map(|f| -f).collect();
    let cost_scale = cost.iter().map(ComplexMatrix::max_abs).fold(0.0, f64::max).max(1.0);
    let mut best: Option<(f64, Blocks)> = None;
    let run = ipm::run(&pre.reduced, &cost, opts.max_ipm_iterations, |it: &Iterate| {
        if it.tau > 0.0 {
            let inv = 1.0 / it.tau;
            let x: Blocks = it.x.iter().map(|b| b.scale_real(inv)).collect();
            let res = raw_residual(&compiled, &x);
            let primal = blocks_inner(&cost, &x);
            let dual: f64 = pre.reduced.rhs.iter().zip(it.y).map(|(b, v)| b * v * inv).sum();
            let gap = (primal - dual).abs();
            let mut r_d = pre.reduced.adjoint(it.y);
            for (k, rd) in r_d.iter_mut().enumerate() {
                *rd = &(&*rd + &it.s[k]).scale_real(inv) - &cost[k];
            }
            let dres = r_d.iter().map(ComplexMatrix::max_abs).fold(0.0, f64::max) / cost_scale;
            let rel = 1.0 + primal.abs();
            if res <= opts.polish_tol && dres <= 1e-8 && gap <= 1e-8 * rel {
                return Control::Stop(Outcome::Point(x));
            }
            if res <= opts.feasibility_tol && dres <= 1e-6 && gap <= 0.1 * opts.objective_gap * rel {
                let score = gap / rel;
                if best.as_ref().is_none_or(|(s, _)| score < *s) {
                    best = Some((score, x));
                }
            }
        }
        if let Some(cert) = ctx.try_dual(it.y) {
            return Control::Stop(Outcome::Dual(cert));
        }
        // recession direction with negative cost
        let cx = blocks_inner(&cost, it.x);
        if cx < 0.0 && it.kappa > 1e3 * it.tau {
            let ax = pre.reduced.apply(it.x);
            let nrm = ax.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if nrm <= 1e-9 * cx.abs() {
                return Control::Stop(Outcome::Unbounded);
            }
        }
        Control::Continue
    });
    let mut diag = Diagnostics { ipm_iterations: run.iterations, dropped_rows: pre.dropped, ..Default::default() };
    let finish = |x: Blocks, diag: Diagnostics| {
        let value = objective_value(&x);
        let verdict = ctx.feasible(x, diag);
        let value = (verdict.status == Status::Feasible).then_some(value);
        MaxResult { value, verdict }
    };
    match run.result {
        Some(Outcome::Point(x)) => Ok(finish(x, diag)),
        Some(Outcome::Dual(cert)) => Ok(MaxResult { value: None, verdict: ctx.infeasible(cert, diag) }),
        Some(Outcome::Unbounded) => {
            diag.message = "objective unbounded above".into();
            Ok(MaxResult { value: None, verdict: Verdict::indeterminate(diag) })
        }
        None => match best {
            Some((gap, x)) => {
                diag.gap = gap;
                diag.message = format!("interior-point path ended ({}) near the optimum", run.reason);
                Ok(finish(x, diag))
            }
            None => {
                diag.message = format!("interior-point path ended ({}) without an optimum", run.reason);
                Ok(MaxResult { value: None, verdict: Verdict::indeterminate(diag) })
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::C64;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn scalar_equality() {
        let mut p = ConicProblem::new();
        let x = p.add_block(1);
        p.add_row([Entry::re(x, 0, 0, 1.0)], 1.0);
        let v = solve_feasibility(&p, &opts()).unwrap();
        assert_eq!(v.status, Status::Feasible);
        let w = v.witness.unwrap();
        assert!((w[0].matrix()[(0, 0)].re - 1.0).abs() < 1e-7);
    }

    #[test]
    fn contradictory_scalar_equalities() {
        let mut p = ConicProblem::new();
        let x = p.add_block(1);
        p.add_row([Entry::re(x, 0, 0, 1.0)], 1.0);
        p.add_row([Entry::re(x, 0, 0, 1.0)], -1.0);
        let v = solve_feasibility(&p, &opts()).unwrap();
        assert_eq!(v.status, Status::Infeasible);
        let cert = v.certificate.unwrap();
        assert_eq!(verify_certificate(&p, &cert.y, 1e-9), Some(CertificateKind::Strict));
    }

    #[test]
    fn negative_scalar_is_infeasible() {
        let mut p = ConicProblem::new();
        let x = p.add_block(1);
        p.add_row([Entry::re(x, 0, 0, 1.0)], -2.0);
        let v = solve_feasibility(&p, &opts()).unwrap();
        assert_eq!(v.status, Status::Infeasible);
        assert_eq!(v.certificate.unwrap().kind, CertificateKind::Strict);
    }

    #[test]
    fn maximize_with_slack() {
        let mut p = ConicProblem::new();
        let x = p.add_block(1);
        let s = p.add_block(1);
        p.add_row([Entry::re(x, 0, 0, 1.0), Entry::re(s, 0, 0, 1.0)], 1.0);
        p.set_objective([Entry::re(x, 0, 0, 1.0)]);
        let r = solve_max(&p, &opts()).unwrap();
        assert!((r.value.unwrap() - 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn maximize_top_eigenvalue() {
        let mut p = ConicProblem::new();
        let x = p.add_block(2);
        p.add_row([Entry::re(x, 0, 0, 1.0), Entry::re(x, 1, 1, 1.0)], 1.0);
        p.set_objective([Entry::re(x, 0, 0, 1.0), Entry::re(x, 1, 1, -1.0)]);
        let r = solve_max(&p, &opts()).unwrap();
        assert!((r.value.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn complex_off_diagonal_objective() {
        // max Im X01 over density matrices is 1/2
        let mut p = ConicProblem::new();
        let x = p.add_block(2);
        p.add_row([Entry::re(x, 0, 0, 1.0), Entry::re(x, 1, 1, 1.0)], 1.0);
        p.set_objective([Entry::im(x, 0, 1, 1.0)]);
        let r = solve_max(&p, &opts()).unwrap();
        assert!((r.value.unwrap() - 0.5).abs() < 1e-6);
        let w = r.verdict.witness.unwrap();
        assert!((w[0].matrix()[(0, 1)] - C64::new(0.0, 0.5)).norm() < 1e-5);
    }

    #[test]
    fn unbounded_objective_is_indeterminate() {
        let mut p = ConicProblem::new();
        let x = p.add_block(1);
        let s = p.add_block(1);
        p.add_row([Entry::re(x, 0, 0, 1.0), Entry::re(s, 0, 0, -1.0)], 1.0);
        p.set_objective([Entry::re(x, 0, 0, 1.0)]);
        let r = solve_max(&p, &opts()).unwrap();
        assert_eq!(r.value, None);
        assert_eq!(r.verdict.status, Status::Indeterminate);
    }

    #[test]
    fn psd_feasibility_with_complex_data() {
        // X ⪰ 0, tr X = 1, X01 = 0.5i: the pure state (|0⟩ + i|1⟩)/√2 is the only point
        let mut p = ConicProblem::new();
        let x = p.add_block(2);
        p.add_row([Entry::re(x, 0, 0, 1.0), Entry::re(x, 1, 1, 1.0)], 1.0);
        p.add_row([Entry::re(x, 0, 1, 1.0)], 0.0);
        p.add_row([Entry::im(x, 0, 1, 1.0)], -0.5);
        let v = solve_feasibility(&p, &opts()).unwrap();
        assert_eq!(v.status, Status::Feasible, "{v:?}");
        // X01 = 0.6i is outside the unit disc of states
        let mut q = ConicProblem::new();
        let x = q.add_block(2);
        q.add_row([Entry::re(x, 0, 0, 1.0), Entry::re(x, 1, 1, 1.0)], 1.0);
        q.add_row([Entry::im(x, 0, 1, 1.0)], 0.6);
        let v = solve_feasibility(&q, &opts()).unwrap();
        assert_eq!(v.status, Status::Infeasible);
    }

    #[test]
    fn errors_are_distinct_from_indeterminate() {
        let mut p = ConicProblem::new();
        p.add_block(1);
        p.add_row([], 1.0);
        assert!(solve_feasibility(&p, &opts()).is_err());
        let mut q = ConicProblem::new();
        q.add_block(1);
        assert!(solve_max(&q, &opts()).is_err());
    }

    #[test]
    fn determinism() {
        let mut p = ConicProblem::new();
        let x = p.add_block(3);
        p.add_row([Entry::re(x, 0, 0, 1.0), Entry::re(x, 1, 1, 1.0), Entry::re(x, 2, 2, 1.0)], 1.0);
        p.add_row([Entry::re(x, 0, 2, 1.0)], 0.2);
        let a = solve_feasibility(&p, &opts()).unwrap();
        let b = solve_feasibility(&p, &opts()).unwrap();
        assert_eq!(a, b);
    }
}
