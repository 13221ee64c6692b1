//! Independent re-validation of witnesses and certificates against the raw
//! problem terms.

use crate::linops::{ComplexMatrix, HermitianOperator};

use super::problem::{ConicProblem, Entry};

/// `Re Σ w·X[r,c]` straight from the stored terms.
fn evaluate(terms: &[Entry], x: &[ComplexMatrix]) -> f64 {
    terms.iter().map(|t| (t.weight * x[t.block][(t.row, t.col)]).re).sum()
}

/// Residual and positivity of a candidate point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessCheck {
    pub max_residual: f64,
    pub min_eigenvalue: f64,
    pub hermitian_defect: f64,
}

impl WitnessCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual <= tol && self.min_eigenvalue >= -tol && self.hermitian_defect <= tol
    }
}

pub fn check_witness(p: &ConicProblem, x: &[ComplexMatrix]) -> WitnessCheck {
    assert_eq!(x.len(), p.blocks.len(), "witness block count");
    let max_residual = p.rows.iter().map(|r| (evaluate(&r.terms, x) - r.rhs).abs()).fold(0.0, f64::max);
    let mut min_eigenvalue = f64::INFINITY;
    let mut hermitian_defect: f64 = 0.0;
    for (b, &n) in x.iter().zip(&p.blocks) {
        assert_eq!((b.rows(), b.cols()), (n, n), "witness block shape");
        hermitian_defect = hermitian_defect.max(b.hermitian_defect());
        let lam = HermitianOperator::new(b.hermitian_part())
            .and_then(|h| h.min_eigenvalue())
            .unwrap_or(f64::NEG_INFINITY);
        min_eigenvalue = min_eigenvalue.min(lam);
    }
    WitnessCheck { max_residual, min_eigenvalue, hermitian_defect }
}

pub fn verify_witness(p: &ConicProblem, x: &[ComplexMatrix], tol: f64) -> bool {
    check_witness(p, x).passes(tol)
}

/// How strongly a dual vector separates the constraints from the cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CertificateKind {
    /// `Σ y_j C_j ⪯ −margin·1` with `b·y = 1`.
    Strict,
    /// `Σ y_j C_j ⪯ margin·1` with `b·y = 1`; every feasible point would need trace ≥ `1/margin`.
    Bounded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateCheck {
    pub b_dot_y: f64,
    /// Largest eigenvalue of `Σ y_j C_j` after scaling to `b·y = 1`.
    pub max_eigenvalue: f64,
}

impl CertificateCheck {
    pub fn kind(&self, margin: f64) -> Option<CertificateKind> {
        if !(self.b_dot_y > 0.0) {
            None
        } else if self.max_eigenvalue <= -margin {
            Some(CertificateKind::Strict)
        } else if self.max_eigenvalue <= margin {
            Some(CertificateKind::Bounded)
        } else {
            None
        }
    }
}

pub fn check_certificate(p: &ConicProblem, y: &[f64]) -> CertificateCheck {
    assert_eq!(y.len(), p.rows.len(), "certificate length");
    let b_dot_y: f64 = p.rows.iter().zip(y).map(|(r, v)| r.rhs * v).sum();
    if !(b_dot_y > 0.0) {
        return CertificateCheck { b_dot_y, max_eigenvalue: f64::NAN };
    }
    let mut dual: Vec<ComplexMatrix> = p.blocks.iter().map(|&n| ComplexMatrix::zeros(n, n)).collect();
    for (r, &v) in p.rows.iter().zip(y) {
        for t in &r.terms {
            // Re(w X_rc) = ⟨C, X⟩ with C = conj(w)/2·E_rc + w/2·E_cr
            let s = v / b_dot_y;
            dual[t.block][(t.row, t.col)] += t.weight.conj() * (0.5 * s);
            dual[t.block][(t.col, t.row)] += t.weight * (0.5 * s);
        }
    }
    let max_eigenvalue = dual
        .into_iter()
        .map(|d| HermitianOperator::new(d).and_then(|h| h.eigh()).map(|e| e.max()).unwrap_or(f64::INFINITY))
        .fold(f64::NEG_INFINITY, f64::max);
    CertificateCheck { b_dot_y, max_eigenvalue }
}

pub fn verify_certificate(p: &ConicProblem, y: &[f64], margin: f64) -> Option<CertificateKind> {
    check_certificate(p, y).kind(margin)
}
