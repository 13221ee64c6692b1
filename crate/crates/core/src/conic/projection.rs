//! Dykstra alternating projections between the affine constraint set and
//! the PSD product cone.

use nalgebra::{Cholesky, DVector, Dyn};

use crate::linops::HermitianOperator;

use super::problem::{Blocks, Compiled};

fn affine_project(p: &Compiled, gram: &Cholesky<f64, Dyn>, x: &Blocks) -> Blocks {
    let r: Vec<f64> = p.apply(x).iter().zip(&p.rhs).map(|(a, b)| a - b).collect();
    let lam = gram.solve(&DVector::from_vec(r));
    let corr = p.adjoint(lam.as_slice());
    x.iter().zip(&corr).map(|(a, c)| a - c).collect()
}

fn psd_project(x: &Blocks) -> Blocks {
    x.iter()
        .map(|b| {
            HermitianOperator::new(b.hermitian_part())
                .and_then(|h| h.psd_project())
                .map(HermitianOperator::into_matrix)
                .unwrap_or_else(|_| b.scale_real(0.0))
        })
        .collect()
}

/// Returns the first PSD iterate accepted by `accept`, or `None` after `max_rounds`.
pub(crate) fn dykstra(
    p: &Compiled,
    gram: &Cholesky<f64, Dyn>,
    max_rounds: usize,
    mut accept: impl FnMut(&Blocks) -> bool,
) -> (Option<Blocks>, usize) {
    let zero: Blocks = p.sizes.iter().map(|&n| crate::linops::ComplexMatrix::zeros(n, n)).collect();
    let mut x = affine_project(p, gram, &zero);
    let mut corr = zero;
    for round in 1..=max_rounds {
        let shifted: Blocks = x.iter().zip(&corr).map(|(a, c)| a + c).collect();
        let z = psd_project(&shifted);
        if accept(&z) {
            return (Some(z), round);
        }
        corr = shifted.iter().zip(&z).map(|(a, b)| a - b).collect();
        x = affine_project(p, gram, &z);
    }
    (None, max_rounds)
}
