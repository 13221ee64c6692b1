//! Random states, observables, channels and stochastic matrices.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linops::{ComplexMatrix, HermitianOperator, C64};
use crate::qmodel::{Channel, Instrument, Observable, StochasticMatrix};

/// Ginibre matrix with standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> HermitianOperator {
    HermitianOperator::new(ginibre(d, d, rng).hermitian_part()).expect("square")
}

/// Hilbert–Schmidt random density matrix.
pub fn random_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> HermitianOperator {
    let g = ginibre(d, d, rng);
    let p = &g * &g.adjoint();
    let t = p.trace().re;
    HermitianOperator::new(p.scale_real(1.0 / t)).expect("square")
}

/// `S^{-1/2}` of a positive definite operator.
fn inverse_sqrt(s: &HermitianOperator) -> ComplexMatrix {
    s.eigh().expect("Jacobi converges").map(|x| 1.0 / x.sqrt()).into_matrix()
}

pub fn random_observable<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Observable {
    let raw: Vec<ComplexMatrix> = (0..n)
        .map(|_| {
            let g = ginibre(d, d, rng);
            &g * &g.adjoint()
        })
        .collect();
    let total = raw.iter().fold(ComplexMatrix::zeros(d, d), |acc, g| &acc + g);
    let w = inverse_sqrt(&HermitianOperator::new(total).expect("square"));
    let effects = raw
        .iter()
        .map(|g| HermitianOperator::new(&(&w * g) * &w).expect("square"))
        .collect();
    Observable::from_effects(effects).expect("normalized by construction")
}

/// Random channel with `rank` Kraus operators, raised to `⌈dim_in/dim_out⌉`
/// when fewer cannot be trace preserving.
pub fn random_channel<R: Rng + ?Sized>(dim_in: usize, dim_out: usize, rank: usize, rng: &mut R) -> Channel {
    let rank = rank.max(dim_in.div_ceil(dim_out));
    let raw: Vec<ComplexMatrix> = (0..rank).map(|_| ginibre(dim_out, dim_in, rng)).collect();
    let total = raw.iter().fold(ComplexMatrix::zeros(dim_in, dim_in), |acc, k| &acc + &(&k.adjoint() * k));
    let w = inverse_sqrt(&HermitianOperator::new(total).expect("square"));
    let kraus: Vec<ComplexMatrix> = raw.iter().map(|k| k * &w).collect();
    Channel::from_kraus(&kraus).expect("trace preserving by construction")
}

/// Random instrument with one Kraus operator per outcome; needs `n·dim_out ≥ dim_in`.
pub fn random_instrument<R: Rng + ?Sized>(dim_in: usize, dim_out: usize, n: usize, rng: &mut R) -> Instrument {
    assert!(n * dim_out >= dim_in, "too few outcomes for a trace-preserving instrument");
    let raw: Vec<ComplexMatrix> = (0..n).map(|_| ginibre(dim_out, dim_in, rng)).collect();
    let total = raw.iter().fold(ComplexMatrix::zeros(dim_in, dim_in), |acc, k| &acc + &(&k.adjoint() * k));
    let w = inverse_sqrt(&HermitianOperator::new(total).expect("square"));
    let blocks = raw
        .iter()
        .map(|k| Channel::choi_of_map(dim_in, dim_out, |t| {
            let kw = k * &w;
            &(&kw * t) * &kw.adjoint()
        }))
        .collect();
    Instrument::new(dim_in, dim_out, (0..n).map(|i| i.to_string()).collect(), blocks)
        .expect("trace preserving by construction")
}

pub fn random_stochastic<R: Rng + ?Sized>(n_to: usize, n_from: usize, rng: &mut R) -> StochasticMatrix {
    let mut entries = vec![0.0; n_to * n_from];
    for from in 0..n_from {
        let col: Vec<f64> = (0..n_to).map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = col.iter().sum();
        for (to, x) in col.iter().enumerate() {
            entries[to * n_from + from] = x / s;
        }
    }
    StochasticMatrix::new(n_to, n_from, entries).expect("columns normalized")
}

/// Uniformly distributed point of the unit ball in `R^3`.
pub fn random_bloch<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        if v.iter().map(|x: &f64| x * x).sum::<f64>() <= 1.0 {
            return v;
        }
    }
}
