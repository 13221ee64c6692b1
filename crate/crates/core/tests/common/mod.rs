//! Exact-arithmetic oracle for pure linear feasibility problems.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use povm_galois::conic::{ConicProblem, Entry};
use rand::Rng;

type Q = BigRational;

fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

/// Exact feasibility of `{x ≥ 0 : Ax = b}`: some basic solution on linearly
/// independent columns is nonnegative.
pub fn lp_feasible_exact(a: &[Vec<i64>], b: &[i64]) -> bool {
    let n = a[0].len();
    'subsets: for mask in 0u32..1 << n {
        let cols: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
        let mut m: Vec<Vec<Q>> = a
            .iter()
            .zip(b)
            .map(|(row, &bi)| cols.iter().map(|&j| q(row[j])).chain(std::iter::once(q(bi))).collect())
            .collect();
        let k = cols.len();
        let mut pivot_row = 0;
        for col in 0..=k {
            let Some(p) = (pivot_row..m.len()).find(|&i| !m[i][col].is_zero()) else {
                if col < k {
                    continue 'subsets; // dependent columns
                }
                break;
            };
            if col == k {
                continue 'subsets; // inconsistent
            }
            m.swap(pivot_row, p);
            let inv = Q::from_integer(BigInt::from(1)) / m[pivot_row][col].clone();
            for v in m[pivot_row].iter_mut() {
                *v = v.clone() * inv.clone();
            }
            let pivot = m[pivot_row].clone();
            for (i, row) in m.iter_mut().enumerate() {
                if i != pivot_row && !row[col].is_zero() {
                    let f = row[col].clone();
                    for (v, p) in row.iter_mut().zip(&pivot) {
                        *v = v.clone() - f.clone() * p.clone();
                    }
                }
            }
            pivot_row += 1;
        }
        if (0..k).all(|i| !m[i][k].is_negative()) {
            return true;
        }
    }
    false
}

pub fn random_lp<R: Rng>(r: &mut R, planted: bool) -> (Vec<Vec<i64>>, Vec<i64>) {
    let n = r.random_range(1..=6);
    let rows = r.random_range(1..=4);
    let mut a = Vec::new();
    while a.len() < rows {
        let row: Vec<i64> = (0..n).map(|_| r.random_range(-3..=3)).collect();
        if row.iter().any(|&v| v != 0) {
            a.push(row);
        }
    }
    let b = if planted {
        let x: Vec<i64> = (0..n).map(|_| if r.random_bool(0.3) { 0 } else { r.random_range(1..=3) }).collect();
        a.iter().map(|row| row.iter().zip(&x).map(|(p, q)| p * q).sum()).collect()
    } else {
        (0..rows).map(|_| r.random_range(-4..=4)).collect()
    };
    (a, b)
}

/// `Ax = b` over nonnegative scalar blocks.
pub fn lp_problem(a: &[Vec<i64>], b: &[i64]) -> ConicProblem {
    let mut p = ConicProblem::new();
    let n = a[0].len();
    for _ in 0..n {
        p.add_block(1);
    }
    for (row, &bi) in a.iter().zip(b) {
        p.add_row(row.iter().enumerate().filter(|(_, v)| **v != 0).map(|(j, &v)| Entry::re(j, 0, 0, v as f64)), bi as f64);
    }
    p
}
