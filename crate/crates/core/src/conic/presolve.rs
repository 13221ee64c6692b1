//! Row normalization and removal of linearly dependent constraints.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::problem::{Compiled, SparseBlock};

/// Squared residual norm below which a normalized row counts as dependent.
const DEPENDENCE_THRESHOLD: f64 = 1e-12;
/// Right-hand-side mismatch of a dependent row that signals inconsistency.
const INCONSISTENCY_THRESHOLD: f64 = 1e-9;

pub(crate) struct Presolved {
    /// Independent rows scaled to unit Frobenius norm.
    pub reduced: Compiled,
    /// Original index of each reduced row.
    pub kept: Vec<usize>,
    /// Original norm of each reduced row.
    pub scale: Vec<f64>,
    /// Cholesky factor of the reduced Gram matrix `A A*`.
    pub gram: Option<Cholesky<f64, Dyn>>,
    /// Farkas candidate in original row coordinates from an inconsistent dependent row.
    pub contradiction: Option<Vec<f64>>,
    pub dropped: usize,
}

/// Row indices and weights touching one `(block, r, c)` entry.
type EntryIndex = BTreeMap<(usize, usize, usize), Vec<(usize, nalgebra::Complex<f64>)>>;

fn gram_matrix(rows: &[Vec<SparseBlock>]) -> DMatrix<f64> {
    let m = rows.len();
    let mut index: EntryIndex = BTreeMap::new();
    for (j, row) in rows.iter().enumerate() {
        for sb in row {
            for &(r, c, v) in &sb.entries {
                index.entry((sb.block, r, c)).or_default().push((j, v));
            }
        }
    }
    let mut g = DMatrix::zeros(m, m);
    for list in index.values() {
        for &(i, vi) in list {
            for &(j, vj) in list {
                g[(i, j)] += vi.re * vj.re + vi.im * vj.im;
            }
        }
    }
    g
}

/// Greedy pivoted Cholesky; returns the pivot rows in selection order.
fn pivot_rows(g: &DMatrix<f64>) -> Vec<usize> {
    let m = g.nrows();
    let mut d: Vec<f64> = (0..m).map(|i| g[(i, i)]).collect();
    let mut l = DMatrix::<f64>::zeros(m, m);
    let mut chosen = Vec::new();
    let mut taken = vec![false; m];
    for k in 0..m {
        let Some(p) = (0..m).filter(|&i| !taken[i]).max_by(|&a, &b| d[a].total_cmp(&d[b]).then(b.cmp(&a))) else {
            break;
        };
        if d[p] <= DEPENDENCE_THRESHOLD {
            break;
        }
        taken[p] = true;
        chosen.push(p);
        let piv = d[p].sqrt();
        for i in 0..m {
            if taken[i] && i != p {
                continue;
            }
            let mut v = g[(i, p)];
            for t in 0..k {
                v -= l[(i, t)] * l[(p, t)];
            }
            l[(i, k)] = v / piv;
            if i != p {
                d[i] -= l[(i, k)] * l[(i, k)];
            }
        }
        d[p] = 0.0;
    }
    chosen
}

/// Cholesky with a growing diagonal shift for nearly singular inputs.
pub(crate) fn robust_cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let scale = (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(1e-300, f64::max);
    let mut shift = 1e-14 * scale;
    for _ in 0..12 {
        let mut shifted = m.clone();
        for i in 0..m.nrows() {
            shifted[(i, i)] += shift;
        }
        if let Some(c) = Cholesky::new(shifted) {
            return Some(c);
        }
        shift *= 10.0;
    }
    None
}

pub(crate) fn presolve(p: &Compiled) -> Presolved {
    let mut scale = Vec::with_capacity(p.num_rows());
    let mut rows = Vec::with_capacity(p.num_rows());
    let mut rhs = Vec::with_capacity(p.num_rows());
    let mut nonzero = Vec::new();
    for (j, row) in p.rows.iter().enumerate() {
        let norm = row.iter().map(SparseBlock::norm_sqr).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        nonzero.push(j);
        scale.push(norm);
        rhs.push(p.rhs[j] / norm);
        rows.push(
            row.iter()
                .map(|sb| SparseBlock {
                    block: sb.block,
                    entries: sb.entries.iter().map(|&(r, c, v)| (r, c, v / norm)).collect(),
                })
                .collect::<Vec<_>>(),
        );
    }

    let g = gram_matrix(&rows);
    let mut pivots = pivot_rows(&g);
    pivots.sort_unstable();
    let s = pivots.len();
    let g_ss = DMatrix::from_fn(s, s, |a, b| g[(pivots[a], pivots[b])]);
    let gram = robust_cholesky(&g_ss);

    let mut contradiction = None;
    if let Some(chol) = &gram {
        let b_s = DVector::from_fn(s, |a, _| rhs[pivots[a]]);
        for j in 0..rows.len() {
            if pivots.binary_search(&j).is_ok() {
                continue;
            }
            let alpha = chol.solve(&DVector::from_fn(s, |a, _| g[(pivots[a], j)]));
            let delta = rhs[j] - alpha.dot(&b_s);
            if delta.abs() > INCONSISTENCY_THRESHOLD {
                let mut y = vec![0.0; p.num_rows()];
                y[nonzero[j]] = 1.0 / (delta * scale[j]);
                for (a, &k) in pivots.iter().enumerate() {
                    y[nonzero[k]] = -alpha[a] / (delta * scale[k]);
                }
                contradiction = Some(y);
                break;
            }
        }
    }

    let kept: Vec<usize> = pivots.iter().map(|&k| nonzero[k]).collect();
    let reduced = Compiled {
        sizes: p.sizes.clone(),
        rows: pivots.iter().map(|&k| rows[k].clone()).collect(),
        rhs: pivots.iter().map(|&k| rhs[k]).collect(),
        objective: p.objective.clone(),
    };
    Presolved {
        reduced,
        scale: pivots.iter().map(|&k| scale[k]).collect(),
        dropped: p.num_rows() - kept.len(),
        kept,
        gram,
        contradiction,
    }
}

impl Presolved {
    /// Lifts reduced multipliers to original row coordinates.
    pub fn lift(&self, y: &[f64], num_rows: usize) -> Vec<f64> {
        let mut out = vec![0.0; num_rows];
        for ((&k, &s), &v) in self.kept.iter().zip(&self.scale).zip(y) {
            out[k] = v / s;
        }
        out
    }
}
