//! Dense complex linear algebra for small Hermitian operators.
//!
//! Everything here is sized for operators of side at most ~100: tensor
//! products, partial traces, a cyclic Jacobi eigensolver and the PSD-cone
//! projection built on it.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Sweep cap for the Jacobi eigensolver.
pub const MAX_JACOBI_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
}

/// Which tensor factor a partial trace removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    First,
    Second,
}

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    /// Builds a matrix from row-major entries; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self, LinalgError> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// `|v><w|`
    pub fn outer(v: &[C64], w: &[C64]) -> Self {
        Self::from_fn(v.len(), w.len(), |r, c| v[r] * w[c].conj())
    }

    /// Matrix unit `|r><c|` of the given side.
    pub fn unit(n: usize, r: usize, c: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(r, c)] = ONE;
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_column(&mut self, c: usize, v: &[C64]) {
        for (r, &z) in v.iter().enumerate() {
            self[(r, c)] = z;
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &ComplexMatrix) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Real inner product `Re tr(self† other)`.
    pub fn inner(&self, other: &ComplexMatrix) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// `(M + M†)/2`
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |r, c| (self[(r, c)] + self[(c, r)].conj()) * 0.5)
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mat_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| self.data[r * self.cols..(r + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self · d · self†` for a real diagonal `d`.
    pub fn congruence_diag(&self, d: &[f64]) -> ComplexMatrix {
        assert_eq!(self.cols, d.len());
        let n = self.rows;
        let mut out = ComplexMatrix::zeros(n, n);
        for r in 0..n {
            for c in r..n {
                let mut acc = ZERO;
                for (k, &dk) in d.iter().enumerate() {
                    if dk != 0.0 {
                        acc += self[(r, k)] * self[(c, k)].conj() * dk;
                    }
                }
                out[(r, c)] = acc;
                out[(c, r)] = acc.conj();
            }
        }
        out
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in sub");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("shape mismatch in mul")
    }
}

/// Kronecker product, first-factor index major.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac, br, bc) = (a.rows, a.cols, b.rows, b.cols);
    ComplexMatrix::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

/// Partial trace of a square matrix on `dims.0 ⊗ dims.1`, removing `which`.
pub fn partial_trace(
    m: &ComplexMatrix,
    dims: (usize, usize),
    which: Factor,
) -> Result<ComplexMatrix, LinalgError> {
    let (d1, d2) = dims;
    if !m.is_square() || m.rows != d1 * d2 {
        return Err(LinalgError::DimensionMismatch(format!(
            "partial trace over {d1}x{d2} of a {}x{} matrix",
            m.rows, m.cols
        )));
    }
    Ok(match which {
        Factor::Second => ComplexMatrix::from_fn(d1, d1, |i, j| {
            (0..d2).map(|k| m[(i * d2 + k, j * d2 + k)]).sum()
        }),
        Factor::First => ComplexMatrix::from_fn(d2, d2, |i, j| {
            (0..d1).map(|k| m[(k * d2 + i, k * d2 + j)]).sum()
        }),
    })
}

/// Square matrix kept exactly Hermitian.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ComplexMatrix", try_from = "ComplexMatrix")]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.matrix.fmt(f)
    }
}

impl From<HermitianOperator> for ComplexMatrix {
    fn from(h: HermitianOperator) -> Self {
        h.matrix
    }
}

impl TryFrom<ComplexMatrix> for HermitianOperator {
    type Error = LinalgError;
    fn try_from(m: ComplexMatrix) -> Result<Self, LinalgError> {
        HermitianOperator::new(m)
    }
}

/// Eigendecomposition `h = U diag(values) U†`, values descending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Eigh {
    /// Rebuilds `U f(diag) U†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let d: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        HermitianOperator { matrix: self.vectors.congruence_diag(&d).hermitian_part() }
    }

    pub fn min(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }

    pub fn max(&self) -> f64 {
        *self.values.first().unwrap_or(&0.0)
    }
}

impl HermitianOperator {
    /// Symmetrizes `M ← (M + M†)/2`.
    pub fn new(m: ComplexMatrix) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare { rows: m.rows, cols: m.cols });
        }
        Ok(HermitianOperator { matrix: m.hermitian_part() })
    }

    pub fn zeros(n: usize) -> Self {
        HermitianOperator { matrix: ComplexMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        HermitianOperator { matrix: ComplexMatrix::identity(n) }
    }

    pub fn from_real(n: usize, data: &[f64]) -> Result<Self, LinalgError> {
        Self::new(ComplexMatrix::from_real(n, n, data)?)
    }

    /// Projector `|v><v|` (not normalized).
    pub fn projector(v: &[C64]) -> Self {
        HermitianOperator { matrix: ComplexMatrix::outer(v, v) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianOperator { matrix: self.matrix.scale_real(s) }
    }

    pub fn add(&self, other: &HermitianOperator) -> Self {
        HermitianOperator { matrix: &self.matrix + &other.matrix }
    }

    pub fn sub(&self, other: &HermitianOperator) -> Self {
        HermitianOperator { matrix: &self.matrix - &other.matrix }
    }

    pub fn transpose(&self) -> Self {
        HermitianOperator { matrix: self.matrix.transpose() }
    }

    pub fn eigh(&self) -> Result<Eigh, LinalgError> {
        eigh(self)
    }

    pub fn min_eigenvalue(&self) -> Result<f64, LinalgError> {
        Ok(eigh(self)?.min())
    }

    pub fn psd_project(&self) -> Result<HermitianOperator, LinalgError> {
        psd_project(self)
    }

    /// Principal square root after clipping negative eigenvalues.
    pub fn sqrt_psd(&self) -> Result<HermitianOperator, LinalgError> {
        Ok(eigh(self)?.map(|v| v.max(0.0).sqrt()))
    }

    /// True when every eigenvalue lies within `tol` of 0 or 1.
    pub fn is_projection(&self, tol: f64) -> Result<bool, LinalgError> {
        Ok(eigh(self)?.values.iter().all(|&v| v.abs() <= tol || (v - 1.0).abs() <= tol))
    }

    /// Number of eigenvalues above `rel * max(|λ|)`.
    pub fn rank(&self, rel: f64) -> Result<usize, LinalgError> {
        let e = eigh(self)?;
        let top = e.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Ok(e.values.iter().filter(|&&v| v > rel * top && v > 0.0).count())
    }
}

/// Cyclic complex Jacobi eigensolver.
pub fn eigh(h: &HermitianOperator) -> Result<Eigh, LinalgError> {
    let n = h.dim();
    let mut a = h.matrix.clone();
    let mut v = ComplexMatrix::identity(n);
    if n <= 1 {
        let values = if n == 1 { vec![a[(0, 0)].re] } else { vec![] };
        return Ok(Eigh { values, vectors: v });
    }
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return Ok(Eigh { values: vec![0.0; n], vectors: v });
    }
    let off_norm = |a: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for r in 0..n {
            for c in (r + 1)..n {
                s += a[(r, c)].norm_sqr();
            }
        }
        s.sqrt()
    };
    let target = 4.0 * f64::EPSILON * scale;
    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= target {
            break;
        }
        if sweeps >= MAX_JACOBI_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps, off });
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let b = apq.norm();
                if b == 0.0 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // skip entries already negligible against both diagonals
                if sweeps > 4 && b < f64::EPSILON * 1e-2 * (app.abs() + aqq.abs()) {
                    a[(p, q)] = ZERO;
                    a[(q, p)] = ZERO;
                    continue;
                }
                let phase = apq / b;
                let zeta = (aqq - app) / (2.0 * b);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = diag(1, conj(phase)) · [[c, s], [-s, c]]
                let g_pp = C64::new(c, 0.0);
                let g_pq = C64::new(s, 0.0);
                let g_qp = -phase.conj() * s;
                let g_qq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(Eigh { values, vectors })
}

/// Frobenius-nearest PSD operator.
pub fn psd_project(h: &HermitianOperator) -> Result<HermitianOperator, LinalgError> {
    Ok(eigh(h)?.map(|v| v.max(0.0)))
}

/// Pauli matrices `(σ₁, σ₂, σ₃)`.
pub fn pauli() -> [HermitianOperator; 3] {
    let s1 = ComplexMatrix::from_vec(2, 2, vec![ZERO, ONE, ONE, ZERO]).unwrap();
    let s2 = ComplexMatrix::from_vec(2, 2, vec![ZERO, -I, I, ZERO]).unwrap();
    let s3 = ComplexMatrix::from_vec(2, 2, vec![ONE, ZERO, ZERO, -ONE]).unwrap();
    [s1, s2, s3].map(|m| HermitianOperator { matrix: m })
}

/// Traceless Hermitian basis of `d×d` matrices (generalized Gell-Mann),
/// normalized so that `tr(G_i G_j) = 2 δ_ij`. For `d = 2` these are the Pauli matrices.
pub fn gell_mann(d: usize) -> Vec<HermitianOperator> {
    let mut out = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = ComplexMatrix::zeros(d, d);
            m[(j, k)] = ONE;
            m[(k, j)] = ONE;
            out.push(HermitianOperator { matrix: m });
            let mut m = ComplexMatrix::zeros(d, d);
            m[(j, k)] = -I;
            m[(k, j)] = I;
            out.push(HermitianOperator { matrix: m });
        }
    }
    for l in 1..d {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut diag = vec![0.0; d];
        for v in diag.iter_mut().take(l) {
            *v = norm;
        }
        diag[l] = -(l as f64) * norm;
        out.push(HermitianOperator { matrix: ComplexMatrix::diagonal(&diag) });
    }
    if d == 2 {
        // reorder to (σ₁, σ₂, σ₃)
        return pauli().to_vec();
    }
    out
}
