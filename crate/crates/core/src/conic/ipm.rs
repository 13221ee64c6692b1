//! Homogeneous self-dual interior-point method with Nesterov–Todd scaling
//! and Mehrotra predictor–corrector steps.
//!
//! Solves `min ⟨c,x⟩ s.t. A x = b, x ⪰ 0` through the embedding
//! `A x = bτ`, `A*y + s = cτ`, `⟨c,x⟩ − b·y + κ = 0`.

use nalgebra::{DMatrix, DVector};

use crate::linops::{ComplexMatrix, HermitianOperator, C64};

use super::presolve::robust_cholesky;
use super::problem::{blocks_axpy, blocks_inner, identity_blocks, Blocks, Compiled};

const STEP_FRACTION: f64 = 0.99;
const MIN_MU: f64 = 1e-30;

/// Current iterate handed to the caller's stopping rule.
pub(crate) struct Iterate<'a> {
    pub x: &'a Blocks,
    pub y: &'a [f64],
    pub s: &'a Blocks,
    pub tau: f64,
    pub kappa: f64,
}

pub(crate) enum Control<T> {
    Continue,
    Stop(T),
}

pub(crate) struct IpmRun<T> {
    pub result: Option<T>,
    pub iterations: usize,
    pub reason: &'static str,
}

struct Scaling {
    /// `x = G Λ G†`, `s = G^{-†} Λ G^{-1}`.
    g: ComplexMatrix,
    g_inv: ComplexMatrix,
    w: ComplexMatrix,
    lambda: Vec<f64>,
}

fn hermitian(m: ComplexMatrix) -> HermitianOperator {
    HermitianOperator::new(m).expect("square")
}

fn scaling(x: &ComplexMatrix, s: &ComplexMatrix) -> Option<Scaling> {
    let ex = hermitian(x.clone()).eigh().ok()?;
    if ex.min() <= 0.0 {
        return None;
    }
    let x_half = ex.map(f64::sqrt).into_matrix();
    let x_neg_half = ex.map(|v| 1.0 / v.sqrt()).into_matrix();
    let y = hermitian(&(&x_half * s) * &x_half);
    let ey = y.eigh().ok()?;
    if ey.min() <= 0.0 {
        return None;
    }
    let lambda: Vec<f64> = ey.values.iter().map(|v| v.sqrt()).collect();
    let n = lambda.len();
    // G = x½ V Λ^{-½}, G^{-1} = Λ^{½} V† x^{-½}
    let mut xv = &x_half * &ey.vectors;
    let mut vx = &ey.vectors.adjoint() * &x_neg_half;
    for i in 0..n {
        let (a, b) = (1.0 / lambda[i].sqrt(), lambda[i].sqrt());
        for r in 0..n {
            xv[(r, i)] *= a;
            vx[(i, r)] *= b;
        }
    }
    let w = (&xv * &xv.adjoint()).hermitian_part();
    Some(Scaling { g: xv, g_inv: vx, w, lambda })
}

fn sandwich(w: &ComplexMatrix, m: &ComplexMatrix) -> ComplexMatrix {
    (&(w * m) * w).hermitian_part()
}

/// Smallest eigenvalue of `Λ^{-½} D Λ^{-½}`; the largest safe step is `−1/ρ` when negative.
fn step_bound(lambda: &[f64], d: &ComplexMatrix) -> f64 {
    let n = lambda.len();
    let m = ComplexMatrix::from_fn(n, n, |i, j| d[(i, j)] / (lambda[i] * lambda[j]).sqrt());
    match hermitian(m).min_eigenvalue() {
        Ok(rho) if rho < 0.0 => -1.0 / rho,
        Ok(_) => f64::INFINITY,
        Err(_) => 0.0,
    }
}

struct Direction {
    dx: Blocks,
    dy: Vec<f64>,
    ds: Blocks,
    dtau: f64,
    dkappa: f64,
}

struct Newton<'a> {
    p: &'a Compiled,
    c: &'a Blocks,
    scal: &'a [Scaling],
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    wcw: Blocks,
    u: Vec<f64>,
    pvec: Vec<f64>,
    r_p: &'a [f64],
    r_d: &'a Blocks,
    r_g: f64,
    tau: f64,
    kappa: f64,
}

impl Newton<'_> {
    fn solve_m(&self, rhs: &[f64]) -> Vec<f64> {
        self.chol.solve(&DVector::from_column_slice(rhs)).as_slice().to_vec()
    }

    fn direction(&self, r_c: &Blocks, r_tau: f64, eta: f64) -> Direction {
        let p = self.p;
        let d0: Blocks = r_c
            .iter()
            .zip(self.scal)
            .zip(self.r_d)
            .map(|((rc, sc), rd)| {
                let mut m = rc.clone();
                m.axpy(eta, &sandwich(&sc.w, rd));
                m
            })
            .collect();
        let a_d0 = p.apply(&d0);
        let rhs: Vec<f64> = self.r_p.iter().zip(&a_d0).map(|(rp, ad)| -eta * rp - ad).collect();
        let q = self.solve_m(&rhs);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let b = &p.rhs;
        let denom = dot(&self.u, &self.pvec) - blocks_inner(self.c, &self.wcw) - dot(b, &self.pvec) - self.kappa / self.tau;
        let numer = -eta * self.r_g - blocks_inner(self.c, &d0) - dot(&self.u, &q) + dot(b, &q) - r_tau / self.tau;
        let dtau = numer / denom;
        let dy: Vec<f64> = q.iter().zip(&self.pvec).map(|(qi, pi)| qi + dtau * pi).collect();
        let aty = p.adjoint(&dy);
        let mut dx = d0;
        for (k, sc) in self.scal.iter().enumerate() {
            dx[k] = &dx[k] + &sandwich(&sc.w, &aty[k]);
            dx[k].axpy(-dtau, &self.wcw[k]);
        }
        let mut ds: Blocks = self.r_d.iter().map(|rd| rd.scale_real(-eta)).collect();
        blocks_axpy(-1.0, &aty, &mut ds);
        blocks_axpy(dtau, self.c, &mut ds);
        let dkappa = (r_tau - self.kappa * dtau) / self.tau;
        Direction { dx, dy, ds, dtau, dkappa }
    }
}

/// Schur complement `M_ij = ⟨A_i, W A_j W⟩`.
fn schur(p: &Compiled, scal: &[Scaling]) -> DMatrix<f64> {
    let m = p.num_rows();
    let mut touching: Vec<Vec<(usize, usize)>> = vec![Vec::new(); p.sizes.len()];
    for (i, row) in p.rows.iter().enumerate() {
        for (t, sb) in row.iter().enumerate() {
            touching[sb.block].push((i, t));
        }
    }
    let mut out = DMatrix::zeros(m, m);
    for (j, row) in p.rows.iter().enumerate() {
        for sb in row {
            let k = sb.block;
            let b = sandwich(&scal[k].w, &sb.dense(p.sizes[k]));
            for &(i, t) in &touching[k] {
                if i >= j {
                    let v = p.rows[i][t].dot(&b);
                    out[(i, j)] += v;
                }
            }
        }
    }
    for j in 0..m {
        for i in 0..j {
            out[(i, j)] = out[(j, i)];
        }
    }
    out
}

fn max_step(scal: &[Scaling], d: &Direction, tau: f64, kappa: f64) -> f64 {
    let mut alpha = f64::INFINITY;
    for (k, sc) in scal.iter().enumerate() {
        let dx_hat = &(&sc.g_inv * &d.dx[k]) * &sc.g_inv.adjoint();
        let ds_hat = &(&sc.g.adjoint() * &d.ds[k]) * &sc.g;
        alpha = alpha.min(step_bound(&sc.lambda, &dx_hat)).min(step_bound(&sc.lambda, &ds_hat));
    }
    if d.dtau < 0.0 {
        alpha = alpha.min(-tau / d.dtau);
    }
    if d.dkappa < 0.0 {
        alpha = alpha.min(-kappa / d.dkappa);
    }
    alpha
}

/// Runs the method on `p`, where `c` is the cost to minimize, calling
/// `judge` on every iterate until it stops the run.
pub(crate) fn run<T>(
    p: &Compiled,
    c: &Blocks,
    max_iter: usize,
    mut judge: impl FnMut(&Iterate) -> Control<T>,
) -> IpmRun<T> {
    let nu: f64 = p.sizes.iter().sum::<usize>() as f64;
    let m = p.num_rows();
    let mut x = identity_blocks(&p.sizes);
    let mut s = identity_blocks(&p.sizes);
    let mut y = vec![0.0; m];
    let (mut tau, mut kappa) = (1.0, 1.0);

    for iteration in 0..=max_iter {
        let mu = (blocks_inner(&x, &s) + tau * kappa) / (nu + 1.0);
        let it = Iterate { x: &x, y: &y, s: &s, tau, kappa };
        if let Control::Stop(t) = judge(&it) {
            return IpmRun { result: Some(t), iterations: iteration, reason: "stopped by caller" };
        }
        if iteration == max_iter {
            break;
        }
        if !(mu > MIN_MU) {
            return IpmRun { result: None, iterations: iteration, reason: "complementarity exhausted" };
        }

        let ax = p.apply(&x);
        let r_p: Vec<f64> = ax.iter().zip(&p.rhs).map(|(a, b)| a - b * tau).collect();
        let mut r_d = p.adjoint(&y);
        blocks_axpy(1.0, &s, &mut r_d);
        blocks_axpy(-tau, c, &mut r_d);
        let by: f64 = p.rhs.iter().zip(&y).map(|(b, v)| b * v).sum();
        let r_g = blocks_inner(c, &x) - by + kappa;

        let Some(scal) = x.iter().zip(&s).map(|(xk, sk)| scaling(xk, sk)).collect::<Option<Vec<_>>>() else {
            return IpmRun { result: None, iterations: iteration, reason: "lost positive definiteness" };
        };
        let Some(chol) = robust_cholesky(&schur(p, &scal)) else {
            return IpmRun { result: None, iterations: iteration, reason: "singular Schur complement" };
        };
        let wcw: Blocks = scal.iter().zip(c).map(|(sc, ck)| sandwich(&sc.w, ck)).collect();
        let u = p.apply(&wcw);
        let rhs_p: Vec<f64> = u.iter().zip(&p.rhs).map(|(a, b)| a + b).collect();
        let mut newton = Newton {
            p,
            c,
            scal: &scal,
            chol,
            wcw,
            u,
            pvec: Vec::new(),
            r_p: &r_p,
            r_d: &r_d,
            r_g,
            tau,
            kappa,
        };
        newton.pvec = newton.solve_m(&rhs_p);

        // predictor
        let r_c: Blocks = x.iter().map(|xk| -xk).collect();
        let aff = newton.direction(&r_c, -tau * kappa, 1.0);
        let alpha_aff = max_step(&scal, &aff, tau, kappa).min(1.0);
        let mut x_aff = x.clone();
        blocks_axpy(alpha_aff, &aff.dx, &mut x_aff);
        let mut s_aff = s.clone();
        blocks_axpy(alpha_aff, &aff.ds, &mut s_aff);
        let mu_aff = (blocks_inner(&x_aff, &s_aff) + (tau + alpha_aff * aff.dtau) * (kappa + alpha_aff * aff.dkappa))
            / (nu + 1.0);
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let r_c: Blocks = scal
            .iter()
            .enumerate()
            .map(|(k, sc)| {
                let n = sc.lambda.len();
                let dx_hat = &(&sc.g_inv * &aff.dx[k]) * &sc.g_inv.adjoint();
                let ds_hat = &(&sc.g.adjoint() * &aff.ds[k]) * &sc.g;
                let cross = (&dx_hat * &ds_hat).hermitian_part();
                let delta = ComplexMatrix::from_fn(n, n, |i, j| {
                    let mut t = -cross[(i, j)];
                    if i == j {
                        t += C64::new(sigma * mu - sc.lambda[i] * sc.lambda[i], 0.0);
                    }
                    t * (2.0 / (sc.lambda[i] + sc.lambda[j]))
                });
                (&(&sc.g * &delta) * &sc.g.adjoint()).hermitian_part()
            })
            .collect();
        let r_tau = sigma * mu - tau * kappa - aff.dtau * aff.dkappa;
        let dir = newton.direction(&r_c, r_tau, 1.0 - sigma);
        let alpha = (STEP_FRACTION * max_step(&scal, &dir, tau, kappa)).min(1.0);
        if !(alpha > 1e-12) {
            return IpmRun { result: None, iterations: iteration + 1, reason: "step length collapsed" };
        }

        blocks_axpy(alpha, &dir.dx, &mut x);
        blocks_axpy(alpha, &dir.ds, &mut s);
        for (yi, di) in y.iter_mut().zip(&dir.dy) {
            *yi += alpha * di;
        }
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        for k in 0..x.len() {
            x[k] = x[k].hermitian_part();
            s[k] = s[k].hermitian_part();
        }
        // rescale the homogeneous iterate to keep magnitudes moderate
        let scale = tau + kappa;
        if !(1e-6..=1e6).contains(&scale) {
            let f = 1.0 / scale;
            x.iter_mut().chain(s.iter_mut()).for_each(|b| *b = b.scale_real(f));
            y.iter_mut().for_each(|v| *v *= f);
            tau *= f;
            kappa *= f;
        }
    }
    IpmRun { result: None, iterations: max_iter, reason: "iteration limit" }
}
