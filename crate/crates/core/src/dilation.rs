//! Naimark dilations, least disturbing channels and unitary realizations.

use crate::linops::{tensor, ComplexMatrix, HermitianOperator, C64, ZERO};
use crate::qmodel::{choi_from_kraus, Channel, Instrument, ModelError, Observable};
use crate::tol;

const GRAM_SCHMIDT_THRESHOLD: f64 = 1e-12;

/// How `naimark` builds the dilation space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DilationMode {
    /// Trivial for projection-valued observables, canonical otherwise.
    Auto,
    /// `K = H ⊗ C^n`, `V|ψ⟩ = Σ_ω √A(ω)|ψ⟩ ⊗ |ω⟩`.
    Canonical,
    /// `K = H`, `V = 1`; only valid for projection-valued observables.
    Trivial,
}

/// Isometry `V: H → K` with a projection-valued observable on `K` compressing to `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaimarkDilation {
    dim_h: usize,
    dim_k: usize,
    isometry: ComplexMatrix,
    sharp_obs: Observable,
}

impl NaimarkDilation {
    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn dim_k(&self) -> usize {
        self.dim_k
    }

    pub fn isometry(&self) -> &ComplexMatrix {
        &self.isometry
    }

    pub fn sharp_obs(&self) -> &Observable {
        &self.sharp_obs
    }

    /// Largest violation among `V†V = 1`, idempotence of `Â(ω)` and `V†Â(ω)V = A(ω)`.
    pub fn defect(&self, a: &Observable) -> f64 {
        let v = &self.isometry;
        let vd = v.adjoint();
        let mut worst = (&vd * v).max_abs_diff(&ComplexMatrix::identity(self.dim_h));
        for (p, e) in self.sharp_obs.effects().iter().zip(a.effects()) {
            let m = p.matrix();
            worst = worst.max((m * m).max_abs_diff(m)).max(m.hermitian_defect());
            worst = worst.max((&(&vd * m) * v).max_abs_diff(e.matrix()));
        }
        worst
    }
}

pub fn naimark(a: &Observable) -> NaimarkDilation {
    naimark_with(a, DilationMode::Auto).expect("auto mode never fails")
}

pub fn naimark_with(a: &Observable, mode: DilationMode) -> Result<NaimarkDilation, ModelError> {
    let sharp = a.is_projective(tol::PROJECTION);
    match mode {
        DilationMode::Trivial if !sharp => Err(ModelError::InvalidParameter(
            "trivial dilation needs a projection-valued observable".into(),
        )),
        DilationMode::Trivial | DilationMode::Auto if sharp => Ok(NaimarkDilation {
            dim_h: a.dim(),
            dim_k: a.dim(),
            isometry: ComplexMatrix::identity(a.dim()),
            sharp_obs: a.clone(),
        }),
        _ => Ok(canonical(a)),
    }
}

fn canonical(a: &Observable) -> NaimarkDilation {
    let (d, n) = (a.dim(), a.num_outcomes());
    let mut v = ComplexMatrix::zeros(d * n, d);
    for (w, e) in a.effects().iter().enumerate() {
        let root = e.sqrt_psd().expect("Jacobi converges").into_matrix();
        for i in 0..d {
            for j in 0..d {
                v[(i * n + w, j)] = root[(i, j)];
            }
        }
    }
    let effects = (0..n)
        .map(|w| HermitianOperator::new(tensor(&ComplexMatrix::identity(d), &ComplexMatrix::unit(n, w, w))).expect("square"))
        .collect();
    let sharp_obs = Observable::with_tolerance(a.outcomes().to_vec(), effects, tol::CONSTRUCTION)
        .expect("orthogonal projections summing to identity");
    NaimarkDilation { dim_h: d, dim_k: d * n, isometry: v, sharp_obs }
}

/// `Λ_A(T) = Σ_ω Â(ω) V T V† Â(ω)` built from the auto-selected dilation.
pub fn least_disturbing(a: &Observable) -> Channel {
    let dil = naimark(a);
    let kraus: Vec<ComplexMatrix> = dil.sharp_obs.effects().iter().map(|p| p.matrix() * &dil.isometry).collect();
    let choi = choi_from_kraus(&kraus).expect("equal Kraus shapes");
    Channel::with_tolerance(dil.dim_h, dil.dim_k, choi, tol::FEASIBILITY).expect("least disturbing map is a channel")
}

/// Unitary `U: H⊗V₁ → K⊗V₂` and ancilla `η ∈ V₁` with
/// `Λ(T) = tr_{V₂}[U (T ⊗ |η⟩⟨η|) U†]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationQuartet {
    dim_h: usize,
    dim_k: usize,
    dim_v1: usize,
    dim_v2: usize,
    kraus_rank: usize,
    unitary: ComplexMatrix,
    ancilla: Vec<C64>,
}

impl RealizationQuartet {
    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn dim_k(&self) -> usize {
        self.dim_k
    }

    pub fn dim_v1(&self) -> usize {
        self.dim_v1
    }

    pub fn dim_v2(&self) -> usize {
        self.dim_v2
    }

    /// Number of nonzero Kraus operators before padding.
    pub fn kraus_rank(&self) -> usize {
        self.kraus_rank
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.unitary
    }

    pub fn ancilla(&self) -> &[C64] {
        &self.ancilla
    }

    /// `W = U(· ⊗ η)`, the `(dim_k·dim_v2) × dim_h` isometry.
    pub fn isometry(&self) -> ComplexMatrix {
        let rows = self.dim_k * self.dim_v2;
        ComplexMatrix::from_fn(rows, self.dim_h, |r, a| {
            (0..self.dim_v1).map(|e| self.unitary[(r, a * self.dim_v1 + e)] * self.ancilla[e]).sum()
        })
    }

    pub fn unitarity_defect(&self) -> f64 {
        let n = self.unitary.rows();
        (&self.unitary.adjoint() * &self.unitary).max_abs_diff(&ComplexMatrix::identity(n))
    }

    /// Channel obtained by tracing out `V₂`.
    pub fn reconstruct(&self) -> Result<Channel, ModelError> {
        let id = pointer_blocks(self, &ComplexMatrix::identity(self.dim_v2));
        Channel::with_tolerance(self.dim_h, self.dim_k, id, tol::FEASIBILITY)
    }
}

/// Choi operator of `T ↦ tr_{V₂}[W T W† (1 ⊗ F)]`.
fn pointer_blocks(q: &RealizationQuartet, f: &ComplexMatrix) -> HermitianOperator {
    let w = q.isometry();
    let (dh, dk, dv) = (q.dim_h, q.dim_k, q.dim_v2);
    let mut choi = ComplexMatrix::zeros(dk * dh, dk * dh);
    for i in 0..dk {
        for a in 0..dh {
            for j in 0..dk {
                for b in 0..dh {
                    let mut acc = ZERO;
                    for k in 0..dv {
                        let x = w[(i * dv + k, a)];
                        if x == ZERO {
                            continue;
                        }
                        for l in 0..dv {
                            acc += x * w[(j * dv + l, b)].conj() * f[(l, k)];
                        }
                    }
                    choi[(i * dh + a, j * dh + b)] = acc;
                }
            }
        }
    }
    HermitianOperator::new(choi).expect("square")
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Smallest `(dim_v1, dim_v2)` with `dim_h·dim_v1 = dim_k·dim_v2` and `dim_v2 ≥ rank`.
fn padded_dims(dim_h: usize, dim_k: usize, rank: usize) -> (usize, usize) {
    let lcm = dim_h / gcd(dim_h, dim_k) * dim_k;
    let (step1, step2) = (lcm / dim_h, lcm / dim_k);
    let m = rank.div_ceil(step2).max(1);
    (step1 * m, step2 * m)
}

pub fn realize(c: &Channel) -> RealizationQuartet {
    let kraus = c.kraus().expect("Jacobi converges");
    let (dh, dk) = (c.dim_in(), c.dim_out());
    let rank = kraus.len();
    let (dv1, dv2) = padded_dims(dh, dk, rank);
    let n = dh * dv1;

    let mut u = ComplexMatrix::zeros(n, n);
    let mut filled = vec![false; n];
    for a in 0..dh {
        for (k, op) in kraus.iter().enumerate() {
            for i in 0..dk {
                u[(i * dv2 + k, a * dv1)] = op[(i, a)];
            }
        }
        filled[a * dv1] = true;
    }
    complete_unitary(&mut u, &filled);

    let mut ancilla = vec![ZERO; dv1];
    ancilla[0] = C64::new(1.0, 0.0);
    RealizationQuartet { dim_h: dh, dim_k: dk, dim_v1: dv1, dim_v2: dv2, kraus_rank: rank, unitary: u, ancilla }
}

/// Fills the columns not marked in `filled` with an orthonormal basis of the
/// complement, drawing candidates from the standard basis.
fn complete_unitary(u: &mut ComplexMatrix, filled: &[bool]) {
    let n = u.rows();
    let mut basis: Vec<Vec<C64>> = (0..n).filter(|&c| filled[c]).map(|c| u.column(c)).collect();
    let mut targets = (0..n).filter(|&c| !filled[c]);
    let mut target = targets.next();
    for e in 0..n {
        let Some(col) = target else { break };
        let mut v = vec![ZERO; n];
        v[e] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for b in &basis {
                let proj: C64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= proj * bi;
                }
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm <= GRAM_SCHMIDT_THRESHOLD.sqrt() {
            continue;
        }
        for x in &mut v {
            *x /= norm;
        }
        u.set_column(col, &v);
        basis.push(v);
        target = targets.next();
    }
}

fn check_pointer(q: &RealizationQuartet, pointer: &Observable) -> Result<(), ModelError> {
    if pointer.dim() != q.dim_v2 {
        return Err(ModelError::Dimension(format!(
            "pointer acts on dimension {}, realization has ancilla output dimension {}",
            pointer.dim(),
            q.dim_v2
        )));
    }
    Ok(())
}

/// `A(ω) = W†(1 ⊗ F(ω))W`.
pub fn induced_observable(q: &RealizationQuartet, pointer: &Observable) -> Result<Observable, ModelError> {
    check_pointer(q, pointer)?;
    let w = q.isometry();
    let wd = w.adjoint();
    let effects = pointer
        .effects()
        .iter()
        .map(|f| {
            let lifted = tensor(&ComplexMatrix::identity(q.dim_k), f.matrix());
            HermitianOperator::new(&(&wd * &lifted) * &w)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Observable::with_tolerance(pointer.outcomes().to_vec(), effects, tol::FEASIBILITY)
}

/// `I_ω(T) = tr_{V₂}[U(T ⊗ |η⟩⟨η|)U† (1 ⊗ F(ω))]`.
pub fn pointer_instrument(q: &RealizationQuartet, pointer: &Observable) -> Result<Instrument, ModelError> {
    check_pointer(q, pointer)?;
    let blocks = pointer.effects().iter().map(|f| pointer_blocks(q, f.matrix())).collect();
    Instrument::with_tolerance(q.dim_h, q.dim_k, pointer.outcomes().to_vec(), blocks, tol::FEASIBILITY)
}
