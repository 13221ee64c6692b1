//! Deciders for post-processing, simulability, compatibility and joint
//! measurability, each backed by one conic feasibility problem.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{self, Certificate, ConicError, ConicProblem, Diagnostics, Entry, SolverOptions, Status};
use crate::linops::{partial_trace, ComplexMatrix, Factor, HermitianOperator, C64, ZERO};
use crate::qmodel::{compose_choi, Channel, Instrument, ModelError, Observable, StochasticMatrix};
use crate::tol;

/// Weights below this are dropped from mixture witnesses.
const MIXTURE_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Answer {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{0} must not be empty")]
    Empty(&'static str),
}

/// Mixture component `t·μ∘X_i` or `t·Θ∘Y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Component<T> {
    pub index: usize,
    pub weight: f64,
    pub map: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    Stochastic(StochasticMatrix),
    Channel(Channel),
    ObservableMixture(Vec<Component<StochasticMatrix>>),
    ChannelMixture(Vec<Component<Channel>>),
    Instrument(Instrument),
    /// Joint observable over pairs `(i, j)` and the margin maps onto each factor.
    Joint { joint: Observable, margin_a: StochasticMatrix, margin_b: StochasticMatrix },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationVerdict {
    pub answer: Answer,
    pub witness: Option<Witness>,
    pub certificate: Option<Certificate>,
    pub diagnostics: Diagnostics,
}

impl RelationVerdict {
    pub fn is_yes(&self) -> bool {
        self.answer == Answer::Yes
    }

    fn unknown(mut diagnostics: Diagnostics, why: impl Into<String>) -> Self {
        let why = why.into();
        if !why.is_empty() {
            diagnostics.message = if diagnostics.message.is_empty() { why } else { format!("{why}; {}", diagnostics.message) };
        }
        RelationVerdict { answer: Answer::Unknown, witness: None, certificate: None, diagnostics }
    }
}

/// `coefficient · X_block[r, c]`.
pub(crate) type LinTerm = (usize, usize, usize, C64);

/// Adds real rows forcing the Hermitian `n × n` linear image given entrywise by
/// `image(r, c)` to equal `target`; diagonal entries give one row, upper
/// entries a real-part row and an imaginary-part row.
pub(crate) fn hermitian_equality(
    p: &mut ConicProblem,
    n: usize,
    target: &ComplexMatrix,
    mut image: impl FnMut(usize, usize) -> Vec<LinTerm>,
) {
    for r in 0..n {
        for c in r..n {
            let terms = image(r, c);
            let t = target[(r, c)];
            p.add_row(terms.iter().map(|&(b, i, j, w)| Entry::new(b, i, j, w)), t.re);
            if r != c {
                p.add_row(terms.iter().map(|&(b, i, j, w)| Entry::new(b, i, j, C64::new(w.im, -w.re))), t.im);
            }
        }
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `(tr_out X)[a, b] = Σ_i X[(i,a),(i,b)]` for a block with the given factor sizes.
pub(crate) fn trace_out_terms(block: usize, dim_out: usize, dim_in: usize, a: usize, b: usize) -> Vec<LinTerm> {
    (0..dim_out).map(|i| (block, i * dim_in + a, i * dim_in + b, real(1.0))).collect()
}

/// Choi entry `[(p,a),(q,b)]` of `Θ∘Γ` as a linear form in the Choi block of `Θ`.
pub(crate) fn composition_terms(
    block: usize,
    gamma: &ComplexMatrix,
    mid: usize,
    dim_in: usize,
    (p, a): (usize, usize),
    (q, b): (usize, usize),
) -> Vec<LinTerm> {
    let mut out = Vec::new();
    for k in 0..mid {
        for l in 0..mid {
            let g = gamma[(k * dim_in + a, l * dim_in + b)];
            if g != ZERO {
                out.push((block, p * mid + k, q * mid + l, g));
            }
        }
    }
    out
}

/// Eigenvalues of an effect below this are treated as exact zeros when
/// restricting instrument blocks to their support.
const SUPPORT_CUTOFF: f64 = 1e-12;

/// Instrument block `C ⪰ 0` with input margin `tr_out C = Eᵀ`, stored on its
/// support as `C = (1⊗V) X (1⊗V)†` where `V` spans `range(Eᵀ)`.
pub(crate) struct SupportedBlock {
    pub block: Option<usize>,
    dim_out: usize,
    dim_in: usize,
    v: ComplexMatrix,
    margin: Vec<f64>,
}

impl SupportedBlock {
    pub fn new(p: &mut ConicProblem, effect: &HermitianOperator, dim_out: usize) -> Result<Self, ModelError> {
        let e = effect.transpose().eigh()?;
        let scale = e.max().abs().max(1.0);
        let keep: Vec<usize> = (0..e.values.len()).filter(|&k| e.values[k] > SUPPORT_CUTOFF * scale).collect();
        let dim_in = effect.dim();
        let v = ComplexMatrix::from_fn(dim_in, keep.len(), |r, c| e.vectors[(r, keep[c])]);
        let margin = keep.iter().map(|&k| e.values[k]).collect();
        let block = (!keep.is_empty()).then(|| p.add_block(dim_out * keep.len()));
        Ok(SupportedBlock { block, dim_out, dim_in, v, margin })
    }

    fn rank(&self) -> usize {
        self.v.cols()
    }

    /// `C[(i,a),(j,b)]` as a linear form in `X`.
    pub fn entry(&self, r: usize, c: usize) -> Vec<LinTerm> {
        let Some(k) = self.block else { return Vec::new() };
        let (i, a, j, b) = (r / self.dim_in, r % self.dim_in, c / self.dim_in, c % self.dim_in);
        let n = self.rank();
        let mut out = Vec::with_capacity(n * n);
        for p in 0..n {
            for q in 0..n {
                let w = self.v[(a, p)] * self.v[(b, q)].conj();
                if w.norm() > 1e-15 {
                    out.push((k, i * n + p, j * n + q, w));
                }
            }
        }
        out
    }

    /// Rows fixing the input margin, expressed on the support.
    pub fn add_margin(&self, p: &mut ConicProblem) {
        if let Some(k) = self.block {
            let target = ComplexMatrix::diagonal(&self.margin);
            hermitian_equality(p, self.rank(), &target, |x, y| trace_out_terms(k, self.dim_out, self.rank(), x, y));
        }
    }

    pub fn expand(&self, x: Option<&ComplexMatrix>) -> ComplexMatrix {
        let side = self.dim_out * self.dim_in;
        let Some(x) = x else { return ComplexMatrix::zeros(side, side) };
        let lift = crate::linops::tensor(&ComplexMatrix::identity(self.dim_out), &self.v);
        (&(&lift * x) * &lift.adjoint()).hermitian_part()
    }
}

fn block_matrix(v: &conic::Verdict, k: usize) -> &ComplexMatrix {
    v.witness.as_ref().expect("feasible verdicts carry witnesses")[k].matrix()
}

fn scalar(v: &conic::Verdict, k: usize) -> f64 {
    block_matrix(v, k)[(0, 0)].re
}

/// Clips negative entries and renormalizes columns.
fn clean_stochastic(n_to: usize, n_from: usize, raw: &[f64]) -> Result<StochasticMatrix, ModelError> {
    let mut e: Vec<f64> = raw.iter().map(|x| x.max(0.0)).collect();
    for from in 0..n_from {
        let s: f64 = (0..n_to).map(|to| e[to * n_from + from]).sum();
        for to in 0..n_to {
            e[to * n_from + from] = if s > 0.0 { e[to * n_from + from] / s } else { 1.0 / n_to as f64 };
        }
    }
    StochasticMatrix::new(n_to, n_from, e)
}

/// Nearest-by-construction channel: PSD projection then `(1⊗X^{-½}) J (1⊗X^{-½})`
/// with `X = tr_out J`.
fn clean_channel(choi: &ComplexMatrix, dim_in: usize, dim_out: usize) -> Result<Channel, ModelError> {
    let j = HermitianOperator::new(choi.hermitian_part())?.psd_project()?;
    let x = HermitianOperator::new(partial_trace(j.matrix(), (dim_out, dim_in), Factor::First)?)?;
    let e = x.eigh()?;
    if e.min() <= 0.0 {
        return Err(ModelError::InvalidParameter("channel witness has a singular input margin".into()));
    }
    let s = crate::linops::tensor(&ComplexMatrix::identity(dim_out), e.map(|v| 1.0 / v.sqrt()).matrix());
    let fixed = &(&s * j.matrix()) * &s;
    Channel::with_tolerance(dim_in, dim_out, HermitianOperator::new(fixed)?, tol::CONSTRUCTION)
}

/// `max_ω' ‖Σ_ω μ(ω',ω) B(ω) − A(ω')‖_max`.
fn post_process_defect(mu: &StochasticMatrix, b: &Observable, a: &Observable) -> f64 {
    (0..mu.n_to())
        .map(|to| {
            let mut m = -a.effect(to).matrix();
            for from in 0..mu.n_from() {
                m.axpy(mu.get(to, from), b.effect(from).matrix());
            }
            m.max_abs()
        })
        .fold(0.0, f64::max)
}

/// Decision procedures sharing one set of solver options.
#[derive(Debug, Clone, Default)]
pub struct Decider {
    pub opts: SolverOptions,
}

impl Decider {
    pub fn new(opts: SolverOptions) -> Self {
        Decider { opts }
    }

    fn run(&self, p: &ConicProblem) -> Result<conic::Verdict, RelationError> {
        if let Some(cert) = conic::empty_row_certificate(p, &self.opts) {
            return Ok(conic::Verdict {
                status: Status::Infeasible,
                witness: None,
                certificate: Some(cert),
                diagnostics: Diagnostics { message: "constraint with vanishing coefficients".into(), ..Default::default() },
            });
        }
        Ok(conic::solve_feasibility(p, &self.opts)?)
    }

    /// Maps a conic verdict; `witness` turns a feasible point into a checked witness.
    fn conclude(
        &self,
        v: conic::Verdict,
        witness: impl FnOnce(&conic::Verdict) -> Result<(Witness, f64), ModelError>,
    ) -> RelationVerdict {
        match v.status {
            Status::Feasible => match witness(&v) {
                Ok((w, defect)) if defect <= self.opts.feasibility_tol => RelationVerdict {
                    answer: Answer::Yes,
                    witness: Some(w),
                    certificate: None,
                    diagnostics: v.diagnostics,
                },
                Ok((_, defect)) => RelationVerdict::unknown(v.diagnostics, format!("witness defect {defect:e}")),
                Err(e) => RelationVerdict::unknown(v.diagnostics, format!("witness rejected: {e}")),
            },
            Status::Infeasible => {
                RelationVerdict { answer: Answer::No, witness: None, certificate: v.certificate, diagnostics: v.diagnostics }
            }
            Status::Indeterminate => RelationVerdict::unknown(v.diagnostics, ""),
        }
    }

    /// Decides `a ≼ b`, i.e. `a = μ∘b` for a stochastic `μ`.
    pub fn obs_postprocess(&self, a: &Observable, b: &Observable) -> Result<RelationVerdict, RelationError> {
        if a.dim() != b.dim() {
            return Err(RelationError::Dimension(format!("observables on dimensions {} and {}", a.dim(), b.dim())));
        }
        let (na, nb, d) = (a.num_outcomes(), b.num_outcomes(), a.dim());
        let mut p = ConicProblem::new();
        let mu: Vec<usize> = (0..na * nb).map(|_| p.add_block(1)).collect();
        for from in 0..nb {
            p.add_row((0..na).map(|to| Entry::re(mu[to * nb + from], 0, 0, 1.0)), 1.0);
        }
        for to in 0..na {
            hermitian_equality(&mut p, d, a.effect(to).matrix(), |r, c| {
                (0..nb).map(|from| (mu[to * nb + from], 0, 0, b.effect(from).matrix()[(r, c)])).collect()
            });
        }
        let v = self.run(&p)?;
        Ok(self.conclude(v, |v| {
            let raw: Vec<f64> = mu.iter().map(|&k| scalar(v, k)).collect();
            let m = clean_stochastic(na, nb, &raw)?;
            let defect = post_process_defect(&m, b, a);
            Ok((Witness::Stochastic(m), defect))
        }))
    }

    /// Decides `l ≼ g`, i.e. `l = Θ∘g` for a channel `Θ`.
    pub fn chan_postprocess(&self, l: &Channel, g: &Channel) -> Result<RelationVerdict, RelationError> {
        if l.dim_in() != g.dim_in() {
            return Err(RelationError::Dimension(format!("channels on inputs {} and {}", l.dim_in(), g.dim_in())));
        }
        let (din, mid, dout) = (g.dim_in(), g.dim_out(), l.dim_out());
        let mut p = ConicProblem::new();
        let t = p.add_block(dout * mid);
        hermitian_equality(&mut p, mid, &ComplexMatrix::identity(mid), |a, b| trace_out_terms(t, dout, mid, a, b));
        let gm = g.choi().matrix();
        hermitian_equality(&mut p, dout * din, l.choi().matrix(), |r, c| {
            composition_terms(t, gm, mid, din, (r / din, r % din), (c / din, c % din))
        });
        let v = self.run(&p)?;
        Ok(self.conclude(v, |v| {
            let theta = clean_channel(block_matrix(v, 0), mid, dout)?;
            let composed = compose_choi(theta.choi().matrix(), dout, gm, din, mid);
            let defect = composed.max_abs_diff(l.choi().matrix());
            Ok((Witness::Channel(theta), defect))
        }))
    }

    /// Decides `a ∈ simu_O(xs)`: `a = Σ_i t_i μ_i∘x_i`.
    pub fn obs_simulable(&self, a: &Observable, xs: &[Observable]) -> Result<RelationVerdict, RelationError> {
        if xs.is_empty() {
            return Err(RelationError::Empty("simulator set"));
        }
        if let Some(x) = xs.iter().find(|x| x.dim() != a.dim()) {
            return Err(RelationError::Dimension(format!("simulator on dimension {} for target on {}", x.dim(), a.dim())));
        }
        let (na, d) = (a.num_outcomes(), a.dim());
        let mut p = ConicProblem::new();
        let nu: Vec<Vec<usize>> = xs.iter().map(|x| (0..na * x.num_outcomes()).map(|_| p.add_block(1)).collect()).collect();
        let t: Vec<usize> = xs.iter().map(|_| p.add_block(1)).collect();
        for (i, x) in xs.iter().enumerate() {
            let nx = x.num_outcomes();
            for from in 0..nx {
                let col = (0..na).map(|to| Entry::re(nu[i][to * nx + from], 0, 0, 1.0));
                p.add_row(col.chain([Entry::re(t[i], 0, 0, -1.0)]), 0.0);
            }
        }
        p.add_row(t.iter().map(|&k| Entry::re(k, 0, 0, 1.0)), 1.0);
        for to in 0..na {
            hermitian_equality(&mut p, d, a.effect(to).matrix(), |r, c| {
                let mut terms = Vec::new();
                for (i, x) in xs.iter().enumerate() {
                    let nx = x.num_outcomes();
                    terms.extend((0..nx).map(|from| (nu[i][to * nx + from], 0, 0, x.effect(from).matrix()[(r, c)])));
                }
                terms
            });
        }
        let v = self.run(&p)?;
        Ok(self.conclude(v, |v| {
            let weights: Vec<f64> = t.iter().map(|&k| scalar(v, k).max(0.0)).collect();
            let total: f64 = weights.iter().sum();
            let mut parts = Vec::new();
            let mut defect: f64 = 0.0;
            let mut images: Vec<ComplexMatrix> = (0..na).map(|_| ComplexMatrix::zeros(d, d)).collect();
            for (i, x) in xs.iter().enumerate() {
                let w = weights[i] / total;
                if w <= MIXTURE_CUTOFF {
                    continue;
                }
                let nx = x.num_outcomes();
                let raw: Vec<f64> = nu[i].iter().map(|&k| scalar(v, k)).collect();
                let mu = clean_stochastic(na, nx, &raw)?;
                for (to, img) in images.iter_mut().enumerate() {
                    for from in 0..nx {
                        img.axpy(w * mu.get(to, from), x.effect(from).matrix());
                    }
                }
                parts.push(Component { index: i, weight: w, map: mu });
            }
            for (img, e) in images.iter().zip(a.effects()) {
                defect = defect.max(img.max_abs_diff(e.matrix()));
            }
            Ok((Witness::ObservableMixture(parts), defect))
        }))
    }

    /// Decides `l ∈ simu_C(ys)`: `l = Σ_i t_i Θ_i∘y_i`.
    pub fn chan_simulable(&self, l: &Channel, ys: &[Channel]) -> Result<RelationVerdict, RelationError> {
        if ys.is_empty() {
            return Err(RelationError::Empty("simulator set"));
        }
        if let Some(y) = ys.iter().find(|y| y.dim_in() != l.dim_in()) {
            return Err(RelationError::Dimension(format!("simulator input {} for target input {}", y.dim_in(), l.dim_in())));
        }
        let (din, dout) = (l.dim_in(), l.dim_out());
        let mut p = ConicProblem::new();
        let s: Vec<usize> = ys.iter().map(|y| p.add_block(dout * y.dim_out())).collect();
        let t: Vec<usize> = ys.iter().map(|_| p.add_block(1)).collect();
        for (i, y) in ys.iter().enumerate() {
            let mid = y.dim_out();
            hermitian_equality(&mut p, mid, &ComplexMatrix::zeros(mid, mid), |a, b| {
                let mut terms = trace_out_terms(s[i], dout, mid, a, b);
                if a == b {
                    terms.push((t[i], 0, 0, real(-1.0)));
                }
                terms
            });
        }
        p.add_row(t.iter().map(|&k| Entry::re(k, 0, 0, 1.0)), 1.0);
        hermitian_equality(&mut p, dout * din, l.choi().matrix(), |r, c| {
            let mut terms = Vec::new();
            for (i, y) in ys.iter().enumerate() {
                terms.extend(composition_terms(s[i], y.choi().matrix(), y.dim_out(), din, (r / din, r % din), (c / din, c % din)));
            }
            terms
        });
        let v = self.run(&p)?;
        Ok(self.conclude(v, |v| {
            let weights: Vec<f64> = t.iter().map(|&k| scalar(v, k).max(0.0)).collect();
            let total: f64 = weights.iter().sum();
            let mut parts = Vec::new();
            let mut mix = ComplexMatrix::zeros(dout * din, dout * din);
            for (i, y) in ys.iter().enumerate() {
                let w = weights[i] / total;
                if w <= MIXTURE_CUTOFF {
                    continue;
                }
                let theta = clean_channel(&block_matrix(v, s[i]).scale_real(1.0 / weights[i]), y.dim_out(), dout)?;
                let composed = compose_choi(theta.choi().matrix(), dout, y.choi().matrix(), din, y.dim_out());
                mix.axpy(w, &composed);
                parts.push(Component { index: i, weight: w, map: theta });
            }
            let defect = mix.max_abs_diff(l.choi().matrix());
            Ok((Witness::ChannelMixture(parts), defect))
        }))
    }

    /// Decides `a ∘∘ l`: an instrument with observable margin `a` and channel margin `l`.
    pub fn compatible(&self, a: &Observable, l: &Channel) -> Result<RelationVerdict, RelationError> {
        if a.dim() != l.dim_in() {
            return Err(RelationError::Dimension(format!("observable on {} for channel input {}", a.dim(), l.dim_in())));
        }
        let (din, dout) = (l.dim_in(), l.dim_out());
        let side = din * dout;
        let mut p = ConicProblem::new();
        let blocks = a.effects().iter().map(|e| SupportedBlock::new(&mut p, e, dout)).collect::<Result<Vec<_>, _>>()?;
        hermitian_equality(&mut p, side, l.choi().matrix(), |r, c| blocks.iter().flat_map(|sb| sb.entry(r, c)).collect());
        for sb in &blocks {
            sb.add_margin(&mut p);
        }
        let v = self.run(&p)?;
        Ok(self.conclude(v, |v| {
            let parts = blocks
                .iter()
                .map(|sb| HermitianOperator::new(sb.expand(sb.block.map(|k| block_matrix(v, k)))))
                .collect::<Result<Vec<_>, _>>()?;
            let inst = Instrument::with_tolerance(din, dout, a.outcomes().to_vec(), parts, self.opts.feasibility_tol)?;
            let obs = inst.associated_observable_tol(self.opts.feasibility_tol)?;
            let ch = inst.associated_channel_tol(self.opts.feasibility_tol)?;
            let mut defect = ch.choi().matrix().max_abs_diff(l.choi().matrix());
            for (x, y) in obs.effects().iter().zip(a.effects()) {
                defect = defect.max(x.matrix().max_abs_diff(y.matrix()));
            }
            Ok((Witness::Instrument(inst), defect))
        }))
    }

    /// Decides joint measurability through a joint observable with margins `a` and `b`.
    pub fn jointly_measurable(&self, a: &Observable, b: &Observable) -> Result<RelationVerdict, RelationError> {
        if a.dim() != b.dim() {
            return Err(RelationError::Dimension(format!("observables on dimensions {} and {}", a.dim(), b.dim())));
        }
        let (na, nb, d) = (a.num_outcomes(), b.num_outcomes(), a.dim());
        let mut p = ConicProblem::new();
        let m: Vec<usize> = (0..na * nb).map(|_| p.add_block(d)).collect();
        for i in 0..na {
            hermitian_equality(&mut p, d, a.effect(i).matrix(), |r, c| (0..nb).map(|j| (m[i * nb + j], r, c, real(1.0))).collect());
        }
        for j in 0..nb {
            hermitian_equality(&mut p, d, b.effect(j).matrix(), |r, c| (0..na).map(|i| (m[i * nb + j], r, c, real(1.0))).collect());
        }
        let v = self.run(&p)?;
        Ok(self.conclude(v, |v| {
            let effects = m.iter().map(|&k| HermitianOperator::new(block_matrix(v, k).clone())).collect::<Result<Vec<_>, _>>()?;
            let labels = (0..na).flat_map(|i| (0..nb).map(move |j| format!("{},{}", a.outcomes()[i], b.outcomes()[j]))).collect();
            let joint = Observable::with_tolerance(labels, effects, self.opts.feasibility_tol)?;
            let margin_a = StochasticMatrix::merging(&(0..na).map(|i| (0..nb).map(|j| i * nb + j).collect()).collect::<Vec<_>>(), na * nb)?;
            let margin_b = StochasticMatrix::merging(&(0..nb).map(|j| (0..na).map(|i| i * nb + j).collect()).collect::<Vec<_>>(), na * nb)?;
            let defect = post_process_defect(&margin_a, &joint, a).max(post_process_defect(&margin_b, &joint, b));
            Ok((Witness::Joint { joint, margin_a, margin_b }, defect))
        }))
    }
}

pub fn obs_postprocess(a: &Observable, b: &Observable) -> Result<RelationVerdict, RelationError> {
    Decider::default().obs_postprocess(a, b)
}

pub fn chan_postprocess(l: &Channel, g: &Channel) -> Result<RelationVerdict, RelationError> {
    Decider::default().chan_postprocess(l, g)
}

pub fn obs_simulable(a: &Observable, xs: &[Observable]) -> Result<RelationVerdict, RelationError> {
    Decider::default().obs_simulable(a, xs)
}

pub fn chan_simulable(l: &Channel, ys: &[Channel]) -> Result<RelationVerdict, RelationError> {
    Decider::default().chan_simulable(l, ys)
}

pub fn compatible(a: &Observable, l: &Channel) -> Result<RelationVerdict, RelationError> {
    Decider::default().compatible(a, l)
}

pub fn jointly_measurable(a: &Observable, b: &Observable) -> Result<RelationVerdict, RelationError> {
    Decider::default().jointly_measurable(a, b)
}

fn norm3(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Closed-form joint measurability of two unbiased qubit observables:
/// `‖a+b‖ + ‖a−b‖ ≤ 2`.
pub fn busch_jm(a: [f64; 3], b: [f64; 3]) -> Answer {
    if busch_margin(a, b) >= -1e-9 {
        Answer::Yes
    } else {
        Answer::No
    }
}

/// `2 − ‖a+b‖ − ‖a−b‖`; nonnegative exactly on the jointly measurable pairs.
pub fn busch_margin(a: [f64; 3], b: [f64; 3]) -> f64 {
    let plus = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
    let minus = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    2.0 - norm3(plus) - norm3(minus)
}
