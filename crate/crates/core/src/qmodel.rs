//! Observables, channels, instruments and stochastic matrices.
//!
//! Channels are stored through their Choi operator with output ⊗ input
//! ordering, `J[(i,a),(j,b)] = ⟨i|Λ(|a⟩⟨b|)|j⟩` at flat index `i·dim_in + a`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linops::{
    partial_trace, pauli, tensor, ComplexMatrix, Factor, HermitianOperator, LinalgError, C64, ZERO,
};
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("{what} is not positive (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositive { what: String, min_eigenvalue: f64 },
    #[error("{what} violates normalization (residual {residual:e})")]
    NotNormalized { what: String, residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn check_psd(what: impl FnOnce() -> String, h: &HermitianOperator, tol: f64) -> Result<(), ModelError> {
    let min = h.min_eigenvalue()?;
    if min < -tol {
        return Err(ModelError::NotPositive { what: what(), min_eigenvalue: min });
    }
    Ok(())
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Finite-outcome POVM.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    dim: usize,
    outcomes: Vec<String>,
    effects: Vec<HermitianOperator>,
}

impl Observable {
    pub fn new(outcomes: Vec<String>, effects: Vec<HermitianOperator>) -> Result<Self, ModelError> {
        Self::with_tolerance(outcomes, effects, tol::CONSTRUCTION)
    }

    /// Validates positivity and normalization at `tol` instead of the construction default.
    pub fn with_tolerance(
        outcomes: Vec<String>,
        effects: Vec<HermitianOperator>,
        tol: f64,
    ) -> Result<Self, ModelError> {
        if effects.is_empty() {
            return Err(ModelError::Empty("observable effect list"));
        }
        if outcomes.len() != effects.len() {
            return Err(ModelError::Dimension(format!(
                "{} outcome labels for {} effects",
                outcomes.len(),
                effects.len()
            )));
        }
        let dim = effects[0].dim();
        let mut total = ComplexMatrix::zeros(dim, dim);
        for (label, e) in outcomes.iter().zip(&effects) {
            if e.dim() != dim {
                return Err(ModelError::Dimension(format!(
                    "effect '{label}' has side {} but the first effect has side {dim}",
                    e.dim()
                )));
            }
            check_psd(|| format!("effect '{label}'"), e, tol)?;
            total = &total + e.matrix();
        }
        let residual = total.max_abs_diff(&ComplexMatrix::identity(dim));
        if residual > tol {
            return Err(ModelError::NotNormalized { what: "sum of effects".into(), residual });
        }
        Ok(Observable { dim, outcomes, effects })
    }

    /// Outcomes labelled `0, 1, …`.
    pub fn from_effects(effects: Vec<HermitianOperator>) -> Result<Self, ModelError> {
        Self::new(default_labels(effects.len()), effects)
    }

    /// Coin-tossing observable `A(ω) = p(ω)·1`.
    pub fn trivial(dim: usize, p: &[f64]) -> Result<Self, ModelError> {
        if p.iter().any(|&x| x < 0.0 || !x.is_finite()) || (p.iter().sum::<f64>() - 1.0).abs() > tol::CONSTRUCTION {
            return Err(ModelError::InvalidParameter(format!("{p:?} is not a probability distribution")));
        }
        Self::from_effects(p.iter().map(|&x| HermitianOperator::identity(dim).scale(x)).collect())
    }

    /// Computational-basis measurement `|ω⟩⟨ω|` on `C^n`.
    pub fn delta_basis(n: usize) -> Self {
        let effects = (0..n)
            .map(|i| HermitianOperator::new(ComplexMatrix::unit(n, i, i)).expect("square"))
            .collect();
        Observable { dim: n, outcomes: default_labels(n), effects }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn effects(&self) -> &[HermitianOperator] {
        &self.effects
    }

    pub fn num_outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn effect(&self, i: usize) -> &HermitianOperator {
        &self.effects[i]
    }

    pub fn with_outcomes(mut self, outcomes: Vec<String>) -> Result<Self, ModelError> {
        if outcomes.len() != self.effects.len() {
            return Err(ModelError::Dimension("relabelling changes the outcome count".into()));
        }
        self.outcomes = outcomes;
        Ok(self)
    }

    /// All effects are projections (eigenvalues within `tol` of {0, 1}).
    pub fn is_projective(&self, tol: f64) -> bool {
        self.effects.iter().all(|e| e.is_projection(tol).unwrap_or(false))
    }

    /// All effects are multiples of the identity.
    pub fn is_trivial(&self, tol: f64) -> bool {
        self.effects.iter().all(|e| {
            let p = e.trace() / self.dim as f64;
            e.matrix().max_abs_diff(&ComplexMatrix::identity(self.dim).scale_real(p)) <= tol
        })
    }

    /// Outcome distribution `tr[ρ A(ω)]`.
    pub fn probabilities(&self, rho: &ComplexMatrix) -> Vec<f64> {
        self.effects.iter().map(|e| (e.matrix() * rho).trace().re).collect()
    }
}

/// Completely positive trace-preserving map stored by its Choi operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    dim_in: usize,
    dim_out: usize,
    choi: HermitianOperator,
}

impl Channel {
    pub fn from_choi(dim_in: usize, dim_out: usize, choi: HermitianOperator) -> Result<Self, ModelError> {
        Self::with_tolerance(dim_in, dim_out, choi, tol::CONSTRUCTION)
    }

    pub fn with_tolerance(
        dim_in: usize,
        dim_out: usize,
        choi: HermitianOperator,
        tol: f64,
    ) -> Result<Self, ModelError> {
        if dim_in == 0 || dim_out == 0 {
            return Err(ModelError::Dimension("channel dimensions must be positive".into()));
        }
        if choi.dim() != dim_in * dim_out {
            return Err(ModelError::Dimension(format!(
                "Choi side {} does not match {dim_out}x{dim_in}",
                choi.dim()
            )));
        }
        check_psd(|| "Choi operator".into(), &choi, tol)?;
        let marginal = partial_trace(choi.matrix(), (dim_out, dim_in), Factor::First)?;
        let residual = marginal.max_abs_diff(&ComplexMatrix::identity(dim_in));
        if residual > tol {
            return Err(ModelError::NotNormalized { what: "trace preservation".into(), residual });
        }
        Ok(Channel { dim_in, dim_out, choi })
    }

    /// `Λ(T) = Σ_k K_k T K_k†` with each `K_k` of shape `dim_out × dim_in`.
    pub fn from_kraus(kraus: &[ComplexMatrix]) -> Result<Self, ModelError> {
        let first = kraus.first().ok_or(ModelError::Empty("Kraus list"))?;
        let (dim_out, dim_in) = (first.rows(), first.cols());
        Self::from_choi(dim_in, dim_out, choi_from_kraus(kraus)?)
    }

    /// Choi operator of an arbitrary linear map given by its action.
    pub fn choi_of_map(
        dim_in: usize,
        dim_out: usize,
        map: impl Fn(&ComplexMatrix) -> ComplexMatrix,
    ) -> HermitianOperator {
        let mut choi = ComplexMatrix::zeros(dim_out * dim_in, dim_out * dim_in);
        for a in 0..dim_in {
            for b in 0..dim_in {
                let image = map(&ComplexMatrix::unit(dim_in, a, b));
                for i in 0..dim_out {
                    for j in 0..dim_out {
                        choi[(i * dim_in + a, j * dim_in + b)] = image[(i, j)];
                    }
                }
            }
        }
        HermitianOperator::new(choi).expect("square")
    }

    pub fn identity(d: usize) -> Self {
        Self::from_kraus(&[ComplexMatrix::identity(d)]).expect("identity is a channel")
    }

    /// Completely depolarizing channel `T ↦ tr(T) η`.
    pub fn depolarizing(eta: &HermitianOperator, dim_in: usize) -> Result<Self, ModelError> {
        check_state(eta)?;
        let choi = tensor(eta.matrix(), &ComplexMatrix::identity(dim_in));
        Self::from_choi(dim_in, eta.dim(), HermitianOperator::new(choi)?)
    }

    /// Lüders channel `T ↦ Σ √A(ω) T √A(ω)`.
    pub fn luders(a: &Observable) -> Result<Self, ModelError> {
        Instrument::luders(a)?.associated_channel()
    }

    /// Measure-and-prepare channel `ρ ↦ Σ_ω tr[ρ A(ω)] |δ_ω⟩⟨δ_ω|`.
    pub fn gamma(a: &Observable) -> Result<Self, ModelError> {
        let n = a.num_outcomes();
        let mut choi = ComplexMatrix::zeros(n * a.dim(), n * a.dim());
        for (w, e) in a.effects().iter().enumerate() {
            choi = &choi + &tensor(&ComplexMatrix::unit(n, w, w), &e.matrix().transpose());
        }
        Self::from_choi(a.dim(), n, HermitianOperator::new(choi)?)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn choi(&self) -> &HermitianOperator {
        &self.choi
    }

    /// `Λ(T)` for a `dim_in`-square `T`.
    pub fn apply(&self, t: &ComplexMatrix) -> Result<ComplexMatrix, ModelError> {
        if t.rows() != self.dim_in || t.cols() != self.dim_in {
            return Err(ModelError::Dimension(format!(
                "channel input is {0}x{0}, got {1}x{2}",
                self.dim_in,
                t.rows(),
                t.cols()
            )));
        }
        Ok(apply_choi(self.choi.matrix(), self.dim_in, self.dim_out, t))
    }

    /// Kraus operators from the Choi eigendecomposition, dropping eigenvalues
    /// below the relative rank cutoff.
    pub fn kraus(&self) -> Result<Vec<ComplexMatrix>, ModelError> {
        let e = self.choi.eigh()?;
        let cutoff = tol::KRAUS_RANK * e.max().max(0.0);
        let mut out = Vec::new();
        for (k, &lambda) in e.values.iter().enumerate() {
            if lambda <= cutoff || lambda <= 0.0 {
                continue;
            }
            let s = lambda.sqrt();
            out.push(ComplexMatrix::from_fn(self.dim_out, self.dim_in, |i, a| {
                e.vectors[(i * self.dim_in + a, k)] * s
            }));
        }
        Ok(out)
    }
}

/// `Λ(T)[i,j] = Σ_ab J[(i,a),(j,b)] T[a,b]`
pub(crate) fn apply_choi(choi: &ComplexMatrix, dim_in: usize, dim_out: usize, t: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim_out, dim_out, |i, j| {
        let mut acc = ZERO;
        for a in 0..dim_in {
            for b in 0..dim_in {
                let tab = t[(a, b)];
                if tab != ZERO {
                    acc += choi[(i * dim_in + a, j * dim_in + b)] * tab;
                }
            }
        }
        acc
    })
}

/// Choi operator of `θ∘γ`: `J[(p,a),(q,b)] = Σ_kl Θ[(p,k),(q,l)] Γ[(k,a),(l,b)]`.
pub(crate) fn compose_choi(
    theta: &ComplexMatrix,
    theta_out: usize,
    gamma: &ComplexMatrix,
    gamma_in: usize,
    mid: usize,
) -> ComplexMatrix {
    let n = theta_out * gamma_in;
    let mut out = ComplexMatrix::zeros(n, n);
    for p in 0..theta_out {
        for q in 0..theta_out {
            for k in 0..mid {
                for l in 0..mid {
                    let t = theta[(p * mid + k, q * mid + l)];
                    if t == ZERO {
                        continue;
                    }
                    for a in 0..gamma_in {
                        for b in 0..gamma_in {
                            out[(p * gamma_in + a, q * gamma_in + b)] += t * gamma[(k * gamma_in + a, l * gamma_in + b)];
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn choi_from_kraus(kraus: &[ComplexMatrix]) -> Result<HermitianOperator, ModelError> {
    let first = kraus.first().ok_or(ModelError::Empty("Kraus list"))?;
    let (dim_out, dim_in) = (first.rows(), first.cols());
    let n = dim_out * dim_in;
    let mut choi = ComplexMatrix::zeros(n, n);
    for k in kraus {
        if (k.rows(), k.cols()) != (dim_out, dim_in) {
            return Err(ModelError::Dimension("Kraus operators of unequal shape".into()));
        }
        let w: Vec<C64> = (0..n).map(|idx| k[(idx / dim_in, idx % dim_in)]).collect();
        choi = &choi + &ComplexMatrix::outer(&w, &w);
    }
    Ok(HermitianOperator::new(choi)?)
}

fn check_state(eta: &HermitianOperator) -> Result<(), ModelError> {
    check_psd(|| "state".into(), eta, tol::CONSTRUCTION)?;
    let residual = (eta.trace() - 1.0).abs();
    if residual > tol::CONSTRUCTION {
        return Err(ModelError::NotNormalized { what: "state trace".into(), residual });
    }
    Ok(())
}

/// `θ∘γ`.
pub fn compose_channels(theta: &Channel, gamma: &Channel) -> Result<Channel, ModelError> {
    if theta.dim_in != gamma.dim_out {
        return Err(ModelError::Dimension(format!(
            "cannot compose a channel on dimension {} after one with output {}",
            theta.dim_in, gamma.dim_out
        )));
    }
    let choi = compose_choi(theta.choi.matrix(), theta.dim_out, gamma.choi.matrix(), gamma.dim_in, gamma.dim_out);
    Channel::from_choi(gamma.dim_in, theta.dim_out, HermitianOperator::new(choi)?)
}

/// Outcome-indexed family of CP maps whose sum is trace preserving.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    dim_in: usize,
    dim_out: usize,
    outcomes: Vec<String>,
    blocks: Vec<HermitianOperator>,
}

impl Instrument {
    pub fn new(
        dim_in: usize,
        dim_out: usize,
        outcomes: Vec<String>,
        blocks: Vec<HermitianOperator>,
    ) -> Result<Self, ModelError> {
        Self::with_tolerance(dim_in, dim_out, outcomes, blocks, tol::CONSTRUCTION)
    }

    pub fn with_tolerance(
        dim_in: usize,
        dim_out: usize,
        outcomes: Vec<String>,
        blocks: Vec<HermitianOperator>,
        tol: f64,
    ) -> Result<Self, ModelError> {
        if blocks.is_empty() {
            return Err(ModelError::Empty("instrument block list"));
        }
        if outcomes.len() != blocks.len() {
            return Err(ModelError::Dimension("outcome labels and blocks differ in number".into()));
        }
        let n = dim_in * dim_out;
        let mut total = ComplexMatrix::zeros(n, n);
        for (label, b) in outcomes.iter().zip(&blocks) {
            if b.dim() != n {
                return Err(ModelError::Dimension(format!("block '{label}' has side {}, expected {n}", b.dim())));
            }
            check_psd(|| format!("instrument block '{label}'"), b, tol)?;
            total = &total + b.matrix();
        }
        Channel::with_tolerance(dim_in, dim_out, HermitianOperator::new(total)?, tol)?;
        Ok(Instrument { dim_in, dim_out, outcomes, blocks })
    }

    /// `I_ω(T) = tr[T A(ω)] η`.
    pub fn measure_and_prepare(a: &Observable, eta: &HermitianOperator) -> Result<Self, ModelError> {
        check_state(eta)?;
        let blocks = a
            .effects()
            .iter()
            .map(|e| HermitianOperator::new(tensor(eta.matrix(), &e.matrix().transpose())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(a.dim(), eta.dim(), a.outcomes().to_vec(), blocks)
    }

    /// `I_ω(T) = √A(ω) T √A(ω)`.
    pub fn luders(a: &Observable) -> Result<Self, ModelError> {
        let blocks = a
            .effects()
            .iter()
            .map(|e| choi_from_kraus(&[e.sqrt_psd()?.into_matrix()]))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(a.dim(), a.dim(), a.outcomes().to_vec(), blocks)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn blocks(&self) -> &[HermitianOperator] {
        &self.blocks
    }

    /// `I^O` from `tr[T I^O(ω)] = tr[I_ω(T)]`, i.e. `I^O(ω) = (tr_out J_ω)^T`.
    pub fn associated_observable(&self) -> Result<Observable, ModelError> {
        self.associated_observable_tol(tol::CONSTRUCTION)
    }

    pub fn associated_observable_tol(&self, tol: f64) -> Result<Observable, ModelError> {
        let effects = self
            .blocks
            .iter()
            .map(|b| {
                let m = partial_trace(b.matrix(), (self.dim_out, self.dim_in), Factor::First)?;
                Ok(HermitianOperator::new(m.transpose())?)
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Observable::with_tolerance(self.outcomes.clone(), effects, tol)
    }

    /// `I^C = Σ_ω I_ω`.
    pub fn associated_channel(&self) -> Result<Channel, ModelError> {
        self.associated_channel_tol(tol::CONSTRUCTION)
    }

    pub fn associated_channel_tol(&self, tol: f64) -> Result<Channel, ModelError> {
        let n = self.dim_in * self.dim_out;
        let total = self.blocks.iter().fold(ComplexMatrix::zeros(n, n), |acc, b| &acc + b.matrix());
        Channel::with_tolerance(self.dim_in, self.dim_out, HermitianOperator::new(total)?, tol)
    }

    /// `(μ∘I)_ω' = Σ_ω μ(ω',ω) I_ω`.
    pub fn post_process(&self, mu: &StochasticMatrix) -> Result<Self, ModelError> {
        if mu.n_from() != self.blocks.len() {
            return Err(ModelError::Dimension("stochastic matrix does not match the outcome count".into()));
        }
        let n = self.dim_in * self.dim_out;
        let blocks = (0..mu.n_to())
            .map(|to| {
                let m = (0..mu.n_from()).fold(ComplexMatrix::zeros(n, n), |mut acc, from| {
                    acc.axpy(mu.get(to, from), self.blocks[from].matrix());
                    acc
                });
                HermitianOperator::new(m)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(self.dim_in, self.dim_out, default_labels(mu.n_to()), blocks)
    }

    /// `(Θ∘I)_ω = Θ∘I_ω`.
    pub fn then(&self, theta: &Channel) -> Result<Self, ModelError> {
        if theta.dim_in != self.dim_out {
            return Err(ModelError::Dimension("channel input does not match instrument output".into()));
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                HermitianOperator::new(compose_choi(theta.choi.matrix(), theta.dim_out, b.matrix(), self.dim_in, self.dim_out))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(self.dim_in, theta.dim_out, self.outcomes.clone(), blocks)
    }
}

/// Column-stochastic matrix `μ(ω', ω)`, rows indexed by the new outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticMatrix {
    n_to: usize,
    n_from: usize,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    /// `entries` is row-major with `n_to` rows and `n_from` columns.
    pub fn new(n_to: usize, n_from: usize, entries: Vec<f64>) -> Result<Self, ModelError> {
        Self::with_tolerance(n_to, n_from, entries, tol::CONSTRUCTION)
    }

    pub fn with_tolerance(n_to: usize, n_from: usize, entries: Vec<f64>, tol: f64) -> Result<Self, ModelError> {
        if entries.len() != n_to * n_from || n_to == 0 || n_from == 0 {
            return Err(ModelError::Dimension(format!("{} entries for a {n_to}x{n_from} stochastic matrix", entries.len())));
        }
        if let Some(&bad) = entries.iter().find(|&&x| x < -tol || !x.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("negative stochastic entry {bad:e}")));
        }
        for from in 0..n_from {
            let sum: f64 = (0..n_to).map(|to| entries[to * n_from + from]).sum();
            if (sum - 1.0).abs() > tol {
                return Err(ModelError::NotNormalized { what: format!("column {from}"), residual: (sum - 1.0).abs() });
            }
        }
        Ok(StochasticMatrix { n_to, n_from, entries })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        StochasticMatrix { n_to: n, n_from: n, entries }
    }

    /// Coarse-graining: new outcome `k` collects the old outcomes in `groups[k]`.
    pub fn merging(groups: &[Vec<usize>], n_from: usize) -> Result<Self, ModelError> {
        let mut entries = vec![0.0; groups.len() * n_from];
        for (to, g) in groups.iter().enumerate() {
            for &from in g {
                if from >= n_from {
                    return Err(ModelError::Dimension(format!("outcome {from} out of range")));
                }
                entries[to * n_from + from] += 1.0;
            }
        }
        Self::new(groups.len(), n_from, entries)
    }

    pub fn n_to(&self) -> usize {
        self.n_to
    }

    pub fn n_from(&self) -> usize {
        self.n_from
    }

    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.entries[to * self.n_from + from]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// `(μ∘B)(ω') = Σ_ω μ(ω',ω) B(ω)`.
pub fn post_process_obs(mu: &StochasticMatrix, b: &Observable) -> Result<Observable, ModelError> {
    if mu.n_from != b.num_outcomes() {
        return Err(ModelError::Dimension(format!(
            "stochastic matrix acts on {} outcomes, observable has {}",
            mu.n_from,
            b.num_outcomes()
        )));
    }
    let d = b.dim();
    let effects = (0..mu.n_to)
        .map(|to| {
            let m = (0..mu.n_from).fold(ComplexMatrix::zeros(d, d), |mut acc, from| {
                acc.axpy(mu.get(to, from), b.effect(from).matrix());
                acc
            });
            HermitianOperator::new(m)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Observable::new(default_labels(mu.n_to), effects)
}

/// Unbiased two-outcome qubit observable `A_a(±) = ½(1 ± a·σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnbiasedQubitObservable {
    bloch: [f64; 3],
}

impl UnbiasedQubitObservable {
    pub fn new(bloch: [f64; 3]) -> Result<Self, ModelError> {
        let norm = bloch.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > 1.0 + tol::CONSTRUCTION {
            return Err(ModelError::InvalidParameter(format!("Bloch vector norm {norm} exceeds 1")));
        }
        Ok(UnbiasedQubitObservable { bloch })
    }

    pub fn bloch(&self) -> [f64; 3] {
        self.bloch
    }

    /// Sharpness parameter `‖a‖`.
    pub fn sharpness(&self) -> f64 {
        self.bloch.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn to_observable(&self) -> Observable {
        let s = pauli();
        let mut a_sigma = ComplexMatrix::zeros(2, 2);
        for (x, p) in self.bloch.iter().zip(&s) {
            a_sigma.axpy(*x, p.matrix());
        }
        let id = ComplexMatrix::identity(2);
        let plus = HermitianOperator::new((&id + &a_sigma).scale_real(0.5)).expect("square");
        let minus = HermitianOperator::new((&id - &a_sigma).scale_real(0.5)).expect("square");
        // effects stay PSD up to the 1e-9 norm slack accepted above
        Observable::new(vec!["+".into(), "-".into()], vec![plus, minus]).expect("valid unbiased qubit observable")
    }
}

/// Named families of observables and channels.
#[derive(Debug, Clone)]
pub enum Family {
    Trivial { dim: usize, p: Vec<f64> },
    Depolarizing { eta: HermitianOperator, dim_in: usize },
    Luders(Observable),
    UnbiasedQubit([f64; 3]),
    Gamma(Observable),
}

/// Either kind of object the crate reasons about.
#[derive(Debug, Clone, PartialEq)]
pub enum QObject {
    Observable(Observable),
    Channel(Channel),
}

pub fn make_family(kind: Family) -> Result<QObject, ModelError> {
    Ok(match kind {
        Family::Trivial { dim, p } => QObject::Observable(Observable::trivial(dim, &p)?),
        Family::Depolarizing { eta, dim_in } => QObject::Channel(Channel::depolarizing(&eta, dim_in)?),
        Family::Luders(a) => {
            if !a.is_projective(tol::PROJECTION) {
                return Err(ModelError::InvalidParameter("Lüders family expects a projection-valued observable".into()));
            }
            QObject::Channel(Channel::luders(&a)?)
        }
        Family::UnbiasedQubit(a) => QObject::Observable(UnbiasedQubitObservable::new(a)?.to_observable()),
        Family::Gamma(a) => QObject::Channel(Channel::gamma(&a)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use rand::SeedableRng;

    fn rng(seed: u64) -> rand::rngs::StdRng {
        rand::rngs::StdRng::seed_from_u64(seed)
    }

    fn sharp_sigma(i: usize) -> Observable {
        let mut a = [0.0; 3];
        a[i] = 1.0;
        UnbiasedQubitObservable::new(a).unwrap().to_observable()
    }

    fn e3() -> Observable {
        Observable::delta_basis(3)
    }

    #[test]
    fn observable_validation() {
        let bad = Observable::from_effects(vec![HermitianOperator::identity(2).scale(0.5)]);
        assert!(matches!(bad, Err(ModelError::NotNormalized { .. })));
        let [_, _, s3] = pauli();
        let neg = Observable::from_effects(vec![
            HermitianOperator::identity(2).add(&s3.scale(1.5)).scale(0.5),
            HermitianOperator::identity(2).sub(&s3.scale(1.5)).scale(0.5),
        ]);
        assert!(matches!(neg, Err(ModelError::NotPositive { .. })));
        assert!(Observable::from_effects(vec![]).is_err());
    }

    #[test]
    fn tiny_negative_effects_are_kept_unclipped() {
        let [_, _, s3] = pauli();
        let eps = 5e-10;
        let plus = HermitianOperator::identity(2).add(&s3.scale(1.0 + 2.0 * eps)).scale(0.5);
        let minus = HermitianOperator::identity(2).sub(&s3.scale(1.0 + 2.0 * eps)).scale(0.5);
        let a = Observable::from_effects(vec![plus.clone(), minus]).unwrap();
        assert_eq!(a.effect(0), &plus);
    }

    #[test]
    fn apply_examples() {
        let mut r = rng(1);
        let rho = sample::random_state(3, &mut r);
        let id = Channel::identity(3);
        assert!(id.apply(rho.matrix()).unwrap().max_abs_diff(rho.matrix()) < 1e-12);

        let eta = sample::random_state(2, &mut r);
        let dep = Channel::depolarizing(&eta, 3).unwrap();
        let t = sample::random_hermitian(3, &mut r);
        let out = dep.apply(t.matrix()).unwrap();
        assert!(out.max_abs_diff(&eta.matrix().scale_real(t.trace())) < 1e-12);

        let [_, s2, _] = pauli();
        let luders = Channel::luders(&sharp_sigma(0)).unwrap();
        assert!(luders.apply(s2.matrix()).unwrap().max_abs() < 1e-12);

        assert!(id.apply(&ComplexMatrix::identity(2)).is_err());
    }

    #[test]
    fn apply_preserves_trace() {
        let mut r = rng(2);
        for _ in 0..10 {
            let c = sample::random_channel(2, 3, 3, &mut r);
            let t = sample::random_hermitian(2, &mut r);
            let out = c.apply(t.matrix()).unwrap();
            assert!((out.trace().re - t.trace()).abs() < 1e-9);
        }
    }

    #[test]
    fn measure_and_prepare_blocks_carry_transposed_effects() {
        let mut r = rng(3);
        let a = sample::random_observable(3, 3, &mut r);
        let eta = sample::random_state(2, &mut r);
        let inst = Instrument::measure_and_prepare(&a, &eta).unwrap();
        for (block, e) in inst.blocks().iter().zip(a.effects()) {
            let expected = tensor(eta.matrix(), &e.matrix().transpose());
            assert!(block.matrix().max_abs_diff(&expected) < 1e-14);
            let marginal = partial_trace(block.matrix(), (2, 3), Factor::First).unwrap();
            assert!(marginal.max_abs_diff(&e.matrix().transpose()) < 1e-12);
        }
        // the action agrees with T ↦ tr[T A(ω)] η
        let t = sample::random_hermitian(3, &mut r);
        for (block, e) in inst.blocks().iter().zip(a.effects()) {
            let got = apply_choi(block.matrix(), 3, 2, t.matrix());
            let p = (t.matrix() * e.matrix()).trace();
            assert!(got.max_abs_diff(&eta.matrix().scale(p)) < 1e-12);
        }
    }

    #[test]
    fn associated_observable_examples() {
        let mut r = rng(4);
        let a = sample::random_observable(2, 3, &mut r);
        let eta = sample::random_state(3, &mut r);
        let got = Instrument::measure_and_prepare(&a, &eta).unwrap().associated_observable().unwrap();
        for (x, y) in got.effects().iter().zip(a.effects()) {
            assert!(x.matrix().max_abs_diff(y.matrix()) < 1e-12);
        }

        let c = sample::random_channel(2, 2, 2, &mut r);
        let single = Instrument::new(2, 2, vec!["only".into()], vec![c.choi().clone()]).unwrap();
        let triv = single.associated_observable().unwrap();
        assert_eq!(triv.num_outcomes(), 1);
        assert!(triv.effect(0).matrix().max_abs_diff(&ComplexMatrix::identity(2)) < 1e-12);

        let e = e3();
        let lud = Instrument::luders(&e).unwrap().associated_observable().unwrap();
        for (x, y) in lud.effects().iter().zip(e.effects()) {
            assert!(x.matrix().max_abs_diff(y.matrix()) < 1e-12);
        }
    }

    #[test]
    fn associated_channel_examples() {
        // Lüders instrument of A from the three-level example gives E1·T·E1 + P·T·P
        let a = post_process_obs(&StochasticMatrix::merging(&[vec![0], vec![1, 2]], 3).unwrap(), &e3()).unwrap();
        let ch = Instrument::luders(&a).unwrap().associated_channel().unwrap();
        let p1 = ComplexMatrix::unit(3, 0, 0);
        let p23 = &ComplexMatrix::unit(3, 1, 1) + &ComplexMatrix::unit(3, 2, 2);
        let expected = Channel::choi_of_map(3, 3, |t| &(&(&p1 * t) * &p1) + &(&(&p23 * t) * &p23));
        assert!(ch.choi().matrix().max_abs_diff(expected.matrix()) < 1e-12);

        let mut r = rng(5);
        let c = sample::random_channel(3, 2, 2, &mut r);
        let single = Instrument::new(3, 2, vec!["x".into()], vec![c.choi().clone()]).unwrap();
        assert!(single.associated_channel().unwrap().choi().matrix().max_abs_diff(c.choi().matrix()) < 1e-12);

        let a = sample::random_observable(3, 4, &mut r);
        let eta = sample::random_state(2, &mut r);
        let mp = Instrument::measure_and_prepare(&a, &eta).unwrap().associated_channel().unwrap();
        let dep = Channel::depolarizing(&eta, 3).unwrap();
        assert!(mp.choi().matrix().max_abs_diff(dep.choi().matrix()) < 1e-12);
    }

    #[test]
    fn post_process_examples() {
        let mut r = rng(6);
        let b = sample::random_observable(2, 3, &mut r);
        let same = post_process_obs(&StochasticMatrix::identity(3), &b).unwrap();
        for (x, y) in same.effects().iter().zip(b.effects()) {
            assert!(x.matrix().max_abs_diff(y.matrix()) < 1e-15);
        }

        let e = e3();
        let a = post_process_obs(&StochasticMatrix::merging(&[vec![0], vec![1, 2]], 3).unwrap(), &e).unwrap();
        let e23 = e.effect(1).add(e.effect(2));
        assert!(a.effect(1).matrix().max_abs_diff(e23.matrix()) < 1e-15);

        let marg = post_process_obs(&StochasticMatrix::new(1, 3, vec![1.0; 3]).unwrap(), &b).unwrap();
        assert!(marg.effect(0).matrix().max_abs_diff(&ComplexMatrix::identity(2)) < 1e-12);

        assert!(post_process_obs(&StochasticMatrix::identity(2), &b).is_err());
    }

    #[test]
    fn compose_examples() {
        let mut r = rng(7);
        let g = sample::random_channel(2, 3, 3, &mut r);
        let id_after = compose_channels(&Channel::identity(3), &g).unwrap();
        assert!(id_after.choi().matrix().max_abs_diff(g.choi().matrix()) < 1e-12);

        let eta = sample::random_state(2, &mut r);
        let dep = Channel::depolarizing(&eta, 3).unwrap();
        let composed = compose_channels(&dep, &g).unwrap();
        let expected = Channel::depolarizing(&eta, 2).unwrap();
        assert!(composed.choi().matrix().max_abs_diff(expected.choi().matrix()) < 1e-12);

        assert!(compose_channels(&g, &g).is_err());
    }

    #[test]
    fn families() {
        let coin = make_family(Family::Trivial { dim: 2, p: vec![0.5, 0.5] }).unwrap();
        let QObject::Observable(coin) = coin else { panic!() };
        assert!(coin.is_trivial(1e-12));

        let a = UnbiasedQubitObservable::new([1.0, 0.0, 0.0]).unwrap().to_observable();
        let [s1, _, _] = pauli();
        let expected = HermitianOperator::identity(2).add(&s1).scale(0.5);
        assert!(a.effect(0).matrix().max_abs_diff(expected.matrix()) < 1e-15);
        assert!(a.is_projective(1e-9));

        let QObject::Channel(g) = make_family(Family::Gamma(a.clone())).unwrap() else { panic!() };
        assert_eq!((g.dim_in(), g.dim_out()), (2, 2));
        let mut r = rng(8);
        let rho = sample::random_state(2, &mut r);
        let out = g.apply(rho.matrix()).unwrap();
        assert!(out[(0, 1)].norm() < 1e-14);
        let probs = a.probabilities(rho.matrix());
        assert!((out[(0, 0)].re - probs[0]).abs() < 1e-12);

        assert!(UnbiasedQubitObservable::new([0.8, 0.7, 0.0]).is_err());
        assert!(Observable::trivial(2, &[0.7, 0.7]).is_err());
        let noisy = UnbiasedQubitObservable::new([0.5, 0.0, 0.0]).unwrap().to_observable();
        assert!(make_family(Family::Luders(noisy)).is_err());
    }

    #[test]
    fn kraus_round_trip() {
        let mut r = rng(9);
        let c = sample::random_channel(3, 2, 4, &mut r);
        let k = c.kraus().unwrap();
        assert!(k.len() <= 6);
        let back = Channel::from_kraus(&k).unwrap();
        assert!(back.choi().matrix().max_abs_diff(c.choi().matrix()) < 1e-10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn measure_and_prepare_round_trip(seed in any::<u64>(), d in 2usize..4, n in 1usize..5) {
                let mut r = rng(seed);
                let a = sample::random_observable(d, n, &mut r);
                let eta = sample::random_state(2, &mut r);
                let back = Instrument::measure_and_prepare(&a, &eta).unwrap().associated_observable().unwrap();
                for (x, y) in back.effects().iter().zip(a.effects()) {
                    prop_assert!(x.matrix().max_abs_diff(y.matrix()) <= 1e-9);
                }
            }

            #[test]
            fn gamma_is_diagonal_channel(seed in any::<u64>(), d in 2usize..4, n in 1usize..5) {
                let mut r = rng(seed);
                let a = sample::random_observable(d, n, &mut r);
                let g = Channel::gamma(&a).unwrap();
                let rho = sample::random_state(d, &mut r);
                let out = g.apply(rho.matrix()).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            prop_assert!(out[(i, j)].norm() <= 1e-12);
                        }
                    }
                }
            }

            #[test]
            fn post_processing_keeps_normalization(seed in any::<u64>(), n_to in 1usize..5) {
                let mut r = rng(seed);
                let b = sample::random_observable(3, 3, &mut r);
                let mu = sample::random_stochastic(n_to, 3, &mut r);
                let a = post_process_obs(&mu, &b).unwrap();
                let total = a.effects().iter().fold(ComplexMatrix::zeros(3, 3), |acc, e| &acc + e.matrix());
                prop_assert!(total.max_abs_diff(&ComplexMatrix::identity(3)) <= 1e-9);
            }

            #[test]
            fn composition_matches_sequential_action(seed in any::<u64>()) {
                let mut r = rng(seed);
                let g = sample::random_channel(2, 3, 3, &mut r);
                let t = sample::random_channel(3, 2, 2, &mut r);
                let tg = compose_channels(&t, &g).unwrap();
                for _ in 0..20 {
                    let rho = sample::random_state(2, &mut r);
                    let direct = tg.apply(rho.matrix()).unwrap();
                    let seq = t.apply(&g.apply(rho.matrix()).unwrap()).unwrap();
                    prop_assert!(direct.max_abs_diff(&seq) <= 1e-9);
                }
            }
        }
    }
}
