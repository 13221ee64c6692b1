//! The Galois connection induced by observable–channel compatibility.
//!
//! On finite universes the maps `σ` (observables → compatible channels) and
//! `τ` (channels → compatible observables) are computed exactly from a
//! precomputed verdict matrix. For infinite sets the module offers the
//! greatest-element route to the leak closure, sandwich bounds between
//! simulability and joint measurability, and optimization-based
//! characterization of `σ(X)` through linear functionals of the Choi operator.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::conic::{self, ConicProblem, Diagnostics, Entry, SolverOptions};
use crate::linops::{gell_mann, tensor, ComplexMatrix, HermitianOperator, C64};
use crate::qmodel::{Channel, Observable, UnbiasedQubitObservable};
use crate::relations::{
    busch_jm, busch_margin, hermitian_equality, trace_out_terms, SupportedBlock, Answer, Decider, RelationError, RelationVerdict,
};

pub type IndexSet = BTreeSet<usize>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaloisError {
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Conic(#[from] conic::ConicError),
    #[error("relation has {got} entries, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error("probe {probe} is not compatible with observable {observable}")]
    InvalidProbe { probe: usize, observable: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{0} must not be empty")]
    Empty(&'static str),
}

/// Runs `f` on a pool capped by `POVM_GALOIS_THREADS` when that is set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let cap = std::env::var("POVM_GALOIS_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    match cap.map(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build()) {
        Some(Ok(pool)) => pool.install(f),
        Some(Err(e)) => {
            log::warn!("could not build a {cap:?}-thread pool ({e}); using the global pool");
            f()
        }
        None => f(),
    }
}

/// Finite set of observables and channels with their compatibility verdicts.
///
/// Observables (rows) or channels (columns) touched by an `Unknown` verdict are
/// left out of every set computation.
#[derive(Debug, Clone, PartialEq)]
pub struct Universe {
    observables: Vec<Observable>,
    channels: Vec<Channel>,
    relation: Vec<Answer>,
    active_obs: IndexSet,
    active_chan: IndexSet,
}

impl Universe {
    /// Decides every pair in parallel.
    pub fn build(observables: Vec<Observable>, channels: Vec<Channel>, decider: &Decider) -> Result<Self, GaloisError> {
        let nc = channels.len();
        let relation = with_pool(|| {
            (0..observables.len() * nc)
                .into_par_iter()
                .map(|k| decider.compatible(&observables[k / nc], &channels[k % nc]).map(|v| v.answer))
                .collect::<Result<Vec<_>, _>>()
        })?;
        Self::from_relation(observables, channels, relation)
    }

    /// Wraps a precomputed row-major verdict matrix.
    pub fn from_relation(observables: Vec<Observable>, channels: Vec<Channel>, relation: Vec<Answer>) -> Result<Self, GaloisError> {
        let (no, nc) = (observables.len(), channels.len());
        if relation.len() != no * nc {
            return Err(GaloisError::Shape { expected: no * nc, got: relation.len() });
        }
        let mut active_obs: IndexSet = (0..no).collect();
        let mut active_chan: IndexSet = (0..nc).collect();
        for (k, a) in relation.iter().enumerate() {
            if *a == Answer::Unknown {
                active_obs.remove(&(k / nc));
                active_chan.remove(&(k % nc));
            }
        }
        if active_obs.len() < no || active_chan.len() < nc {
            log::warn!(
                "unknown compatibility verdicts: excluding observables {:?} and channels {:?}",
                (0..no).filter(|i| !active_obs.contains(i)).collect::<Vec<_>>(),
                (0..nc).filter(|i| !active_chan.contains(i)).collect::<Vec<_>>()
            );
        }
        Ok(Universe { observables, channels, relation, active_obs, active_chan })
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Row-major verdicts, observables by channels.
    pub fn relation(&self) -> &[Answer] {
        &self.relation
    }

    pub fn verdict(&self, obs: usize, chan: usize) -> Answer {
        self.relation[obs * self.channels.len() + chan]
    }

    pub fn active_observables(&self) -> &IndexSet {
        &self.active_obs
    }

    pub fn active_channels(&self) -> &IndexSet {
        &self.active_chan
    }

    fn check(&self, x: &IndexSet, n: usize, what: &str) {
        if let Some(&i) = x.iter().find(|&&i| i >= n) {
            panic!("{what} index {i} out of range for a universe of {n}");
        }
    }

    /// Channels compatible with every observable in `x`.
    pub fn sigma(&self, x: &IndexSet) -> IndexSet {
        self.check(x, self.observables.len(), "observable");
        self.active_chan
            .iter()
            .copied()
            .filter(|&l| x.iter().filter(|i| self.active_obs.contains(i)).all(|&i| self.verdict(i, l) == Answer::Yes))
            .collect()
    }

    /// Observables compatible with every channel in `y`.
    pub fn tau(&self, y: &IndexSet) -> IndexSet {
        self.check(y, self.channels.len(), "channel");
        self.active_obs
            .iter()
            .copied()
            .filter(|&i| y.iter().filter(|l| self.active_chan.contains(l)).all(|&l| self.verdict(i, l) == Answer::Yes))
            .collect()
    }

    /// `τσ(x)`, the leak closure restricted to the universe.
    pub fn observable_closure(&self, x: &IndexSet) -> IndexSet {
        self.tau(&self.sigma(x))
    }

    /// `στ(y)`.
    pub fn channel_closure(&self, y: &IndexSet) -> IndexSet {
        self.sigma(&self.tau(y))
    }
}

pub fn sigma_fin(u: &Universe, x: &IndexSet) -> IndexSet {
    u.sigma(x)
}

pub fn tau_fin(u: &Universe, y: &IndexSet) -> IndexSet {
    u.tau(y)
}

/// Which side of the universe an index set refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Observables,
    Channels,
}

pub fn closure_fin(u: &Universe, side: Side, set: &IndexSet) -> IndexSet {
    match side {
        Side::Observables => u.observable_closure(set),
        Side::Channels => u.channel_closure(set),
    }
}

/// Finite set of observables with pairwise joint measurability verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct JointUniverse {
    observables: Vec<Observable>,
    relation: Vec<Answer>,
    active: IndexSet,
}

impl JointUniverse {
    pub fn build(observables: Vec<Observable>, decider: &Decider) -> Result<Self, GaloisError> {
        let n = observables.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let answers = with_pool(|| {
            pairs
                .par_iter()
                .map(|&(i, j)| decider.jointly_measurable(&observables[i], &observables[j]).map(|v| v.answer))
                .collect::<Result<Vec<_>, _>>()
        })?;
        // an observable is always jointly measurable with itself
        let mut relation = vec![Answer::Yes; n * n];
        for (&(i, j), a) in pairs.iter().zip(answers) {
            relation[i * n + j] = a;
            relation[j * n + i] = a;
        }
        Self::from_relation(observables, relation)
    }

    pub fn from_relation(observables: Vec<Observable>, relation: Vec<Answer>) -> Result<Self, GaloisError> {
        let n = observables.len();
        if relation.len() != n * n {
            return Err(GaloisError::Shape { expected: n * n, got: relation.len() });
        }
        let active: IndexSet = (0..n).filter(|&i| (0..n).all(|j| relation[i * n + j] != Answer::Unknown)).collect();
        if active.len() < n {
            log::warn!(
                "unknown joint measurability verdicts: excluding observables {:?}",
                (0..n).filter(|i| !active.contains(i)).collect::<Vec<_>>()
            );
        }
        Ok(JointUniverse { observables, relation, active })
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    pub fn relation(&self) -> &[Answer] {
        &self.relation
    }

    pub fn active(&self) -> &IndexSet {
        &self.active
    }

    /// Observables jointly measurable with every element of `x`.
    pub fn joint(&self, x: &IndexSet) -> IndexSet {
        let n = self.observables.len();
        if let Some(&i) = x.iter().find(|&&i| i >= n) {
            panic!("observable index {i} out of range for a universe of {n}");
        }
        self.active
            .iter()
            .copied()
            .filter(|&b| x.iter().filter(|a| self.active.contains(a)).all(|&a| self.relation[a * n + b] == Answer::Yes))
            .collect()
    }

    /// `J(J(x))`.
    pub fn joint_closure(&self, x: &IndexSet) -> IndexSet {
        self.joint(&self.joint(x))
    }
}

pub fn joint_closure_fin(u: &JointUniverse, x: &IndexSet) -> IndexSet {
    u.joint_closure(x)
}

/// An element `g` of a set with `a ≼ g` for every member `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreatestElement {
    pub index: usize,
    pub representative: Observable,
}

impl GreatestElement {
    /// Membership in the leak closure, which equals `simu_O(g)` here.
    pub fn contains(&self, b: &Observable, decider: &Decider) -> Result<RelationVerdict, GaloisError> {
        Ok(decider.obs_simulable(b, std::slice::from_ref(&self.representative))?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LeakTheorem {
    Applies(GreatestElement),
    NotApplicable(String),
}

/// Looks for a greatest element of `x` under post-processing.
pub fn leak_by_theorem(x: &[Observable], decider: &Decider) -> Result<LeakTheorem, GaloisError> {
    if x.is_empty() {
        return Ok(LeakTheorem::NotApplicable("empty set".into()));
    }
    let mut unknown = false;
    'candidates: for (g, cand) in x.iter().enumerate() {
        for (i, a) in x.iter().enumerate() {
            if i == g {
                continue;
            }
            match decider.obs_postprocess(a, cand)?.answer {
                Answer::Yes => {}
                Answer::No => continue 'candidates,
                Answer::Unknown => {
                    unknown = true;
                    continue 'candidates;
                }
            }
        }
        return Ok(LeakTheorem::Applies(GreatestElement { index: g, representative: cand.clone() }));
    }
    if unknown {
        log::warn!("post-processing verdicts were inconclusive; greatest-element search abandoned");
        return Ok(LeakTheorem::NotApplicable("inconclusive post-processing verdicts".into()));
    }
    Ok(LeakTheorem::NotApplicable("no element dominates the others".into()))
}

/// How a [`LeakBounds`] answer was reached.
#[derive(Debug, Clone, PartialEq)]
pub enum LeakMethod {
    /// `b ∈ simu_O(x)`, which lies inside the leak closure.
    Simulation,
    /// A supplied probe channel compatible with all of `x` but not with `b`.
    Probe(usize),
    /// A candidate `c` jointly measurable with all of `x` whose `Γ_c` rejects `b`.
    JointRoute(usize),
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakBounds {
    pub query: Observable,
    pub answer: Answer,
    pub method: LeakMethod,
    /// Verdict backing the answer: a simulation witness or an incompatibility certificate.
    pub evidence: Option<RelationVerdict>,
    pub notes: Vec<String>,
}

/// Sandwich bounds for `b ∈ τσ(x)`.
///
/// `probes` must be compatible with every element of `x`; `candidates` are
/// observables whose measure-and-prepare channels are tried as further probes
/// once they are shown jointly measurable with all of `x`.
pub fn leak_bounds(
    b: &Observable,
    x: &[Observable],
    probes: &[Channel],
    candidates: &[Observable],
    decider: &Decider,
) -> Result<LeakBounds, GaloisError> {
    if x.is_empty() {
        return Err(GaloisError::Empty("observable set"));
    }
    let mut notes = Vec::new();
    let mut valid = Vec::new();
    for (k, probe) in probes.iter().enumerate() {
        let mut ok = true;
        for (i, a) in x.iter().enumerate() {
            match decider.compatible(a, probe)?.answer {
                Answer::Yes => {}
                Answer::No => return Err(GaloisError::InvalidProbe { probe: k, observable: i }),
                Answer::Unknown => {
                    log::warn!("probe {k} skipped: compatibility with observable {i} undecided");
                    notes.push(format!("probe {k} skipped: compatibility with observable {i} undecided"));
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            valid.push(k);
        }
    }

    let lower = decider.obs_simulable(b, x)?;
    let mut upper: Option<(LeakMethod, RelationVerdict)> = None;
    for &k in &valid {
        let v = decider.compatible(b, &probes[k])?;
        if v.answer == Answer::No {
            upper = Some((LeakMethod::Probe(k), v));
            break;
        }
    }
    if upper.is_none() {
        'cands: for (k, c) in candidates.iter().enumerate() {
            for (i, a) in x.iter().enumerate() {
                let jm = decider.jointly_measurable(c, a)?.answer;
                if jm != Answer::Yes {
                    notes.push(format!("candidate {k} not certified jointly measurable with observable {i} ({jm:?})"));
                    continue 'cands;
                }
            }
            let v = decider.compatible(b, &Channel::gamma(c).map_err(RelationError::from)?)?;
            if v.answer == Answer::No {
                upper = Some((LeakMethod::JointRoute(k), v));
                break;
            }
        }
    }

    let query = b.clone();
    Ok(match (lower.answer, upper) {
        (Answer::Yes, Some((method, _))) => {
            notes.push(format!("simulation witness contradicts {method:?}; reporting unknown"));
            LeakBounds { query, answer: Answer::Unknown, method: LeakMethod::Inconclusive, evidence: None, notes }
        }
        (Answer::Yes, None) => {
            LeakBounds { query, answer: Answer::Yes, method: LeakMethod::Simulation, evidence: Some(lower), notes }
        }
        (_, Some((method, v))) => LeakBounds { query, answer: Answer::No, method, evidence: Some(v), notes },
        (_, None) => {
            notes.push("neither bound is conclusive".into());
            LeakBounds { query, answer: Answer::Unknown, method: LeakMethod::Inconclusive, evidence: None, notes }
        }
    })
}

/// Linear functional `J ↦ tr(F J)` on Choi operators, with a readable label.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub label: String,
    pub operator: HermitianOperator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionOptimum {
    pub label: String,
    /// `None` when the solver could not certify an optimum.
    pub value: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// `±G_i ⊗ H_j` for output basis `{1, G_i}` and traceless input basis `{H_j}`.
///
/// A channel is completely depolarizing exactly when all of these vanish.
pub fn depolarizing_deviation(dim_in: usize, dim_out: usize) -> Vec<Direction> {
    let mut outs = vec![HermitianOperator::identity(dim_out)];
    outs.extend(gell_mann(dim_out));
    let ins = gell_mann(dim_in);
    let mut out = Vec::new();
    for (i, g) in outs.iter().enumerate() {
        for (j, h) in ins.iter().enumerate() {
            let op = HermitianOperator::new(tensor(g.matrix(), h.matrix())).expect("tensor of Hermitian operators");
            out.push(Direction { label: format!("+G{i}xH{}", j + 1), operator: op.clone() });
            out.push(Direction { label: format!("-G{i}xH{}", j + 1), operator: op.scale(-1.0) });
        }
    }
    out
}

/// `±Re` and `±Im` of every output entry of `Λ(|a⟩⟨b|)` for the given input pairs.
pub fn matrix_unit_directions(dim_in: usize, dim_out: usize, inputs: &[(usize, usize)]) -> Vec<Direction> {
    let n = dim_in * dim_out;
    let mut out = Vec::new();
    for &(a, b) in inputs {
        assert!(a < dim_in && b < dim_in && a != b, "input pair ({a}, {b}) must be off-diagonal and in range");
        for p in 0..dim_out {
            for q in 0..dim_out {
                let (r, c) = (p * dim_in + a, q * dim_in + b);
                for (part, w) in [("Re", C64::new(0.5, 0.0)), ("Im", C64::new(0.0, 0.5))] {
                    let mut m = ComplexMatrix::zeros(n, n);
                    m[(r, c)] = w;
                    m[(c, r)] = w.conj();
                    let op = HermitianOperator::new(m).expect("Hermitian by construction");
                    let label = format!("{part} L(|{a}><{b}|)[{p},{q}]");
                    out.push(Direction { label: format!("+{label}"), operator: op.clone() });
                    out.push(Direction { label: format!("-{label}"), operator: op.scale(-1.0) });
                }
            }
        }
    }
    out
}

/// Constraint set `{J : channel compatible with every element of x}` as a conic
/// problem; block 0 is the Choi operator of the channel.
fn sigma_problem(x: &[Observable], dim_in: usize, dim_out: usize) -> Result<ConicProblem, GaloisError> {
    let side = dim_in * dim_out;
    let mut p = ConicProblem::new();
    let j = p.add_block(side);
    hermitian_equality(&mut p, dim_in, &ComplexMatrix::identity(dim_in), |a, b| trace_out_terms(j, dim_out, dim_in, a, b));
    for a in x {
        let blocks = a
            .effects()
            .iter()
            .map(|e| SupportedBlock::new(&mut p, e, dim_out))
            .collect::<Result<Vec<_>, _>>()
            .map_err(RelationError::from)?;
        hermitian_equality(&mut p, side, &ComplexMatrix::zeros(side, side), |r, c| {
            let mut t: Vec<_> = blocks.iter().flat_map(|sb| sb.entry(r, c)).collect();
            t.push((j, r, c, C64::new(-1.0, 0.0)));
            t
        });
        for sb in &blocks {
            sb.add_margin(&mut p);
        }
    }
    Ok(p)
}

/// Maximizes each direction over the channels compatible with every element of `x`.
pub fn characterize_sigma(
    x: &[Observable],
    dim_in: usize,
    dim_out: usize,
    directions: &[Direction],
    opts: &SolverOptions,
) -> Result<Vec<DirectionOptimum>, GaloisError> {
    if let Some(a) = x.iter().find(|a| a.dim() != dim_in) {
        return Err(GaloisError::Dimension(format!("observable on {} for channel input {dim_in}", a.dim())));
    }
    let side = dim_in * dim_out;
    if let Some(d) = directions.iter().find(|d| d.operator.dim() != side) {
        return Err(GaloisError::Dimension(format!("direction {} has size {}, expected {side}", d.label, d.operator.dim())));
    }
    let base = sigma_problem(x, dim_in, dim_out)?;
    with_pool(|| {
        directions
            .par_iter()
            .map(|d| {
                let mut p = base.clone();
                let f = d.operator.matrix();
                let mut terms = Vec::new();
                for r in 0..side {
                    for c in 0..side {
                        // tr(F J) = Σ F[c, r] J[r, c]
                        let w = f[(c, r)];
                        if w != C64::new(0.0, 0.0) {
                            terms.push(Entry::new(0, r, c, w));
                        }
                    }
                }
                p.set_objective(terms);
                let res = conic::solve_max(&p, opts)?;
                if res.value.is_none() {
                    log::warn!("direction {} left undecided: {}", d.label, res.verdict.diagnostics.message);
                }
                Ok(DirectionOptimum { label: d.label.clone(), value: res.value, diagnostics: res.verdict.diagnostics })
            })
            .collect()
    })
}

/// Deterministic, roughly uniform unit vectors.
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

fn scaled(v: [f64; 3], s: f64) -> [f64; 3] {
    v.map(|x| x * s)
}

/// Unit vector orthogonal to `n`.
pub fn perpendicular(n: [f64; 3]) -> [f64; 3] {
    let k = (0..3).min_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs())).unwrap_or(0);
    let mut e = [0.0; 3];
    e[k] = 1.0;
    let c = [n[1] * e[2] - n[2] * e[1], n[2] * e[0] - n[0] * e[2], n[0] * e[1] - n[1] * e[0]];
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    c.map(|x| x / norm)
}

pub fn unbiased(v: [f64; 3]) -> Observable {
    UnbiasedQubitObservable::new(v).expect("Bloch vector inside the unit ball").to_observable()
}

/// Result of bisecting the sharpness of a probe direction against a grid of `A_λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryScan {
    pub lambda: f64,
    pub grid: Vec<[f64; 3]>,
    /// Unit direction of the probed observables.
    pub axis: [f64; 3],
    /// Largest sharpness certified jointly measurable with the whole grid.
    pub lower: f64,
    /// Smallest sharpness found incompatible with some grid element.
    pub upper: f64,
    pub evaluations: usize,
    /// SDP verdicts that differ from the closed form away from the boundary.
    pub disagreements: Vec<String>,
    pub near_boundary: usize,
}

impl BoundaryScan {
    pub fn estimate(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Verdicts at one probe sharpness: true when the whole grid is jointly measurable with the probe.
fn scan_step(grid: &[[f64; 3]], lambda: f64, probe: [f64; 3], decider: &Decider, scan: &mut BoundaryScan) -> Result<bool, GaloisError> {
    let c = unbiased(probe);
    let verdicts = with_pool(|| {
        grid.par_iter()
            .map(|&g| decider.jointly_measurable(&unbiased(scaled(g, lambda)), &c).map(|v| v.answer))
            .collect::<Result<Vec<_>, _>>()
    })?;
    scan.evaluations += verdicts.len();
    let mut all = true;
    for (&g, &v) in grid.iter().zip(&verdicts) {
        let a = scaled(g, lambda);
        if busch_margin(a, probe).abs() <= 1e-4 {
            scan.near_boundary += 1;
        } else if v != busch_jm(a, probe) {
            scan.disagreements.push(format!("a={a:?} c={probe:?}: solver {v:?}, closed form {:?}", busch_jm(a, probe)));
        }
        all &= v == Answer::Yes;
    }
    Ok(all)
}

/// Bisects over the sharpness of probes perpendicular to the first grid
/// direction; the joint measurability boundary is `√(1−λ²)`.
pub fn busch_boundary(lambda: f64, grid: usize, decider: &Decider) -> Result<BoundaryScan, GaloisError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(GaloisError::Dimension(format!("sharpness {lambda} outside [0, 1]")));
    }
    let dirs = fibonacci_sphere(grid.max(1));
    let axis = perpendicular(dirs[0]);
    let mut scan = BoundaryScan {
        lambda,
        grid: dirs.clone(),
        axis,
        lower: 0.0,
        upper: 1.0,
        evaluations: 0,
        disagreements: Vec::new(),
        near_boundary: 0,
    };
    if scan_step(&dirs, lambda, axis, decider, &mut scan)? {
        scan.lower = 1.0;
        return Ok(scan);
    }
    while scan.upper - scan.lower > 1e-4 {
        let mid = 0.5 * (scan.lower + scan.upper);
        if scan_step(&dirs, lambda, scaled(axis, mid), decider, &mut scan)? {
            scan.lower = mid;
        } else {
            scan.upper = mid;
        }
    }
    Ok(scan)
}
