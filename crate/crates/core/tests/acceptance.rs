//! End-to-end acceptance suite. Runs without the libtest harness so that every
//! criterion reports one PASS/FAIL line, even under `cargo test`.

// negated comparisons are written to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use povm_galois::conic::{self, SolverOptions, Status};
use povm_galois::dilation::{induced_observable, least_disturbing, naimark, realize};
use povm_galois::galois::{
    busch_boundary, characterize_sigma, depolarizing_deviation, matrix_unit_directions, unbiased, IndexSet, Universe,
};
use povm_galois::linops::{partial_trace, tensor, ComplexMatrix, Factor, C64};
use povm_galois::qmodel::{post_process_obs, Channel, Observable, StochasticMatrix};
use povm_galois::relations::{Answer, Decider, RelationVerdict, Witness};
use povm_galois::{sample, tol};

mod common;
use common::{lp_feasible_exact, lp_problem, random_lp};

type Error = Box<dyn std::error::Error>;
type Outcome = Result<String, Error>;
/// Name, check and time limit in seconds.
type Criterion = (&'static str, fn() -> Outcome, u64);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+).into());
        }
    };
}

fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn decider() -> Decider {
    Decider::default()
}

fn answer(v: &RelationVerdict, want: Answer, what: &str) -> Result<(), Error> {
    ensure!(v.answer == want, "{what}: expected {want:?}, got {:?} ({})", v.answer, v.diagnostics.message);
    match want {
        Answer::Yes => ensure!(v.witness.is_some(), "{what}: Yes without witness"),
        Answer::No => {
            let c = v.certificate.as_ref().ok_or_else(|| format!("{what}: No without certificate"))?;
            ensure!(c.max_eigenvalue <= tol::CERTIFICATE_MARGIN, "{what}: certificate eigenvalue {:e}", c.max_eigenvalue);
        }
        Answer::Unknown => {}
    }
    Ok(())
}

fn sharp(axis: usize) -> Observable {
    let mut v = [0.0; 3];
    v[axis] = 1.0;
    unbiased(v)
}

/// 1. Observables compatible with the identity channel are exactly the trivial ones.
fn no_information_without_disturbance() -> Outcome {
    let d = decider();
    let mut r = rng(1);
    let id = |n| Channel::identity(n);
    for k in 0..20 {
        let dim = 2 + k % 2;
        let a = sample::random_observable(dim, 2 + k % 3, &mut r);
        answer(&d.compatible(&a, &id(dim))?, Answer::No, &format!("random observable #{k}"))?;
    }
    for k in 0..20 {
        let dim = 2 + k % 2;
        let n = 2 + k % 3;
        let raw: Vec<f64> = (0..n).map(|_| r.random::<f64>() + 0.01).collect();
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let a = Observable::trivial(dim, &p).map_err(|e| e.to_string())?;
        answer(&d.compatible(&a, &id(dim))?, Answer::Yes, &format!("trivial observable #{k}"))?;
    }
    Ok("20 No with certificates, 20 Yes".into())
}

/// 2. Channels compatible with two complementary sharp qubit observables are completely depolarizing.
fn qubit_example() -> Outcome {
    let x = [sharp(0), sharp(1)];
    let res = characterize_sigma(&x, 2, 2, &depolarizing_deviation(2, 2), &SolverOptions::default())?;
    let mut worst: f64 = 0.0;
    for o in &res {
        let v = o.value.ok_or_else(|| format!("direction {} undecided", o.label))?;
        worst = worst.max(v.abs());
    }
    ensure!(worst <= 1e-6, "largest deviation optimum {worst:e}");
    answer(&decider().obs_simulable(&sharp(2), &x)?, Answer::No, "σ₃ simulable from σ₁, σ₂")?;
    Ok(format!("{} directions, max |optimum| {worst:.1e}", res.len()))
}

/// 3. Two coarse-grainings of a qutrit basis measurement.
fn three_level_example() -> Outcome {
    let d = decider();
    let e = Observable::delta_basis(3);
    let merging_a = StochasticMatrix::merging(&[vec![0], vec![1, 2]], 3).map_err(|e| e.to_string())?;
    let merging_b = StochasticMatrix::merging(&[vec![0, 1], vec![2]], 3).map_err(|e| e.to_string())?;
    let a = post_process_obs(&merging_a, &e).map_err(|e| e.to_string())?;
    let b = post_process_obs(&merging_b, &e).map_err(|e| e.to_string())?;

    let pairs = [(0, 1), (0, 2), (1, 0), (2, 0), (1, 2), (2, 1)];
    let res = characterize_sigma(&[a.clone(), b.clone()], 3, 3, &matrix_unit_directions(3, 3, &pairs), &SolverOptions::default())?;
    let mut worst: f64 = 0.0;
    for o in &res {
        let v = o.value.ok_or_else(|| format!("direction {} undecided", o.label))?;
        worst = worst.max(v.abs());
    }
    ensure!(worst <= 1e-6, "largest forced-zero optimum {worst:e}");

    answer(&d.obs_simulable(&e, &[a.clone(), b.clone()])?, Answer::No, "E simulable from A, B")?;
    for (name, x, merging) in [("A", &a, &merging_a), ("B", &b, &merging_b)] {
        let v = d.obs_postprocess(x, &e)?;
        answer(&v, Answer::Yes, &format!("{name} post-processing of E"))?;
        let Some(Witness::Stochastic(mu)) = &v.witness else {
            return Err(format!("{name}: witness is not a stochastic matrix").into());
        };
        let diff = mu.entries().iter().zip(merging.entries()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        ensure!(diff <= 1e-7, "{name}: witness differs from the merging matrix by {diff:e}");
        let rebuilt = post_process_obs(mu, &e).map_err(|e| e.to_string())?;
        for (p, q) in rebuilt.effects().iter().zip(x.effects()) {
            ensure!(p.matrix().max_abs_diff(q.matrix()) <= 1e-7, "{name}: μ∘E differs from {name}");
        }
    }
    answer(&d.compatible(&e, &least_disturbing(&e))?, Answer::Yes, "E with its least disturbing channel")?;
    Ok(format!("{} forced zeros, max |optimum| {worst:.1e}", res.len()))
}

/// 4. Joint measurability boundary of unbiased qubit observables.
fn busch_family() -> Outcome {
    let d = decider();
    let mut lines = Vec::new();
    for lambda in [0.3, 0.6, 0.9] {
        let scan = busch_boundary(lambda, 64, &d)?;
        let exact = (1.0 - lambda * lambda).sqrt();
        let err = (scan.estimate() - exact).abs();
        ensure!(err <= 5e-3, "λ = {lambda}: estimate {} vs {exact} (error {err:e})", scan.estimate());
        ensure!(scan.disagreements.is_empty(), "λ = {lambda}: {:?}", scan.disagreements);
        lines.push(format!("λ={lambda}: {:.5} ({} SDPs)", scan.estimate(), scan.evaluations));
    }
    Ok(lines.join(", "))
}

/// 5. Least disturbing channels and post-processing.
fn least_disturbing_laws() -> Outcome {
    let d = decider();
    let mut r = rng(5);
    for k in 0..10 {
        let n = 2 + k % 2;
        let a = sample::random_observable(2, n, &mut r);
        let mu = sample::random_stochastic(2 + (k / 2) % 2, n, &mut r);
        let b = post_process_obs(&mu, &a).map_err(|e| e.to_string())?;
        let la = least_disturbing(&a);
        let lb = least_disturbing(&b);
        answer(&d.compatible(&a, &la)?, Answer::Yes, &format!("#{k}: a with Λ_a"))?;
        answer(&d.compatible(&b, &la)?, Answer::Yes, &format!("#{k}: b with Λ_a"))?;
        answer(&d.chan_postprocess(&la, &lb)?, Answer::Yes, &format!("#{k}: Λ_a post-processing of Λ_b"))?;
    }
    Ok("10 instances, 30 Yes".into())
}

fn subsets(n: usize) -> Vec<IndexSet> {
    (0u32..1 << n).map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect()
}

/// `p·id + (1−p)·(T ↦ tr(T)·ρ)`, or a random channel.
fn random_qubit_channel(r: &mut StdRng) -> Channel {
    if r.random_bool(0.25) {
        return sample::random_channel(2, 2, 1 + r.random_range(0..3), r);
    }
    let p: f64 = r.random_range(0.0..1.0);
    let rho = sample::random_state(2, r);
    let prep = Channel::depolarizing(&rho, 2).expect("state");
    let choi = Channel::identity(2).choi().scale(p).add(&prep.choi().scale(1.0 - p));
    Channel::from_choi(2, 2, choi).expect("convex combination")
}

fn random_qubit_observable(r: &mut StdRng) -> Observable {
    let v = sample::random_bloch(r);
    let len = r.random_range(0.0..1.0);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    unbiased([v[0] / norm * len, v[1] / norm * len, v[2] / norm * len])
}

fn check_axioms(u: &Universe) -> Result<usize, Error> {
    let xs = subsets(u.observables().len());
    let ys = subsets(u.channels().len());
    let act_x = u.active_observables();
    let act_y = u.active_channels();
    let mut checks = 0;
    for x in &xs {
        let sx = u.sigma(x);
        let x_act: IndexSet = x.intersection(act_x).copied().collect();
        ensure!(x_act.is_subset(&u.tau(&sx)), "GC: X ⊄ τσ(X) for {x:?}");
        ensure!(u.sigma(&u.tau(&sx)) == sx, "στσ ≠ σ at {x:?}");
        let cl = u.observable_closure(x);
        ensure!(x_act.is_subset(&cl), "CL1 fails at {x:?}");
        ensure!(u.observable_closure(&cl) == cl, "CL3 fails at {x:?}");
        for x2 in xs.iter().filter(|x2| x2.is_subset(x)) {
            ensure!(sx.is_subset(&u.sigma(x2)), "GC1 fails on {x2:?} ⊆ {x:?}");
            ensure!(u.observable_closure(x2).is_subset(&cl), "CL2 fails on {x2:?} ⊆ {x:?}");
            checks += 1;
        }
        for y in &ys {
            // X ⊆ τ(Y) ⇔ Y ⊆ σ(X) on the decided part
            let y_act: IndexSet = y.intersection(act_y).copied().collect();
            ensure!(x_act.is_subset(&u.tau(y)) == y_act.is_subset(&sx), "GC2 fails at {x:?}, {y:?}");
            checks += 1;
        }
    }
    for y in &ys {
        let ty = u.tau(y);
        let y_act: IndexSet = y.intersection(act_y).copied().collect();
        ensure!(y_act.is_subset(&u.sigma(&ty)), "GC: Y ⊄ στ(Y) for {y:?}");
        ensure!(u.tau(&u.sigma(&ty)) == ty, "τστ ≠ τ at {y:?}");
        let cl = u.channel_closure(y);
        ensure!(y_act.is_subset(&cl), "CL1 fails at {y:?}");
        ensure!(u.channel_closure(&cl) == cl, "CL3 fails at {y:?}");
        for y2 in ys.iter().filter(|y2| y2.is_subset(y)) {
            ensure!(ty.is_subset(&u.tau(y2)), "GC1 fails on {y2:?} ⊆ {y:?}");
            ensure!(u.channel_closure(y2).is_subset(&cl), "CL2 fails on {y2:?} ⊆ {y:?}");
            checks += 1;
        }
    }
    Ok(checks)
}

/// 6. Galois connection and closure axioms on random finite universes.
fn galois_axioms() -> Outcome {
    let d = decider();
    let mut r = rng(6);
    let mut checks = 0;
    let mut yes = 0;
    let mut total = 0;
    for _ in 0..5 {
        let no = r.random_range(3..=5);
        let nc = r.random_range(3..=5);
        let obs = (0..no).map(|_| random_qubit_observable(&mut r)).collect();
        let chans = (0..nc).map(|_| random_qubit_channel(&mut r)).collect();
        let u = Universe::build(obs, chans, &d)?;
        ensure!(!u.relation().contains(&Answer::Unknown), "undecided pair in a random universe");
        yes += u.relation().iter().filter(|a| **a == Answer::Yes).count();
        total += u.relation().len();
        checks += check_axioms(&u)?;
    }
    Ok(format!("5 universes, {yes}/{total} compatible pairs, {checks} subset checks"))
}

/// 7. Solver verdicts against exact arithmetic and known-feasible instruments.
fn solver_oracle() -> Outcome {
    let opts = SolverOptions::default();
    let mut r = rng(7);
    let mut feasible = 0;
    for k in 0..50 {
        let (a, b) = random_lp(&mut r, k % 2 == 0);
        let exact = lp_feasible_exact(&a, &b);
        let p = lp_problem(&a, &b);
        let v = conic::solve_feasibility(&p, &opts).map_err(|e| format!("LP #{k}: {e}"))?;
        let want = if exact { Status::Feasible } else { Status::Infeasible };
        ensure!(v.status == want, "LP #{k} A={a:?} b={b:?}: solver {:?}, exact {want:?}", v.status);
        if exact {
            feasible += 1;
            let x: Vec<ComplexMatrix> = v.witness.as_ref().expect("witness").iter().map(|h| h.matrix().clone()).collect();
            ensure!(conic::verify_witness(&p, &x, opts.feasibility_tol), "LP #{k}: witness fails re-validation");
        } else {
            let y = &v.certificate.as_ref().expect("certificate").y;
            ensure!(conic::verify_certificate(&p, y, opts.certificate_margin).is_some(), "LP #{k}: certificate fails");
        }
    }

    let d = decider();
    for k in 0..50 {
        let dim_in = 2 + k % 2;
        let dim_out = 2 + (k / 2) % 2;
        let n = 2 + (k / 4) % 2;
        let inst = sample::random_instrument(dim_in, dim_out, n, &mut r);
        let a = inst.associated_observable().map_err(|e| e.to_string())?;
        let l = inst.associated_channel().map_err(|e| e.to_string())?;
        let v = d.compatible(&a, &l)?;
        ensure!(v.answer == Answer::Yes, "instrument #{k}: {:?} ({})", v.answer, v.diagnostics.message);
        let Some(Witness::Instrument(w)) = &v.witness else {
            return Err(format!("instrument #{k}: witness is not an instrument").into());
        };
        let mut worst: f64 = 0.0;
        let mut total = ComplexMatrix::zeros(dim_in * dim_out, dim_in * dim_out);
        for (block, e) in w.blocks().iter().zip(a.effects()) {
            worst = worst.max(-block.min_eigenvalue().map_err(|e| e.to_string())?);
            let margin = partial_trace(block.matrix(), (dim_out, dim_in), Factor::First).map_err(|e| e.to_string())?;
            worst = worst.max(margin.transpose().max_abs_diff(e.matrix()));
            total = &total + block.matrix();
        }
        worst = worst.max(total.max_abs_diff(l.choi().matrix()));
        ensure!(worst <= 1e-7, "instrument #{k}: witness residual {worst:e}");
    }
    Ok(format!("50 LPs ({feasible} feasible) match exact verdicts, 50 instrument witnesses re-validated"))
}

/// `J[(i,a),(j,b)] = ⟨i|tr_anc(W|a⟩⟨b|W†)|j⟩` for an isometry into `out ⊗ anc`.
fn choi_of_isometry(w: &ComplexMatrix, dim_in: usize, dim_out: usize) -> ComplexMatrix {
    let anc = w.rows() / dim_out;
    let mut j = ComplexMatrix::zeros(dim_out * dim_in, dim_out * dim_in);
    for a in 0..dim_in {
        for b in 0..dim_in {
            for i in 0..dim_out {
                for jj in 0..dim_out {
                    let mut s = C64::new(0.0, 0.0);
                    for k in 0..anc {
                        s += w[(i * anc + k, a)] * w[(jj * anc + k, b)].conj();
                    }
                    j[(i * dim_in + a, jj * dim_in + b)] = s;
                }
            }
        }
    }
    j
}

/// 8. Dilation identities.
fn dilation_identities() -> Outcome {
    let d = decider();
    let mut r = rng(8);
    let mut worst_naimark: f64 = 0.0;
    for k in 0..20 {
        let a = sample::random_observable(2 + k % 2, 2 + k % 3, &mut r);
        let nd = naimark(&a);
        let v = nd.isometry();
        let vd = v.adjoint();
        worst_naimark = worst_naimark.max((&vd * v).max_abs_diff(&ComplexMatrix::identity(a.dim())));
        for (p, e) in nd.sharp_obs().effects().iter().zip(a.effects()) {
            worst_naimark = worst_naimark.max((&(&vd * p.matrix()) * v).max_abs_diff(e.matrix()));
            worst_naimark = worst_naimark.max((p.matrix() * p.matrix()).max_abs_diff(p.matrix()));
        }
    }
    ensure!(worst_naimark <= 1e-9, "Naimark defect {worst_naimark:e}");

    let mut worst_choi: f64 = 0.0;
    for k in 0..20 {
        let (dim_in, dim_out) = [(2, 2), (2, 3), (3, 2), (3, 3)][k % 4];
        let c = sample::random_channel(dim_in, dim_out, 1 + k % 4, &mut r);
        let quartet = realize(&c);
        ensure!(quartet.unitarity_defect() <= 1e-9, "channel #{k}: unitarity defect {:e}", quartet.unitarity_defect());
        // W = U(· ⊗ η), rebuilt from the unitary and the ancilla state
        let u = quartet.unitary();
        let eta = quartet.ancilla();
        let w = ComplexMatrix::from_fn(u.rows(), dim_in, |row, a| {
            eta.iter().enumerate().map(|(m, z)| u[(row, a * eta.len() + m)] * z).sum()
        });
        ensure!(w.max_abs_diff(&quartet.isometry()) <= 1e-9, "channel #{k}: isometry is not U(· ⊗ η)");
        let choi = choi_of_isometry(&w, dim_in, quartet.dim_k());
        worst_choi = worst_choi.max(choi.max_abs_diff(c.choi().matrix()));
        worst_choi = worst_choi.max(quartet.reconstruct().map_err(|e| e.to_string())?.choi().matrix().max_abs_diff(c.choi().matrix()));

        let pointer = sample::random_observable(quartet.dim_v2(), 2 + k % 2, &mut r);
        let b = induced_observable(&quartet, &pointer).map_err(|e| e.to_string())?;
        let lifted = pointer.effects().iter().map(|f| tensor(&ComplexMatrix::identity(quartet.dim_k()), f.matrix()));
        for (e, m) in b.effects().iter().zip(lifted) {
            let direct = &(&w.adjoint() * &m) * &w;
            ensure!(direct.max_abs_diff(e.matrix()) <= 1e-9, "channel #{k}: induced effect mismatch");
        }
        answer(&d.compatible(&b, &c)?, Answer::Yes, &format!("channel #{k}: induced observable"))?;
    }
    ensure!(worst_choi <= 1e-8, "Choi reconstruction error {worst_choi:e}");
    Ok(format!("Naimark defect {worst_naimark:.1e}, Choi error {worst_choi:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("no information without disturbance", no_information_without_disturbance, 5),
        ("qubit example", qubit_example, 10),
        ("three-level example", three_level_example, 30),
        ("unbiased qubit boundary", busch_family, 60),
        ("least disturbing channel laws", least_disturbing_laws, 60),
        ("Galois and closure axioms", galois_axioms, 120),
        ("solver oracle equivalence", solver_oracle, 60),
        ("dilation identities", dilation_identities, 60),
    ];
    let mut failed = BTreeSet::new();
    for (i, (name, run, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed > Duration::from_secs(limit) {
                Err(format!("{detail}; took {:.1} s, limit {limit} s", elapsed.as_secs_f64()).into())
            } else {
                Ok(detail)
            }
        });
        match outcome {
            Ok(detail) => println!("PASS {}. {name} ({:.2} s): {detail}", i + 1, elapsed.as_secs_f64()),
            Err(why) => {
                println!("FAIL {}. {name} ({:.2} s): {why}", i + 1, elapsed.as_secs_f64());
                failed.insert(i + 1);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 8 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
