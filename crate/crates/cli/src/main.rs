//! `povm-galois` command-line interface.
//!
//! Exit codes: 0 = Yes, 1 = No, 2 = Unknown, 3 = invalid input (schema,
//! dimensions, stale universe hash), 4 = other failures.

// negated comparisons are written to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use povm_galois::conic::SolverOptions;
use povm_galois::dilation::{induced_observable, least_disturbing, naimark, realize};
use povm_galois::galois::{GaloisError, IndexSet, Universe};
use povm_galois::io::{self, matrix_to_doc, verdict_json, IoError, ObjectDoc, UniverseFile};
use povm_galois::linops::{partial_trace, ComplexMatrix, Factor};
use povm_galois::qmodel::{Channel, ModelError, Observable, QObject};
use povm_galois::relations::{Answer, Decider, RelationError};
use povm_galois::reproduce::{self, ReproduceOptions};

#[derive(Parser)]
#[command(name = "povm-galois", version, about = "Decide and certify relations between quantum observables and channels")]
struct Cli {
    /// Write the JSON report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Constraint residual accepted for witnesses
    #[arg(long, global = true, default_value_t = povm_galois::tol::FEASIBILITY)]
    feas_tol: f64,

    /// Objective accuracy for optimization queries
    #[arg(long, global = true, default_value_t = povm_galois::tol::OBJECTIVE_GAP)]
    opt_tol: f64,

    /// Indentation of JSON output; 0 prints compact JSON
    #[arg(long, global = true, default_value_t = 2)]
    json_indent: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide a relation between objects read from files
    Check {
        kind: CheckKind,
        /// Target first, then the remaining operands
        #[arg(required = true, num_args = 2..)]
        files: Vec<PathBuf>,
    },
    /// Build a derived object from an observable or channel file
    Construct {
        kind: ConstructKind,
        file: PathBuf,
        /// Pointer observable for `induced-obs` (defaults to the computational basis)
        #[arg(long)]
        pointer: Option<PathBuf>,
        /// Where to write the constructed object file
        #[arg(long)]
        object_out: Option<PathBuf>,
    },
    /// Run one of the scripted example pipelines
    Reproduce {
        example: Example,
        /// Sharpness bound of the unbiased qubit family
        #[arg(long, default_value_t = 0.6)]
        lambda: f64,
        /// Number of sampled directions for the unbiased qubit family
        #[arg(long, default_value_t = 64)]
        grid: usize,
    },
    /// Build or query a finite universe file
    Universe {
        #[command(subcommand)]
        action: UniverseAction,
    },
}

#[derive(Subcommand)]
enum UniverseAction {
    /// Decide all observable/channel pairs and stamp the file with a hash
    Build {
        file: PathBuf,
        /// Write the stamped universe here instead of updating `file`
        #[arg(long)]
        universe_out: Option<PathBuf>,
    },
    /// Evaluate σ, τ and the closures on an index set
    Closure {
        file: PathBuf,
        /// Comma-separated observable indices
        #[arg(long, value_delimiter = ',', conflicts_with = "channels")]
        observables: Option<Vec<usize>>,
        /// Comma-separated channel indices
        #[arg(long, value_delimiter = ',')]
        channels: Option<Vec<usize>>,
        /// Verify the Galois and closure axioms over all subsets
        #[arg(long)]
        self_test: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CheckKind {
    PostprocessObs,
    PostprocessChan,
    SimulableObs,
    SimulableChan,
    Compatible,
    JointMeas,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ConstructKind {
    Naimark,
    LeastDisturbing,
    Realize,
    Gamma,
    InducedObs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Example {
    Qubit,
    ThreeDim,
    Busch,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Galois(#[from] GaloisError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("writing report: {0}")]
    Output(std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(IoError::File { .. }) => 4,
            CliError::Io(_) | CliError::Input(_) => 3,
            CliError::Relation(RelationError::Dimension(_) | RelationError::Empty(_))
            | CliError::Galois(GaloisError::Dimension(_) | GaloisError::Shape { .. } | GaloisError::InvalidProbe { .. })
            | CliError::Model(_) => 3,
            CliError::Relation(_) | CliError::Galois(_) | CliError::Output(_) => 4,
        }
    }
}

fn answer_code(a: Answer) -> u8 {
    match a {
        Answer::Yes => 0,
        Answer::No => 1,
        Answer::Unknown => 2,
    }
}

struct Ctx {
    out: Option<PathBuf>,
    indent: Option<usize>,
    opts: SolverOptions,
}

impl Ctx {
    fn emit(&self, report: &Value) -> Result<(), CliError> {
        let text = io::to_string(report, self.indent);
        match &self.out {
            Some(p) => io::write_text(p, &text)?,
            None => {
                let mut stdout = std::io::stdout().lock();
                if let Err(e) = writeln!(stdout, "{text}") {
                    if e.kind() != std::io::ErrorKind::BrokenPipe {
                        return Err(CliError::Output(e));
                    }
                }
            }
        }
        Ok(())
    }

    fn decider(&self) -> Decider {
        Decider::new(self.opts.clone())
    }
}

fn header(task: Value) -> Value {
    json!({ "tool": "povm-galois", "version": env!("CARGO_PKG_VERSION"), "task": task })
}

fn observable(path: &Path) -> Result<Observable, CliError> {
    match io::load_object(path)? {
        QObject::Observable(a) => Ok(a),
        QObject::Channel(_) => Err(CliError::Input(format!("{}: expected an observable, found a channel", path.display()))),
    }
}

fn channel(path: &Path) -> Result<Channel, CliError> {
    match io::load_object(path)? {
        QObject::Channel(c) => Ok(c),
        QObject::Observable(_) => Err(CliError::Input(format!("{}: expected a channel, found an observable", path.display()))),
    }
}

fn exactly_two(kind: CheckKind, files: &[PathBuf]) -> Result<(), CliError> {
    if files.len() != 2 {
        return Err(CliError::Input(format!("{kind:?} takes exactly two files, got {}", files.len())));
    }
    Ok(())
}

fn check(ctx: &Ctx, kind: CheckKind, files: &[PathBuf]) -> Result<u8, CliError> {
    let start = Instant::now();
    let d = ctx.decider();
    let verdict = match kind {
        CheckKind::PostprocessObs => {
            exactly_two(kind, files)?;
            d.obs_postprocess(&observable(&files[0])?, &observable(&files[1])?)?
        }
        CheckKind::PostprocessChan => {
            exactly_two(kind, files)?;
            d.chan_postprocess(&channel(&files[0])?, &channel(&files[1])?)?
        }
        CheckKind::SimulableObs => {
            let xs = files[1..].iter().map(|p| observable(p)).collect::<Result<Vec<_>, _>>()?;
            d.obs_simulable(&observable(&files[0])?, &xs)?
        }
        CheckKind::SimulableChan => {
            let ys = files[1..].iter().map(|p| channel(p)).collect::<Result<Vec<_>, _>>()?;
            d.chan_simulable(&channel(&files[0])?, &ys)?
        }
        CheckKind::Compatible => {
            exactly_two(kind, files)?;
            d.compatible(&observable(&files[0])?, &channel(&files[1])?)?
        }
        CheckKind::JointMeas => {
            exactly_two(kind, files)?;
            d.jointly_measurable(&observable(&files[0])?, &observable(&files[1])?)?
        }
    };
    let mut report = header(json!({
        "check": format!("{kind:?}"),
        "inputs": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    }));
    report["verdict"] = verdict_json(&verdict);
    report["seconds"] = json!(start.elapsed().as_secs_f64());
    ctx.emit(&report)?;
    Ok(answer_code(verdict.answer))
}

/// `max |tr_out J − 1|` and the smallest Choi eigenvalue.
fn channel_residuals(c: &Channel) -> Result<Value, CliError> {
    let margin = partial_trace(c.choi().matrix(), (c.dim_out(), c.dim_in()), Factor::First)
        .map_err(|e| CliError::Model(e.into()))?;
    let tp = margin.max_abs_diff(&ComplexMatrix::identity(c.dim_in()));
    let min_eig = c.choi().min_eigenvalue().map_err(|e| CliError::Model(e.into()))?;
    Ok(json!({ "trace_preservation_defect": tp, "choi_min_eigenvalue": min_eig }))
}

fn construct(ctx: &Ctx, kind: ConstructKind, file: &Path, pointer: Option<&Path>, object_out: Option<&Path>) -> Result<u8, CliError> {
    let start = Instant::now();
    let (object, details): (QObject, Value) = match kind {
        ConstructKind::Naimark => {
            let a = observable(file)?;
            let n = naimark(&a);
            let trivial = n.dim_k() == n.dim_h() && a.is_projective(povm_galois::tol::PROJECTION);
            let details = json!({
                "dim_h": n.dim_h(),
                "dim_k": n.dim_k(),
                "mode": if trivial { "trivial" } else { "canonical" },
                "isometry": matrix_to_doc(n.isometry()),
                "residuals": { "compression_defect": n.defect(&a) },
            });
            (QObject::Observable(n.sharp_obs().clone()), details)
        }
        ConstructKind::LeastDisturbing => {
            let c = least_disturbing(&observable(file)?);
            let details = json!({ "residuals": channel_residuals(&c)? });
            (QObject::Channel(c), details)
        }
        ConstructKind::Gamma => {
            let c = Channel::gamma(&observable(file)?)?;
            let details = json!({ "residuals": channel_residuals(&c)? });
            (QObject::Channel(c), details)
        }
        ConstructKind::Realize => {
            let c = channel(file)?;
            let q = realize(&c);
            let back = q.reconstruct()?;
            let details = json!({
                "dim_h": q.dim_h(),
                "dim_k": q.dim_k(),
                "dim_v1": q.dim_v1(),
                "dim_v2": q.dim_v2(),
                "kraus_rank": q.kraus_rank(),
                "unitary": matrix_to_doc(q.unitary()),
                "ancilla": q.ancilla().iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                "residuals": {
                    "unitarity_defect": q.unitarity_defect(),
                    "reconstruction_error": back.choi().matrix().max_abs_diff(c.choi().matrix()),
                },
            });
            (QObject::Channel(back), details)
        }
        ConstructKind::InducedObs => {
            let c = channel(file)?;
            let q = realize(&c);
            let f = match pointer {
                Some(p) => observable(p)?,
                None => Observable::delta_basis(q.dim_v2()),
            };
            if f.dim() != q.dim_v2() {
                return Err(CliError::Input(format!("pointer acts on dimension {}, the realization needs {}", f.dim(), q.dim_v2())));
            }
            let b = induced_observable(&q, &f)?;
            let compat = ctx.decider().compatible(&b, &c)?;
            let details = json!({ "dim_v2": q.dim_v2(), "compatible_with_channel": verdict_json(&compat) });
            (QObject::Observable(b), details)
        }
    };
    let mut report = header(json!({ "construct": format!("{kind:?}"), "input": file.display().to_string() }));
    report["details"] = details;
    match object_out {
        Some(p) => {
            io::write_text(p, &io::object_to_string(&object, ctx.indent))?;
            report["object_file"] = json!(p.display().to_string());
        }
        None => {
            let mut doc = serde_json::to_value(ObjectDoc::from_object(&object)).expect("serializable");
            doc["version"] = json!(io::FORMAT_VERSION);
            report["object"] = doc;
        }
    }
    report["seconds"] = json!(start.elapsed().as_secs_f64());
    ctx.emit(&report)?;
    Ok(0)
}

fn reproduce_cmd(ctx: &Ctx, example: Example, lambda: f64, grid: usize) -> Result<u8, CliError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(CliError::Input(format!("--lambda {lambda} must lie in [0, 1]")));
    }
    let opts = ReproduceOptions { solver: ctx.opts.clone(), lambda, grid };
    let report = match example {
        Example::Qubit => reproduce::qubit(&opts)?,
        Example::ThreeDim => reproduce::three_dim(&opts)?,
        Example::Busch => reproduce::busch(&opts)?,
    };
    for name in report.undecided() {
        eprintln!("undecided: {name}");
    }
    ctx.emit(&serde_json::to_value(&report).expect("serializable"))?;
    Ok(report.exit_code() as u8)
}

fn load_universe(file: &Path) -> Result<(UniverseFile, io::UniverseData), CliError> {
    let text = io::read_text(file)?;
    let data = io::parse_universe(&text)?;
    let doc: UniverseFile = serde_json::from_str(&text).map_err(IoError::from)?;
    Ok((doc, data))
}

fn set_json(s: &IndexSet) -> Value {
    json!(s.iter().collect::<Vec<_>>())
}

fn subsets(n: usize) -> Result<Vec<IndexSet>, CliError> {
    if n > 12 {
        return Err(CliError::Input(format!("self-test enumerates 2^{n} subsets; at most 12 elements per side are supported")));
    }
    Ok((0u32..1 << n).map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect())
}

/// Exhaustive check of the Galois connection and closure axioms.
fn self_test(u: &Universe) -> Result<Value, CliError> {
    let xs = subsets(u.observables().len())?;
    let ys = subsets(u.channels().len())?;
    let mut failures: Vec<String> = Vec::new();
    for x in &xs {
        let sx = u.sigma(x);
        let cx = u.tau(&sx);
        if !x.iter().filter(|i| u.active_observables().contains(i)).all(|i| cx.contains(i)) {
            failures.push(format!("X ⊆ τσ(X) fails for {x:?}"));
        }
        if u.sigma(&cx) != sx {
            failures.push(format!("στσ = σ fails for {x:?}"));
        }
        if u.observable_closure(&cx) != cx {
            failures.push(format!("closure not idempotent at {x:?}"));
        }
        for x2 in xs.iter().filter(|x2| x2.is_subset(x)) {
            if !sx.is_subset(&u.sigma(x2)) {
                failures.push(format!("σ not antitone on {x2:?} ⊆ {x:?}"));
            }
            if !u.observable_closure(x2).is_subset(&cx) {
                failures.push(format!("closure not monotone on {x2:?} ⊆ {x:?}"));
            }
        }
    }
    for y in &ys {
        let ty = u.tau(y);
        let cy = u.sigma(&ty);
        if !y.iter().filter(|l| u.active_channels().contains(l)).all(|l| cy.contains(l)) {
            failures.push(format!("Y ⊆ στ(Y) fails for {y:?}"));
        }
        if u.tau(&cy) != ty {
            failures.push(format!("τστ = τ fails for {y:?}"));
        }
        if u.channel_closure(&cy) != cy {
            failures.push(format!("closure not idempotent at {y:?}"));
        }
        for y2 in ys.iter().filter(|y2| y2.is_subset(y)) {
            if !ty.is_subset(&u.tau(y2)) {
                failures.push(format!("τ not antitone on {y2:?} ⊆ {y:?}"));
            }
        }
    }
    Ok(json!({
        "observable_subsets": xs.len(),
        "channel_subsets": ys.len(),
        "passed": failures.is_empty(),
        "failures": failures,
    }))
}

fn universe(ctx: &Ctx, action: &UniverseAction) -> Result<u8, CliError> {
    let start = Instant::now();
    match action {
        UniverseAction::Build { file, universe_out } => {
            let text = io::read_text(file)?;
            let doc: UniverseFile = serde_json::from_str(&text).map_err(IoError::from)?;
            // a stale relation is rebuilt from scratch, so only the objects are loaded
            let data = UniverseFile { relation: None, hash: None, ..doc }.load()?;
            let u = Universe::build(data.observables, data.channels, &ctx.decider())?;
            let stamped = UniverseFile::from_universe(&u);
            let target = universe_out.as_deref().unwrap_or(file);
            io::write_text(target, &io::to_string(&stamped, ctx.indent))?;
            let unknown = u.relation().iter().filter(|a| **a == Answer::Unknown).count();
            let mut report = header(json!({ "universe": "build", "input": file.display().to_string() }));
            report["universe_file"] = json!(target.display().to_string());
            report["hash"] = json!(stamped.hash);
            report["verdicts"] = json!(u.relation().len());
            report["unknown"] = json!(unknown);
            report["relation"] = json!(stamped.relation);
            report["seconds"] = json!(start.elapsed().as_secs_f64());
            ctx.emit(&report)?;
            Ok(if unknown > 0 { 2 } else { 0 })
        }
        UniverseAction::Closure { file, observables, channels, self_test: run_self_test } => {
            let (_, data) = load_universe(file)?;
            let Some(relation) = data.relation else {
                return Err(CliError::Io(IoError::Field {
                    field: "relation".into(),
                    message: "missing; run `universe build` first".into(),
                }));
            };
            let (no, nc) = (data.observables.len(), data.channels.len());
            let u = Universe::from_relation(data.observables, data.channels, relation)?;
            let mut report = header(json!({ "universe": "closure", "input": file.display().to_string() }));
            let out_of_range = |v: &[usize], n: usize, what: &str| {
                v.iter().find(|&&i| i >= n).map(|i| CliError::Input(format!("{what} index {i} out of range (universe has {n})")))
            };
            match channels {
                Some(ys) => {
                    if let Some(e) = out_of_range(ys, nc, "channel") {
                        return Err(e);
                    }
                    let y: IndexSet = ys.iter().copied().collect();
                    let t = u.tau(&y);
                    report["channels"] = set_json(&y);
                    report["tau"] = set_json(&t);
                    report["closure"] = set_json(&u.sigma(&t));
                }
                None => {
                    let xs = observables.clone().unwrap_or_default();
                    if let Some(e) = out_of_range(&xs, no, "observable") {
                        return Err(e);
                    }
                    let x: IndexSet = xs.into_iter().collect();
                    let s = u.sigma(&x);
                    report["observables"] = set_json(&x);
                    report["sigma"] = set_json(&s);
                    report["closure"] = set_json(&u.tau(&s));
                }
            }
            report["excluded"] = json!({
                "observables": (0..no).filter(|i| !u.active_observables().contains(i)).collect::<Vec<_>>(),
                "channels": (0..nc).filter(|i| !u.active_channels().contains(i)).collect::<Vec<_>>(),
            });
            let mut code = 0;
            if *run_self_test {
                let t = self_test(&u)?;
                if t["passed"] != json!(true) {
                    code = 1;
                }
                report["self_test"] = t;
            }
            report["seconds"] = json!(start.elapsed().as_secs_f64());
            ctx.emit(&report)?;
            Ok(code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    if !(cli.feas_tol > 0.0) || !(cli.opt_tol > 0.0) {
        return Err(CliError::Input("tolerances must be positive".into()));
    }
    let opts = SolverOptions { feasibility_tol: cli.feas_tol, objective_gap: cli.opt_tol, ..SolverOptions::default() };
    let ctx = Ctx { out: cli.out, indent: (cli.json_indent > 0).then_some(cli.json_indent), opts };
    match &cli.command {
        Command::Check { kind, files } => check(&ctx, *kind, files),
        Command::Construct { kind, file, pointer, object_out } => {
            construct(&ctx, *kind, file, pointer.as_deref(), object_out.as_deref())
        }
        Command::Reproduce { example, lambda, grid } => reproduce_cmd(&ctx, *example, *lambda, *grid),
        Command::Universe { action } => universe(&ctx, action),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
