//! Command-line driver: TOML run configs in, JSON/CSV artifacts plus a hashed
//! manifest out.

pub mod bundle;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{self, default_ladder, ModelConfig, ModelKind, RecursiveTarget};
use crate::cno::{self, causality_audit, construct_cno, derive_seed, predict, CnoOptions};
use crate::error::{Error, Result};
use crate::filter::{self, error_decomposition, NeuralFilter};
use crate::net::{self, Dataset, NetSpec, TrainOptions};
use crate::sde::{self, build_sde_dataset, ChaosCoords, InitBox, McOracle, SdeCoeffs, SdeWindowOracle};
use crate::spaces::{Element, SchauderSpace};
use crate::weave::{self, aspect_ratio, build_weave_with, rollout, hyper_report, WeaveOptions};
use bundle::{encode_bundle, inspect_model, load_bundle, BUNDLE_FILE, WEAVE_FILE};
use config::{MemoryRule, ModelSection, ProblemSection, RunConfig};
use manifest::{error_kind, sha256_hex, ArtifactWriter, ErrorRecord, RunManifest, Status, Timing, MANIFEST_FILE, MANIFEST_SCHEMA};

/// Schema version stamped on every JSON and CSV report.
pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "cno", version, about = "Causal neural operator experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    pub config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter and hypernetwork complexity budgets.
    Budget(RunArgs),
    /// Train one window filter of the configured problem.
    TrainFilter(RunArgs),
    /// Train every window filter and weave them into a CNO bundle.
    Construct(RunArgs),
    /// Run a bundle on held-out or supplied paths.
    Predict {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        bundle: PathBuf,
        /// JSON file `{ "schema_version": 1, "paths": [[[x, ..], ..], ..] }`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Check causality of a bundle on future-perturbed path pairs.
    Audit {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
    },
    /// Weave random parameter sequences and check rollout exactness.
    WeaveTest(RunArgs),
    /// Ornstein-Uhlenbeck solution operator benchmark.
    SdeBench(RunArgs),
    /// CNO versus feedforward trade-off and the RNN reduction check.
    CompareRnn(RunArgs),
    /// Verify and summarize a bundle.
    Inspect {
        bundle: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Budget(_) => "budget",
            Command::TrainFilter(_) => "train-filter",
            Command::Construct(_) => "construct",
            Command::Predict { .. } => "predict",
            Command::Audit { .. } => "audit",
            Command::WeaveTest(_) => "weave-test",
            Command::SdeBench(_) => "sde-bench",
            Command::CompareRnn(_) => "compare-rnn",
            Command::Inspect { .. } => "inspect",
        }
    }

    fn run_args(&self) -> Option<&RunArgs> {
        match self {
            Command::Budget(r)
            | Command::TrainFilter(r)
            | Command::Construct(r)
            | Command::WeaveTest(r)
            | Command::SdeBench(r)
            | Command::CompareRnn(r)
            | Command::Predict { run: r, .. }
            | Command::Audit { run: r, .. } => Some(r),
            Command::Inspect { .. } => None,
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 2,
        Error::BudgetInfeasible { .. } | Error::BudgetOverflow { .. } => 3,
        Error::Integrity { .. } => 5,
        _ => 1,
    }
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Ok => 0,
        Status::Shortfall => 4,
        Status::Failed => 1,
    }
}

/// What a command reports besides its artifacts.
struct Outcome {
    status: Status,
    summary: String,
    error: Option<ErrorRecord>,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Self { status: Status::Ok, summary, error: None }
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: ArtifactWriter,
    timings: Vec<Timing>,
}

impl Ctx<'_> {
    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f();
        self.timings.push(Timing { stage: stage.into(), seconds: t.elapsed().as_secs_f64() });
        r
    }
}

pub fn main_with(cli: Cli) -> ExitCode {
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code)
}

/// Runs one command; errors that occur after the output directory exists are
/// recorded in the manifest and mapped to an exit code.
pub fn run(cli: Cli) -> Result<u8> {
    let name = cli.command.name();
    if let Command::Inspect { bundle, json } = &cli.command {
        let text = inspect(bundle, *json)?;
        print!("{text}");
        return Ok(0);
    }
    let args = cli.command.run_args().expect("run command");
    let cfg = RunConfig::load(&args.config)?;
    let dir = cfg.output_dir(args.out.as_deref(), name);
    let mut ctx = Ctx { cfg: &cfg, out: ArtifactWriter::new(&dir)?, timings: Vec::new() };
    let result = match &cli.command {
        Command::Budget(_) => cmd_budget(&mut ctx),
        Command::TrainFilter(_) => cmd_train_filter(&mut ctx),
        Command::Construct(_) => cmd_construct(&mut ctx),
        Command::Predict { bundle, input, .. } => cmd_predict(&mut ctx, bundle, input.as_deref()),
        Command::Audit { bundle, pairs, .. } => cmd_audit(&mut ctx, bundle, *pairs),
        Command::WeaveTest(_) => cmd_weave_test(&mut ctx),
        Command::SdeBench(_) => cmd_sde_bench(&mut ctx),
        Command::CompareRnn(_) => cmd_compare_rnn(&mut ctx),
        Command::Inspect { .. } => unreachable!(),
    };
    let (outcome, code) = match result {
        Ok(o) => {
            let code = status_code(o.status);
            (o, code)
        }
        Err(e) => {
            let code = exit_code(&e);
            let record = ErrorRecord { kind: error_kind(&e).into(), message: e.to_string() };
            (Outcome { status: Status::Failed, summary: format!("error: {e}"), error: Some(record) }, code)
        }
    };
    let config = serde_json::to_value(&cfg).map_err(|e| Error::Format(e.to_string()))?;
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA,
        command: name.into(),
        library_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: sha256_hex(config.to_string().as_bytes()),
        config,
        artifacts: ctx.out.into_artifacts(),
        timings: ctx.timings,
        status: outcome.status,
        error: outcome.error,
    };
    let mpath = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))? + "\n";
    std::fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))?;
    if code == 0 || code == 4 {
        println!("{}", outcome.summary);
    } else {
        eprintln!("{}", outcome.summary);
    }
    println!("manifest: {}", mpath.display());
    Ok(code)
}

#[derive(Serialize)]
struct BudgetReport {
    schema_version: u32,
    filter: Option<filter::Budget>,
    hyper: Option<weave::HyperReport>,
}

fn cmd_budget(ctx: &mut Ctx) -> Result<Outcome> {
    let b = ctx.cfg.section("budget", &ctx.cfg.budget)?;
    if b.filter.is_none() && b.hyper.is_none() {
        return Err(Error::Config { path: "budget".into(), msg: "give budget.filter, budget.hyper or both".into() });
    }
    let filter = b.filter.as_ref().map(filter::budget).transpose()?;
    let hyper = b.hyper.as_ref().map(|h| hyper_report(h.p, h.q, h.delta, h.t)).transpose()?;
    let report = BudgetReport { schema_version: REPORT_SCHEMA, filter, hyper };
    ctx.out.write_json("budget.json", &report)?;
    Ok(Outcome::ok(serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?))
}

struct Problem {
    target: RecursiveTarget,
    train: Vec<Vec<f64>>,
    test: Vec<Vec<f64>>,
}

fn problem(cfg: &RunConfig, p: &ProblemSection) -> Result<Problem> {
    let target = RecursiveTarget::new(p.horizon, p.g).map_err(|e| Error::Config { path: "problem".into(), msg: e.to_string() })?;
    Ok(Problem {
        train: target.sample_inputs(p.n_train, derive_seed(cfg.seed, 0)),
        test: target.sample_inputs(p.n_test, derive_seed(cfg.seed, 1)),
        target,
    })
}

fn memory(m: &ModelSection) -> Result<usize> {
    match m.memory {
        MemoryRule::Fixed(0) => Err(Error::Config { path: "model.memory".into(), msg: "memory must be at least 1".into() }),
        MemoryRule::Fixed(k) => Ok(k),
        MemoryRule::Rate { c_mem, r } => {
            cno::memory_for(m.eps_a, r, c_mem).map_err(|e| Error::Config { path: "model.memory".into(), msg: e.to_string() })
        }
    }
}

fn cno_options(cfg: &RunConfig, m: &ModelSection) -> CnoOptions {
    CnoOptions {
        eps_d: m.eps_d,
        eps_a: m.eps_a,
        q: m.q,
        delta: m.delta,
        radius: m.radius,
        seed: cfg.seed,
        hidden: m.hidden.clone(),
        activation: m.activation,
        train: m.train.clone(),
    }
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Serialize)]
struct FilterReport {
    schema_version: u32,
    window: usize,
    memory: usize,
    dims: Vec<usize>,
    param_count: usize,
    train_mse: f64,
    train_max_err: f64,
    test_max_err: f64,
    gate: f64,
    split: filter::ErrorSplit,
}

fn cmd_train_filter(ctx: &mut Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let p = cfg.section("problem", &cfg.problem)?;
    let m = cfg.section("model", &cfg.model)?;
    let pr = problem(cfg, p)?;
    let mem = memory(m)?;
    let window = m.window.unwrap_or(p.horizon - 1);
    if window >= p.horizon {
        return Err(Error::Config { path: "model.window".into(), msg: format!("window {window} is beyond the horizon {}", p.horizon) });
    }
    let hidden = match m.hidden.len() {
        1 => &m.hidden[0],
        n if n == p.horizon => &m.hidden[window],
        _ => return Err(Error::Config { path: "model.hidden".into(), msg: "give one hidden list or one per window".into() }),
    };
    let ds = pr.target.causal_dataset(&pr.train, mem)?;
    let test = pr.target.causal_dataset(&pr.test, mem)?;
    let xy = |d: &cno::CausalDataset| -> Result<Dataset> {
        let xs = d.samples.iter().map(|s| d.window(&s.inputs, window)).collect::<Result<Vec<_>>>()?;
        Dataset::new(xs, d.samples.iter().map(|s| s.targets[window].clone()).collect())
    };
    let (train_set, test_set) = (xy(&ds)?, xy(&test)?);
    let mut dims = vec![mem];
    dims.extend_from_slice(hidden);
    dims.push(1);
    let spec = NetSpec::new(dims, m.activation)?;
    let opts = TrainOptions { seed: derive_seed(cfg.seed, window), ..m.train.clone() };
    let tr = ctx.timed("train", || net::train(&spec, &train_set, &opts))?;
    let max_err = |d: &Dataset| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (x, y) in d.xs.iter().zip(&d.ys) {
            worst = worst.max(l2(&net::forward(&spec, &tr.params, x)?, y));
        }
        Ok(worst)
    };
    let nf = NeuralFilter::new(SchauderSpace::euclidean(mem)?, SchauderSpace::euclidean(1)?, spec.clone(), tr.params.clone())?;
    let oracle = pr.target.window_oracle(mem);
    let target = |x: &Element| -> Result<Element> {
        match x {
            Element::Coords(w) => Ok(Element::Coords(oracle(window, w)?)),
            Element::Samples(_) => Err(Error::invalid("window oracle takes coordinates")),
        }
    };
    let samples: Vec<Element> = test_set.xs.iter().cloned().map(Element::Coords).collect();
    let split = error_decomposition(&target, &nf, &samples)?;
    let report = FilterReport {
        schema_version: REPORT_SCHEMA,
        window,
        memory: mem,
        dims: spec.dims().to_vec(),
        param_count: spec.param_count(),
        train_mse: tr.mse,
        train_max_err: max_err(&train_set)?,
        test_max_err: max_err(&test_set)?,
        gate: m.eps_a + m.eps_d,
        split,
    };
    ctx.out.write("filter.bin", &net::write_model(&spec, &tr.params), true)?;
    ctx.out.write_json("filter_report.json", &report)?;
    let status = if report.train_max_err < report.gate { Status::Ok } else { Status::Shortfall };
    Ok(Outcome {
        status,
        summary: format!(
            "window {window}: dims {:?}, {} params, train max err {:.3e}, test max err {:.3e}, gate {:.3e}",
            report.dims, report.param_count, report.train_max_err, report.test_max_err, report.gate
        ),
        error: None,
    })
}

fn write_bundle(out: &mut ArtifactWriter, model: &cno::CnoModel) -> Result<()> {
    let (header, weave) = encode_bundle(model)?;
    out.write(&format!("bundle/{WEAVE_FILE}"), &weave, true)?;
    out.write(&format!("bundle/{BUNDLE_FILE}"), &header, true)?;
    Ok(())
}

fn cmd_construct(ctx: &mut Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let p = cfg.section("problem", &cfg.problem)?;
    let m = cfg.section("model", &cfg.model)?;
    let pr = problem(cfg, p)?;
    let mem = memory(m)?;
    let ds = pr.target.causal_dataset(&pr.train, mem)?;
    let oracle = pr.target.window_oracle(mem);
    let opts = cno_options(cfg, m);
    let (model, report) = ctx.timed("construct", || construct_cno(&oracle, &ds, &opts))?;
    write_bundle(&mut ctx.out, &model)?;
    #[derive(Serialize)]
    struct Out<'a> {
        schema_version: u32,
        memory: usize,
        report: &'a cno::ConstructReport,
    }
    ctx.out.write_json("construct_report.json", &Out { schema_version: REPORT_SCHEMA, memory: mem, report: &report })?;
    let status = if report.any_shortfall() { Status::Shortfall } else { Status::Ok };
    let worst = report.windows.iter().map(|w| w.train_max_err).fold(0.0, f64::max);
    Ok(Outcome {
        status,
        summary: format!(
            "{} windows, P([d*]) = {}, M_T = {:.4e}, worst train error {:.3e}{}",
            report.windows.len(),
            report.param_count,
            report.m_t,
            worst,
            if report.any_shortfall() { " (shortfall)" } else { "" }
        ),
        error: None,
    })
}

#[derive(Serialize, Deserialize)]
struct PathFile {
    schema_version: u32,
    paths: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize)]
struct Predictions {
    schema_version: u32,
    horizon: usize,
    outputs: Vec<Vec<Vec<f64>>>,
    /// Per-window largest coordinate error against the configured target.
    max_err: Option<Vec<f64>>,
}

fn cmd_predict(ctx: &mut Ctx, bundle: &Path, input: Option<&Path>) -> Result<Outcome> {
    let model = load_bundle(bundle)?;
    let horizon = model.horizon();
    let (paths, targets) = match input {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let f: PathFile = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            if f.schema_version != REPORT_SCHEMA {
                return Err(Error::Format(format!("{}: unknown schema version {}", path.display(), f.schema_version)));
            }
            (f.paths, None)
        }
        None => {
            let p = ctx.cfg.section("problem", &ctx.cfg.problem)?;
            let pr = problem(ctx.cfg, p)?;
            let targets = pr.test.iter().map(|z| pr.target.trajectory(z)).collect::<Result<Vec<_>>>()?;
            (pr.test.iter().map(|z| z.iter().map(|&v| vec![v]).collect()).collect(), Some(targets))
        }
    };
    let outputs = ctx.timed("predict", || paths.iter().map(|x| predict(&model, x, horizon)).collect::<Result<Vec<_>>>())?;
    let max_err = targets.map(|ts| {
        let mut worst = vec![0.0f64; horizon];
        for (ys, t) in outputs.iter().zip(&ts) {
            for (i, y) in ys.iter().enumerate() {
                worst[i] = worst[i].max((y[0] - t[i]).abs());
            }
        }
        worst
    });
    let summary = match &max_err {
        Some(w) => format!("{} paths, final-window max error {:.3e}", outputs.len(), w.last().copied().unwrap_or(0.0)),
        None => format!("{} paths predicted", outputs.len()),
    };
    ctx.out.write_json("predictions.json", &Predictions { schema_version: REPORT_SCHEMA, horizon, outputs, max_err })?;
    Ok(Outcome::ok(summary))
}

#[derive(Serialize)]
struct AuditReport {
    schema_version: u32,
    pairs: usize,
    passed: usize,
    failed_indices: Vec<usize>,
}

fn cmd_audit(ctx: &mut Ctx, bundle: &Path, pairs: usize) -> Result<Outcome> {
    let model = load_bundle(bundle)?;
    let (t, d) = (model.horizon(), model.in_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(ctx.cfg.seed, 2));
    let mut failed = Vec::new();
    for k in 0..pairs {
        let a: Vec<Vec<f64>> = (0..t).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let i = rng.random_range(0..t);
        let mut b = a.clone();
        for x in b.iter_mut().skip(i + 1) {
            x.iter_mut().for_each(|v| *v = rng.random::<f64>());
        }
        if !causality_audit(&model, &a, &b, i)? {
            failed.push(k);
        }
    }
    let report = AuditReport { schema_version: REPORT_SCHEMA, pairs, passed: pairs - failed.len(), failed_indices: failed };
    ctx.out.write_json("audit.json", &report)?;
    let summary = format!("causality audit: {}/{} pairs passed", report.passed, pairs);
    if report.failed_indices.is_empty() {
        Ok(Outcome::ok(summary))
    } else {
        let error = Some(ErrorRecord { kind: "causality_violation".into(), message: summary.clone() });
        Ok(Outcome { status: Status::Failed, summary, error })
    }
}

#[derive(Serialize)]
struct WeaveTestReport {
    schema_version: u32,
    p: usize,
    t: usize,
    max_rel_err: f64,
    min_separation: f64,
    aspect_ratio: Option<f64>,
    aspect_bound: f64,
    hyper: weave::HyperReport,
}

fn cmd_weave_test(ctx: &mut Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let s = cfg.section("weave_test", &cfg.weave_test)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let thetas: Vec<Vec<f64>> = (0..s.t).map(|_| (0..s.p).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let o = WeaveOptions { q: s.q, delta: s.delta, radius: 1.0, seed: cfg.seed };
    let w = ctx.timed("weave", || build_weave_with(&thetas, &o))?;
    let got = ctx.timed("rollout", || rollout(&w, s.t))?;
    let mut max_rel: f64 = 0.0;
    for (a, b) in got.iter().zip(&thetas) {
        let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        max_rel = max_rel.max(l2(a, b) / norm);
    }
    let report = WeaveTestReport {
        schema_version: REPORT_SCHEMA,
        p: s.p,
        t: s.t,
        max_rel_err: max_rel,
        min_separation: w.packing.min_separation(),
        aspect_ratio: if s.t >= 2 { Some(aspect_ratio(&w.packing.points)?) } else { None },
        aspect_bound: 5f64.sqrt() / s.delta,
        hyper: hyper_report(s.p, s.q, s.delta, s.t)?.with_measured(&w),
    };
    ctx.out.write(WEAVE_FILE, &w.to_bytes(), true)?;
    ctx.out.write_json("weave_test.json", &report)?;
    Ok(Outcome::ok(format!(
        "T = {}, P = {}: max relative rollout error {:.3e}, min separation {:.4} > δ = {}",
        s.t, s.p, max_rel, report.min_separation, s.delta
    )))
}

#[derive(Serialize)]
struct SdeDatasetFile<'a> {
    schema_version: u32,
    oracle: &'a McOracle,
    kappa: f64,
    sigma: f64,
    grid: &'a [f64],
    modes: usize,
    /// `inputs[i]` and `targets[i]` hold one row of chaos coordinates per sample.
    inputs: Vec<Vec<Vec<f64>>>,
    targets: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize)]
struct SdeReport {
    schema_version: u32,
    isometry_max_z: f64,
    lipschitz: sde::LipschitzReport,
    truncation: Vec<f64>,
    heldout_max_err: Vec<f64>,
    gate: f64,
}

fn cmd_sde_bench(ctx: &mut Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let s = cfg.section("sde", &cfg.sde)?;
    let coeffs = SdeCoeffs::ornstein_uhlenbeck(s.kappa, s.sigma)?;
    let grid = cno::TimeGrid::uniform(s.steps + 1, s.dt)?;
    let mc = McOracle { n_paths: s.n_paths, steps_per_unit: s.steps_per_unit, seed: cfg.seed, tamed: s.tamed };
    let oracle = ctx.timed("record", || SdeWindowOracle::new(coeffs.clone(), grid.clone(), s.modes, &mc))?;
    let init = |n, k| InitBox { mean_lo: s.mean_lo, mean_hi: s.mean_hi, n_samples: n, seed: derive_seed(cfg.seed, k) };
    let train = ctx.timed("dataset", || build_sde_dataset(&oracle, &init(s.n_train, 10)))?;
    let test = ctx.timed("heldout", || build_sde_dataset(&oracle, &init(s.n_test, 11)))?;
    let eps_d = train.truncation.iter().copied().fold(0.0, f64::max);
    let opts = CnoOptions {
        eps_d,
        eps_a: s.eps_a,
        q: s.q,
        delta: s.delta,
        radius: 1.0,
        seed: cfg.seed,
        hidden: vec![s.hidden.clone()],
        activation: net::Activation::Prelu,
        train: s.train.clone(),
    };
    let (model, report) = ctx.timed("construct", || construct_cno(&oracle, &train.dataset, &opts))?;
    let windows = grid.len() - 1;
    let mut heldout = vec![0.0f64; windows];
    for sample in &test.dataset.samples {
        let y = predict(&model, &sample.inputs, windows)?;
        for (i, w) in heldout.iter_mut().enumerate() {
            *w = w.max(l2(&y[i], &sample.targets[i]));
        }
    }

    // Itô isometry on the synthesized initial variables of the last window.
    let basis = oracle.basis(windows - 1);
    let mut iso_z: f64 = 0.0;
    let mut lip_pairs = Vec::new();
    for sample in test.dataset.samples.iter() {
        let eta = ChaosCoords::from_coords(&sample.inputs[windows - 1], grid.times()[windows - 1])?;
        let xs = basis.synthesize(&eta)?;
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let n = sq.len() as f64;
        let mean = sq.iter().sum::<f64>() / n;
        let se = (sq.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0) / n).sqrt();
        iso_z = iso_z.max((mean - eta.second_moment()).abs() / se.max(f64::MIN_POSITIVE));
        lip_pairs.push(eta);
    }
    let pairs: Vec<(ChaosCoords, ChaosCoords)> = lip_pairs.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    let times = grid.times();
    let lip = ctx.timed("lipschitz", || sde::lipschitz_check(&coeffs, &pairs, times[windows - 1], times[windows], &mc))?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    csv.write_record(["schema_version", "window", "t_start", "t_end", "eps_d", "train_max_err", "heldout_max_err", "gate"]).map_err(fmt)?;
    for (i, w) in report.windows.iter().enumerate() {
        csv.write_record([
            REPORT_SCHEMA.to_string(),
            i.to_string(),
            times[i].to_string(),
            times[i + 1].to_string(),
            format!("{:e}", train.truncation[i]),
            format!("{:e}", w.train_max_err),
            format!("{:e}", heldout[i]),
            format!("{:e}", w.gate),
        ])
        .map_err(fmt)?;
    }
    let csv = csv.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    let per_window = |pick: fn(&cno::PathSample, usize) -> &Vec<f64>| -> Vec<Vec<Vec<f64>>> {
        (0..windows).map(|i| train.dataset.samples.iter().map(|s| pick(s, i).clone()).collect()).collect()
    };
    ctx.out.write_json(
        "sde_dataset.json",
        &SdeDatasetFile {
            schema_version: REPORT_SCHEMA,
            oracle: &mc,
            kappa: s.kappa,
            sigma: s.sigma,
            grid: times,
            modes: s.modes,
            inputs: per_window(|s, i| &s.inputs[i]),
            targets: per_window(|s, i| &s.targets[i]),
        },
    )?;
    ctx.out.write("sde_windows.csv", &csv, true)?;
    write_bundle(&mut ctx.out, &model)?;
    let gate = s.eps_a + eps_d;
    let rep = SdeReport { schema_version: REPORT_SCHEMA, isometry_max_z: iso_z, lipschitz: lip, truncation: train.truncation.clone(), heldout_max_err: heldout, gate };
    ctx.out.write_json("sde_report.json", &rep)?;
    let within = rep.heldout_max_err.iter().all(|&e| e <= gate);
    Ok(Outcome {
        status: if within && !report.any_shortfall() { Status::Ok } else { Status::Shortfall },
        summary: format!(
            "held-out max error per window {:?} vs gate {:.3e}; Lipschitz ratio {:.4} ≤ {:.4}; isometry |z| ≤ {:.2}",
            rep.heldout_max_err.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>(),
            gate,
            rep.lipschitz.max_ratio,
            rep.lipschitz.bound,
            iso_z
        ),
        error: None,
    })
}

#[derive(Serialize)]
struct CompareSummary {
    schema_version: u32,
    medians: Vec<bench::MedianRow>,
    direction: Option<bench::Direction>,
    direction_holds: Option<bool>,
    rnn_reduction: bool,
}

fn cmd_compare_rnn(ctx: &mut Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let s = cfg.section("compare", &cfg.compare)?;
    let target = RecursiveTarget::new(s.horizon, s.g).map_err(|e| Error::Config { path: "compare".into(), msg: e.to_string() })?;
    let ladder = s.ladder.clone().unwrap_or_else(|| default_ladder(s.horizon));
    let report = ctx.timed("compare", || bench::compare(&target, &ladder, &s.options))?;

    let rnn = ctx.timed("rnn_reduction", || {
        let Some(ModelConfig::Cno { hidden, memory, q, delta, .. }) = ladder.iter().find(|c| c.kind() == ModelKind::Cno) else {
            return Err(Error::invalid("ladder has no CNO entry"));
        };
        let train = target.sample_inputs(s.options.n_train, derive_seed(cfg.seed, 3));
        let ds = target.causal_dataset(&train, *memory)?;
        let oracle = target.window_oracle(*memory);
        let opts = CnoOptions {
            eps_d: 0.0,
            eps_a: s.options.eps_a,
            q: *q,
            delta: *delta,
            radius: 1.0,
            seed: cfg.seed,
            hidden: vec![hidden.clone()],
            activation: s.options.activation,
            train: s.options.train.clone(),
        };
        let (model, _) = construct_cno(&oracle, &ds, &opts)?;
        bench::rnn_reduction_check(&model, s.rnn_trials, cfg.seed)
    })?;

    ctx.out.write("compare.csv", report.to_csv()?.as_bytes(), false)?;
    let direction = report.direction();
    let summary = CompareSummary {
        schema_version: REPORT_SCHEMA,
        medians: report.medians(),
        direction_holds: direction.as_ref().and_then(bench::Direction::holds),
        direction,
        rnn_reduction: rnn,
    };
    ctx.out.write_json("compare_summary.json", &summary)?;
    let mut text = String::from("model          params  median max err\n");
    for m in &summary.medians {
        text += &format!("{:<14} {:>6}  {:.4e}\n", m.model, m.params, m.median_err);
    }
    text += &format!("direction holds: {:?}; RNN reduction exact: {rnn}", summary.direction_holds);
    if rnn {
        Ok(Outcome::ok(text))
    } else {
        let error = Some(ErrorRecord { kind: "rnn_reduction".into(), message: "RNN replay differs from predict".into() });
        Ok(Outcome { status: Status::Failed, summary: text, error })
    }
}

/// Verifies the bundle (and the run manifest beside it, when present) and
/// renders a summary.
pub fn inspect(bundle: &Path, json: bool) -> Result<String> {
    let model = load_bundle(bundle)?;
    if let Some(parent) = bundle.parent() {
        let mpath = parent.join(MANIFEST_FILE);
        if mpath.exists() {
            RunManifest::read(&mpath)?.verify(parent)?;
        }
    }
    let summary = inspect_model(&model)?;
    if json {
        Ok(serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))? + "\n")
    } else {
        Ok(summary.render())
    }
}
