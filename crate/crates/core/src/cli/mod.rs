//! The `raf` command-line frontend.
//!
//! Settings are resolved as: built-in defaults, then the optional JSON config
//! file, then command-line flags. The seed falls back to `RAF_SEED` when
//! neither the file nor the flags set one.

mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::experiments::{self, CdpSource, CdpSpec, InitVariant, Snr, Sweep, SweepSpec};
use crate::init::{self, InitConfig};
use crate::linalg;
use crate::metrics::{self, EvalReport, DEFAULT_SUCCESS_THRESHOLD};
use crate::rng;
use crate::sensing::{
    self, AnyInstance, CdpModel, GaussianModel, MeasurementOperator, ModelKind, ProblemInstance,
};
use crate::solver::{self, SolverConfig, WeightScheme};

pub use config::{parse_list, parse_ratios, FileConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_RECOVERED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "raf",
    version,
    about = "Phase retrieval with reweighted amplitude flow"
)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug); logs go to stderr
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    /// Worker threads for Monte-Carlo trials (default: logical cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample (or load) one instance, run initialization and the reweighted flow, print the evaluation as JSON
    Solve(SolveArgs),
    /// Run a Monte-Carlo experiment and write CSV + JSON reports
    Bench(BenchArgs),
    /// Coded-diffraction recovery of an image or of random complex signals
    Cdp(CdpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Raf,
    Constant,
    Hard,
}

/// Flags shared by every subcommand that runs the algorithm.
#[derive(Debug, Args, Default)]
pub struct AlgoArgs {
    /// JSON config file (keys mirror the solver/init settings; unknown keys are rejected)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed (falls back to RAF_SEED, then 0)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gradient iterations T
    #[arg(long)]
    pub iters: Option<usize>,
    /// Power iterations for the initialization
    #[arg(long)]
    pub power_iters: Option<usize>,
    /// Step size μ
    #[arg(long)]
    pub mu: Option<f64>,
    /// RAF weighting parameter β
    #[arg(long)]
    pub beta: Option<f64>,
    /// Initialization weight exponent γ
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Fraction of measurements selected for the initialization
    #[arg(long)]
    pub subset_fraction: Option<f64>,
    /// Gradient weighting scheme
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Truncation threshold α for --scheme hard
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Stop once ‖ψ − |Az|‖/‖ψ‖ falls below this (0 = run all iterations)
    #[arg(long)]
    pub stop_tol: Option<f64>,
    /// Power-method residual tolerance (0 = run all power iterations)
    #[arg(long)]
    pub eig_tol: Option<f64>,
    /// Success threshold on ‖ψ − |Az|‖/‖x‖
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Measurement model
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Signal length
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of Gaussian measurements (default 5n)
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of CDP masks K (default 4)
    #[arg(long)]
    pub masks: Option<usize>,
    /// Additive noise level in dB ("inf" = noiseless)
    #[arg(long)]
    pub snr: Option<String>,
    /// Load the problem instance from this JSON file instead of sampling one
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Write the sampled instance to this JSON file
    #[arg(long)]
    pub save_instance: Option<PathBuf>,
    /// Also write the JSON report to this file
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record dist(z^t, x) in the trace written with --out
    #[arg(long)]
    pub trace: bool,
    #[command(flatten)]
    pub algo: AlgoArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchExperiment {
    SuccessRate,
    Nmse,
    Init,
    LimitHist,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Which experiment to run
    #[arg(value_enum)]
    pub experiment: BenchExperiment,
    /// Measurement model
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Signal length (default 200)
    #[arg(long)]
    pub n: Option<usize>,
    /// m/n sweep: "start:stop:step" (inclusive) or a comma list
    #[arg(long)]
    pub ratios: Option<String>,
    /// SNR list in dB for the nmse experiment, e.g. "10,20,30" ("inf" = noiseless)
    #[arg(long)]
    pub snrs: Option<String>,
    /// m/n values for the nmse experiment, e.g. "3,4,5"
    #[arg(long)]
    pub mn: Option<String>,
    /// Monte-Carlo trials per sweep point (default 100)
    #[arg(long)]
    pub trials: Option<usize>,
    /// Keep per-iteration traces in the JSON report
    #[arg(long)]
    pub traces: bool,
    /// CSV output path; the JSON report is written next to it with a .json extension
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub algo: AlgoArgs,
}

#[derive(Debug, Args)]
pub struct CdpArgs {
    /// PNG or PGM image to recover (each color band independently)
    #[arg(long, conflicts_with = "random_signal")]
    pub image: Option<PathBuf>,
    /// Recover random complex signals of this length instead of an image
    #[arg(long)]
    pub random_signal: Option<usize>,
    /// Number of masks K
    #[arg(long)]
    pub masks: Option<usize>,
    /// Trials for --random-signal (default 1)
    #[arg(long)]
    pub trials: Option<usize>,
    /// Recovered image path
    #[arg(long, default_value = "recovered.png")]
    pub output: PathBuf,
    /// JSON report path
    #[arg(long, default_value = "cdp_report.json")]
    pub report: PathBuf,
    #[command(flatten)]
    pub algo: AlgoArgs,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            };
        }
    };
    init_logging(cli.verbose);
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    let outcome = pool.install(|| match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => cmd_bench(args).map(|()| EXIT_OK),
        Command::Cdp(args) => cmd_cdp(args).map(|()| EXIT_OK),
    });
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            EXIT_USAGE
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

/// Settings after merging defaults, config file and flags.
struct Resolved {
    file: FileConfig,
    seed: u64,
    init: InitConfig,
    solver: SolverConfig,
    threshold: f64,
}

fn resolve(
    algo: &AlgoArgs,
    kind: ModelKind,
    init_base: InitConfig,
    solver_base: SolverConfig,
) -> anyhow::Result<Resolved> {
    let file = match &algo.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut init = init_base;
    let mut solver = solver_base;
    file.init.apply(&mut init);
    file.solver.apply(&mut solver);

    if let Some(v) = algo.power_iters {
        init.power_iters = v;
    }
    if let Some(v) = algo.gamma {
        init.gamma = v;
    }
    if let Some(v) = algo.subset_fraction {
        init.subset_fraction = v;
    }
    if let Some(v) = algo.eig_tol {
        init.eig_tol = v;
    }
    if let Some(v) = algo.iters {
        solver.max_iters = v;
    }
    if let Some(v) = algo.mu {
        solver.step_size = v;
    }
    if let Some(v) = algo.stop_tol {
        solver.stop_tol = v;
    }
    solver.weight_scheme = match (algo.scheme, solver.weight_scheme) {
        (Some(SchemeArg::Constant), _) => WeightScheme::Constant,
        (Some(SchemeArg::Hard), WeightScheme::HardTruncation { alpha }) => {
            WeightScheme::HardTruncation { alpha }
        }
        (Some(SchemeArg::Hard), _) => WeightScheme::HardTruncation { alpha: 1.0 },
        (Some(SchemeArg::Raf), WeightScheme::Raf { beta }) => WeightScheme::Raf { beta },
        (Some(SchemeArg::Raf), _) => SolverConfig::for_kind(kind).weight_scheme,
        (None, current) => current,
    };
    match (&mut solver.weight_scheme, algo.beta, algo.alpha) {
        (WeightScheme::Raf { beta }, Some(b), _) => *beta = b,
        (WeightScheme::HardTruncation { alpha }, _, Some(a)) => *alpha = a,
        (_, Some(_), _) => bail!("--beta only applies to --scheme raf"),
        (_, _, Some(_)) => bail!("--alpha only applies to --scheme hard"),
        _ => {}
    }

    let seed = match algo.seed.or(file.seed) {
        Some(seed) => seed,
        None => match std::env::var("RAF_SEED") {
            Ok(text) => text
                .trim()
                .parse()
                .with_context(|| format!("RAF_SEED='{text}' is not an unsigned integer"))?,
            Err(_) => 0,
        },
    };
    let threshold = algo
        .threshold
        .or(file.threshold)
        .unwrap_or(DEFAULT_SUCCESS_THRESHOLD);
    if !(threshold > 0.0) {
        bail!("threshold must be > 0");
    }
    init.validate()?;
    solver.validate()?;
    Ok(Resolved {
        file,
        seed,
        init,
        solver,
        threshold,
    })
}

fn peek_model(algo: &AlgoArgs, flag: Option<ModelKind>) -> anyhow::Result<ModelKind> {
    if let Some(kind) = flag {
        return Ok(kind);
    }
    let from_file = match &algo.config {
        Some(path) => FileConfig::load(path)?.model,
        None => None,
    };
    Ok(from_file.unwrap_or(ModelKind::RealGaussian))
}

#[derive(Debug, Serialize)]
struct SolveReport {
    model: ModelKind,
    n: usize,
    m: usize,
    seed: u64,
    noise_sigma: f64,
    iterations: usize,
    final_loss: f64,
    init_relative_error: f64,
    #[serde(flatten)]
    eval: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<Vec<solver::TraceRecord>>,
}

pub fn cmd_solve(args: &SolveArgs) -> anyhow::Result<i32> {
    let loaded = match &args.instance {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read instance {}", path.display()))?;
            let inst: AnyInstance = serde_json::from_str(&text)
                .with_context(|| format!("invalid instance file {}", path.display()))?;
            inst.validate()?;
            Some(inst)
        }
        None => None,
    };
    let kind = match &loaded {
        Some(inst) => inst.kind(),
        None => peek_model(&args.algo, args.model)?,
    };
    let cfg = resolve(
        &args.algo,
        kind,
        InitConfig::default(),
        SolverConfig::for_kind(kind),
    )?;
    let seed = cfg.seed;
    let instance = match loaded {
        Some(inst) => inst,
        None => {
            let n = args.n.or(cfg.file.n).unwrap_or(100);
            if n == 0 {
                bail!("--n must be ≥ 1");
            }
            let count = match kind {
                ModelKind::Cdp => args.masks.or(cfg.file.masks).unwrap_or(4),
                _ => args.m.or(cfg.file.m).unwrap_or(5 * n),
            };
            let snr = match args.snr.as_deref().or(cfg.file.snr.as_deref()) {
                Some(text) => text.parse::<Snr>()?,
                None => Snr::Noiseless,
            };
            sample_instance(kind, n, count, snr, seed)?
        }
    };
    if let Some(path) = &args.save_instance {
        std::fs::write(path, serde_json::to_string(&instance)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }

    let init_cfg = InitConfig {
        seed: rng::derive_seed(seed, "solve/power", &[]),
        ..cfg.init
    };
    let solver_cfg = SolverConfig {
        trace_distance: args.trace || cfg.solver.trace_distance,
        ..cfg.solver
    };
    let started = Instant::now();
    let mut report = match &instance {
        AnyInstance::RealGaussian(p) => solve_one(p, &init_cfg, &solver_cfg, cfg.threshold)?,
        AnyInstance::ComplexGaussian(p) => solve_one(p, &init_cfg, &solver_cfg, cfg.threshold)?,
        AnyInstance::Cdp(p) => solve_one(p, &init_cfg, &solver_cfg, cfg.threshold)?,
    };
    log::info!("solve finished in {:.3?}", started.elapsed());
    report.seed = seed;

    let stdout_report = SolveReport {
        trace: None,
        ..clone_report(&report)
    };
    println!("{}", serde_json::to_string_pretty(&stdout_report)?);
    if let Some(path) = &args.out {
        write_text(path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    Ok(if report.eval.success {
        EXIT_OK
    } else {
        EXIT_NOT_RECOVERED
    })
}

fn clone_report(r: &SolveReport) -> SolveReport {
    SolveReport {
        model: r.model,
        n: r.n,
        m: r.m,
        seed: r.seed,
        noise_sigma: r.noise_sigma,
        iterations: r.iterations,
        final_loss: r.final_loss,
        init_relative_error: r.init_relative_error,
        eval: r.eval,
        trace: r.trace.clone(),
    }
}

fn sample_instance(
    kind: ModelKind,
    n: usize,
    count: usize,
    snr: Snr,
    seed: u64,
) -> anyhow::Result<AnyInstance> {
    let model_seed = rng::derive_seed(seed, "solve/model", &[]);
    let signal_seed = rng::derive_seed(seed, "solve/signal", &[]);
    let noise_seed = rng::derive_seed(seed, "solve/noise", &[]);
    fn build<M: MeasurementOperator>(
        model: M,
        snr: Snr,
        signal_seed: u64,
        noise_seed: u64,
    ) -> anyhow::Result<ProblemInstance<M>> {
        let x = sensing::sample_signal::<M::Scalar>(model.signal_len(), signal_seed);
        let sigma = sensing::sigma_for_snr(&model, &x, snr.as_db())?;
        Ok(sensing::measure(model, x, sigma, noise_seed)?)
    }
    Ok(match kind {
        ModelKind::RealGaussian => AnyInstance::RealGaussian(build(
            GaussianModel::<f64>::sample(count, n, model_seed)?,
            snr,
            signal_seed,
            noise_seed,
        )?),
        ModelKind::ComplexGaussian => AnyInstance::ComplexGaussian(build(
            GaussianModel::<Complex64>::sample(count, n, model_seed)?,
            snr,
            signal_seed,
            noise_seed,
        )?),
        ModelKind::Cdp => AnyInstance::Cdp(build(
            CdpModel::sample(n, count, model_seed)?,
            snr,
            signal_seed,
            noise_seed,
        )?),
    })
}

fn solve_one<M: MeasurementOperator>(
    instance: &ProblemInstance<M>,
    init_cfg: &InitConfig,
    solver_cfg: &SolverConfig,
    threshold: f64,
) -> anyhow::Result<SolveReport> {
    let start = init::initialize(instance, init_cfg)?;
    let x_norm = linalg::norm(&instance.x_true);
    let init_relative_error =
        metrics::distance(&start.z0, &instance.x_true)? / if x_norm > 0.0 { x_norm } else { 1.0 };
    let result = solver::solve(instance, &start.z0, solver_cfg)?;
    let eval = metrics::evaluate(instance, &result.z_final, threshold)?;
    Ok(SolveReport {
        model: instance.model.kind(),
        n: instance.n(),
        m: instance.m(),
        seed: 0,
        noise_sigma: instance.noise_sigma,
        iterations: result.iterations_run,
        final_loss: result.final_loss(),
        init_relative_error,
        eval,
        trace: Some(result.trace),
    })
}

pub fn cmd_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let kind = peek_model(&args.algo, args.model)?;
    let cfg = resolve(
        &args.algo,
        kind,
        InitConfig::default(),
        SolverConfig::for_kind(kind),
    )?;
    let file = &cfg.file;
    let n = args.n.or(file.n).unwrap_or(200);
    let ratios = |default: &str| -> anyhow::Result<Vec<f64>> {
        match (&args.ratios, &file.ratios) {
            (Some(text), _) => Ok(parse_ratios(text)?),
            (None, Some(list)) => Ok(list.resolve()?),
            (None, None) => Ok(parse_ratios(default)?),
        }
    };
    let sweep = match args.experiment {
        BenchExperiment::SuccessRate => Sweep::SuccessRate {
            ratios: ratios("1:5:0.5")?,
        },
        BenchExperiment::Nmse => {
            let snrs = match (&args.snrs, &file.snrs) {
                (Some(text), _) => parse_list::<Snr>(text)?,
                (None, Some(list)) => list.clone(),
                (None, None) => parse_list::<Snr>("10,20,30,40,50")?,
            };
            let mn = match (&args.mn, &file.mn) {
                (Some(text), _) => parse_list::<f64>(text)?,
                (None, Some(list)) => list.clone(),
                (None, None) => vec![3.0, 4.0, 5.0],
            };
            Sweep::NmseVsSnr { snrs, ratios: mn }
        }
        BenchExperiment::Init => Sweep::InitQuality {
            ratios: ratios("2,4,6,8,10")?,
            variants: InitVariant::defaults(),
        },
        BenchExperiment::LimitHist => Sweep::LimitHistogram,
    };
    let spec = SweepSpec {
        trials: args.trials.or(file.trials).unwrap_or(100),
        master_seed: cfg.seed,
        init: cfg.init,
        solver: cfg.solver,
        success_threshold: cfg.threshold,
        record_traces: args.traces,
        ..SweepSpec::new(sweep, kind, n)
    };

    let started = Instant::now();
    let report = experiments::run_sweep(&spec)?;
    log::info!(
        "{} finished in {:.3?}",
        spec.sweep.kind().tag(),
        started.elapsed()
    );

    let csv_path = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", spec.sweep.kind().tag())));
    let json_path = csv_path.with_extension("json");
    write_text(&csv_path, &report.to_csv_string()?)?;
    write_text(&json_path, &report.to_json_string()?)?;
    print!("{}", report.summary_table());
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

pub fn cmd_cdp(args: &CdpArgs) -> anyhow::Result<()> {
    let base = CdpSpec::new(CdpSource::RandomSignal { n: 1, trials: 1 }, 4);
    let cfg = resolve(
        &args.algo,
        ModelKind::Cdp,
        base.init.clone(),
        base.solver.clone(),
    )?;
    let masks = args.masks.or(cfg.file.masks).unwrap_or(4);
    if masks == 0 {
        bail!("--masks must be ≥ 1");
    }
    let source = match (&args.image, args.random_signal) {
        (Some(path), None) => CdpSource::Image(path.clone()),
        (None, Some(n)) => {
            if n == 0 {
                bail!("--random-signal must be ≥ 1");
            }
            CdpSource::RandomSignal {
                n,
                trials: args.trials.or(cfg.file.trials).unwrap_or(1),
            }
        }
        (None, None) => bail!("one of --image or --random-signal is required"),
        (Some(_), Some(_)) => bail!("--image and --random-signal are mutually exclusive"),
    };
    let spec = CdpSpec {
        source,
        masks,
        master_seed: cfg.seed,
        init: cfg.init,
        solver: cfg.solver,
        success_threshold: cfg.threshold,
    };
    let started = Instant::now();
    let outcome = experiments::run_cdp_recovery(&spec).map_err(|e| match (&spec.source, e) {
        (CdpSource::Image(path), err) => {
            anyhow::anyhow!("cannot recover {}: {err}", path.display())
        }
        (_, err) => err.into(),
    })?;
    log::info!("cdp recovery finished in {:.3?}", started.elapsed());

    if let Some(img) = &outcome.recovered {
        img.save_with_format(&args.output, image::ImageFormat::Png)
            .with_context(|| format!("cannot write {}", args.output.display()))?;
        println!("wrote {}", args.output.display());
    }
    write_text(&args.report, &outcome.report.to_json_string()?)?;
    print!("{}", outcome.report.summary_table());
    println!("wrote {}", args.report.display());
    Ok(())
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
