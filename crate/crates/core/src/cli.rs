//! Command-line front end. Every command reads and writes the versioned
//! JSON files of [`crate::dataset`]; failures print one JSON line on stderr.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{episode_config, run_benchmark, BenchOptions, Method};
use crate::dataset::{check_schema, read_json, write_json, Dataset, Episode, SCHEMA};
use crate::dloc::DlocOptions;
use crate::error::{FitError, Result};
use crate::features::{build_lagged, kernel_values, KernelMatrix};
use crate::model::{log_likelihood, policies, value_recursion, ModelConfig, RLParams};
use crate::recovery::{recover_all, RecoveryMethod, RecoveryOptions};
use crate::rng::stream_seed;
use crate::sim::{make_dataset, Bandit, EnvSpec, Setup};
use crate::surrogate::{solve_surrogate, SolveStatus, SolverOptions, SurrogateProblem};

pub const EXIT_FILE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "banditfit", version, about = "Fit forgetting Q-learning models to bandit behavior")]
pub struct Cli {
    /// TOML file with default option values; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for episode-level parallelism (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Fit the convex surrogate to every episode.
    Fit(FitArgs),
    /// Recover learning rates and sensitivities from fitted kernels.
    Recover(RecoverArgs),
    /// Write values and choice probabilities for every episode.
    Predict(PredictArgs),
    /// Print the negative log-likelihood of every episode.
    Score(ScoreArgs),
    /// Compare fitting methods on a dataset.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetupArg {
    Bsc,
    Ind,
    Sub,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BanditArg {
    #[value(name = "2ab")]
    #[serde(rename = "2ab")]
    TwoArm,
    #[value(name = "10ab")]
    #[serde(rename = "10ab")]
    TenArm,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Direct,
    Log,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub setup: Option<SetupArg>,
    #[arg(long, value_enum)]
    pub bandit: Option<BanditArg>,
    /// Trials per episode.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Number of reward lags kept (default: episode length).
    #[arg(long)]
    pub horizon: Option<usize>,
    /// One learning rate and sensitivity per signal, shared by all arms.
    #[arg(long, conflicts_with = "per_arm")]
    pub shared: bool,
    /// Separate parameters per arm.
    #[arg(long)]
    pub per_arm: bool,
    /// Signal weights; a single value is repeated for every signal.
    #[arg(long, value_delimiter = ',')]
    pub w: Option<Vec<f64>>,
}

#[derive(Debug, Args, Default)]
pub struct SolverArgs {
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol_rel_obj: Option<f64>,
    #[arg(long)]
    pub tol_pg: Option<f64>,
    #[arg(long)]
    pub tol_gap: Option<f64>,
    #[arg(long)]
    pub no_restart: bool,
    /// Per-signal cap on the first kernel column (default: the dataset's
    /// sensitivity bounds).
    #[arg(long, value_delimiter = ',', conflicts_with = "no_beta_cap")]
    pub beta_cap: Option<Vec<f64>>,
    #[arg(long)]
    pub no_beta_cap: bool,
}

#[derive(Debug, Args, Default)]
pub struct RecoveryArgs {
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub local_max_iters: Option<usize>,
    #[arg(long)]
    pub recovery_tol: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
}

#[derive(Debug, Args, Default)]
pub struct DlocArgs {
    #[arg(long)]
    pub dloc_restarts: Option<usize>,
    #[arg(long)]
    pub dloc_max_iters: Option<usize>,
    #[arg(long)]
    pub dloc_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Solution file written by `fit`.
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub recovery: RecoveryArgs,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Parameters file written by `recover`.
    #[arg(long, conflicts_with_all = ["solution", "truth"])]
    pub params: Option<PathBuf>,
    /// Solution file written by `fit`.
    #[arg(long, conflicts_with = "truth")]
    pub solution: Option<PathBuf>,
    /// Use the ground-truth parameters stored in the dataset.
    #[arg(long)]
    pub truth: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub source: SourceArgs,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Comma-separated method tags (default: all).
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub truncated_horizon: Option<usize>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub recovery: RecoveryArgs,
    #[command(flatten)]
    pub dloc: DlocArgs,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSolver {
    max_iters: Option<usize>,
    tol_rel_obj: Option<f64>,
    tol_pg: Option<f64>,
    tol_gap: Option<f64>,
    restart: Option<bool>,
    beta_cap: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRecovery {
    restarts: Option<usize>,
    local_max_iters: Option<usize>,
    tol: Option<f64>,
    method: Option<MethodArg>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDloc {
    restarts: Option<usize>,
    local_max_iters: Option<usize>,
    tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSimulate {
    setup: Option<SetupArg>,
    bandit: Option<BanditArg>,
    n: Option<usize>,
    episodes: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBenchmark {
    methods: Option<Vec<String>>,
    truncated_horizon: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    jobs: Option<usize>,
    horizon: Option<usize>,
    shared: Option<bool>,
    w: Option<OneOrMany>,
    #[serde(default)]
    solver: FileSolver,
    #[serde(default)]
    recovery: FileRecovery,
    #[serde(default)]
    dloc: FileDloc,
    #[serde(default)]
    simulate: FileSimulate,
    #[serde(default)]
    benchmark: FileBenchmark,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text =
        std::fs::read_to_string(path).map_err(|source| FitError::Io { path: path.to_path_buf(), source })?;
    toml::from_str(&text).map_err(|e| FitError::Config(format!("{}: {}", path.display(), e.message())))
}

/// Fitted surrogate of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSolution {
    pub episode_id: usize,
    pub horizon: usize,
    pub shared: bool,
    pub w: Vec<f64>,
    pub beta_cap: Option<Vec<f64>>,
    pub beta_box: Vec<(f64, f64)>,
    pub g_star: Vec<KernelMatrix>,
    pub x_star: Vec<Vec<f64>>,
    pub pi_star: Vec<Vec<f64>>,
    pub j_lb: f64,
    pub dual_gap: Option<f64>,
    pub iters: usize,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub schema: String,
    pub episodes: Vec<EpisodeSolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeParams {
    pub episode_id: usize,
    pub w: Vec<f64>,
    pub params: RLParams,
    pub residuals: Vec<Vec<f64>>,
    pub fits_exact: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub schema: String,
    pub episodes: Vec<EpisodeParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodePrediction {
    pub episode_id: usize,
    pub x: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
    /// Per-signal values `[signal][t][arm]`.
    pub z: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionFile {
    pub schema: String,
    pub episodes: Vec<EpisodePrediction>,
}

impl SolutionFile {
    pub fn read(path: &Path) -> Result<Self> {
        let f: SolutionFile = read_json(path)?;
        check_schema(path, &f.schema)?;
        Ok(f)
    }
}

impl ParamsFile {
    pub fn read(path: &Path) -> Result<Self> {
        let f: ParamsFile = read_json(path)?;
        check_schema(path, &f.schema)?;
        Ok(f)
    }
}

impl PredictionFile {
    pub fn read(path: &Path) -> Result<Self> {
        let f: PredictionFile = read_json(path)?;
        check_schema(path, &f.schema)?;
        Ok(f)
    }
}

fn broadcast_weights(w: Option<Vec<f64>>, k: usize) -> Result<Vec<f64>> {
    match w {
        None => Ok(vec![1.0; k]),
        Some(v) if v.len() == 1 => Ok(vec![v[0]; k]),
        Some(v) if v.len() == k => Ok(v),
        Some(v) => Err(FitError::config(format!("{} weights for {k} signals", v.len()))),
    }
}

fn solver_options(args: &SolverArgs, file: &FileSolver, default_cap: Option<Vec<f64>>) -> SolverOptions {
    let d = SolverOptions::default();
    let beta_cap = if args.no_beta_cap {
        None
    } else {
        args.beta_cap.clone().or_else(|| file.beta_cap.clone()).or(default_cap)
    };
    SolverOptions {
        max_iters: args.max_iters.or(file.max_iters).unwrap_or(d.max_iters),
        tol_rel_obj: args.tol_rel_obj.or(file.tol_rel_obj).unwrap_or(d.tol_rel_obj),
        tol_pg: args.tol_pg.or(file.tol_pg).unwrap_or(d.tol_pg),
        tol_gap: args.tol_gap.or(file.tol_gap).unwrap_or(d.tol_gap),
        restart: if args.no_restart { false } else { file.restart.unwrap_or(d.restart) },
        beta_cap,
    }
}

fn recovery_options(args: &RecoveryArgs, file: &FileRecovery, seed: u64) -> RecoveryOptions {
    let d = RecoveryOptions::default();
    let method = match args.method.or(file.method) {
        Some(MethodArg::Log) => RecoveryMethod::LogLS,
        _ => RecoveryMethod::DirectLS,
    };
    RecoveryOptions {
        restarts: args.restarts.or(file.restarts).unwrap_or(d.restarts),
        local_max_iters: args.local_max_iters.or(file.local_max_iters).unwrap_or(d.local_max_iters),
        tol: args.recovery_tol.or(file.tol).unwrap_or(d.tol),
        seed,
        method,
        ..d
    }
}

fn dloc_options(args: &DlocArgs, file: &FileDloc, seed: u64) -> DlocOptions {
    let d = DlocOptions::default();
    DlocOptions {
        restarts: args.dloc_restarts.or(file.restarts).unwrap_or(d.restarts),
        local_max_iters: args.dloc_max_iters.or(file.local_max_iters).unwrap_or(d.local_max_iters),
        tol: args.dloc_tol.or(file.tol).unwrap_or(d.tol),
        seed,
    }
}

fn finite_caps(boxes: &[(f64, f64)]) -> Option<Vec<f64>> {
    boxes.iter().all(|b| b.1.is_finite()).then(|| boxes.iter().map(|b| b.1).collect())
}

fn episode_model(ds: &Dataset, ep: &Episode, model: &ModelArgs, file: &FileConfig) -> Result<ModelConfig> {
    let base = episode_config(&ds.spec, ep);
    let shared = if model.shared {
        true
    } else if model.per_arm {
        false
    } else {
        file.shared.unwrap_or(base.shared)
    };
    let w = model.w.clone().or_else(|| {
        file.w.clone().map(|w| match w {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        })
    });
    let p = model.horizon.or(file.horizon).unwrap_or(base.n);
    if p < 1 || p > base.n {
        return Err(FitError::config(format!("horizon {p} outside [1, {}]", base.n)));
    }
    let cfg = base.with_shared(shared).with_weights(broadcast_weights(w, ep.k())?).with_horizon(p);
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs, file: &FileConfig) -> Result<()> {
    let setup = match args.setup.or(file.simulate.setup).unwrap_or(SetupArg::Bsc) {
        SetupArg::Bsc => Setup::Bsc,
        SetupArg::Ind => Setup::Ind,
        SetupArg::Sub => Setup::Sub,
    };
    let bandit = match args.bandit.or(file.simulate.bandit).unwrap_or(BanditArg::TwoArm) {
        BanditArg::TwoArm => Bandit::TwoArm,
        BanditArg::TenArm => Bandit::TenArm,
    };
    let n = args.n.or(file.simulate.n).unwrap_or(200);
    let episodes = args.episodes.or(file.simulate.episodes).unwrap_or(100);
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    make_dataset(&EnvSpec::preset(setup, bandit, n, seed), episodes)?.write(&args.output)
}

fn cmd_fit(args: &FitArgs, file: &FileConfig) -> Result<()> {
    let ds = Dataset::read(&args.input)?;
    let episodes = ds
        .episodes
        .par_iter()
        .enumerate()
        .map(|(e, ep)| {
            let cfg = episode_model(&ds, ep, &args.model, file)?;
            let opts = solver_options(&args.solver, &file.solver, finite_caps(&cfg.beta_box));
            let beta_cap = opts.beta_cap.clone();
            let sol = solve_surrogate(&SurrogateProblem::new(&ep.rewards, &ep.actions, &cfg, opts)?)?;
            Ok(EpisodeSolution {
                episode_id: e,
                horizon: cfg.p,
                shared: cfg.shared,
                w: cfg.w.clone(),
                beta_cap,
                beta_box: cfg.beta_box.clone(),
                g_star: sol.g_star,
                x_star: sol.x_star,
                pi_star: sol.pi_star,
                j_lb: sol.j_lb,
                dual_gap: sol.dual_gap,
                iters: sol.iters,
                status: sol.status,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(&args.output, &SolutionFile { schema: SCHEMA.to_string(), episodes })
}

fn cmd_recover(cli: &Cli, args: &RecoverArgs, file: &FileConfig) -> Result<()> {
    let sol = SolutionFile::read(&args.input)?;
    let base = recovery_options(&args.recovery, &file.recovery, cli.seed.or(file.seed).unwrap_or(0));
    let episodes = sol
        .episodes
        .par_iter()
        .map(|s| {
            let opts = RecoveryOptions { seed: stream_seed(base.seed, s.episode_id as u64, 2), ..base.clone() };
            let rec = recover_all(&s.g_star, s.shared, &s.beta_box, &opts)?;
            Ok(EpisodeParams {
                episode_id: s.episode_id,
                w: s.w.clone(),
                params: rec.params,
                residuals: rec.residuals,
                fits_exact: rec.fits_exact,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(&args.output, &ParamsFile { schema: SCHEMA.to_string(), episodes })
}

enum Source {
    Params(ParamsFile),
    Solution(SolutionFile),
    Truth,
}

fn load_source(args: &SourceArgs) -> Result<Source> {
    match (&args.params, &args.solution, args.truth) {
        (Some(p), _, _) => Ok(Source::Params(ParamsFile::read(p)?)),
        (None, Some(s), _) => Ok(Source::Solution(SolutionFile::read(s)?)),
        (None, None, true) => Ok(Source::Truth),
        (None, None, false) => Err(FitError::config("one of --params, --solution or --truth is required")),
    }
}

fn find<'a, T>(items: &'a [T], id: usize, key: impl Fn(&T) -> usize, what: &str) -> Result<&'a T> {
    items
        .iter()
        .find(|t| key(t) == id)
        .ok_or_else(|| FitError::shape(format!("{what} has no entry for episode {id}")))
}

fn predict_episode(ds: &Dataset, e: usize, source: &Source) -> Result<EpisodePrediction> {
    let ep = &ds.episodes[e];
    let base = episode_config(&ds.spec, ep);
    let trace = match source {
        Source::Params(f) => {
            let p = find(&f.episodes, e, |p| p.episode_id, "parameters file")?;
            let cfg = base.with_shared(p.params.shared).with_weights(p.w.clone());
            value_recursion(&p.params, &ep.rewards, &cfg)?
        }
        Source::Truth => {
            let params = ep
                .true_params
                .as_ref()
                .ok_or_else(|| FitError::config(format!("episode {e} has no ground-truth parameters")))?;
            value_recursion(params, &ep.rewards, &base)?
        }
        Source::Solution(f) => {
            let s = find(&f.episodes, e, |s| s.episode_id, "solution file")?;
            kernel_values(&s.g_star, &build_lagged(&ep.rewards, s.horizon)?, &s.w)?
        }
    };
    let pi = policies(&trace.x)?;
    Ok(EpisodePrediction { episode_id: e, x: trace.x, pi, z: trace.z })
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let ds = Dataset::read(&args.source.input)?;
    let source = load_source(&args.source)?;
    let episodes = (0..ds.episodes.len())
        .into_par_iter()
        .map(|e| predict_episode(&ds, e, &source))
        .collect::<Result<Vec<_>>>()?;
    write_json(&args.output, &PredictionFile { schema: SCHEMA.to_string(), episodes })
}

fn cmd_score(args: &ScoreArgs, out: &mut dyn Write) -> Result<()> {
    let ds = Dataset::read(&args.source.input)?;
    let source = load_source(&args.source)?;
    let scores = (0..ds.episodes.len())
        .into_par_iter()
        .map(|e| {
            let pred = predict_episode(&ds, e, &source)?;
            log_likelihood(&pred.x, &ds.episodes[e].actions)
        })
        .collect::<Result<Vec<_>>>()?;
    let stdout_err = |source| FitError::Io { path: PathBuf::from("<stdout>"), source };
    writeln!(out, "episode_id\tnll\tlog_likelihood").map_err(stdout_err)?;
    for (e, ll) in scores.iter().enumerate() {
        writeln!(out, "{e}\t{}\t{ll}", -ll).map_err(stdout_err)?;
    }
    Ok(())
}

fn cmd_benchmark(cli: &Cli, args: &BenchmarkArgs, file: &FileConfig, out: &mut dyn Write) -> Result<()> {
    let ds = Dataset::read(&args.input)?;
    let methods = match args.methods.clone().or_else(|| file.benchmark.methods.clone()) {
        Some(tags) => tags.iter().map(|t| t.trim().parse()).collect::<Result<Vec<Method>>>()?,
        None => Method::ALL.to_vec(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let opts = BenchOptions {
        methods,
        truncated_horizon: args
            .truncated_horizon
            .or(file.benchmark.truncated_horizon)
            .unwrap_or(BenchOptions::default().truncated_horizon),
        solver: solver_options(&args.solver, &file.solver, None),
        recovery: recovery_options(&args.recovery, &file.recovery, seed),
        dloc: dloc_options(&args.dloc, &file.dloc, seed),
        seed,
    };
    let report = run_benchmark(&ds, &opts)?;
    if let Some(p) = &args.csv {
        report.write_csv(p)?;
    }
    if let Some(p) = &args.json {
        report.write_json(p)?;
    }
    write!(out, "{}", report.render_table()).map_err(|source| FitError::Io { path: PathBuf::from("<stdout>"), source })
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let file = load_config(cli.config.as_deref())?;
    if let Some(jobs) = cli.jobs.or(file.jobs) {
        if jobs < 1 {
            return Err(FitError::config("--jobs must be >= 1"));
        }
        // Fails only if a pool already exists, as in repeated in-process runs.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(cli, a, &file),
        Command::Fit(a) => cmd_fit(a, &file),
        Command::Recover(a) => cmd_recover(cli, a, &file),
        Command::Predict(a) => cmd_predict(a),
        Command::Score(a) => cmd_score(a, out),
        Command::Benchmark(a) => cmd_benchmark(cli, a, &file, out),
    }
}

pub fn exit_code(err: &FitError) -> i32 {
    match err {
        FitError::Io { .. } | FitError::Format { .. } => EXIT_FILE,
        FitError::Numeric(_) => EXIT_NUMERIC,
        FitError::Shape(_) | FitError::Config(_) | FitError::Domain(_) => EXIT_CONFIG,
    }
}

fn kind(code: i32) -> &'static str {
    match code {
        EXIT_FILE => "file",
        EXIT_NUMERIC => "numeric",
        _ => "config",
    }
}

fn error_line(code: i32, message: &str) -> String {
    serde_json::json!({ "error": kind(code), "code": code, "message": message }).to_string()
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let _ = writeln!(err, "{}", error_line(EXIT_CONFIG, first));
            return EXIT_CONFIG;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            let _ = writeln!(err, "{}", error_line(code, &e.to_string()));
            code
        }
    }
}
