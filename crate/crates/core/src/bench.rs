//! Benchmark harness comparing the surrogate fit, its truncated variant,
//! parameter recovery on top of both, and the direct multistart baseline.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_json, Dataset, Episode, SCHEMA};
use crate::dloc::{fit_dloc, DlocOptions};
use crate::error::{FitError, Result};
use crate::metrics::{mean_kl, param_errors, summarize, Summary};
use crate::model::{log_likelihood, policies, value_recursion, ModelConfig, RLParams};
use crate::recovery::{recover_all, RecoveryOptions};
use crate::rng::stream_seed;
use crate::sim::{EnvSpec, Setup};
use crate::surrogate::{solve_surrogate, SolverOptions, SurrogateProblem, SurrogateSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CVX")]
    Cvx,
    #[serde(rename = "CVX-T")]
    CvxT,
    #[serde(rename = "CVX-LOC")]
    CvxLoc,
    #[serde(rename = "CVX-LOC-T")]
    CvxLocT,
    #[serde(rename = "D-LOC")]
    Dloc,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Cvx, Method::CvxT, Method::CvxLoc, Method::CvxLocT, Method::Dloc];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Cvx => "CVX",
            Method::CvxT => "CVX-T",
            Method::CvxLoc => "CVX-LOC",
            Method::CvxLocT => "CVX-LOC-T",
            Method::Dloc => "D-LOC",
        }
    }

    fn truncated(self) -> bool {
        matches!(self, Method::CvxT | Method::CvxLocT)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = FitError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| FitError::config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub methods: Vec<Method>,
    /// Horizon of the truncated variants.
    pub truncated_horizon: usize,
    /// `beta_cap` is filled from the environment's beta boxes when unset.
    pub solver: SolverOptions,
    pub recovery: RecoveryOptions,
    pub dloc: DlocOptions,
    /// Base seed for the per-episode recovery and baseline streams.
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            methods: Method::ALL.to_vec(),
            truncated_horizon: 5,
            solver: SolverOptions::default(),
            recovery: RecoveryOptions::default(),
            dloc: DlocOptions::default(),
            seed: 0,
        }
    }
}

/// Result of one method on one episode. Error fields are absent when the
/// method yields no parameters or the episode has no ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub episode_id: usize,
    pub method: Method,
    pub mean_kl: Option<f64>,
    pub alpha_err: Option<f64>,
    pub beta_err: Option<f64>,
    pub nll: f64,
    pub j_lb: f64,
    pub gap: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFailure {
    pub episode_id: usize,
    pub method: Method,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub episodes: usize,
    pub failures: usize,
    pub mean_kl: Option<Summary>,
    pub alpha_err: Option<Summary>,
    pub beta_err: Option<Summary>,
    pub nll: Option<Summary>,
    pub gap: Option<Summary>,
    pub wall_ms: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: String,
    pub table: Vec<MethodSummary>,
    pub reports: Vec<FitReport>,
    pub failures: Vec<EpisodeFailure>,
}

/// Fitting configuration for one episode of `spec`.
pub fn episode_config(spec: &EnvSpec, ep: &Episode) -> ModelConfig {
    ModelConfig::new(ep.m(), ep.n(), ep.k())
        .with_shared(spec.setup == Setup::Bsc)
        .with_beta_box(spec.param_boxes.iter().map(|b| b.beta).collect())
}

fn capped_solver(opts: &SolverOptions, cfg: &ModelConfig) -> SolverOptions {
    let mut s = opts.clone();
    if s.beta_cap.is_none() && cfg.beta_box.iter().all(|b| b.1.is_finite()) {
        s.beta_cap = Some(cfg.beta_box.iter().map(|b| b.1).collect());
    }
    s
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

struct Truth {
    pi: Option<Vec<Vec<f64>>>,
    params: Option<RLParams>,
}

impl Truth {
    fn of(ep: &Episode, cfg: &ModelConfig) -> Result<Truth> {
        let x = match (&ep.true_x, &ep.true_params) {
            (Some(x), _) => Some(x.clone()),
            (None, Some(p)) => Some(value_recursion(p, &ep.rewards, cfg)?.x),
            _ => None,
        };
        Ok(Truth { pi: x.as_deref().map(policies).transpose()?, params: ep.true_params.clone() })
    }

    fn kl(&self, pi_hat: &[Vec<f64>]) -> Result<Option<f64>> {
        self.pi.as_deref().map(|pi| mean_kl(pi, pi_hat)).transpose()
    }

    fn errors(&self, est: &RLParams) -> Result<(Option<f64>, Option<f64>)> {
        match &self.params {
            Some(t) => {
                let (a, b) = param_errors(t, est)?;
                Ok((Some(a), Some(b)))
            }
            None => Ok((None, None)),
        }
    }
}

/// Fits every requested method to one episode.
pub fn bench_episode(
    spec: &EnvSpec,
    ep: &Episode,
    episode_id: usize,
    opts: &BenchOptions,
) -> Vec<std::result::Result<FitReport, EpisodeFailure>> {
    let cfg = episode_config(spec, ep);
    let fail = |method: Method, e: FitError| EpisodeFailure { episode_id, method, error: e.to_string() };
    let truth = match ep.check(&cfg).and_then(|_| Truth::of(ep, &cfg)) {
        Ok(t) => t,
        Err(e) => return opts.methods.iter().map(|&m| Err(fail(m, e.clone_msg()))).collect(),
    };
    let solver = capped_solver(&opts.solver, &cfg);

    let solve = |p: usize| -> Result<(SurrogateSolution, f64)> {
        let start = Instant::now();
        let c = cfg.clone().with_horizon(p.min(cfg.n));
        let prob = SurrogateProblem::new(&ep.rewards, &ep.actions, &c, solver.clone())?;
        let sol = solve_surrogate(&prob)?;
        Ok((sol, ms_since(start)))
    };
    let full = solve(cfg.n);
    let needs_trunc = opts.methods.iter().any(|m| m.truncated());
    let trunc = if needs_trunc { Some(solve(opts.truncated_horizon)) } else { None };

    let j_lb = match &full {
        Ok((s, _)) => s.j_lb,
        Err(e) => return opts.methods.iter().map(|&m| Err(fail(m, e.clone_msg()))).collect(),
    };

    let from_params = |params: &RLParams, elapsed: f64, method: Method| -> Result<FitReport> {
        let x = value_recursion(params, &ep.rewards, &cfg)?.x;
        let nll = -log_likelihood(&x, &ep.actions)?;
        let (alpha_err, beta_err) = truth.errors(params)?;
        Ok(FitReport {
            episode_id,
            method,
            mean_kl: truth.kl(&policies(&x)?)?,
            alpha_err,
            beta_err,
            nll,
            j_lb,
            gap: nll - j_lb,
            wall_ms: elapsed,
        })
    };
    let recovery = RecoveryOptions { seed: stream_seed(opts.seed, episode_id as u64, 2), ..opts.recovery.clone() };

    let run = |method: Method| -> Result<FitReport> {
        let base = if method.truncated() { trunc.as_ref().expect("solved above") } else { &full };
        let (sol, solve_ms) = match base {
            Ok((s, t)) => (s, *t),
            Err(e) => return Err(e.clone_msg()),
        };
        match method {
            Method::Cvx | Method::CvxT => Ok(FitReport {
                episode_id,
                method,
                mean_kl: truth.kl(&sol.pi_star)?,
                alpha_err: None,
                beta_err: None,
                nll: sol.j_lb,
                j_lb,
                gap: sol.j_lb - j_lb,
                wall_ms: solve_ms,
            }),
            Method::CvxLoc | Method::CvxLocT => {
                let start = Instant::now();
                let rec = recover_all(&sol.g_star, cfg.shared, &cfg.beta_box, &recovery)?;
                from_params(&rec.params, solve_ms + ms_since(start), method)
            }
            Method::Dloc => {
                let start = Instant::now();
                let d = DlocOptions { seed: stream_seed(opts.seed, episode_id as u64, 1), ..opts.dloc.clone() };
                let fit = fit_dloc(ep, &cfg, &d)?;
                from_params(&fit.params, ms_since(start), method)
            }
        }
    };
    opts.methods.iter().map(|&m| run(m).map_err(|e| fail(m, e))).collect()
}

/// Runs the benchmark over all episodes in parallel and aggregates per method.
pub fn run_benchmark(dataset: &Dataset, opts: &BenchOptions) -> Result<BenchReport> {
    dataset.spec.validate()?;
    if opts.truncated_horizon < 1 {
        return Err(FitError::config("truncated horizon must be >= 1"));
    }
    let outcomes: Vec<_> = dataset
        .episodes
        .par_iter()
        .enumerate()
        .map(|(e, ep)| bench_episode(&dataset.spec, ep, e, opts))
        .collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for out in outcomes.into_iter().flatten() {
        match out {
            Ok(r) => reports.push(r),
            Err(f) => failures.push(f),
        }
    }
    let table = aggregate(&opts.methods, &reports, &failures);
    Ok(BenchReport { schema: SCHEMA.to_string(), table, reports, failures })
}

pub fn aggregate(methods: &[Method], reports: &[FitReport], failures: &[EpisodeFailure]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|&method| {
            let rows: Vec<&FitReport> = reports.iter().filter(|r| r.method == method).collect();
            let col = |f: &dyn Fn(&FitReport) -> Option<f64>| summarize(&rows.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            MethodSummary {
                method,
                episodes: rows.len(),
                failures: failures.iter().filter(|f| f.method == method).count(),
                mean_kl: col(&|r| r.mean_kl),
                alpha_err: col(&|r| r.alpha_err),
                beta_err: col(&|r| r.beta_err),
                nll: col(&|r| Some(r.nll)),
                gap: col(&|r| Some(r.gap)),
                wall_ms: col(&|r| Some(r.wall_ms)),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct CsvRow {
    episode_id: usize,
    method: Method,
    mean_kl: Option<f64>,
    alpha_err: Option<f64>,
    beta_err: Option<f64>,
    nll: f64,
    j_lb: f64,
    gap: f64,
    wall_ms: f64,
}

impl BenchReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| FitError::Format { path: path.to_path_buf(), msg: e.to_string() };
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        for r in &self.reports {
            w.serialize(CsvRow {
                episode_id: r.episode_id,
                method: r.method,
                mean_kl: r.mean_kl,
                alpha_err: r.alpha_err,
                beta_err: r.beta_err,
                nll: r.nll,
                j_lb: r.j_lb,
                gap: r.gap,
                wall_ms: r.wall_ms,
            })
            .map_err(io)?;
        }
        w.flush().map_err(|source| FitError::Io { path: path.to_path_buf(), source })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    /// Fixed-width text rendering of the aggregate table.
    pub fn render_table(&self) -> String {
        let cell = |s: &Option<Summary>| match s {
            Some(s) => format!("{:.4} ({:.4}-{:.4})", s.median, s.q25, s.q75),
            None => "-".to_string(),
        };
        let mut out = format!(
            "{:<10} {:>5} {:>5}  {:<28} {:<28} {:<28} {:<28}\n",
            "method", "ok", "fail", "mean_kl", "alpha_err", "beta_err", "wall_ms"
        );
        for s in &self.table {
            out += &format!(
                "{:<10} {:>5} {:>5}  {:<28} {:<28} {:<28} {:<28}\n",
                s.method.tag(),
                s.episodes,
                s.failures,
                cell(&s.mean_kl),
                cell(&s.alpha_err),
                cell(&s.beta_err),
                cell(&s.wall_ms)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{make_dataset, Bandit};

    #[test]
    fn method_tags_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.tag()));
        }
        assert!("cvx-x".parse::<Method>().is_err());
    }

    #[test]
    fn empty_method_list_gives_empty_table() {
        let ds = make_dataset(&EnvSpec::preset(Setup::Bsc, Bandit::TwoArm, 20, 1), 2).unwrap();
        let rep = run_benchmark(&ds, &BenchOptions { methods: vec![], ..Default::default() }).unwrap();
        assert!(rep.table.is_empty() && rep.reports.is_empty() && rep.failures.is_empty());
    }

    #[test]
    fn small_benchmark_is_consistent() {
        let ds = make_dataset(&EnvSpec::preset(Setup::Ind, Bandit::TwoArm, 40, 2), 3).unwrap();
        let rep = run_benchmark(&ds, &BenchOptions::default()).unwrap();
        assert!(rep.failures.is_empty(), "{:?}", rep.failures);
        assert_eq!(rep.reports.len(), 15);
        for r in &rep.reports {
            assert!(r.gap >= -1e-6, "{r:?}");
            assert!(r.mean_kl.unwrap() >= 0.0);
            if r.method == Method::Cvx {
                assert!(r.gap.abs() < 1e-9);
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("r.csv");
        rep.write_csv(&csv).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("episode_id,method,mean_kl,alpha_err,beta_err,nll,j_lb,gap,wall_ms\n"));
        assert_eq!(text.lines().count(), 16);
    }

    #[test]
    fn aggregation_ignores_episode_order() {
        let ds = make_dataset(&EnvSpec::preset(Setup::Bsc, Bandit::TwoArm, 30, 3), 4).unwrap();
        let opts = BenchOptions { methods: vec![Method::Cvx, Method::CvxT], ..Default::default() };
        let rep = run_benchmark(&ds, &opts).unwrap();
        let mut rev = rep.reports.clone();
        rev.reverse();
        assert_eq!(aggregate(&opts.methods, &rev, &[]), rep.table);
    }
}
