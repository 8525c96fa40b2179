//! Recovery of learning rates and sensitivities from fitted kernel rows.
//!
//! Each row `g` of a kernel is matched by a geometric row
//! `f(a, b) = (a b, (1-a) a b, (1-a)^2 a b, ...)` in the least-squares sense
//! over the box `a in [0, 1]`, `b in [beta_min, beta_max]`. The problem is
//! nonconvex, so the best of several projected Gauss-Newton descents from
//! random box points is returned.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FitError, Result};
use crate::features::{geometric_row, KernelMatrix};
use crate::model::RLParams;
use crate::rng::stream;

/// Rows with `max |g| < ZERO_ROW` are recovered as `(0, beta_min)`.
pub const ZERO_ROW: f64 = 1e-10;

/// A row counts as exactly geometric when the residual is below this.
pub const EXACT_FIT: f64 = 1e-6;

const LOG_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecoveryMethod {
    DirectLS,
    LogLS,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub restarts: usize,
    pub local_max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    /// `[beta_min, beta_max]` used by [`recover_row`].
    pub beta_box: (f64, f64),
    pub method: RecoveryMethod,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            restarts: 5,
            local_max_iters: 500,
            tol: 1e-12,
            seed: 0,
            beta_box: (0.0, f64::INFINITY),
            method: RecoveryMethod::DirectLS,
        }
    }
}

impl RecoveryOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(FitError::config("restarts must be >= 1"));
        }
        if self.local_max_iters < 1 {
            return Err(FitError::config("local_max_iters must be >= 1"));
        }
        let (lo, hi) = self.beta_box;
        if !(lo >= 0.0 && lo <= hi && lo.is_finite()) {
            return Err(FitError::config(format!("beta box [{lo}, {hi}] is invalid")));
        }
        Ok(())
    }
}

/// One recovered row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowFit {
    pub alpha: f64,
    pub beta: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub params: RLParams,
    /// `[signal][arm]`
    pub residuals: Vec<Vec<f64>>,
    pub fits_exact: Vec<Vec<bool>>,
}

/// `|| f(a, b) - g ||^2`
pub fn row_residual(a: f64, b: f64, g: &[f64]) -> f64 {
    geometric_row(a, b, g.len()).iter().zip(g).map(|(f, g)| (f - g) * (f - g)).sum()
}

/// Residual vector and its Jacobian columns with respect to `a` and `b`.
fn residual_jacobian(a: f64, b: f64, g: &[f64], r: &mut [f64], ja: &mut [f64], jb: &mut [f64]) {
    let decay = 1.0 - a;
    let mut pow = 1.0; // (1-a)^c
    let mut pow_prev = 0.0; // (1-a)^(c-1), unused at c = 0
    for c in 0..g.len() {
        let cf = c as f64;
        r[c] = pow * a * b - g[c];
        ja[c] = b * (pow - if c == 0 { 0.0 } else { cf * a * pow_prev });
        jb[c] = a * pow;
        pow_prev = pow;
        pow *= decay;
    }
}

struct Box2 {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Box2 {
    fn clamp(&self, v: [f64; 2]) -> [f64; 2] {
        [v[0].clamp(self.lo[0], self.hi[0]), v[1].clamp(self.lo[1], self.hi[1])]
    }
}

/// Projected Levenberg-Marquardt descent from `start`. Variables sitting on
/// a bound with the gradient pointing outward are held fixed for the step.
fn local_descent(g: &[f64], start: [f64; 2], bounds: &Box2, max_iters: usize, tol: f64) -> ([f64; 2], f64) {
    let len = g.len();
    let (mut r, mut ja, mut jb) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let mut theta = bounds.clamp(start);
    let mut f = row_residual(theta[0], theta[1], g);
    let mut lambda = 1e-3;

    for _ in 0..max_iters {
        residual_jacobian(theta[0], theta[1], g, &mut r, &mut ja, &mut jb);
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
        let grad = [2.0 * dot(&ja, &r), 2.0 * dot(&jb, &r)];
        let h = [[dot(&ja, &ja), dot(&ja, &jb)], [dot(&ja, &jb), dot(&jb, &jb)]];

        let mut free = [true; 2];
        for d in 0..2 {
            let at_lo = theta[d] <= bounds.lo[d] && grad[d] > 0.0;
            let at_hi = theta[d] >= bounds.hi[d] && grad[d] < 0.0;
            free[d] = !(at_lo || at_hi);
        }
        let pg = (0..2).map(|d| if free[d] { grad[d].abs() } else { 0.0 }).fold(0.0, f64::max);
        if pg <= tol || f <= 1e-30 {
            break;
        }

        let mut improved = false;
        for _ in 0..60 {
            let step = solve_damped(&h, &grad, lambda, free);
            let cand = bounds.clamp([theta[0] + step[0], theta[1] + step[1]]);
            let fc = row_residual(cand[0], cand[1], g);
            if fc < f {
                let moved = (cand[0] - theta[0]).abs() + (cand[1] - theta[1]).abs();
                let rel = (f - fc) / f.max(1e-300);
                theta = cand;
                f = fc;
                lambda = (lambda / 3.0).max(1e-12);
                improved = moved > 1e-15 && rel > 1e-15;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (theta, f)
}

/// Solves `(H + lambda diag(H) + lambda I) d = -grad / 2` on the free variables.
fn solve_damped(h: &[[f64; 2]; 2], grad: &[f64; 2], lambda: f64, free: [bool; 2]) -> [f64; 2] {
    let damp = |d: usize| h[d][d] * (1.0 + lambda) + lambda;
    let rhs = [-0.5 * grad[0], -0.5 * grad[1]];
    match free {
        [true, true] => {
            let (a, b, c) = (damp(0), h[0][1], damp(1));
            let det = a * c - b * b;
            if det.abs() < 1e-300 {
                return [rhs[0] / a.max(1e-300), rhs[1] / c.max(1e-300)];
            }
            [(c * rhs[0] - b * rhs[1]) / det, (a * rhs[1] - b * rhs[0]) / det]
        }
        [true, false] => [rhs[0] / damp(0), 0.0],
        [false, true] => [0.0, rhs[1] / damp(1)],
        [false, false] => [0.0, 0.0],
    }
}

/// Lexicographic preference: smaller residual, then smaller alpha, then smaller beta.
fn better(a: &RowFit, b: &RowFit) -> bool {
    (a.residual, a.alpha, a.beta) < (b.residual, b.alpha, b.beta)
}

/// Best fit together with the residual at every random start.
pub fn recover_row_with_starts(g_row: &[f64], opts: &RecoveryOptions) -> Result<(RowFit, Vec<f64>)> {
    opts.validate()?;
    if g_row.is_empty() {
        return Err(FitError::shape("empty kernel row"));
    }
    if let Some(c) = g_row.iter().position(|v| !v.is_finite()) {
        return Err(FitError::numeric(format!("non-finite kernel entry at lag {c}")));
    }
    let (lo, hi) = opts.beta_box;

    if g_row.iter().all(|v| v.abs() < ZERO_ROW) {
        let fit = RowFit { alpha: 0.0, beta: lo, residual: row_residual(0.0, lo, g_row) };
        return Ok((fit, Vec::new()));
    }

    if g_row.len() == 1 {
        // only the product a * b is identified: take the smallest alpha
        let g = g_row[0];
        let (alpha, beta) = if g <= 0.0 {
            (0.0, lo)
        } else if hi.is_finite() {
            if g <= hi {
                (g / hi, hi)
            } else {
                (1.0, hi)
            }
        } else {
            (1.0, g.max(lo))
        };
        let fit = RowFit { alpha, beta, residual: row_residual(alpha, beta, g_row) };
        return Ok((fit, Vec::new()));
    }

    let init_hi = if hi.is_finite() {
        hi
    } else {
        lo + 10.0 * (1.0 + g_row.iter().copied().fold(0.0, f64::max))
    };
    let bounds = Box2 { lo: [0.0, lo], hi: [1.0, hi] };
    let mut rng = stream(opts.seed, 0, 0);
    let mut best: Option<RowFit> = None;
    let mut starts = Vec::with_capacity(opts.restarts);
    for _ in 0..opts.restarts {
        let start = [rng.gen::<f64>(), if init_hi > lo { rng.gen_range(lo..=init_hi) } else { lo }];
        starts.push(row_residual(start[0], start[1], g_row));
        let (theta, residual) = local_descent(g_row, start, &bounds, opts.local_max_iters, opts.tol);
        let fit = RowFit { alpha: theta[0], beta: theta[1], residual };
        if best.as_ref().map_or(true, |b| better(&fit, b)) {
            best = Some(fit);
        }
    }
    Ok((best.expect("restarts >= 1"), starts))
}

/// Recovers `(alpha, beta)` from one kernel row with the configured method.
pub fn recover_row(g_row: &[f64], opts: &RecoveryOptions) -> Result<RowFit> {
    match opts.method {
        RecoveryMethod::DirectLS => recover_row_with_starts(g_row, opts).map(|(fit, _)| fit),
        RecoveryMethod::LogLS => recover_row_logls(g_row, opts),
    }
}

/// Log-space recovery: fits `log g_c = c log(1 - a) + log(a b)` by least
/// squares with `log(1 - a) <= -1e-8`.
///
/// Every entry must be strictly positive. Entries near zero get very large
/// weight in log space, so tails dominated by roundoff can pull the fit far
/// away from the leading lags; the direct method is the default for that
/// reason. The returned `beta` is clamped into `opts.beta_box` and the
/// residual is the direct least-squares objective at the returned point.
pub fn recover_row_logls(g_row: &[f64], opts: &RecoveryOptions) -> Result<RowFit> {
    opts.validate()?;
    if g_row.is_empty() {
        return Err(FitError::shape("empty kernel row"));
    }
    if let Some((c, v)) = g_row.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
        return Err(FitError::domain(format!(
            "log-space recovery needs positive entries, lag {c} has {v}"
        )));
    }
    let s: Vec<f64> = g_row.iter().map(|v| v.ln()).collect();
    let len = s.len() as f64;
    let (mut scc, mut sc, mut scs, mut ss) = (0.0, 0.0, 0.0, 0.0);
    for (c, &sv) in s.iter().enumerate() {
        let cf = c as f64;
        scc += cf * cf;
        sc += cf;
        scs += cf * sv;
        ss += sv;
    }
    let det = scc * len - sc * sc;
    let mut slope = if det > 0.0 { (len * scs - sc * ss) / det } else { -LOG_EPS };
    if slope > -LOG_EPS {
        slope = -LOG_EPS;
    }
    let intercept = (ss - slope * sc) / len;
    let alpha = -slope.exp_m1();
    let (lo, hi) = opts.beta_box;
    let beta = (intercept.exp() / alpha).clamp(lo, hi);
    Ok(RowFit { alpha, beta, residual: row_residual(alpha, beta, g_row) })
}

/// Recovers parameters from every kernel row. In shared mode only the first
/// row of each kernel is fit and the result is broadcast to every arm.
///
/// Row `(i, j)` uses the random stream derived from `(opts.seed, i, j)` and
/// the sensitivity box `beta_boxes[i]`, so the result does not depend on the
/// order in which rows are processed.
pub fn recover_all(
    g_star: &[KernelMatrix],
    shared: bool,
    beta_boxes: &[(f64, f64)],
    opts: &RecoveryOptions,
) -> Result<RecoveryResult> {
    opts.validate()?;
    if g_star.is_empty() || beta_boxes.len() != g_star.len() {
        return Err(FitError::shape(format!(
            "{} kernels for {} beta boxes",
            g_star.len(),
            beta_boxes.len()
        )));
    }
    let m = g_star[0].n_rows();
    if g_star.iter().any(|g| g.n_rows() != m) {
        return Err(FitError::shape("kernels differ in row count"));
    }
    let fitted_rows = if shared { 1 } else { m };
    let tasks: Vec<(usize, usize)> =
        (0..g_star.len()).flat_map(|i| (0..fitted_rows).map(move |j| (i, j))).collect();
    let fits: Vec<RowFit> = tasks
        .par_iter()
        .map(|&(i, j)| {
            let row_opts = RecoveryOptions {
                beta_box: beta_boxes[i],
                seed: crate::rng::stream_seed(opts.seed, i as u64, j as u64),
                ..opts.clone()
            };
            recover_row(g_star[i].row(j), &row_opts)
        })
        .collect::<Result<_>>()?;

    let k = g_star.len();
    let mut alpha = vec![vec![0.0; m]; k];
    let mut beta = vec![vec![0.0; m]; k];
    let mut residuals = vec![vec![0.0; m]; k];
    for (&(i, j), fit) in tasks.iter().zip(&fits) {
        let arms = if shared { 0..m } else { j..j + 1 };
        for a in arms {
            alpha[i][a] = fit.alpha;
            beta[i][a] = fit.beta;
            residuals[i][a] = fit.residual;
        }
    }
    let fits_exact = residuals.iter().map(|r| r.iter().map(|&v| v < EXACT_FIT).collect()).collect();
    Ok(RecoveryResult { params: RLParams::new(alpha, beta, shared)?, residuals, fits_exact })
}
