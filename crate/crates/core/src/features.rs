//! Lagged reward data and the kernel form of the value recursion.
//!
//! A kernel matrix `G` (one per signal, `m` rows by `p` lag columns) maps the
//! reward history to subvalues: `z_j(t) = sum_r G[j][r] * u_j(t - r)`. With
//! `G = kernel_from_params(alpha, beta, n)` this reproduces the recursion in
//! [`crate::model::value_recursion`] exactly.

use serde::{Deserialize, Serialize};

use crate::error::{FitError, Result};
use crate::model::{RewardSeries, ValueTrace};

/// Reward history of every signal, stored once per episode as one dense
/// `arm x time` matrix per signal, plus the list of nonzero entries used by
/// the sliding dot products.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedRewards {
    m: usize,
    n: usize,
    p: usize,
    /// `[signal][arm][t]`
    series: Vec<Vec<Vec<f64>>>,
    /// `[signal][arm]` -> `(t, u)` with `u != 0`
    nonzero: Vec<Vec<Vec<(usize, f64)>>>,
}

/// Builds the lagged reward data for horizon `p` (`p = n` disables truncation).
pub fn build_lagged(rewards: &[RewardSeries], p: usize) -> Result<LaggedRewards> {
    let k = rewards.len();
    if k == 0 {
        return Err(FitError::shape("no reward signals"));
    }
    let n = rewards[0].len();
    if n == 0 {
        return Err(FitError::shape("empty reward series"));
    }
    let m = rewards[0][0].len();
    if p < 1 || p > n {
        return Err(FitError::config(format!("horizon p={p} outside [1, {n}]")));
    }
    let mut series = Vec::with_capacity(k);
    let mut nonzero = Vec::with_capacity(k);
    for (i, sig) in rewards.iter().enumerate() {
        if sig.len() != n {
            return Err(FitError::shape(format!("signal {i} has {} steps, expected {n}", sig.len())));
        }
        let mut by_arm = vec![vec![0.0; n]; m];
        for (t, u) in sig.iter().enumerate() {
            if u.len() != m {
                return Err(FitError::shape(format!("signal {i}, step {t}: {} arms, expected {m}", u.len())));
            }
            for (j, &v) in u.iter().enumerate() {
                if !v.is_finite() {
                    return Err(FitError::domain(format!("signal {i}, step {t}: non-finite reward")));
                }
                by_arm[j][t] = v;
            }
        }
        nonzero.push(
            by_arm
                .iter()
                .map(|row| row.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect())
                .collect(),
        );
        series.push(by_arm);
    }
    Ok(LaggedRewards { m, n, p, series, nonzero })
}

impl LaggedRewards {
    pub fn k(&self) -> usize {
        self.series.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.p
    }

    /// The same data with a different horizon.
    pub fn with_horizon(&self, p: usize) -> Result<LaggedRewards> {
        if p < 1 || p > self.n {
            return Err(FitError::config(format!("horizon p={p} outside [1, {}]", self.n)));
        }
        Ok(LaggedRewards { p, ..self.clone() })
    }

    /// Materializes the padded lag matrix of `signal` at step `t` (0-based):
    /// `p` rows, row `r` holds `u(t - r)` when `r <= t`, zeros otherwise.
    pub fn lag_matrix(&self, signal: usize, t: usize) -> Vec<Vec<f64>> {
        (0..self.p)
            .map(|r| {
                (0..self.m)
                    .map(|j| if r <= t { self.series[signal][j][t - r] } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    pub(crate) fn nonzero(&self, signal: usize, arm: usize) -> &[(usize, f64)] {
        &self.nonzero[signal][arm]
    }

    /// Adds `weight * sum_r kernel_row[r] * u(t - r)` to `out[t]` for one
    /// signal and arm. `out` has length `n`, `kernel_row` length `p`.
    pub(crate) fn accumulate_row(
        &self,
        signal: usize,
        arm: usize,
        kernel_row: &[f64],
        weight: f64,
        out: &mut [f64],
    ) {
        let p = self.p;
        for &(tau, u) in self.nonzero(signal, arm) {
            let end = (tau + p).min(self.n);
            let scale = weight * u;
            for (o, g) in out[tau..end].iter_mut().zip(kernel_row) {
                *o += scale * g;
            }
        }
    }

    /// Adjoint of [`Self::accumulate_row`]: `grad[r] += weight * sum_t d[t] * u(t - r)`.
    pub(crate) fn correlate_row(
        &self,
        signal: usize,
        arm: usize,
        d: &[f64],
        weight: f64,
        grad: &mut [f64],
    ) {
        let p = self.p;
        for &(tau, u) in self.nonzero(signal, arm) {
            let end = (tau + p).min(self.n);
            let scale = weight * u;
            for (g, dt) in grad.iter_mut().zip(&d[tau..end]) {
                *g += scale * dt;
            }
        }
    }
}

/// Lag-indexed kernel of one signal: rows are arms, columns are lags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KernelMatrix {
    rows: Vec<Vec<f64>>,
}

impl KernelMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        KernelMatrix { rows: vec![vec![0.0; cols]; rows] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(FitError::shape("kernel rows must be non-empty and of equal length"));
        }
        Ok(KernelMatrix { rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// The same rows repeated `m` times (shared kernels are stored as one row).
    pub fn broadcast(&self, m: usize) -> KernelMatrix {
        if self.rows.len() == m {
            return self.clone();
        }
        KernelMatrix { rows: vec![self.rows[0].clone(); m] }
    }

    /// Largest violation of `g_1 >= g_2 >= ... >= g_L >= 0` over all rows.
    pub fn monotone_violation(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| {
                let tail = row.last().map_or(0.0, |&v| (-v).max(0.0));
                row.windows(2).map(|w| (w[1] - w[0]).max(0.0)).fold(tail, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Geometric kernel row `(a b, (1-a) a b, (1-a)^2 a b, ...)` of length `cols`.
pub fn geometric_row(a: f64, b: f64, cols: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(cols);
    let decay = 1.0 - a;
    let mut v = a * b;
    for _ in 0..cols {
        row.push(v);
        v *= decay;
    }
    row
}

/// The transformation from `(alpha, beta)` to a kernel matrix with `cols`
/// lag columns; entry `(j, c)` is `(1 - alpha_j)^c * alpha_j * beta_j`.
pub fn kernel_from_params(alpha: &[f64], beta: &[f64], cols: usize) -> Result<KernelMatrix> {
    if alpha.len() != beta.len() || alpha.is_empty() {
        return Err(FitError::shape(format!(
            "{} learning rates for {} sensitivities",
            alpha.len(),
            beta.len()
        )));
    }
    if cols == 0 {
        return Err(FitError::shape("kernel needs at least one column"));
    }
    let rows = alpha
        .iter()
        .zip(beta)
        .enumerate()
        .map(|(j, (&a, &b))| {
            if !(0.0..=1.0).contains(&a) {
                return Err(FitError::domain(format!("alpha[{j}] = {a} outside [0, 1]")));
            }
            if !(b >= 0.0 && b.is_finite()) {
                return Err(FitError::domain(format!("beta[{j}] = {b} must be finite and >= 0")));
            }
            Ok(geometric_row(a, b, cols))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelMatrix { rows })
}

/// Evaluates `z^(i)(t) = diag(G^(i) U^(i)(t))` and `x(t) = sum_i w_i z^(i)(t)`.
///
/// Each kernel has either `m` rows or a single row shared by every arm, and
/// exactly `lagged.horizon()` columns.
pub fn kernel_values(kernels: &[KernelMatrix], lagged: &LaggedRewards, w: &[f64]) -> Result<ValueTrace> {
    let (k, m, n, p) = (lagged.k(), lagged.m(), lagged.n(), lagged.horizon());
    if kernels.len() != k || w.len() != k {
        return Err(FitError::shape(format!(
            "{} kernels and {} weights for {k} signals",
            kernels.len(),
            w.len()
        )));
    }
    let mut x = vec![vec![0.0; m]; n];
    let mut z = Vec::with_capacity(k);
    let mut buf = vec![0.0; n];
    for (i, g) in kernels.iter().enumerate() {
        if (g.n_rows() != m && g.n_rows() != 1) || g.n_cols() != p {
            return Err(FitError::shape(format!(
                "kernel {i} is {}x{}, expected {m}x{p}",
                g.n_rows(),
                g.n_cols()
            )));
        }
        let mut zi = vec![vec![0.0; m]; n];
        for j in 0..m {
            let row = if g.n_rows() == 1 { g.row(0) } else { g.row(j) };
            buf.iter_mut().for_each(|v| *v = 0.0);
            lagged.accumulate_row(i, j, row, 1.0, &mut buf);
            for t in 0..n {
                zi[t][j] = buf[t];
                x[t][j] += w[i] * buf[t];
            }
        }
        z.push(zi);
    }
    Ok(ValueTrace { x, z })
}
