//! Convex surrogate fit: minimize the negative log-likelihood over kernel
//! matrices whose rows are nonincreasing and nonnegative.
//!
//! The solver is accelerated projected gradient (FISTA) started from the
//! zero kernel, with backtracking on a quadratic majorant and function-value
//! adaptive restart. The feasible set is handled by an exact projection, see
//! [`crate::isotonic`].

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{FitError, Result};
use crate::features::{build_lagged, KernelMatrix, LaggedRewards};
use crate::isotonic::project_in_place;
use crate::model::{log_likelihood, policies, ModelConfig, RewardSeries};

/// Iterations over which the relative objective decrease is measured.
const STALL_WINDOW: usize = 100;
/// Step enlargement after an accepted iteration; backtracking undoes it
/// where the local curvature is high.
const STEP_GROWTH: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Stop once the objective decreased by less than
    /// `tol_rel_obj * max(1, objective)` over the last 100 iterations.
    pub tol_rel_obj: f64,
    /// Tolerance on the norm of the projected-gradient mapping.
    pub tol_pg: f64,
    pub restart: bool,
    /// Per-signal upper bound on the first kernel column.
    pub beta_cap: Option<Vec<f64>>,
    /// With caps, stop once the Frank-Wolfe duality gap is below
    /// `tol_gap * max(1, objective)`.
    #[serde(default = "default_tol_gap")]
    pub tol_gap: f64,
}

fn default_tol_gap() -> f64 {
    1e-10
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 20_000,
            tol_rel_obj: 1e-12,
            tol_pg: 1e-9,
            restart: true,
            beta_cap: None,
            tol_gap: default_tol_gap(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.max_iters < 1 {
            return Err(FitError::config("max_iters must be >= 1"));
        }
        if !(self.tol_rel_obj > 0.0) || !(self.tol_pg > 0.0) || !(self.tol_gap > 0.0) {
            return Err(FitError::config("solver tolerances must be > 0"));
        }
        if let Some(cap) = &self.beta_cap {
            if cap.len() != k {
                return Err(FitError::config(format!("{} beta caps for {k} signals", cap.len())));
            }
            if cap.iter().any(|&c| !(c >= 0.0)) {
                return Err(FitError::config("beta caps must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Data and configuration of one surrogate fit.
#[derive(Debug, Clone)]
pub struct SurrogateProblem {
    lagged: LaggedRewards,
    actions: Vec<usize>,
    cfg: ModelConfig,
    options: SolverOptions,
}

impl SurrogateProblem {
    pub fn new(
        rewards: &[RewardSeries],
        actions: &[usize],
        cfg: &ModelConfig,
        options: SolverOptions,
    ) -> Result<Self> {
        cfg.validate()?;
        cfg.check_rewards(rewards)?;
        let lagged = build_lagged(rewards, cfg.p)?;
        SurrogateProblem::from_lagged(lagged, actions, cfg, options)
    }

    /// Reuses already built lagged data; its horizon must equal `cfg.p`.
    pub fn from_lagged(
        lagged: LaggedRewards,
        actions: &[usize],
        cfg: &ModelConfig,
        options: SolverOptions,
    ) -> Result<Self> {
        cfg.validate()?;
        cfg.check_actions(actions)?;
        options.validate(cfg.k)?;
        if lagged.k() != cfg.k || lagged.m() != cfg.m || lagged.n() != cfg.n || lagged.horizon() != cfg.p {
            return Err(FitError::shape(format!(
                "lagged data is k={} m={} n={} p={}, config has k={} m={} n={} p={}",
                lagged.k(),
                lagged.m(),
                lagged.n(),
                lagged.horizon(),
                cfg.k,
                cfg.m,
                cfg.n,
                cfg.p
            )));
        }
        Ok(SurrogateProblem { lagged, actions: actions.to_vec(), cfg: cfg.clone(), options })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn lagged(&self) -> &LaggedRewards {
        &self.lagged
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    /// Kernel rows per signal: one when parameters are shared, `m` otherwise.
    pub fn rows_per_signal(&self) -> usize {
        if self.cfg.shared {
            1
        } else {
            self.cfg.m
        }
    }

    /// Number of scalar variables, `k * n` (shared) or `k * m * n`.
    pub fn variable_count(&self) -> usize {
        self.cfg.k * self.rows_per_signal() * self.cfg.p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSolution {
    /// Optimal kernels, `m x p` each (shared kernels are broadcast).
    pub g_star: Vec<KernelMatrix>,
    pub x_star: Vec<Vec<f64>>,
    pub pi_star: Vec<Vec<f64>>,
    /// Optimal negative log-likelihood of the surrogate.
    pub j_lb: f64,
    /// Frank-Wolfe duality gap at the solution when the feasible set is
    /// bounded; `j_lb - dual_gap` is a certified lower bound.
    pub dual_gap: Option<f64>,
    pub iters: usize,
    pub status: SolveStatus,
}

/// Flat-variable evaluator. Variables are laid out `[signal][row][lag]`.
struct Objective<'a> {
    prob: &'a SurrogateProblem,
    rows: usize,
    /// `[arm][t]`
    x: Vec<f64>,
    /// `pi - y`, `[arm][t]`
    resid: Vec<f64>,
    xt: Vec<f64>,
    pt: Vec<f64>,
    /// Diagonal of the metric used for steps and projections: the squared
    /// column norms of the linear map, floored where a column is empty.
    metric: Vec<f64>,
    evals: usize,
}

impl<'a> Objective<'a> {
    fn new(prob: &'a SurrogateProblem) -> Self {
        let (m, n) = (prob.cfg.m, prob.cfg.n);
        Objective {
            prob,
            rows: prob.rows_per_signal(),
            x: vec![0.0; m * n],
            resid: vec![0.0; m * n],
            xt: vec![0.0; m],
            pt: vec![0.0; m],
            metric: column_norms_sq(prob),
            evals: 0,
        }
    }

    fn len(&self) -> usize {
        self.prob.variable_count()
    }

    fn row_offset(&self, signal: usize, arm: usize) -> usize {
        let p = self.prob.cfg.p;
        let r = if self.rows == 1 { 0 } else { arm };
        (signal * self.rows + r) * p
    }

    /// Linear map from kernels to values, written into `self.x`.
    fn apply(&mut self, theta: &[f64]) {
        let (m, n, p) = (self.prob.cfg.m, self.prob.cfg.n, self.prob.cfg.p);
        self.x.iter_mut().for_each(|v| *v = 0.0);
        for (i, &w) in self.prob.cfg.w.iter().enumerate() {
            for j in 0..m {
                let off = self.row_offset(i, j);
                self.prob
                    .lagged
                    .accumulate_row(i, j, &theta[off..off + p], w, &mut self.x[j * n..(j + 1) * n]);
            }
        }
    }

    /// Adjoint of [`Self::apply`] applied to `d` (`[arm][t]`), overwriting `out`.
    fn apply_adjoint(&self, d: &[f64], out: &mut [f64]) {
        let (m, n, p) = (self.prob.cfg.m, self.prob.cfg.n, self.prob.cfg.p);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &w) in self.prob.cfg.w.iter().enumerate() {
            for j in 0..m {
                let off = self.row_offset(i, j);
                self.prob
                    .lagged
                    .correlate_row(i, j, &d[j * n..(j + 1) * n], w, &mut out[off..off + p]);
            }
        }
    }

    fn value(&mut self, theta: &[f64], want_resid: bool) -> Result<f64> {
        self.evals += 1;
        self.apply(theta);
        let (m, n) = (self.prob.cfg.m, self.prob.cfg.n);
        let mut total = 0.0;
        for t in 0..n {
            for j in 0..m {
                self.xt[j] = self.x[j * n + t];
            }
            let lse = crate::model::softmax_into(&self.xt, &mut self.pt);
            let a = self.prob.actions[t];
            total += lse - self.xt[a];
            if want_resid {
                for j in 0..m {
                    self.resid[j * n + t] = self.pt[j] - if j == a { 1.0 } else { 0.0 };
                }
            }
        }
        if !total.is_finite() {
            return Err(FitError::numeric(format!(
                "non-finite surrogate objective after {} evaluations",
                self.evals
            )));
        }
        Ok(total)
    }

    fn value_and_grad(&mut self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let f = self.value(theta, true)?;
        let resid = std::mem::take(&mut self.resid);
        self.apply_adjoint(&resid, grad);
        self.resid = resid;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(FitError::numeric(format!(
                "non-finite surrogate gradient after {} evaluations",
                self.evals
            )));
        }
        Ok(f)
    }

    fn project(&self, theta: &mut [f64]) {
        let p = self.prob.cfg.p;
        let caps = self.prob.options.beta_cap.as_deref();
        for (idx, row) in theta.chunks_mut(p).enumerate() {
            let signal = idx / self.rows;
            let weights = &self.metric[idx * p..(idx + 1) * p];
            project_in_place(row, Some(weights), caps.map(|c| c[signal]));
        }
    }

    /// `<g, theta> - min_{s feasible} <g, s>`, or `None` if the feasible set
    /// is unbounded along a descent direction. Minimizers over capped rows
    /// are step vectors `cap * (1, .., 1, 0, .., 0)`.
    fn duality_gap(&self, theta: &[f64], grad: &[f64]) -> Option<f64> {
        let p = self.prob.cfg.p;
        let caps = self.prob.options.beta_cap.as_deref();
        let mut gap = 0.0;
        for (idx, (row, g)) in theta.chunks(p).zip(grad.chunks(p)).enumerate() {
            let mut prefix = 0.0;
            let mut lowest = 0.0f64;
            for (&v, &gi) in row.iter().zip(g) {
                gap += v * gi;
                prefix += gi;
                lowest = lowest.min(prefix);
            }
            match caps {
                Some(c) => gap -= c[idx / self.rows] * lowest,
                None if lowest < 0.0 => return None,
                None => {}
            }
        }
        Some(gap.max(0.0))
    }

    /// Power iteration on the metric-scaled normal operator
    /// `D^{-1/2} A^T A D^{-1/2}`.
    fn operator_norm_sq(&mut self) -> f64 {
        let len = self.len();
        let scale: Vec<f64> = self.metric.iter().map(|d| d.sqrt().recip()).collect();
        let mut v = vec![1.0 / (len as f64).sqrt(); len];
        let mut sv = vec![0.0; len];
        let mut out = vec![0.0; len];
        let mut lambda = 0.0;
        for _ in 0..50 {
            for ((o, vi), si) in sv.iter_mut().zip(&v).zip(&scale) {
                *o = vi * si;
            }
            self.apply(&sv);
            let x = std::mem::take(&mut self.x);
            self.apply_adjoint(&x, &mut out);
            self.x = x;
            out.iter_mut().zip(&scale).for_each(|(o, si)| *o *= si);
            let norm = l2(&out);
            if norm == 0.0 || !norm.is_finite() {
                return 0.0;
            }
            let prev = lambda;
            lambda = norm;
            for (vi, oi) in v.iter_mut().zip(&out) {
                *vi = oi / norm;
            }
            if (lambda - prev).abs() <= 1e-6 * lambda {
                break;
            }
        }
        lambda
    }
}

fn column_norms_sq(prob: &SurrogateProblem) -> Vec<f64> {
    let (m, n, p) = (prob.cfg.m, prob.cfg.n, prob.cfg.p);
    let rows = prob.rows_per_signal();
    let mut metric = vec![0.0; prob.variable_count()];
    for (i, &w) in prob.cfg.w.iter().enumerate() {
        for j in 0..m {
            let r = if rows == 1 { 0 } else { j };
            let off = (i * rows + r) * p;
            // u(tau) reaches lags 0 .. min(p, n - tau)
            let mut diff = vec![0.0; p + 1];
            for &(tau, u) in prob.lagged.nonzero(i, j) {
                let c = (w * u).powi(2);
                diff[0] += c;
                diff[p.min(n - tau)] -= c;
            }
            let mut acc = 0.0;
            for (l, d) in diff[..p].iter().enumerate() {
                acc += d;
                metric[off + l] += acc.max(0.0);
            }
        }
    }
    for row in metric.chunks_mut(p) {
        let floor = row.iter().copied().filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
        let floor = if floor.is_finite() { floor } else { 1.0 };
        row.iter_mut().filter(|d| !(**d > 0.0)).for_each(|d| *d = floor);
    }
    metric
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn flatten(kernels: &[KernelMatrix], prob: &SurrogateProblem) -> Result<Vec<f64>> {
    let (k, p, rows) = (prob.cfg.k, prob.cfg.p, prob.rows_per_signal());
    if kernels.len() != k {
        return Err(FitError::shape(format!("{} kernels for {k} signals", kernels.len())));
    }
    let mut theta = Vec::with_capacity(prob.variable_count());
    for (i, g) in kernels.iter().enumerate() {
        if g.n_rows() != rows || g.n_cols() != p {
            return Err(FitError::shape(format!(
                "kernel {i} is {}x{}, expected {rows}x{p}",
                g.n_rows(),
                g.n_cols()
            )));
        }
        for r in g.rows() {
            theta.extend_from_slice(r);
        }
    }
    Ok(theta)
}

fn unflatten(theta: &[f64], prob: &SurrogateProblem) -> Vec<KernelMatrix> {
    let (p, rows) = (prob.cfg.p, prob.rows_per_signal());
    theta
        .chunks(rows * p)
        .map(|block| {
            KernelMatrix::from_rows(block.chunks(p).map(<[f64]>::to_vec).collect())
                .expect("block has rows * p entries")
        })
        .collect()
}

/// Surrogate objective and its gradient with respect to every kernel entry.
///
/// Kernels have one row per signal in shared mode (gradients summed over
/// arms) and `m` rows otherwise.
pub fn nll_and_gradient(kernels: &[KernelMatrix], prob: &SurrogateProblem) -> Result<(f64, Vec<KernelMatrix>)> {
    let theta = flatten(kernels, prob)?;
    let mut obj = Objective::new(prob);
    let mut grad = vec![0.0; theta.len()];
    let f = obj.value_and_grad(&theta, &mut grad)?;
    Ok((f, unflatten(&grad, prob)))
}

/// Per-iteration record, exposed for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub objective: f64,
    pub restarted: bool,
}

/// Solves the surrogate problem from the zero kernel.
pub fn solve_surrogate(prob: &SurrogateProblem) -> Result<SurrogateSolution> {
    solve_with_trace(prob, |_| {})
}

/// [`solve_surrogate`] with a callback invoked after every accepted step.
pub fn solve_with_trace(prob: &SurrogateProblem, mut on_step: impl FnMut(IterRecord)) -> Result<SurrogateSolution> {
    let opts = &prob.options;
    let mut obj = Objective::new(prob);
    let len = obj.len();

    let lipschitz = 0.5 * obj.operator_norm_sq() * 1.01;
    let mut step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };

    let mut x = vec![0.0; len];
    let mut x_old = vec![0.0; len];
    let mut y = vec![0.0; len];
    let mut gy = vec![0.0; len];
    let mut cand = vec![0.0; len];

    let mut gx = vec![0.0; len];
    let mut dual_gap = None;
    let bounded = opts.beta_cap.is_some();

    let mut fx = obj.value_and_grad(&x, &mut gy)?;
    let mut fy = fx;
    let mut momentum = 1.0f64;
    let mut from_x = true;
    let mut history = VecDeque::with_capacity(STALL_WINDOW);
    let mut status = SolveStatus::MaxIters;
    let mut iters = 0;

    while iters < opts.max_iters {
        iters += 1;

        // backtracking on the quadratic majorant around y
        let (f_new, gm_norm) = loop {
            for (((c, yi), gi), di) in cand.iter_mut().zip(&y).zip(&gy).zip(&obj.metric) {
                *c = yi - step * gi / di;
            }
            obj.project(&mut cand);
            let f_new = obj.value(&cand, false)?;
            let mut lin = 0.0;
            let mut sq = 0.0;
            for (((c, yi), gi), di) in cand.iter().zip(&y).zip(&gy).zip(&obj.metric) {
                let d = c - yi;
                lin += gi * d;
                sq += di * d * d;
            }
            let bound = fy + lin + sq / (2.0 * step);
            if f_new <= bound + 1e-12 * fy.abs().max(1.0) || step < 1e-300 {
                break (f_new, sq.sqrt() / step);
            }
            step *= 0.5;
        };

        if opts.restart && f_new > fx {
            if from_x {
                // a plain gradient step from x no longer decreases f
                status = SolveStatus::Converged;
                break;
            }
            momentum = 1.0;
            y.copy_from_slice(&x);
            fy = obj.value_and_grad(&y, &mut gy)?;
            from_x = true;
            on_step(IterRecord { objective: fx, restarted: true });
            continue;
        }

        std::mem::swap(&mut x_old, &mut x);
        x.copy_from_slice(&cand);
        fx = f_new;
        step *= STEP_GROWTH;
        on_step(IterRecord { objective: fx, restarted: false });

        if history.len() == STALL_WINDOW {
            history.pop_front();
        }
        history.push_back(fx);
        let stalled = history.len() == STALL_WINDOW
            && history[0] - fx <= opts.tol_rel_obj * fx.abs().max(1.0);
        if gm_norm < opts.tol_pg || stalled {
            status = SolveStatus::Converged;
            break;
        }
        if bounded && iters % 25 == 0 {
            obj.value_and_grad(&x, &mut gx)?;
            dual_gap = obj.duality_gap(&x, &gx);
            if dual_gap.is_some_and(|g| g <= opts.tol_gap * fx.abs().max(1.0)) {
                status = SolveStatus::Converged;
                break;
            }
        }

        let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next;
        momentum = next;
        for ((yi, xi), xo) in y.iter_mut().zip(&x).zip(&x_old) {
            *yi = xi + beta * (xi - xo);
        }
        fy = obj.value_and_grad(&y, &mut gy)?;
        from_x = beta == 0.0;
    }

    if bounded {
        obj.value_and_grad(&x, &mut gx)?;
        dual_gap = obj.duality_gap(&x, &gx);
    }
    let rows = unflatten(&x, prob);
    let g_star: Vec<KernelMatrix> = rows.iter().map(|g| g.broadcast(prob.cfg.m)).collect();
    let trace = crate::features::kernel_values(&g_star, &prob.lagged, &prob.cfg.w)?;
    let j_lb = -log_likelihood(&trace.x, &prob.actions)?;
    let pi_star = policies(&trace.x)?;
    Ok(SurrogateSolution { g_star, x_star: trace.x, pi_star, j_lb, dual_gap, iters, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::kernel_from_params;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize, shared: bool) -> SurrogateProblem {
        let rewards: Vec<RewardSeries> = (0..k)
            .map(|_| (0..n).map(|_| (0..m).map(|_| f64::from(rng.gen_range(0..2u8))).collect()).collect())
            .collect();
        let actions: Vec<usize> = (0..n).map(|_| rng.gen_range(0..m)).collect();
        let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.5..1.5)).collect();
        let cfg = ModelConfig::new(m, n, k).with_weights(w).with_shared(shared);
        SurrogateProblem::new(&rewards, &actions, &cfg, SolverOptions::default()).unwrap()
    }

    #[test]
    fn zero_kernel_gives_uniform_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prob = random_problem(&mut rng, 3, 12, 2, false);
        let zeros = vec![KernelMatrix::zeros(3, 12); 2];
        let (f, _) = nll_and_gradient(&zeros, &prob).unwrap();
        assert!((f - 12.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for shared in [false, true] {
            let prob = random_problem(&mut rng, 3, 8, 2, shared);
            let rows = prob.rows_per_signal();
            let kernels: Vec<KernelMatrix> = (0..2)
                .map(|_| {
                    KernelMatrix::from_rows(
                        (0..rows).map(|_| (0..8).map(|_| rng.gen_range(-1.0..2.0)).collect()).collect(),
                    )
                    .unwrap()
                })
                .collect();
            let (_, grad) = nll_and_gradient(&kernels, &prob).unwrap();
            let h = 1e-5;
            for i in 0..2 {
                for r in 0..rows {
                    for c in 0..8 {
                        let mut plus = kernels.clone();
                        let mut minus = kernels.clone();
                        let mut rp = plus[i].rows().to_vec();
                        rp[r][c] += h;
                        plus[i] = KernelMatrix::from_rows(rp).unwrap();
                        let mut rm = minus[i].rows().to_vec();
                        rm[r][c] -= h;
                        minus[i] = KernelMatrix::from_rows(rm).unwrap();
                        let fd = (nll_and_gradient(&plus, &prob).unwrap().0
                            - nll_and_gradient(&minus, &prob).unwrap().0)
                            / (2.0 * h);
                        let g = grad[i].row(r)[c];
                        assert!((fd - g).abs() <= 1e-5 * g.abs().max(1.0), "fd {fd} vs {g}");
                    }
                }
            }
        }
    }

    #[test]
    fn zero_rewards_stay_at_zero_kernel() {
        let cfg = ModelConfig::new(2, 10, 1);
        let prob = SurrogateProblem::new(&[vec![vec![0.0; 2]; 10]], &[0, 1, 1, 0, 1, 0, 0, 0, 1, 1], &cfg, SolverOptions::default())
            .unwrap();
        let sol = solve_surrogate(&prob).unwrap();
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!(sol.g_star[0].rows().iter().flatten().all(|&v| v == 0.0));
        assert!((sol.j_lb - 10.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn iterates_stay_feasible_and_descend() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = random_problem(&mut rng, 2, 40, 1, false);
        let cfg = base.config().clone();
        let prob = SurrogateProblem::from_lagged(
            base.lagged().clone(),
            &base.actions,
            &cfg,
            SolverOptions { beta_cap: Some(vec![5.0]), ..SolverOptions::default() },
        )
        .unwrap();
        let mut last = f64::INFINITY;
        let sol = solve_with_trace(&prob, |rec| {
            assert!(rec.objective <= last + 1e-12);
            last = rec.objective;
        })
        .unwrap();
        for g in &sol.g_star {
            assert!(g.monotone_violation() <= 1e-12);
            assert!(g.rows().iter().all(|r| r[0] <= 5.0 + 1e-12));
        }
        assert!((sol.j_lb - last).abs() < 1e-9);
    }

    #[test]
    fn shared_mode_variable_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(random_problem(&mut rng, 4, 10, 2, true).variable_count(), 20);
        assert_eq!(random_problem(&mut rng, 4, 10, 2, false).variable_count(), 80);
    }

    #[test]
    fn single_arm_shared_equals_unshared() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rewards = vec![(0..15).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect::<Vec<_>>()];
        let actions = vec![0; 15];
        let opts = SolverOptions { beta_cap: Some(vec![2.0]), ..SolverOptions::default() };
        let a = solve_surrogate(
            &SurrogateProblem::new(&rewards, &actions, &ModelConfig::new(1, 15, 1), opts.clone()).unwrap(),
        )
        .unwrap();
        let b = solve_surrogate(
            &SurrogateProblem::new(&rewards, &actions, &ModelConfig::new(1, 15, 1).with_shared(true), opts).unwrap(),
        )
        .unwrap();
        assert_eq!(a.g_star, b.g_star);
        assert_eq!(a.j_lb, b.j_lb);
    }

    #[test]
    fn geometric_feasible_point_bounds_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let prob = random_problem(&mut rng, 2, 30, 1, false);
        let sol = solve_surrogate(&prob).unwrap();
        for _ in 0..20 {
            let a: Vec<f64> = (0..2).map(|_| rng.gen()).collect();
            let b: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..5.0)).collect();
            let g = kernel_from_params(&a, &b, 30).unwrap();
            let (f, _) = nll_and_gradient(&[g], &prob).unwrap();
            assert!(sol.j_lb <= f + 1e-6);
        }
    }

    #[test]
    fn options_validation() {
        assert!(SolverOptions { max_iters: 0, ..Default::default() }.validate(1).is_err());
        assert!(SolverOptions { tol_pg: 0.0, ..Default::default() }.validate(1).is_err());
        assert!(SolverOptions { beta_cap: Some(vec![1.0, 2.0]), ..Default::default() }.validate(1).is_err());
    }
}
