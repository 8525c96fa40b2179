//! Direct baseline: best-of-multistart local minimization of the original
//! nonconvex negative log-likelihood over `(alpha, beta)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boxmin::{minimize_box, BoxMinOptions};
use crate::dataset::Episode;
use crate::error::{FitError, Result};
use crate::model::{log_likelihood, softmax_into, value_recursion, ModelConfig, RLParams};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlocOptions {
    pub restarts: usize,
    pub local_max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for DlocOptions {
    fn default() -> Self {
        DlocOptions { restarts: 5, local_max_iters: 500, tol: 1e-6, seed: 0 }
    }
}

/// Gradient of the negative log-likelihood with respect to every
/// `alpha[i][j]` and `beta[i][j]` (per arm, also for shared parameters).
#[derive(Debug, Clone, PartialEq)]
pub struct DlocGradient {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlocFit {
    pub params: RLParams,
    pub nll: f64,
    /// Final objective of each restart, in restart order.
    pub restart_nll: Vec<f64>,
}

fn check_inputs(params: &RLParams, episode: &Episode, cfg: &ModelConfig) -> Result<()> {
    cfg.validate()?;
    episode.check(cfg)?;
    params.check_boxes(cfg)
}

/// Negative log-likelihood of the episode under the recursion.
pub fn dloc_objective(params: &RLParams, episode: &Episode, cfg: &ModelConfig) -> Result<f64> {
    check_inputs(params, episode, cfg)?;
    let trace = value_recursion(params, &episode.rewards, cfg)?;
    Ok(-log_likelihood(&trace.x, &episode.actions)?)
}

/// Objective and gradient via forward sensitivities of the recursion,
/// `O(m n k)` like the objective itself.
pub fn dloc_gradient(params: &RLParams, episode: &Episode, cfg: &ModelConfig) -> Result<(f64, DlocGradient)> {
    check_inputs(params, episode, cfg)?;
    Ok(objective_and_gradient(params, episode, cfg))
}

fn objective_and_gradient(params: &RLParams, episode: &Episode, cfg: &ModelConfig) -> (f64, DlocGradient) {
    let (m, n, k) = (cfg.m, cfg.n, cfg.k);
    let mut x = vec![vec![0.0; m]; n];
    for i in 0..k {
        for j in 0..m {
            let (a, b) = (params.alpha[i][j], params.beta[i][j]);
            let mut z = 0.0;
            for t in 0..n {
                z = (1.0 - a) * z + a * b * episode.rewards[i][t][j];
                x[t][j] += cfg.w[i] * z;
            }
        }
    }
    let mut resid = vec![vec![0.0; m]; n];
    let mut nll = 0.0;
    for t in 0..n {
        let a = episode.actions[t];
        let lse = softmax_into(&x[t], &mut resid[t]);
        nll += lse - x[t][a];
        resid[t][a] -= 1.0;
    }
    let mut ga = vec![vec![0.0; m]; k];
    let mut gb = vec![vec![0.0; m]; k];
    for i in 0..k {
        for j in 0..m {
            let (a, b) = (params.alpha[i][j], params.beta[i][j]);
            let (mut z, mut dza, mut dzb) = (0.0, 0.0, 0.0);
            let (mut sa, mut sb) = (0.0, 0.0);
            for t in 0..n {
                let u = episode.rewards[i][t][j];
                dza = -z + (1.0 - a) * dza + b * u;
                dzb = (1.0 - a) * dzb + a * u;
                z = (1.0 - a) * z + a * b * u;
                sa += resid[t][j] * dza;
                sb += resid[t][j] * dzb;
            }
            ga[i][j] = cfg.w[i] * sa;
            gb[i][j] = cfg.w[i] * sb;
        }
    }
    (nll, DlocGradient { alpha: ga, beta: gb })
}

/// Packs parameters as `[alpha..., beta...]`: `2k` scalars when shared,
/// `2km` otherwise.
struct Packing {
    k: usize,
    m: usize,
    shared: bool,
}

impl Packing {
    fn width(&self) -> usize {
        if self.shared {
            1
        } else {
            self.m
        }
    }

    fn len(&self) -> usize {
        2 * self.k * self.width()
    }

    fn unpack(&self, v: &[f64]) -> RLParams {
        let w = self.width();
        let half = self.k * w;
        let expand = |base: usize, i: usize| -> Vec<f64> {
            (0..self.m).map(|j| v[base + i * w + if self.shared { 0 } else { j }]).collect()
        };
        RLParams {
            alpha: (0..self.k).map(|i| expand(0, i)).collect(),
            beta: (0..self.k).map(|i| expand(half, i)).collect(),
            shared: self.shared,
        }
    }

    fn pack_grad(&self, g: &DlocGradient, out: &mut [f64]) {
        let w = self.width();
        let half = self.k * w;
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.k {
            for j in 0..self.m {
                let slot = i * w + if self.shared { 0 } else { j };
                out[slot] += g.alpha[i][j];
                out[half + slot] += g.beta[i][j];
            }
        }
    }

    fn bounds(&self, cfg: &ModelConfig) -> (Vec<f64>, Vec<f64>) {
        let w = self.width();
        let mut lo = vec![0.0; self.len()];
        let mut hi = vec![1.0; self.len()];
        for i in 0..self.k {
            for s in 0..w {
                lo[self.k * w + i * w + s] = cfg.beta_box[i].0;
                hi[self.k * w + i * w + s] = cfg.beta_box[i].1;
            }
        }
        (lo, hi)
    }
}

/// Best-of-restarts projected local descent inside the parameter box.
/// Restart `r` starts from a uniform draw of the stream `(seed, r)`.
pub fn fit_dloc(episode: &Episode, cfg: &ModelConfig, opts: &DlocOptions) -> Result<DlocFit> {
    cfg.validate()?;
    episode.check(cfg)?;
    if opts.restarts < 1 {
        return Err(FitError::config("restarts must be >= 1"));
    }
    let packing = Packing { k: cfg.k, m: cfg.m, shared: cfg.shared };
    let (lo, hi) = packing.bounds(cfg);
    let init_hi: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .map(|(&l, &h)| if h.is_finite() { h } else { l + 10.0 })
        .collect();

    let runs: Vec<(Vec<f64>, f64)> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(opts.seed, r as u64, 0);
            let x0: Vec<f64> = lo
                .iter()
                .zip(&init_hi)
                .map(|(&l, &h)| if h > l { rng.gen_range(l..=h) } else { l })
                .collect();
            let res = minimize_box(
                |v, grad| {
                    let params = packing.unpack(v);
                    let (f, g) = objective_and_gradient(&params, episode, cfg);
                    if !f.is_finite() {
                        return Err(FitError::numeric("non-finite objective in direct fit"));
                    }
                    packing.pack_grad(&g, grad);
                    Ok(f)
                },
                &x0,
                &lo,
                &hi,
                BoxMinOptions { max_iters: opts.local_max_iters, tol: opts.tol },
            )?;
            Ok((res.x, res.f))
        })
        .collect::<Result<_>>()?;

    let restart_nll: Vec<f64> = runs.iter().map(|(_, f)| *f).collect();
    let (best, _) = runs
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.1.total_cmp(&b.1).then(ia.cmp(ib)))
        .expect("restarts >= 1");
    let params = packing.unpack(&runs[best].0);
    let nll = dloc_objective(&params, episode, cfg)?;
    Ok(DlocFit { params, nll, restart_nll })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_episode(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize) -> Episode {
        Episode {
            actions: (0..n).map(|_| rng.gen_range(0..m)).collect(),
            rewards: (0..k)
                .map(|_| (0..n).map(|_| (0..m).map(|_| f64::from(rng.gen_range(0..2u8))).collect()).collect())
                .collect(),
            true_params: None,
            true_x: None,
        }
    }

    #[test]
    fn zero_learning_rate_gives_uniform_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ep = random_episode(&mut rng, 3, 20, 1);
        let cfg = ModelConfig::new(3, 20, 1);
        let params = RLParams::shared_scalars(&[0.0], &[4.0], 3).unwrap();
        let f = dloc_objective(&params, &ep, &cfg).unwrap();
        assert!((f - 20.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn objective_rejects_out_of_box_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ep = random_episode(&mut rng, 2, 5, 1);
        let cfg = ModelConfig::new(2, 5, 1).with_beta_box(vec![(0.0, 5.0)]);
        let params = RLParams::shared_scalars(&[0.5], &[6.0], 2).unwrap();
        assert!(matches!(dloc_objective(&params, &ep, &cfg), Err(FitError::Domain(_))));
    }

    #[test]
    fn gradient_matches_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ep = random_episode(&mut rng, 3, 15, 2);
        let cfg = ModelConfig::new(3, 15, 2).with_weights(vec![1.0, -0.5]);
        let params = RLParams::new(
            vec![vec![0.3, 0.5, 0.7], vec![0.2, 0.9, 0.4]],
            vec![vec![1.0, 2.0, 3.0], vec![0.5, 1.5, 2.5]],
            false,
        )
        .unwrap();
        let (f, g) = dloc_gradient(&params, &ep, &cfg).unwrap();
        assert_eq!(f, dloc_objective(&params, &ep, &cfg).unwrap());
        let h = 1e-6;
        for i in 0..2 {
            for j in 0..3 {
                let mut p = params.clone();
                p.alpha[i][j] += h;
                let mut q = params.clone();
                q.alpha[i][j] -= h;
                let fd = (dloc_objective(&p, &ep, &cfg).unwrap() - dloc_objective(&q, &ep, &cfg).unwrap()) / (2.0 * h);
                assert!((fd - g.alpha[i][j]).abs() <= 1e-4 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn objective_equals_surrogate_at_geometric_kernels() {
        use crate::features::kernel_from_params;
        use crate::surrogate::{nll_and_gradient, SolverOptions, SurrogateProblem};
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let (m, n, k) = (rng.gen_range(2..5), rng.gen_range(1..50), rng.gen_range(1..3));
            let ep = random_episode(&mut rng, m, n, k);
            let cfg = ModelConfig::new(m, n, k);
            let alpha: Vec<Vec<f64>> = (0..k).map(|_| (0..m).map(|_| rng.gen_range(0.0..=1.0)).collect()).collect();
            let beta: Vec<Vec<f64>> = (0..k).map(|_| (0..m).map(|_| rng.gen_range(0.0..5.0)).collect()).collect();
            let params = RLParams::new(alpha, beta, false).unwrap();
            let kernels: Vec<_> =
                (0..k).map(|i| kernel_from_params(&params.alpha[i], &params.beta[i], n).unwrap()).collect();
            let prob = SurrogateProblem::new(&ep.rewards, &ep.actions, &cfg, SolverOptions::default()).unwrap();
            let (f, _) = nll_and_gradient(&kernels, &prob).unwrap();
            assert!((f - dloc_objective(&params, &ep, &cfg).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_at_box_corner_matches_one_sided_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ep = random_episode(&mut rng, 2, 25, 1);
        let cfg = ModelConfig::new(2, 25, 1);
        let params = RLParams::new(vec![vec![0.0, 1.0]], vec![vec![0.0, 2.0]], false).unwrap();
        let (f, g) = dloc_gradient(&params, &ep, &cfg).unwrap();
        let h = 1e-7;
        let mut p = params.clone();
        p.alpha[0][0] += h;
        let fd = (dloc_objective(&p, &ep, &cfg).unwrap() - f) / h;
        assert!((fd - g.alpha[0][0]).abs() <= 1e-4 * fd.abs().max(1.0));
        let mut q = params.clone();
        q.alpha[0][1] -= h;
        let fd = (f - dloc_objective(&q, &ep, &cfg).unwrap()) / h;
        assert!((fd - g.alpha[0][1]).abs() <= 1e-4 * fd.abs().max(1.0));
    }

    #[test]
    fn sensitivity_gradient_sign_on_one_trial() {
        // arm 0 rewarded and then chosen: more sensitivity helps
        let ep = Episode {
            actions: vec![0],
            rewards: vec![vec![vec![1.0, 0.0]]],
            true_params: None,
            true_x: None,
        };
        let cfg = ModelConfig::new(2, 1, 1);
        let params = RLParams::new(vec![vec![0.5, 0.5]], vec![vec![1.0, 1.0]], false).unwrap();
        let (_, g) = dloc_gradient(&params, &ep, &cfg).unwrap();
        assert!(g.beta[0][0] < 0.0 && g.beta[0][1] == 0.0);
    }

    #[test]
    fn restarts_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ep = random_episode(&mut rng, 2, 40, 1);
        let cfg = ModelConfig::new(2, 40, 1).with_shared(true).with_beta_box(vec![(0.0, 5.0)]);
        let opts = DlocOptions { seed: 12, ..DlocOptions::default() };
        let a = fit_dloc(&ep, &cfg, &opts).unwrap();
        let b = fit_dloc(&ep, &cfg, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.nll, a.restart_nll.iter().copied().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn single_restart_is_single_descent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ep = random_episode(&mut rng, 2, 30, 1);
        let cfg = ModelConfig::new(2, 30, 1).with_shared(true).with_beta_box(vec![(0.0, 5.0)]);
        let one = fit_dloc(&ep, &cfg, &DlocOptions { restarts: 1, seed: 3, ..Default::default() }).unwrap();
        let five = fit_dloc(&ep, &cfg, &DlocOptions { restarts: 5, seed: 3, ..Default::default() }).unwrap();
        assert_eq!(one.restart_nll.len(), 1);
        assert_eq!(one.restart_nll[0], five.restart_nll[0]);
        assert!(five.nll <= one.nll);
    }
}
