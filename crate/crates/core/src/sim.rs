//! Synthetic bandit episodes under the forgetting Q-learning model.
//!
//! Trial `t` (0-based) first realizes the outcome of the previous choice as
//! the reward vector `u(t)`, updates the values to `x(t)` and then draws
//! `actions[t]` from `softmax(x(t))`. The choice preceding trial 0 is drawn
//! uniformly and is not stored.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Episode};
use crate::error::{FitError, Result};
use crate::model::{one_hot, softmax_into, ModelConfig, RLParams};
use crate::rng::stream;

pub const TWO_ARM_PROBS: [f64; 2] = [0.9, 0.1];
pub const TWO_ARM_SHUFFLE: f64 = 0.02;
pub const TEN_ARM_PROBS: [f64; 10] = [0.30, 0.27, 0.95, 0.67, 0.69, 0.29, 0.42, 0.05, 0.73, 1.00];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Setup {
    /// One shared `(alpha, beta)` pair.
    Bsc,
    /// Per-arm `(alpha, beta)`.
    Ind,
    /// Per-arm parameters and a second signal equal to the previous choice.
    Sub,
}

impl Setup {
    pub fn signals(self) -> usize {
        match self {
            Setup::Sub => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bandit {
    #[serde(rename = "2AB")]
    TwoArm,
    #[serde(rename = "10AB")]
    TenArm,
}

/// Uniform sampling box for one signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub m: usize,
    pub reward_probs: Vec<f64>,
    pub shuffle_prob: f64,
    pub setup: Setup,
    pub n: usize,
    /// One box per signal.
    pub param_boxes: Vec<ParamBox>,
    pub seed: u64,
}

impl EnvSpec {
    /// Standard environment with the reference parameter ranges.
    pub fn preset(setup: Setup, bandit: Bandit, n: usize, seed: u64) -> Self {
        let (probs, shuffle, main_beta, aux_beta) = match bandit {
            Bandit::TwoArm => (TWO_ARM_PROBS.to_vec(), TWO_ARM_SHUFFLE, (0.0, 5.0), (0.0, 2.0)),
            Bandit::TenArm => (TEN_ARM_PROBS.to_vec(), 0.0, (5.0, 10.0), (0.0, 5.0)),
        };
        let mut param_boxes = vec![ParamBox { alpha: (0.0, 1.0), beta: main_beta }];
        if setup == Setup::Sub {
            param_boxes.push(ParamBox { alpha: (0.0, 1.0), beta: aux_beta });
        }
        EnvSpec { m: probs.len(), reward_probs: probs, shuffle_prob: shuffle, setup, n, param_boxes, seed }
    }

    pub fn k(&self) -> usize {
        self.setup.signals()
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.reward_probs.len() != self.m {
            return Err(FitError::config(format!(
                "reward_probs has {} entries for m = {}",
                self.reward_probs.len(),
                self.m
            )));
        }
        if self.reward_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(FitError::config("reward probabilities must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.shuffle_prob) {
            return Err(FitError::config("shuffle_prob must lie in [0, 1]"));
        }
        if self.n < 1 {
            return Err(FitError::config("n must be >= 1"));
        }
        if self.param_boxes.len() != self.k() {
            return Err(FitError::config(format!(
                "{:?} needs {} parameter boxes, got {}",
                self.setup,
                self.k(),
                self.param_boxes.len()
            )));
        }
        for (i, b) in self.param_boxes.iter().enumerate() {
            let (al, ah) = b.alpha;
            let (bl, bh) = b.beta;
            if !(0.0 <= al && al <= ah && ah <= 1.0) {
                return Err(FitError::config(format!("signal {i}: alpha box must lie in [0, 1]")));
            }
            if !(0.0 <= bl && bl <= bh && bh.is_finite()) {
                return Err(FitError::config(format!("signal {i}: beta box must be finite and nonnegative")));
            }
        }
        Ok(())
    }

    /// Fitting configuration matching this environment: unit weights,
    /// no truncation and the sampling range of beta as the beta box.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig::new(self.m, self.n, self.k())
            .with_shared(self.setup == Setup::Bsc)
            .with_beta_box(self.param_boxes.iter().map(|b| b.beta).collect())
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

/// Draws parameters uniformly from the boxes of `spec`.
pub fn sample_params(spec: &EnvSpec, rng: &mut ChaCha8Rng) -> Result<RLParams> {
    spec.validate()?;
    let per_signal = if spec.setup == Setup::Bsc { 1 } else { spec.m };
    let mut alpha = Vec::with_capacity(spec.k());
    let mut beta = Vec::with_capacity(spec.k());
    for b in &spec.param_boxes {
        let a: Vec<f64> = (0..per_signal).map(|_| draw(rng, b.alpha)).collect();
        let be: Vec<f64> = (0..per_signal).map(|_| draw(rng, b.beta)).collect();
        alpha.push(a);
        beta.push(be);
    }
    if spec.setup == Setup::Bsc {
        RLParams::shared_scalars(&[alpha[0][0]], &[beta[0][0]], spec.m)
    } else {
        RLParams::new(alpha, beta, false)
    }
}

fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    for (j, &p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return j;
        }
    }
    probs.len() - 1
}

/// Simulates one episode of `spec.n` trials and stores the ground truth.
pub fn run_episode(spec: &EnvSpec, params: &RLParams, rng: &mut ChaCha8Rng) -> Result<Episode> {
    spec.validate()?;
    params.validate()?;
    let (m, n, k) = (spec.m, spec.n, spec.k());
    if params.k() != k || params.m() != m {
        return Err(FitError::shape(format!(
            "params are {}x{}, environment expects {}x{}",
            params.k(),
            params.m(),
            k,
            m
        )));
    }

    let mut probs = spec.reward_probs.clone();
    let mut z = vec![vec![0.0; m]; k];
    let mut pi = vec![0.0; m];
    let mut actions = Vec::with_capacity(n);
    let mut rewards: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(n); k];
    let mut true_x = Vec::with_capacity(n);
    let mut prev = rng.gen_range(0..m);

    for _ in 0..n {
        let rewarded = rng.gen::<f64>() < probs[prev];
        let mut signals = vec![if rewarded { one_hot(prev, m) } else { vec![0.0; m] }];
        if spec.setup == Setup::Sub {
            signals.push(one_hot(prev, m));
        }
        if spec.shuffle_prob > 0.0 && rng.gen::<f64>() < spec.shuffle_prob {
            probs.shuffle(rng);
        }

        let mut x = vec![0.0; m];
        for (i, u) in signals.iter().enumerate() {
            for j in 0..m {
                let (a, b) = (params.alpha[i][j], params.beta[i][j]);
                z[i][j] = (1.0 - a) * z[i][j] + a * b * u[j];
                x[j] += z[i][j];
            }
        }
        softmax_into(&x, &mut pi);
        let action = sample_index(rng, &pi);

        for (i, u) in signals.into_iter().enumerate() {
            rewards[i].push(u);
        }
        actions.push(action);
        true_x.push(x);
        prev = action;
    }
    Ok(Episode { actions, rewards, true_params: Some(params.clone()), true_x: Some(true_x) })
}

/// Episode `e` uses its own stream derived from `(spec.seed, e)`, so the
/// result does not depend on the thread count.
pub fn simulate(spec: &EnvSpec, episodes: usize) -> Result<Vec<Episode>> {
    spec.validate()?;
    if episodes < 1 {
        return Err(FitError::config("episode count must be >= 1"));
    }
    (0..episodes)
        .into_par_iter()
        .map(|e| {
            let mut rng = stream(spec.seed, e as u64, u64::MAX);
            let params = sample_params(spec, &mut rng)?;
            run_episode(spec, &params, &mut rng)
        })
        .collect()
}

pub fn make_dataset(spec: &EnvSpec, episodes: usize) -> Result<Dataset> {
    Ok(Dataset::new(spec.clone(), simulate(spec, episodes)?))
}
