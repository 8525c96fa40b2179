//! Forgetting Q-learning model: value recursion, softmax choice policy and
//! the log-likelihood of observed actions.
//!
//! Conventions used throughout the crate:
//!
//! * actions are 0-based arm indices, `actions[t]` is the choice made at
//!   trial `t + 1` from the policy of the value vector `x(t + 1)`;
//! * reward series are indexed `[signal][t][arm]`;
//! * value traces are indexed `[t][arm]` for `x` and `[signal][t][arm]` for
//!   the subvalues `z`.

use serde::{Deserialize, Serialize};

use crate::error::{FitError, Result};

/// Reward (or subreward) series of one signal, indexed `[t][arm]`.
pub type RewardSeries = Vec<Vec<f64>>;

/// One-hot encoding of an action index.
pub fn one_hot(action: usize, m: usize) -> Vec<f64> {
    let mut y = vec![0.0; m];
    y[action] = 1.0;
    y
}

/// Learning rates and reward sensitivities, `k` vectors of length `m` each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RLParams {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    #[serde(default)]
    pub shared: bool,
}

impl RLParams {
    /// Validates shapes and the `0 <= alpha <= 1`, `beta >= 0` constraints.
    pub fn new(alpha: Vec<Vec<f64>>, beta: Vec<Vec<f64>>, shared: bool) -> Result<Self> {
        let params = RLParams { alpha, beta, shared };
        params.validate()?;
        Ok(params)
    }

    /// One scalar `(alpha, beta)` pair per signal, broadcast to all `m` arms.
    pub fn shared_scalars(alpha: &[f64], beta: &[f64], m: usize) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(FitError::shape(format!(
                "{} learning rates for {} sensitivities",
                alpha.len(),
                beta.len()
            )));
        }
        RLParams::new(
            alpha.iter().map(|&a| vec![a; m]).collect(),
            beta.iter().map(|&b| vec![b; m]).collect(),
            true,
        )
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn m(&self) -> usize {
        self.alpha.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.alpha.len();
        if k == 0 || self.beta.len() != k {
            return Err(FitError::shape(format!(
                "params need k >= 1 matching signals, got {} alpha / {} beta",
                k,
                self.beta.len()
            )));
        }
        let m = self.m();
        for i in 0..k {
            if self.alpha[i].len() != m || self.beta[i].len() != m {
                return Err(FitError::shape(format!(
                    "signal {i}: expected {m} entries in alpha and beta"
                )));
            }
            for j in 0..m {
                let (a, b) = (self.alpha[i][j], self.beta[i][j]);
                if !(0.0..=1.0).contains(&a) {
                    return Err(FitError::domain(format!("alpha[{i}][{j}] = {a} outside [0, 1]")));
                }
                if !(b >= 0.0 && b.is_finite()) {
                    return Err(FitError::domain(format!("beta[{i}][{j}] = {b} must be finite and >= 0")));
                }
            }
            if self.shared
                && (self.alpha[i].iter().any(|&a| a != self.alpha[i][0])
                    || self.beta[i].iter().any(|&b| b != self.beta[i][0]))
            {
                return Err(FitError::domain(format!(
                    "signal {i}: shared params must be equal across arms"
                )));
            }
        }
        Ok(())
    }

    /// Checks the parameters against the sensitivity boxes of `cfg`.
    pub fn check_boxes(&self, cfg: &ModelConfig) -> Result<()> {
        self.validate()?;
        if self.k() != cfg.k || self.m() != cfg.m {
            return Err(FitError::shape(format!(
                "params are {}x{}, config expects {}x{}",
                self.k(),
                self.m(),
                cfg.k,
                cfg.m
            )));
        }
        for (i, row) in self.beta.iter().enumerate() {
            let (lo, hi) = cfg.beta_box[i];
            if let Some(b) = row.iter().find(|&&b| b < lo || b > hi) {
                return Err(FitError::domain(format!(
                    "beta = {b} of signal {i} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Structural description of the model being fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub w: Vec<f64>,
    /// Horizon length, `1 <= p <= n`.
    pub p: usize,
    pub shared: bool,
    /// Per-signal `[beta_min, beta_max]`.
    pub beta_box: Vec<(f64, f64)>,
}

impl ModelConfig {
    /// Unit weights, no truncation, unshared parameters, `beta in [0, inf)`.
    pub fn new(m: usize, n: usize, k: usize) -> Self {
        ModelConfig {
            m,
            n,
            k,
            w: vec![1.0; k],
            p: n,
            shared: false,
            beta_box: vec![(0.0, f64::INFINITY); k],
        }
    }

    pub fn with_weights(mut self, w: Vec<f64>) -> Self {
        self.w = w;
        self
    }

    pub fn with_horizon(mut self, p: usize) -> Self {
        self.p = p;
        self
    }

    pub fn with_shared(mut self, shared: bool) -> Self {
        self.shared = shared;
        self
    }

    pub fn with_beta_box(mut self, beta_box: Vec<(f64, f64)>) -> Self {
        self.beta_box = beta_box;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.n < 1 || self.k < 1 {
            return Err(FitError::config(format!(
                "need m, n, k >= 1 (got m={}, n={}, k={})",
                self.m, self.n, self.k
            )));
        }
        if self.p < 1 || self.p > self.n {
            return Err(FitError::config(format!(
                "horizon p={} outside [1, {}]",
                self.p, self.n
            )));
        }
        if self.w.len() != self.k {
            return Err(FitError::config(format!(
                "{} weights for {} signals",
                self.w.len(),
                self.k
            )));
        }
        if self.w.iter().any(|w| !w.is_finite()) {
            return Err(FitError::config("weights must be finite"));
        }
        if self.beta_box.len() != self.k {
            return Err(FitError::config(format!(
                "{} beta boxes for {} signals",
                self.beta_box.len(),
                self.k
            )));
        }
        for (i, &(lo, hi)) in self.beta_box.iter().enumerate() {
            if !(lo >= 0.0 && lo <= hi) || lo.is_infinite() {
                return Err(FitError::config(format!(
                    "beta box of signal {i} is [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Checks that a reward tensor matches `k x n x m`.
    pub fn check_rewards(&self, rewards: &[RewardSeries]) -> Result<()> {
        if rewards.len() != self.k {
            return Err(FitError::shape(format!(
                "{} reward signals, config expects {}",
                rewards.len(),
                self.k
            )));
        }
        for (i, series) in rewards.iter().enumerate() {
            if series.len() != self.n {
                return Err(FitError::shape(format!(
                    "signal {i} has {} steps, config expects {}",
                    series.len(),
                    self.n
                )));
            }
            for (t, u) in series.iter().enumerate() {
                if u.len() != self.m {
                    return Err(FitError::shape(format!(
                        "signal {i}, step {t}: {} arms, config expects {}",
                        u.len(),
                        self.m
                    )));
                }
                if u.iter().any(|v| !v.is_finite()) {
                    return Err(FitError::domain(format!("signal {i}, step {t}: non-finite reward")));
                }
            }
        }
        Ok(())
    }

    pub fn check_actions(&self, actions: &[usize]) -> Result<()> {
        if actions.len() != self.n {
            return Err(FitError::shape(format!(
                "{} actions, config expects {}",
                actions.len(),
                self.n
            )));
        }
        if let Some((t, a)) = actions.iter().enumerate().find(|(_, &a)| a >= self.m) {
            return Err(FitError::shape(format!("action {a} at step {t} with only {} arms", self.m)));
        }
        Ok(())
    }
}

/// Value function `x(1..n)` and subvalues `z^(i)(1..n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTrace {
    pub x: Vec<Vec<f64>>,
    pub z: Vec<Vec<Vec<f64>>>,
}

/// Runs the forgetting recursion `z(t) = (1 - a) z(t-1) + a b u(t)` from
/// `z(0) = 0` for every signal and combines the subvalues with `cfg.w`.
pub fn value_recursion(
    params: &RLParams,
    rewards: &[RewardSeries],
    cfg: &ModelConfig,
) -> Result<ValueTrace> {
    cfg.validate()?;
    params.validate()?;
    cfg.check_rewards(rewards)?;
    if params.k() != cfg.k || params.m() != cfg.m {
        return Err(FitError::shape(format!(
            "params are {}x{}, config expects {}x{}",
            params.k(),
            params.m(),
            cfg.k,
            cfg.m
        )));
    }

    let (m, n) = (cfg.m, cfg.n);
    let mut x = vec![vec![0.0; m]; n];
    let mut z = Vec::with_capacity(cfg.k);
    for (i, series) in rewards.iter().enumerate() {
        let (alpha, beta) = (&params.alpha[i], &params.beta[i]);
        let mut zi = vec![vec![0.0; m]; n];
        let mut prev = vec![0.0; m];
        for t in 0..n {
            for j in 0..m {
                prev[j] = (1.0 - alpha[j]) * prev[j] + alpha[j] * beta[j] * series[t][j];
                zi[t][j] = prev[j];
                x[t][j] += cfg.w[i] * prev[j];
            }
        }
        z.push(zi);
    }
    Ok(ValueTrace { x, z })
}

/// `log(sum(exp(x)))` with max subtraction.
pub fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + x.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Writes `softmax(x)` into `out` and returns `log_sum_exp(x)`.
pub(crate) fn softmax_into(x: &[f64], out: &mut [f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    max + sum.ln()
}

/// Softmax choice probabilities for the value vector `x`.
pub fn policy(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(FitError::shape("policy of an empty value vector"));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(FitError::numeric(format!("non-finite value {v} in policy input")));
    }
    let mut out = vec![0.0; x.len()];
    softmax_into(x, &mut out);
    Ok(out)
}

/// Policies for a whole value sequence.
pub fn policies(x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    x.iter().map(|xt| policy(xt)).collect()
}

/// `sum_t (x(t)[a_t] - logsumexp(x(t)))`, always `<= 0`.
pub fn log_likelihood(x: &[Vec<f64>], actions: &[usize]) -> Result<f64> {
    if x.len() != actions.len() {
        return Err(FitError::shape(format!(
            "{} value vectors for {} actions",
            x.len(),
            actions.len()
        )));
    }
    let mut total = 0.0;
    for (t, (xt, &a)) in x.iter().zip(actions).enumerate() {
        if a >= xt.len() {
            return Err(FitError::shape(format!("action {a} at step {t} with {} arms", xt.len())));
        }
        if xt.iter().any(|v| !v.is_finite()) {
            return Err(FitError::numeric(format!("non-finite value at step {t}")));
        }
        total += xt[a] - log_sum_exp(xt);
    }
    Ok(total.min(0.0))
}

/// Negative log-likelihood of `actions` under `params`.
pub fn negative_log_likelihood(
    params: &RLParams,
    rewards: &[RewardSeries],
    actions: &[usize],
    cfg: &ModelConfig,
) -> Result<f64> {
    cfg.check_actions(actions)?;
    let trace = value_recursion(params, rewards, cfg)?;
    Ok(-log_likelihood(&trace.x, actions)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ratio_form(x: &[Vec<f64>], actions: &[usize]) -> f64 {
        x.iter()
            .zip(actions)
            .map(|(xt, &a)| {
                let denom: f64 = xt.iter().map(|v| v.exp()).sum();
                (xt[a].exp() / denom).ln()
            })
            .sum()
    }

    #[test]
    fn alpha_one_forgets_history() {
        let cfg = ModelConfig::new(3, 4, 1);
        let params = RLParams::new(vec![vec![1.0; 3]], vec![vec![2.0, 0.5, 3.0]], false).unwrap();
        let rewards = vec![vec![
            vec![1.0, 0.0, -1.0],
            vec![0.0, 1.0, 0.0],
            vec![0.5, 0.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ]];
        let trace = value_recursion(&params, &rewards, &cfg).unwrap();
        for t in 0..4 {
            for j in 0..3 {
                assert_eq!(trace.z[0][t][j], params.beta[0][j] * rewards[0][t][j]);
            }
        }
    }

    #[test]
    fn alpha_zero_keeps_zero_values() {
        let cfg = ModelConfig::new(2, 3, 1);
        let params = RLParams::new(vec![vec![0.0; 2]], vec![vec![4.0; 2]], true).unwrap();
        let rewards = vec![vec![vec![1.0, 1.0]; 3]];
        let trace = value_recursion(&params, &rewards, &cfg).unwrap();
        assert!(trace.x.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn half_rate_matches_geometric_series() {
        let n = 30;
        let cfg = ModelConfig::new(1, n, 1);
        let params = RLParams::new(vec![vec![0.5]], vec![vec![1.0]], false).unwrap();
        let rewards = vec![vec![vec![1.0]; n]];
        let trace = value_recursion(&params, &rewards, &cfg).unwrap();
        for t in 1..=n {
            let oracle: f64 = (1..=t).map(|tau| 0.5f64.powi((t - tau) as i32) * 0.5).sum();
            assert!((trace.x[t - 1][0] - oracle).abs() < 1e-15);
            assert!((trace.x[t - 1][0] - (1.0 - 0.5f64.powi(t as i32))).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_combine_subvalues() {
        let cfg = ModelConfig::new(2, 5, 2).with_weights(vec![0.5, -2.0]);
        let params = RLParams::new(
            vec![vec![0.3, 0.6], vec![0.9, 0.1]],
            vec![vec![1.0, 2.0], vec![0.5, 3.0]],
            false,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rewards: Vec<RewardSeries> = (0..2)
            .map(|_| (0..5).map(|_| (0..2).map(|_| rng.gen::<f64>()).collect()).collect())
            .collect();
        let trace = value_recursion(&params, &rewards, &cfg).unwrap();
        for t in 0..5 {
            for j in 0..2 {
                let expect = 0.5 * trace.z[0][t][j] - 2.0 * trace.z[1][t][j];
                assert!((trace.x[t][j] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn recursion_rejects_shape_mismatch() {
        let cfg = ModelConfig::new(2, 3, 1);
        let params = RLParams::new(vec![vec![0.5; 2]], vec![vec![1.0; 2]], false).unwrap();
        let short = vec![vec![vec![1.0, 0.0]; 2]];
        assert!(matches!(value_recursion(&params, &short, &cfg), Err(FitError::Shape(_))));
        let wide = vec![vec![vec![1.0, 0.0, 0.0]; 3]];
        assert!(matches!(value_recursion(&params, &wide, &cfg), Err(FitError::Shape(_))));
        let two_signals = vec![vec![vec![1.0, 0.0]; 3]; 2];
        assert!(matches!(value_recursion(&params, &two_signals, &cfg), Err(FitError::Shape(_))));
    }

    #[test]
    fn params_validation() {
        assert!(matches!(
            RLParams::new(vec![vec![1.5]], vec![vec![1.0]], false),
            Err(FitError::Domain(_))
        ));
        assert!(matches!(
            RLParams::new(vec![vec![0.5]], vec![vec![-1.0]], false),
            Err(FitError::Domain(_))
        ));
        assert!(matches!(
            RLParams::new(vec![vec![0.5, 0.4]], vec![vec![1.0, 1.0]], true),
            Err(FitError::Domain(_))
        ));
        assert!(RLParams::shared_scalars(&[0.2, 0.3], &[1.0, 2.0], 4).is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::new(2, 10, 1).validate().is_ok());
        assert!(ModelConfig::new(2, 10, 1).with_horizon(0).validate().is_err());
        assert!(ModelConfig::new(2, 10, 1).with_horizon(11).validate().is_err());
        assert!(ModelConfig::new(2, 10, 2).with_weights(vec![1.0]).validate().is_err());
        assert!(ModelConfig::new(2, 10, 1)
            .with_beta_box(vec![(3.0, 1.0)])
            .validate()
            .is_err());
    }

    #[test]
    fn policy_examples() {
        let p = policy(&[0.0; 4]).unwrap();
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));

        let p = policy(&[3f64.ln(), 0.0]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);

        let p = policy(&[1000.0, 0.0]).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1] >= 0.0 && p[1] < 1e-300);

        assert!(matches!(policy(&[f64::NAN, 0.0]), Err(FitError::Numeric(_))));
        assert!(matches!(policy(&[f64::INFINITY, 0.0]), Err(FitError::Numeric(_))));
    }

    #[test]
    fn log_likelihood_examples() {
        let ll = log_likelihood(&[vec![0.0, 0.0]], &[0]).unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-15);

        let x = vec![vec![50.0, -50.0], vec![-40.0, 40.0]];
        let ll = log_likelihood(&x, &[0, 1]).unwrap();
        assert!(ll <= 0.0 && ll > -1e-30);

        assert!(matches!(log_likelihood(&x, &[0]), Err(FitError::Shape(_))));
        assert!(matches!(log_likelihood(&x, &[0, 2]), Err(FitError::Shape(_))));
    }

    #[test]
    fn log_likelihood_matches_ratio_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let m = rng.gen_range(2..6);
            let n = rng.gen_range(1..8);
            let x: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect())
                .collect();
            let a: Vec<usize> = (0..n).map(|_| rng.gen_range(0..m)).collect();
            let ll = log_likelihood(&x, &a).unwrap();
            assert!((ll - ratio_form(&x, &a)).abs() < 1e-10);
        }
    }

    #[test]
    fn basic_model_is_special_case() {
        // k = 1, w = 1, shared params: the direct scalar recursion.
        let (m, n) = (3, 25);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rewards: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| f64::from(rng.gen_range(0..2u8))).collect())
            .collect();
        let (a, b) = (0.37, 2.2);
        let params = RLParams::shared_scalars(&[a], &[b], m).unwrap();
        let trace = value_recursion(&params, &[rewards.clone()], &ModelConfig::new(m, n, 1)).unwrap();
        let mut x = vec![0.0; m];
        for t in 0..n {
            for j in 0..m {
                x[j] = (1.0 - a) * x[j] + a * b * rewards[t][j];
            }
            assert_eq!(trace.x[t], x);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        fn nll(x: &[Vec<f64>], a: &[usize]) -> f64 {
            -log_likelihood(x, a).unwrap()
        }

        proptest! {
            #[test]
            fn policy_is_on_simplex(x in prop::collection::vec(-700.0f64..700.0, 1..12)) {
                let p = policy(&x).unwrap();
                prop_assert!(p.iter().all(|&v| v >= 0.0 && v.is_finite()));
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }

            #[test]
            fn policy_is_positive_for_moderate_inputs(x in prop::collection::vec(-300.0f64..300.0, 1..12)) {
                let p = policy(&x).unwrap();
                prop_assert!(p.iter().all(|&v| v > 0.0));
            }

            #[test]
            fn nll_is_midpoint_convex(
                seed in any::<u64>(),
                m in 2usize..5,
                n in 1usize..6,
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut draw = || -> Vec<Vec<f64>> {
                    (0..n).map(|_| (0..m).map(|_| rng.gen_range(-10.0..10.0)).collect()).collect()
                };
                let x1 = draw();
                let x2 = draw();
                let a: Vec<usize> = (0..n).map(|t| (t * 7 + seed as usize) % m).collect();
                let mid: Vec<Vec<f64>> = x1
                    .iter()
                    .zip(&x2)
                    .map(|(u, v)| u.iter().zip(v).map(|(p, q)| 0.5 * (p + q)).collect())
                    .collect();
                prop_assert!(nll(&mid, &a) <= 0.5 * (nll(&x1, &a) + nll(&x2, &a)) + 1e-9);
            }
        }
    }
}
