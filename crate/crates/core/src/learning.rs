//! Entropy-regularized policy gradient with a centralized critic.
//!
//! Each agent owns a diagonal Gaussian policy over normalized actions in
//! `[-1, 1]^3`: the mean is `tanh(W s + b)` and the per-dimension log-std is a
//! free parameter. The ascent direction for one batch is
//!
//! ```text
//! grad J = mean_i[ grad log pi(u_i | s_i) * A_i ] + mu * grad H(pi)
//! ```
//!
//! with `A_i = G_i - V(joint observation)` normalized over the batch. The critic
//! is a single-hidden-layer tanh network over the concatenated observations of
//! all agents, trained by one gradient step on the squared return error.

use std::f64::consts::{E, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::agents::{Observation, ACTION_DIM, OBS_DIM};
use crate::error::{ConfigIssue, Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub const ADVANTAGE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyConfig {
    pub weight: f64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self { weight: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningConfig {
    pub policy_lr: f64,
    pub critic_lr: f64,
    pub discount: f64,
    /// Steps per update window.
    pub episode_length: usize,
    /// Apply an update after every step instead of once per episode.
    pub per_step_updates: bool,
    pub critic_hidden: usize,
    pub initial_log_std: f64,
    /// Standard deviation of the initial mean-head weights.
    pub policy_init_scale: f64,
    pub entropy: EntropyConfig,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            policy_lr: 1e-3,
            critic_lr: 1e-2,
            discount: 0.99,
            episode_length: 200,
            per_step_updates: false,
            critic_hidden: 64,
            initial_log_std: 0.0,
            policy_init_scale: 0.1,
            entropy: EntropyConfig::default(),
        }
    }
}

impl LearningConfig {
    /// Steps between consecutive updates.
    pub fn update_interval(&self) -> usize {
        if self.per_step_updates {
            1
        } else {
            self.episode_length
        }
    }

    pub fn validate(&self, prefix: &str, issues: &mut Vec<ConfigIssue>) {
        let mut bad = |name: &str, msg: &str| issues.push(ConfigIssue::new(format!("{prefix}.{name}"), msg));
        if !(self.policy_lr.is_finite() && self.policy_lr >= 0.0) {
            bad("policy_lr", "must be finite and >= 0");
        }
        if !(self.critic_lr.is_finite() && self.critic_lr >= 0.0) {
            bad("critic_lr", "must be finite and >= 0");
        }
        if !(0.0..1.0).contains(&self.discount) {
            bad("discount", "must lie in [0, 1)");
        }
        if self.episode_length == 0 {
            bad("episode_length", "must be at least 1");
        }
        if self.critic_hidden == 0 {
            bad("critic_hidden", "must be at least 1");
        }
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&self.initial_log_std) {
            bad("initial_log_std", "must lie in [-5, 2]");
        }
        if !(self.policy_init_scale.is_finite() && self.policy_init_scale >= 0.0) {
            bad("policy_init_scale", "must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.entropy.weight) {
            bad("entropy.weight", "must lie in [0, 1]");
        }
    }
}

/// Parameters of one agent's Gaussian policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub weights: [[f64; OBS_DIM]; ACTION_DIM],
    pub bias: [f64; ACTION_DIM],
    pub log_std: [f64; ACTION_DIM],
}

impl PolicyParams {
    pub const NUM_PARAMS: usize = ACTION_DIM * OBS_DIM + 2 * ACTION_DIM;

    pub fn zeros(log_std: f64) -> Self {
        Self {
            weights: [[0.0; OBS_DIM]; ACTION_DIM],
            bias: [0.0; ACTION_DIM],
            log_std: [log_std; ACTION_DIM],
        }
    }

    pub fn random<R: Rng + ?Sized>(init_scale: f64, log_std: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(log_std);
        for row in p.weights.iter_mut() {
            for w in row.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *w = init_scale * z;
            }
        }
        p
    }

    fn pre_activation(&self, obs: &Observation) -> [f64; ACTION_DIM] {
        let mut z = self.bias;
        for (d, row) in self.weights.iter().enumerate() {
            for (w, s) in row.iter().zip(obs.iter()) {
                z[d] += w * s;
            }
        }
        z
    }

    /// Policy mean in normalized action space.
    pub fn mean(&self, obs: &Observation) -> [f64; ACTION_DIM] {
        self.pre_activation(obs).map(f64::tanh)
    }

    pub fn std(&self) -> [f64; ACTION_DIM] {
        self.log_std.map(f64::exp)
    }

    pub fn log_prob(&self, obs: &Observation, sample: &[f64; ACTION_DIM]) -> f64 {
        let mean = self.mean(obs);
        (0..ACTION_DIM)
            .map(|d| {
                let s = self.log_std[d].exp();
                let z = (sample[d] - mean[d]) / s;
                -0.5 * z * z - self.log_std[d] - 0.5 * (2.0 * PI).ln()
            })
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }

    /// Flattened as `weights` (row-major), `bias`, `log_std`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::NUM_PARAMS);
        for row in &self.weights {
            v.extend_from_slice(row);
        }
        v.extend_from_slice(&self.bias);
        v.extend_from_slice(&self.log_std);
        v
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != Self::NUM_PARAMS {
            return Err(Error::Dimension {
                context: "policy parameters",
                expected: Self::NUM_PARAMS,
                actual: v.len(),
            });
        }
        let mut p = Self::zeros(0.0);
        let mut it = v.iter().copied();
        for row in p.weights.iter_mut() {
            for w in row.iter_mut() {
                *w = it.next().unwrap();
            }
        }
        for b in p.bias.iter_mut() {
            *b = it.next().unwrap();
        }
        for l in p.log_std.iter_mut() {
            *l = it.next().unwrap();
        }
        Ok(p)
    }
}

/// Gaussian differential entropy summed over action dimensions.
pub fn policy_entropy(policy: &PolicyParams) -> f64 {
    let per_dim = 0.5 * (2.0 * PI * E).ln();
    policy.log_std.iter().map(|l| l + per_dim).sum()
}

/// One scored action for the policy update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSample {
    pub observation: Observation,
    /// Pre-clamp policy draw in normalized action space.
    pub sample: [f64; ACTION_DIM],
    pub advantage: f64,
}

/// `mean_i[log pi(u_i|s_i) * A_i] + mu * H`, the objective whose gradient drives the update.
pub fn surrogate_objective(policy: &PolicyParams, samples: &[ScoredSample], entropy: &EntropyConfig) -> f64 {
    if samples.is_empty() {
        return entropy.weight * policy_entropy(policy);
    }
    let sum: f64 = samples
        .iter()
        .map(|s| policy.log_prob(&s.observation, &s.sample) * s.advantage)
        .sum();
    sum / samples.len() as f64 + entropy.weight * policy_entropy(policy)
}

/// Analytic gradient of [`surrogate_objective`], flattened like [`PolicyParams::to_vec`].
pub fn policy_gradient(policy: &PolicyParams, samples: &[ScoredSample], entropy: &EntropyConfig) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut g_w = [[0.0; OBS_DIM]; ACTION_DIM];
    let mut g_b = [0.0; ACTION_DIM];
    let mut g_l = [0.0; ACTION_DIM];
    let inv_var = policy.log_std.map(|l| (-2.0 * l).exp());

    for s in samples {
        let mean = policy.mean(&s.observation);
        for d in 0..ACTION_DIM {
            let diff = s.sample[d] - mean[d];
            let dlogp_dmean = diff * inv_var[d];
            let dmean_dz = 1.0 - mean[d] * mean[d];
            let dz = s.advantage * dlogp_dmean * dmean_dz;
            g_b[d] += dz;
            for (gw, o) in g_w[d].iter_mut().zip(s.observation.iter()) {
                *gw += dz * o;
            }
            g_l[d] += s.advantage * (diff * diff * inv_var[d] - 1.0);
        }
    }

    let inv_n = 1.0 / samples.len() as f64;
    let mut grad = Vec::with_capacity(PolicyParams::NUM_PARAMS);
    for row in &g_w {
        grad.extend(row.iter().map(|g| g * inv_n));
    }
    grad.extend(g_b.iter().map(|g| g * inv_n));
    // dH/dlog_std = 1 per dimension.
    grad.extend(g_l.iter().map(|g| g * inv_n + entropy.weight));

    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("policy gradient".into()));
    }
    Ok(grad)
}

/// Ascent step `theta <- theta + lr * grad J`, log-std clamped afterwards.
pub fn policy_gradient_step(
    policy: &PolicyParams,
    samples: &[ScoredSample],
    entropy: &EntropyConfig,
    lr: f64,
) -> Result<PolicyParams> {
    let grad = policy_gradient(policy, samples, entropy)?;
    let theta: Vec<f64> = policy.to_vec().iter().zip(&grad).map(|(t, g)| t + lr * g).collect();
    let mut next = PolicyParams::from_slice(&theta)?;
    for l in next.log_std.iter_mut() {
        *l = l.clamp(LOG_STD_MIN, LOG_STD_MAX);
    }
    Ok(next)
}

/// Centralized value function `V(joint observation)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    input_dim: usize,
    hidden: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let s1 = 1.0 / (input_dim as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        let mut normal = |scale: f64| {
            let z: f64 = rng.sample(StandardNormal);
            scale * z
        };
        let w1 = (0..hidden * input_dim).map(|_| normal(s1)).collect();
        let w2 = (0..hidden).map(|_| normal(s2)).collect();
        Self {
            input_dim,
            hidden,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: 0.0,
        }
    }

    /// A critic that outputs `value` everywhere.
    pub fn constant(input_dim: usize, hidden: usize, value: f64) -> Self {
        Self {
            input_dim,
            hidden,
            w1: vec![0.0; hidden * input_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: value,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_params(&self) -> usize {
        self.hidden * self.input_dim + 2 * self.hidden + 1
    }

    fn hidden_activations(&self, input: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|h| {
                let row = &self.w1[h * self.input_dim..(h + 1) * self.input_dim];
                let z = self.b1[h] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
                z.tanh()
            })
            .collect()
    }

    pub fn value(&self, input: &[f64]) -> f64 {
        debug_assert_eq!(input.len(), self.input_dim);
        let y = self.hidden_activations(input);
        self.b2 + self.w2.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>()
    }

    /// Flattened as `w1` (row-major), `b1`, `w2`, `b2`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn with_params(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.num_params() {
            return Err(Error::Dimension {
                context: "critic parameters",
                expected: self.num_params(),
                actual: v.len(),
            });
        }
        let n1 = self.hidden * self.input_dim;
        let h = self.hidden;
        Ok(Self {
            input_dim: self.input_dim,
            hidden: h,
            w1: v[..n1].to_vec(),
            b1: v[n1..n1 + h].to_vec(),
            w2: v[n1 + h..n1 + 2 * h].to_vec(),
            b2: v[n1 + 2 * h],
        })
    }

    /// Mean squared error of the critic against return targets.
    pub fn loss(&self, inputs: &[&[f64]], targets: &[f64]) -> f64 {
        let n = inputs.len() as f64;
        inputs
            .iter()
            .zip(targets)
            .map(|(x, g)| {
                let e = self.value(x) - g;
                e * e
            })
            .sum::<f64>()
            / n
    }

    /// Analytic gradient of [`Critic::loss`], flattened like [`Critic::to_vec`].
    pub fn loss_gradient(&self, inputs: &[&[f64]], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        if inputs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if inputs.len() != targets.len() {
            return Err(Error::Dimension {
                context: "critic targets",
                expected: inputs.len(),
                actual: targets.len(),
            });
        }
        let n1 = self.hidden * self.input_dim;
        let h = self.hidden;
        let mut grad = vec![0.0; self.num_params()];
        let mut loss = 0.0;
        let scale = 2.0 / inputs.len() as f64;

        for (x, &g) in inputs.iter().zip(targets) {
            if x.len() != self.input_dim {
                return Err(Error::Dimension {
                    context: "critic input",
                    expected: self.input_dim,
                    actual: x.len(),
                });
            }
            let y = self.hidden_activations(x);
            let v = self.b2 + self.w2.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>();
            let err = v - g;
            loss += err * err;
            let dv = scale * err;
            grad[n1 + 2 * h] += dv;
            for k in 0..h {
                grad[n1 + h + k] += dv * y[k];
                let dz = dv * self.w2[k] * (1.0 - y[k] * y[k]);
                grad[n1 + k] += dz;
                let row = &mut grad[k * self.input_dim..(k + 1) * self.input_dim];
                for (gw, xi) in row.iter_mut().zip(x.iter()) {
                    *gw += dz * xi;
                }
            }
        }
        Ok((loss / inputs.len() as f64, grad))
    }
}

/// Gradient-descent step on the critic; returns the updated critic and the pre-step loss.
pub fn critic_step(critic: &Critic, inputs: &[&[f64]], targets: &[f64], lr: f64) -> Result<(Critic, f64)> {
    let (loss, grad) = critic.loss_gradient(inputs, targets)?;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("critic loss".into()));
    }
    let phi: Vec<f64> = critic.to_vec().iter().zip(&grad).map(|(p, g)| p - lr * g).collect();
    Ok((critic.with_params(&phi)?, loss))
}

/// Discounted return-to-go, accumulated backwards.
pub fn discounted_returns(rewards: &[f64], discount: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (t, r) in rewards.iter().enumerate().rev() {
        acc = r + discount * acc;
        out[t] = acc;
    }
    out
}

/// Centres and scales to unit population variance; an all-equal input maps to zeros.
pub fn normalize_advantages(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = 1.0 / (var.sqrt() + ADVANTAGE_EPS);
    for v in values.iter_mut() {
        *v = (*v - mean) * scale;
    }
}

/// Per-agent tuple recorded during a rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub sample: [f64; ACTION_DIM],
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchStep {
    /// Concatenated observations of all agents, in agent order.
    pub joint_observation: Vec<f64>,
    pub transitions: Vec<Transition>,
}

/// Rollout of consecutive steps, one transition per agent per step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Batch {
    pub steps: Vec<BatchStep>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn num_agents(&self) -> usize {
        self.steps.first().map_or(0, |s| s.transitions.len())
    }

    pub fn num_transitions(&self) -> usize {
        self.steps.iter().map(|s| s.transitions.len()).sum()
    }

    pub fn rewards(&self, agent: usize) -> Vec<f64> {
        self.steps.iter().map(|s| s.transitions[agent].reward).collect()
    }

    /// Observation the agent made on the following step, if it is in the batch.
    pub fn next_observation(&self, step: usize, agent: usize) -> Option<&Observation> {
        self.steps.get(step + 1).map(|s| &s.transitions[agent].observation)
    }

    pub fn returns(&self, discount: f64) -> Vec<Vec<f64>> {
        (0..self.num_agents())
            .map(|k| discounted_returns(&self.rewards(k), discount))
            .collect()
    }
}

/// Batch-normalized `G_k(t) - V(joint_t)`, indexed `[agent][step]`.
pub fn compute_advantages(critic: &Critic, batch: &Batch, discount: f64) -> Result<Vec<Vec<f64>>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let values: Vec<f64> = batch.steps.iter().map(|s| critic.value(&s.joint_observation)).collect();
    let returns = batch.returns(discount);
    let n_agents = batch.num_agents();
    let mut flat: Vec<f64> = returns
        .iter()
        .flat_map(|g| g.iter().zip(&values).map(|(g, v)| g - v))
        .collect();
    normalize_advantages(&mut flat);
    Ok(flat.chunks(batch.len()).take(n_agents).map(<[f64]>::to_vec).collect())
}

/// Inputs and return targets for a critic update over the whole batch.
pub fn critic_targets(batch: &Batch, discount: f64) -> (Vec<&[f64]>, Vec<f64>) {
    let returns = batch.returns(discount);
    let mut inputs = Vec::with_capacity(batch.num_transitions());
    let mut targets = Vec::with_capacity(batch.num_transitions());
    for (t, step) in batch.steps.iter().enumerate() {
        for agent_returns in &returns {
            inputs.push(step.joint_observation.as_slice());
            targets.push(agent_returns[t]);
        }
    }
    (inputs, targets)
}

/// Mean critic value over the batch plus the best per-step mean reward seen.
///
/// Reported as a stand-in for a max action-value trace; no Q-function is learned.
pub fn max_value_estimate(critic: &Critic, batch: &Batch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mean_value =
        batch.steps.iter().map(|s| critic.value(&s.joint_observation)).sum::<f64>() / batch.len() as f64;
    let best = batch
        .steps
        .iter()
        .map(|s| s.transitions.iter().map(|t| t.reward).sum::<f64>() / s.transitions.len() as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(mean_value + best)
}
