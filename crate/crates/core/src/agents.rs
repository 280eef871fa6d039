//! Engineered-cell agents: observation, action sampling, and execution.
//!
//! Actions live in a normalized cube `[-1, 1]^3` (secrete, move, amplify) and
//! are mapped affinely onto their physical bounds, so the zero vector is the
//! midpoint of every bound.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigIssue, Error, Result};
use crate::field::{ConcentrationField, FieldParams, SecretionProfile};
use crate::learning::PolicyParams;

pub const OBS_DIM: usize = 7;
pub const ACTION_DIM: usize = 3;

/// `[C, dC/dx, atp, injury_gradient, secretion_rate, coherence, oxidative_stress]`
pub type Observation = [f64; OBS_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HealthMetrics {
    pub atp: f64,
    pub injury_gradient: f64,
    pub secretion_rate: f64,
    pub neural_coherence: f64,
    pub oxidative_stress: f64,
}

impl HealthMetrics {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.atp,
            self.injury_gradient,
            self.secretion_rate,
            self.neural_coherence,
            self.oxidative_stress,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Action {
    pub secrete_rate: f64,
    pub move_delta: f64,
    pub amplify_gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActionBounds {
    pub secrete_max: f64,
    /// Largest displacement per step.
    pub max_step: f64,
    pub gain_max: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self {
            secrete_max: 1.0,
            max_step: 0.05,
            gain_max: 2.0,
        }
    }
}

impl ActionBounds {
    /// Maps a normalized action (clamped to `[-1, 1]`) onto the physical bounds.
    pub fn denormalize(&self, u: &[f64; ACTION_DIM]) -> Action {
        let c = u.map(|v| v.clamp(-1.0, 1.0));
        Action {
            secrete_rate: self.secrete_max * 0.5 * (c[0] + 1.0),
            move_delta: self.max_step * c[1],
            amplify_gain: self.gain_max * 0.5 * (c[2] + 1.0),
        }
    }

    pub fn contains(&self, a: &Action) -> bool {
        (0.0..=self.secrete_max).contains(&a.secrete_rate)
            && a.move_delta.abs() <= self.max_step
            && (0.0..=self.gain_max).contains(&a.amplify_gain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Standard deviation of the additive action noise, in normalized action units.
    pub action_noise: f64,
    /// Standard deviation of the additive observation noise.
    pub observation_noise: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            action_noise: 0.1,
            observation_noise: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub count: usize,
    pub spawn_min: f64,
    pub spawn_max: f64,
    pub bounds: ActionBounds,
    pub noise: NoiseConfig,
    /// Act on the policy mean instead of sampling from it.
    pub deterministic_policy: bool,
    /// Decay of the oxidative-stress running mean.
    pub stress_decay: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            count: 10,
            spawn_min: 0.0,
            spawn_max: 2.0,
            bounds: ActionBounds::default(),
            noise: NoiseConfig::default(),
            deterministic_policy: false,
            stress_decay: 0.99,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self, prefix: &str, field: &FieldParams, issues: &mut Vec<ConfigIssue>) {
        let mut bad = |name: &str, msg: &str| issues.push(ConfigIssue::new(format!("{prefix}.{name}"), msg));
        if self.count == 0 {
            bad("count", "must be at least 1");
        }
        if !(self.spawn_min <= self.spawn_max && self.spawn_min >= field.grid_min && self.spawn_max <= field.grid_max) {
            bad("spawn_max", "spawn region must be ordered and inside the grid");
        }
        let b = &self.bounds;
        for (name, v) in [("bounds.secrete_max", b.secrete_max), ("bounds.max_step", b.max_step), ("bounds.gain_max", b.gain_max)] {
            if !(v.is_finite() && v >= 0.0) {
                bad(name, "must be finite and >= 0");
            }
        }
        for (name, v) in [("noise.action_noise", self.noise.action_noise), ("noise.observation_noise", self.noise.observation_noise)] {
            if !(v.is_finite() && v >= 0.0) {
                bad(name, "must be finite and >= 0");
            }
        }
        if !(0.0..=1.0).contains(&self.stress_decay) {
            bad("stress_decay", "must lie in [0, 1]");
        }
    }

    /// Evenly spaced starting positions across the spawn region.
    pub fn spawn_positions(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![0.5 * (self.spawn_min + self.spawn_max)];
        }
        let step = (self.spawn_max - self.spawn_min) / (self.count - 1) as f64;
        (0..self.count).map(|k| self.spawn_min + k as f64 * step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub position: f64,
    /// Membrane potential, fed back through the neural channel.
    pub potential: f64,
    pub health: HealthMetrics,
    pub policy: PolicyParams,
}

impl AgentState {
    pub fn new(id: usize, position: f64, policy: PolicyParams) -> Self {
        Self {
            id,
            position,
            potential: 0.0,
            health: HealthMetrics::default(),
            policy,
        }
    }
}

/// Local concentration and gradient, then health, plus i.i.d. metabolic noise.
pub fn observe<R: Rng + ?Sized>(
    agent: &AgentState,
    field: &ConcentrationField,
    params: &FieldParams,
    observation_noise: f64,
    rng: &mut R,
) -> Observation {
    let h = agent.health.as_array();
    let mut obs = [
        field.value_at(params, agent.position),
        field.gradient_at_position(params, agent.position),
        h[0],
        h[1],
        h[2],
        h[3],
        h[4],
    ];
    if observation_noise > 0.0 {
        for v in obs.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += observation_noise * z;
        }
    }
    obs
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction {
    pub action: Action,
    /// Pre-noise, pre-clamp draw from the policy (what the gradient scores).
    pub sample: [f64; ACTION_DIM],
    /// Normalized action actually executed, after noise and clamping.
    pub executed: [f64; ACTION_DIM],
}

/// Draws from the Gaussian policy, adds execution noise, clamps into bounds.
///
/// In deterministic mode the policy mean is used and `policy_rng` is untouched.
pub fn sample_action<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    policy: &PolicyParams,
    observation: &Observation,
    bounds: &ActionBounds,
    action_noise: f64,
    deterministic: bool,
    policy_rng: &mut R1,
    noise_rng: &mut R2,
) -> Result<SampledAction> {
    if !policy.is_finite() {
        return Err(Error::NonFinite("policy parameters".into()));
    }
    let mean = policy.mean(observation);
    let std = policy.std();
    let mut sample = mean;
    if !deterministic {
        for d in 0..ACTION_DIM {
            let z: f64 = policy_rng.sample(StandardNormal);
            sample[d] += std[d] * z;
        }
    }
    let mut executed = sample;
    if action_noise > 0.0 {
        for v in executed.iter_mut() {
            let z: f64 = noise_rng.sample(StandardNormal);
            *v += action_noise * z;
        }
    }
    let executed = executed.map(|v| v.clamp(-1.0, 1.0));
    Ok(SampledAction {
        action: bounds.denormalize(&executed),
        sample,
        executed,
    })
}

/// Moves the agent (clamped to the grid) and returns its per-node secretion.
///
/// Secretion is a Gaussian bump of peak `secrete_rate` centred on the new position.
pub fn apply_action(agent: &mut AgentState, action: &Action, params: &FieldParams, width: f64) -> Vec<f64> {
    agent.position = params.clamp_position(agent.position + action.move_delta);
    let mut source = vec![0.0; params.num_cells];
    let bump = SecretionProfile {
        peak_rate: action.secrete_rate,
        target: agent.position,
        width,
    };
    bump.deposit(params, 1.0, &mut source);
    source
}

/// `1 - population variance` of the membrane potentials, clamped to `[0, 1]`.
pub fn coherence(potentials: &[f64]) -> f64 {
    if potentials.len() < 2 {
        return 1.0;
    }
    let n = potentials.len() as f64;
    let mean = potentials.iter().sum::<f64>() / n;
    let var = potentials.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    (1.0 - var).clamp(0.0, 1.0)
}

pub fn update_health(
    agent: &AgentState,
    field: &ConcentrationField,
    params: &FieldParams,
    potentials: &[f64],
    last_action: &Action,
    stress_decay: f64,
) -> HealthMetrics {
    HealthMetrics {
        atp: field.value_at(params, agent.position).max(0.0),
        injury_gradient: field.gradient_at_position(params, agent.position).abs(),
        secretion_rate: last_action.secrete_rate,
        neural_coherence: coherence(potentials),
        oxidative_stress: stress_decay * agent.health.oxidative_stress
            + (1.0 - stress_decay) * agent.potential.abs(),
    }
}
