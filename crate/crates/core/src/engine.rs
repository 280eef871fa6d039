//! The outer simulation loop.
//!
//! One call to [`Engine::step`] runs, in this order: field solve, observe and
//! sample, neural transmission, rewards, batch accumulation (with an update at
//! each window boundary), Hebbian update, curriculum update, and finally action
//! execution, which produces the sources for the next field solve.

use crate::agents::{
    apply_action, observe, sample_action, update_health, Action, AgentState, HealthMetrics, Observation,
    ACTION_DIM,
};
use crate::comms::{hebbian_update, total_inputs, transmit, ConnectionMatrix, WeightStats};
use crate::config::EngineConfig;
use crate::curriculum::{difficulty_to_scenario, CurriculumSchedule, InjurySite, Scenario};
use crate::error::{Error, Result};
use crate::field::{peak_position, step_field, ConcentrationField, FieldParams, SecretionProfile};
use crate::learning::{
    compute_advantages, critic_step, critic_targets, max_value_estimate, policy_entropy, policy_gradient_step,
    Batch, BatchStep, Critic, PolicyParams, ScoredSample, Transition,
};
use crate::reward::{chem_term, external_reward, sync_term, ActivationWindow, RewardBreakdown};
use crate::rng::{stream, SimRng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRecord {
    /// Position after this step's move.
    pub position: f64,
    pub potential: f64,
    pub action: Action,
    pub health: HealthMetrics,
    pub reward: RewardBreakdown,
}

/// Everything observable about one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    /// Field right after this step's solve.
    pub field: Vec<f64>,
    pub clamped: usize,
    pub agents: Vec<AgentRecord>,
    pub weights: WeightStats,
    pub curriculum_target: f64,
    pub injury_position: f64,
}

impl StepRecord {
    pub fn total_secretion(&self) -> f64 {
        self.agents.iter().map(|a| a.action.secrete_rate).sum()
    }
}

/// Statistics of one update window.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub steps: usize,
    pub mean_reward: f64,
    /// Mean policy entropy across agents during the window.
    pub policy_entropy: f64,
    pub critic_loss: f64,
    pub max_q_proxy: f64,
    /// Per agent, mean policy standard deviation over action dimensions.
    pub action_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub record: StepRecord,
    pub episode: Option<EpisodeSummary>,
}

struct AgentStreams {
    policy: SimRng,
    action: SimRng,
    observation: SimRng,
}

pub struct Engine {
    config: EngineConfig,
    schedule: CurriculumSchedule,
    step: usize,
    field: ConcentrationField,
    agents: Vec<AgentState>,
    weights: ConnectionMatrix,
    critic: Critic,
    injury: InjurySite,
    scenario: Scenario,
    agent_sources: Vec<f64>,
    windows: Vec<ActivationWindow>,
    batch: Batch,
    episode: usize,
    field_rng: SimRng,
    streams: Vec<AgentStreams>,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let n = config.agents.count;
        let seed = config.seed;
        let mut init = stream(seed, Stream::Init);

        let weights = ConnectionMatrix::random(n, config.hebbian.learning_rate, config.hebbian.decay, &mut init);
        let agents = config
            .agents
            .spawn_positions()
            .into_iter()
            .enumerate()
            .map(|(k, x)| {
                let policy = PolicyParams::random(
                    config.learning.policy_init_scale,
                    config.learning.initial_log_std,
                    &mut init,
                );
                AgentState::new(k, x, policy)
            })
            .collect();
        let critic = Critic::new(n * crate::agents::OBS_DIM, config.learning.critic_hidden, &mut init);

        let schedule = config.curriculum.schedule(config.total_steps);
        let scenario = difficulty_to_scenario(
            &schedule,
            schedule.target(0),
            &config.curriculum,
            config.field.noise_sigma,
        );
        let streams = (0..n)
            .map(|k| AgentStreams {
                policy: stream(seed, Stream::PolicySample(k)),
                action: stream(seed, Stream::ActionNoise(k)),
                observation: stream(seed, Stream::ObservationNoise(k)),
            })
            .collect();

        Ok(Self {
            field: ConcentrationField::zeros(&config.field),
            agent_sources: vec![0.0; config.field.num_cells],
            windows: (0..n).map(|_| ActivationWindow::new(config.reward.robust_window)).collect(),
            field_rng: stream(seed, Stream::FieldNoise),
            injury: InjurySite::new(scenario.injury_base),
            schedule,
            scenario,
            agents,
            weights,
            critic,
            streams,
            batch: Batch::default(),
            episode: 0,
            step: 0,
            config,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.config.total_steps
    }

    pub fn field(&self) -> &ConcentrationField {
        &self.field
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn weights(&self) -> &ConnectionMatrix {
        &self.weights
    }

    pub fn critic(&self) -> &Critic {
        &self.critic
    }

    pub fn injury_position(&self) -> f64 {
        self.injury.position
    }

    pub fn schedule(&self) -> &CurriculumSchedule {
        &self.schedule
    }

    pub fn policies(&self) -> Vec<PolicyParams> {
        self.agents.iter().map(|a| a.policy.clone()).collect()
    }

    /// Replaces one agent's policy, e.g. to replay a trained or hand-built one.
    pub fn set_policy(&mut self, agent: usize, policy: PolicyParams) -> Result<()> {
        let len = self.agents.len();
        let slot = self.agents.get_mut(agent).ok_or(Error::IndexOutOfRange { index: agent, len })?;
        slot.policy = policy;
        Ok(())
    }

    fn effective_field_params(&self) -> FieldParams {
        FieldParams {
            noise_sigma: self.scenario.noise_sigma,
            ..self.config.field
        }
    }

    pub fn step(&mut self) -> Result<StepOutcome> {
        if self.is_finished() {
            return Err(Error::Finished(self.step));
        }
        let cfg = self.config.clone();
        let n = cfg.agents.count;
        let width = cfg.secretion.width;

        // (1) field solve with last step's sources plus the injury source
        let params = self.effective_field_params();
        let mut sources = self.agent_sources.clone();
        SecretionProfile {
            peak_rate: cfg.secretion.peak_rate,
            target: self.injury.position,
            width,
        }
        .deposit(&params, 1.0, &mut sources);
        let solved = step_field(&self.field, &params, &sources, &mut self.field_rng)?;
        self.field = solved.field;
        let params = cfg.field;

        // (2) observe and sample
        let mut observations: Vec<Observation> = Vec::with_capacity(n);
        let mut samples = Vec::with_capacity(n);
        for (agent, s) in self.agents.iter().zip(self.streams.iter_mut()) {
            let obs = observe(agent, &self.field, &params, cfg.agents.noise.observation_noise, &mut s.observation);
            let sampled = sample_action(
                &agent.policy,
                &obs,
                &cfg.agents.bounds,
                cfg.agents.noise.action_noise,
                cfg.agents.deterministic_policy,
                &mut s.policy,
                &mut s.action,
            )?;
            observations.push(obs);
            samples.push(sampled);
        }

        // (3) neural transmission
        let previous: Vec<f64> = self.agents.iter().map(|a| a.potential).collect();
        let gains: Vec<f64> = samples.iter().map(|s| s.action.amplify_gain).collect();
        let mut signals = transmit(&self.weights, cfg.hebbian.activation, &previous, &gains)?;
        if let Some(radius) = cfg.hebbian.radius {
            for p in 0..n {
                for q in 0..n {
                    if (self.agents[p].position - self.agents[q].position).abs() > radius {
                        signals[p * n + q] = 0.0;
                    }
                }
            }
        }
        let sensed: Vec<f64> = self
            .agents
            .iter()
            .map(|a| cfg.hebbian.sensing.apply(self.field.value_at(&params, a.position)))
            .collect();
        let h = total_inputs(&signals, n, &sensed);
        let potentials: Vec<f64> = h.iter().map(|&h| cfg.hebbian.activation.apply(h)).collect();
        if potentials.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite(format!("membrane potentials at step {}", self.step)));
        }

        // (4) rewards
        let x_inj = self.injury.position;
        let mut rewards = Vec::with_capacity(n);
        for k in 0..n {
            let agent = &self.agents[k];
            let mut r_ext = external_reward(
                agent.position,
                x_inj,
                samples[k].action.secrete_rate,
                params.length(),
                cfg.reward.secretion_bonus,
                width,
            );
            if cfg.reward.inflammation > 0.0 {
                r_ext = (r_ext - cfg.reward.inflammation * agent.health.oxidative_stress).clamp(-1.0, 1.0);
            }
            let r_chem = chem_term(&self.field, &params, agent.position, x_inj);
            let peers: Vec<f64> = potentials
                .iter()
                .enumerate()
                .filter(|&(q, _)| q != k)
                .map(|(_, &a)| a)
                .collect();
            let r_sync = sync_term(potentials[k], &peers);
            self.windows[k].push(potentials[k]);
            let r_robust = self.windows[k].robust_term();
            let breakdown = RewardBreakdown::new(r_ext, r_chem, r_sync, r_robust, &cfg.reward);
            if !breakdown.total.is_finite() {
                return Err(Error::NonFinite(format!("reward of agent {k} at step {}", self.step)));
            }
            rewards.push(breakdown);
        }

        // (5) batch and, at window boundaries, the update
        self.batch.steps.push(BatchStep {
            joint_observation: observations.iter().flatten().copied().collect(),
            transitions: (0..n)
                .map(|k| Transition {
                    observation: observations[k],
                    sample: samples[k].sample,
                    reward: rewards[k].total,
                })
                .collect(),
        });
        let last_step = self.step + 1 == cfg.total_steps;
        let episode = if self.batch.len() >= cfg.learning.update_interval() || last_step {
            Some(self.update()?)
        } else {
            None
        };

        // (6) Hebbian
        hebbian_update(&mut self.weights, &potentials)?;
        if self.weights.off_diagonal().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite(format!("connection weights at step {}", self.step)));
        }

        // (7) curriculum and injury drift
        let target = self.schedule.target(self.step);
        self.scenario = difficulty_to_scenario(&self.schedule, target, &cfg.curriculum, cfg.field.noise_sigma);
        self.injury.advance(&self.scenario, &cfg.curriculum, params.dt);

        // (8) execute actions
        let mut next_sources = vec![0.0; params.num_cells];
        for (agent, &a) in self.agents.iter_mut().zip(&potentials) {
            agent.potential = a;
        }
        for k in 0..n {
            let source = apply_action(&mut self.agents[k], &samples[k].action, &params, width);
            for (acc, s) in next_sources.iter_mut().zip(&source) {
                *acc += s;
            }
        }
        for k in 0..n {
            let health = update_health(
                &self.agents[k],
                &self.field,
                &params,
                &potentials,
                &samples[k].action,
                cfg.agents.stress_decay,
            );
            self.agents[k].health = health;
        }
        self.agent_sources = next_sources;

        let record = StepRecord {
            step: self.step,
            time: self.field.time,
            field: self.field.values.clone(),
            clamped: solved.clamped,
            agents: (0..n)
                .map(|k| AgentRecord {
                    position: self.agents[k].position,
                    potential: potentials[k],
                    action: samples[k].action,
                    health: self.agents[k].health,
                    reward: rewards[k],
                })
                .collect(),
            weights: self.weights.stats(),
            curriculum_target: target,
            injury_position: self.injury.position,
        };
        self.step += 1;
        Ok(StepOutcome { record, episode })
    }

    fn update(&mut self) -> Result<EpisodeSummary> {
        let cfg = &self.config.learning;
        let batch = std::mem::take(&mut self.batch);
        let n = self.agents.len();

        let entropy = self.agents.iter().map(|a| policy_entropy(&a.policy)).sum::<f64>() / n as f64;
        let action_std = self
            .agents
            .iter()
            .map(|a| a.policy.std().iter().sum::<f64>() / ACTION_DIM as f64)
            .collect();
        let mean_reward = batch
            .steps
            .iter()
            .flat_map(|s| s.transitions.iter().map(|t| t.reward))
            .sum::<f64>()
            / batch.num_transitions() as f64;
        let max_q_proxy = max_value_estimate(&self.critic, &batch)?;

        let advantages = compute_advantages(&self.critic, &batch, cfg.discount)?;
        for (k, agent) in self.agents.iter_mut().enumerate() {
            let scored: Vec<ScoredSample> = batch
                .steps
                .iter()
                .zip(&advantages[k])
                .map(|(s, &advantage)| ScoredSample {
                    observation: s.transitions[k].observation,
                    sample: s.transitions[k].sample,
                    advantage,
                })
                .collect();
            agent.policy = policy_gradient_step(&agent.policy, &scored, &cfg.entropy, cfg.policy_lr)?;
        }
        let (inputs, targets) = critic_targets(&batch, cfg.discount);
        let (critic, critic_loss) = critic_step(&self.critic, &inputs, &targets, cfg.critic_lr)?;
        self.critic = critic;

        let summary = EpisodeSummary {
            episode: self.episode,
            steps: batch.len(),
            mean_reward,
            policy_entropy: entropy,
            critic_loss,
            max_q_proxy,
            action_std,
        };
        self.episode += 1;
        Ok(summary)
    }
}

/// Runs a whole configuration in memory, handing every outcome to `observer`.
pub fn simulate(config: EngineConfig, mut observer: impl FnMut(&StepOutcome)) -> Result<Engine> {
    let mut engine = Engine::new(config)?;
    while !engine.is_finished() {
        let outcome = engine.step()?;
        observer(&outcome);
    }
    Ok(engine)
}

/// Runs in memory and keeps only the per-episode summaries and per-step total secretion.
pub fn collect_summaries(config: EngineConfig) -> Result<(Vec<EpisodeSummary>, Vec<f64>)> {
    let mut episodes = Vec::new();
    let mut secretion = Vec::new();
    simulate(config, |o| {
        secretion.push(o.record.total_secretion());
        if let Some(e) = &o.episode {
            episodes.push(e.clone());
        }
    })?;
    Ok((episodes, secretion))
}

/// Location of the field maximum for a record's snapshot.
pub fn record_peak(record: &StepRecord, params: &FieldParams) -> Result<f64> {
    peak_position(
        &ConcentrationField {
            values: record.field.clone(),
            time: record.time,
        },
        params,
    )
}
