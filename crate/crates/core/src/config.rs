//! Engine configuration, TOML round-tripping, validation and presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::AgentConfig;
use crate::comms::{Activation, Sensing};
use crate::curriculum::CurriculumConfig;
use crate::error::{ConfigIssue, Error, Result};
use crate::field::FieldParams;
use crate::learning::LearningConfig;
use crate::reward::RewardCoefficients;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SecretionConfig {
    /// Peak rate of the injury-site source.
    pub peak_rate: f64,
    /// Width of the injury source, of agent secretion bumps, and of the reward proximity kernel.
    pub width: f64,
}

impl Default for SecretionConfig {
    fn default() -> Self {
        Self {
            peak_rate: 1.0,
            width: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HebbianConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub activation: Activation,
    pub sensing: Sensing,
    /// Only agents closer than this exchange signals; `None` is all-to-all.
    pub radius: Option<f64>,
}

impl Default for HebbianConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            decay: 0.5,
            activation: Activation::Tanh,
            sensing: Sensing::Identity,
            radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub seed: u64,
    pub total_steps: usize,
    pub field: FieldParams,
    pub secretion: SecretionConfig,
    pub agents: AgentConfig,
    pub reward: RewardCoefficients,
    pub learning: LearningConfig,
    pub curriculum: CurriculumConfig,
    pub hebbian: HebbianConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            total_steps: 20_000,
            field: FieldParams::default(),
            secretion: SecretionConfig::default(),
            agents: AgentConfig::default(),
            reward: RewardCoefficients::default(),
            learning: LearningConfig::default(),
            curriculum: CurriculumConfig::default(),
            hebbian: HebbianConfig::default(),
        }
    }
}

pub const PRESETS: &[&str] = &["paper-sec4"];

impl EngineConfig {
    /// Named parameter sets.
    ///
    /// `paper-sec4`: 10 agents, D = 0.1, lambda = 0.01, S0 = 1,
    /// beta = (0.5, 0.3, 0.2), action noise 0.1, observation noise 0.05.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "paper-sec4" => {
                let mut c = Self::default();
                c.agents.count = 10;
                c.field.diffusion = 0.1;
                c.field.decay = 0.01;
                c.secretion.peak_rate = 1.0;
                c.reward.chem = 0.5;
                c.reward.sync = 0.3;
                c.reward.robust = 0.2;
                c.agents.noise.action_noise = 0.1;
                c.agents.noise.observation_noise = 0.05;
                Some(c)
            }
            _ => None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("engine config is always representable as TOML")
    }

    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        if self.total_steps == 0 {
            issues.push(ConfigIssue::new("total_steps", "must be at least 1"));
        }
        self.field.validate("field", &mut issues);
        if !(self.secretion.peak_rate.is_finite() && self.secretion.peak_rate >= 0.0) {
            issues.push(ConfigIssue::new("secretion.peak_rate", "must be finite and >= 0"));
        }
        if !(self.secretion.width.is_finite() && self.secretion.width > 0.0) {
            issues.push(ConfigIssue::new("secretion.width", "must be finite and > 0"));
        }
        self.agents.validate("agents", &self.field, &mut issues);
        self.reward.validate("reward", &mut issues);
        self.learning.validate("learning", &mut issues);
        self.curriculum
            .validate("curriculum", (self.field.grid_min, self.field.grid_max), &mut issues);
        if !(0.0..=1.0).contains(&self.hebbian.learning_rate) {
            issues.push(ConfigIssue::new("hebbian.learning_rate", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.hebbian.decay) {
            issues.push(ConfigIssue::new("hebbian.decay", "must lie in [0, 1]"));
        }
        if let Some(r) = self.hebbian.radius {
            if !(r.is_finite() && r >= 0.0) {
                issues.push(ConfigIssue::new("hebbian.radius", "must be finite and >= 0"));
            }
        }
        issues
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(issues))
        }
    }
}
