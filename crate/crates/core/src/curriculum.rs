//! Linear difficulty schedule and the injury-site motion it drives.
//!
//! `T(t) = T0 + (Tf - T0) * min(t / n, 1)`. The normalized difficulty
//! `(T - T0) / (Tf - T0)` linearly sets three scenario knobs: how far the
//! injury sits from the spawn region, how fast its goal drifts, and the field
//! noise amplitude. The injury itself descends the targeting potential
//! `(x - goal)^2 / 2`, moving at most `speed * dt` per step.

use serde::{Deserialize, Serialize};

use crate::error::ConfigIssue;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurriculumSchedule {
    pub initial: f64,
    pub final_target: f64,
    pub ramp_steps: usize,
}

impl CurriculumSchedule {
    pub fn target(&self, t: usize) -> f64 {
        let frac = (t as f64 / self.ramp_steps as f64).min(1.0);
        self.initial + (self.final_target - self.initial) * frac
    }

    /// Position of `value` along the schedule, in `[0, 1]`.
    pub fn difficulty(&self, value: f64) -> f64 {
        let span = self.final_target - self.initial;
        if span == 0.0 {
            return 1.0;
        }
        ((value - self.initial) / span).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumConfig {
    pub initial: f64,
    pub final_target: f64,
    /// Ramp length in steps; defaults to 70% of the run.
    pub ramp_steps: Option<usize>,
    /// Injury position at the easiest setting (next to the spawn region).
    pub injury_near: f64,
    /// Injury position at the hardest setting.
    pub injury_far: f64,
    /// Injury speed (length per unit time); also the drift speed at full difficulty.
    pub injury_speed: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            initial: 0.0,
            final_target: 1.0,
            ramp_steps: None,
            injury_near: 3.0,
            injury_far: 9.0,
            injury_speed: 0.5,
        }
    }
}

impl CurriculumConfig {
    pub fn schedule(&self, total_steps: usize) -> CurriculumSchedule {
        let ramp = self
            .ramp_steps
            .unwrap_or_else(|| ((total_steps as f64) * 0.7).round() as usize)
            .max(1);
        CurriculumSchedule {
            initial: self.initial,
            final_target: self.final_target,
            ramp_steps: ramp,
        }
    }

    pub fn validate(&self, prefix: &str, grid: (f64, f64), issues: &mut Vec<ConfigIssue>) {
        let mut bad = |name: &str, msg: &str| issues.push(ConfigIssue::new(format!("{prefix}.{name}"), msg));
        if !self.initial.is_finite() {
            bad("initial", "must be finite");
        }
        if !self.final_target.is_finite() {
            bad("final_target", "must be finite");
        }
        if self.ramp_steps == Some(0) {
            bad("ramp_steps", "must be at least 1");
        }
        if !(self.injury_near <= self.injury_far && self.injury_near >= grid.0 && self.injury_far <= grid.1) {
            bad("injury_far", "injury range must be ordered and inside the grid");
        }
        if !(self.injury_speed.is_finite() && self.injury_speed >= 0.0) {
            bad("injury_speed", "must be finite and >= 0");
        }
    }
}

/// Concrete task parameters for one difficulty level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub injury_base: f64,
    pub drift_speed: f64,
    pub noise_sigma: f64,
}

pub fn difficulty_to_scenario(
    schedule: &CurriculumSchedule,
    value: f64,
    config: &CurriculumConfig,
    max_noise_sigma: f64,
) -> Scenario {
    let d = schedule.difficulty(value);
    Scenario {
        injury_base: config.injury_near + d * (config.injury_far - config.injury_near),
        drift_speed: d * config.injury_speed,
        noise_sigma: d * max_noise_sigma,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjurySite {
    pub position: f64,
    /// Accumulated drift of the goal away from its base.
    pub drift: f64,
}

impl InjurySite {
    pub fn new(position: f64) -> Self {
        Self { position, drift: 0.0 }
    }

    /// Drifted goal, reflected back and forth inside `[near, far]`.
    pub fn goal(&self, scenario: &Scenario, config: &CurriculumConfig) -> f64 {
        let (near, far) = (config.injury_near, config.injury_far);
        let span = far - near;
        if span == 0.0 {
            return near;
        }
        let u = (scenario.injury_base + self.drift - near).rem_euclid(2.0 * span);
        near + if u <= span { u } else { 2.0 * span - u }
    }

    pub fn advance(&mut self, scenario: &Scenario, config: &CurriculumConfig, dt: f64) {
        self.drift += scenario.drift_speed * dt;
        let goal = self.goal(scenario, config);
        let slope = self.position - goal;
        let step = (config.injury_speed * dt).min(slope.abs());
        self.position -= step * slope.signum();
    }
}
