//! Shaped per-agent reward.
//!
//! `R_k = r_ext (+/-) b1 * r_chem (+/-) b2 * r_sync + b3 * r_robust`, where the
//! chemical and synchronization terms are squared deviations and the robustness
//! term already carries its minus sign. Under [`SignConvention::Penalty`] the two
//! squared deviations are subtracted, so tracking the injury concentration and
//! firing in step with peers is what raises reward.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::ConfigIssue;
use crate::field::{ConcentrationField, FieldParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// Squared deviations are subtracted.
    #[default]
    Penalty,
    /// Every term is added as written.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardCoefficients {
    pub chem: f64,
    pub sync: f64,
    pub robust: f64,
    pub convention: SignConvention,
    /// Bonus per unit secretion at the injury site.
    pub secretion_bonus: f64,
    /// Weight of the optional oxidative-stress penalty on `r_ext`; 0 disables it.
    pub inflammation: f64,
    /// Trailing window for the robustness variance.
    pub robust_window: usize,
}

impl Default for RewardCoefficients {
    fn default() -> Self {
        Self {
            chem: 0.5,
            sync: 0.3,
            robust: 0.2,
            convention: SignConvention::Penalty,
            secretion_bonus: 0.5,
            inflammation: 0.0,
            robust_window: 20,
        }
    }
}

impl RewardCoefficients {
    pub fn validate(&self, prefix: &str, issues: &mut Vec<ConfigIssue>) {
        for (name, v) in [("chem", self.chem), ("sync", self.sync), ("robust", self.robust)] {
            if !(0.0..=1.0).contains(&v) {
                issues.push(ConfigIssue::new(format!("{prefix}.{name}"), "must lie in [0, 1]"));
            }
        }
        if !(self.secretion_bonus.is_finite() && self.secretion_bonus >= 0.0) {
            issues.push(ConfigIssue::new(format!("{prefix}.secretion_bonus"), "must be finite and >= 0"));
        }
        if !(self.inflammation.is_finite() && self.inflammation >= 0.0) {
            issues.push(ConfigIssue::new(format!("{prefix}.inflammation"), "must be finite and >= 0"));
        }
        if self.robust_window == 0 {
            issues.push(ConfigIssue::new(format!("{prefix}.robust_window"), "must be at least 1"));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardBreakdown {
    pub r_ext: f64,
    pub r_chem: f64,
    pub r_sync: f64,
    pub r_robust: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn new(r_ext: f64, r_chem: f64, r_sync: f64, r_robust: f64, coeffs: &RewardCoefficients) -> Self {
        Self {
            r_ext,
            r_chem,
            r_sync,
            r_robust,
            total: combine(r_ext, r_chem, r_sync, r_robust, coeffs),
        }
    }
}

/// Gaussian proximity kernel in `[0, 1]`.
pub fn proximity(x: f64, x_inj: f64, width: f64) -> f64 {
    let d = x - x_inj;
    (-(d * d) / (2.0 * width * width)).exp()
}

/// Distance-to-injury cost plus a proximity-gated secretion bonus, clamped to `[-1, 1]`.
pub fn external_reward(
    x: f64,
    x_inj: f64,
    secrete_rate: f64,
    domain_length: f64,
    secretion_bonus: f64,
    proximity_width: f64,
) -> f64 {
    let distance = -(x - x_inj).abs() / domain_length;
    let bonus = secretion_bonus * secrete_rate * proximity(x, x_inj, proximity_width);
    (distance + bonus).clamp(-1.0, 1.0)
}

/// `[C(x_k) - C(x_inj)]^2` for the single tracked species.
pub fn chem_term(field: &ConcentrationField, params: &FieldParams, x: f64, x_inj: f64) -> f64 {
    let d = field.value_at(params, x) - field.value_at(params, x_inj);
    d * d
}

/// `sum_q (a_k - a_q)^2` over peers; zero with no peers.
pub fn sync_term(a_k: f64, peers: &[f64]) -> f64 {
    peers.iter().map(|a_q| (a_k - a_q) * (a_k - a_q)).sum()
}

/// Negative population variance of the window.
pub fn robust_term(window: &[f64]) -> f64 {
    if window.len() < 2 {
        return 0.0;
    }
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let var = window.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    -var
}

pub fn combine(r_ext: f64, r_chem: f64, r_sync: f64, r_robust: f64, coeffs: &RewardCoefficients) -> f64 {
    match coeffs.convention {
        SignConvention::Penalty => {
            r_ext - coeffs.chem * r_chem - coeffs.sync * r_sync + coeffs.robust * r_robust
        }
        SignConvention::Literal => {
            r_ext + coeffs.chem * r_chem + coeffs.sync * r_sync + coeffs.robust * r_robust
        }
    }
}

/// Trailing window of an agent's membrane potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationWindow {
    capacity: usize,
    values: VecDeque<f64>,
}

impl ActivationWindow {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            values: VecDeque::with_capacity(capacity.max(1)),
        }
    }

    pub fn push(&mut self, a: f64) {
        if self.values.len() == self.capacity {
            self.values.pop_front();
        }
        self.values.push_back(a);
    }

    pub fn as_vec(&self) -> Vec<f64> {
        self.values.iter().copied().collect()
    }

    pub fn robust_term(&self) -> f64 {
        robust_term(&self.as_vec())
    }
}
