use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the bike reward is delivered to the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// The whole episode's value arrives on the final step.
    #[default]
    Terminal,
    /// Each step carries its own share; the sum is unchanged.
    Segment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    /// Drive-time penalty per minute (bus).
    pub alpha: f64,
    /// Repositioning cost per distance unit (bike).
    pub beta: f64,
    /// Penalty per bike beyond a capacity (bike).
    pub gamma_overflow: f64,
    /// Longest wait, in segments, before a bus episode fails.
    pub patience: usize,
    pub mode: RewardMode,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            alpha: 0.2,
            beta: 0.1,
            gamma_overflow: 1.0,
            patience: 8,
            mode: RewardMode::Terminal,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("reward.alpha", self.alpha), ("reward.beta", self.beta), ("reward.gamma_overflow", self.gamma_overflow)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(name, "must be finite and >= 0"));
            }
        }
        if self.patience == 0 {
            return Err(Error::validation("reward.patience", "must be at least 1"));
        }
        Ok(())
    }
}

/// Cross-system observation channel; `k` columns per station of the
/// other system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct JointConfig {
    pub enabled: bool,
    pub k: usize,
}

impl JointConfig {
    pub fn off() -> Self {
        JointConfig { enabled: false, k: 0 }
    }

    pub fn columns(&self) -> usize {
        if self.enabled {
            self.k
        } else {
            0
        }
    }
}
