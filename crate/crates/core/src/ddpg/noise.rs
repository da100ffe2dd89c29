use serde::{Deserialize, Serialize};

use crate::rng::Rng64;

/// Ornstein-Uhlenbeck exploration noise, one state per action dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuNoise {
    pub theta: f64,
    pub sigma: f64,
    pub mu: f64,
    state: Vec<f64>,
}

impl OuNoise {
    pub fn new(dim: usize, theta: f64, sigma: f64) -> Self {
        OuNoise {
            theta,
            sigma,
            mu: 0.0,
            state: vec![0.0; dim],
        }
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|x| *x = self.mu);
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn set_state(&mut self, state: &[f64]) {
        self.state.copy_from_slice(state);
    }

    /// `x += theta (mu - x) + sigma N(0, 1)`.
    pub fn sample(&mut self, rng: &mut Rng64) -> &[f64] {
        for x in &mut self.state {
            *x += self.theta * (self.mu - *x) + self.sigma * rng.normal();
        }
        &self.state
    }
}
