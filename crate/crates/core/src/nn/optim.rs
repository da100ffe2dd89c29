use serde::{Deserialize, Serialize};

use super::params::{flatten, global_norm, param_count, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Rescale gradients whose global norm exceeds this value.
    pub clip_norm: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            learning_rate: 0.01,
            clip_norm: None,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerConfig {
            learning_rate,
            ..Default::default()
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate,
            ..Default::default()
        }
    }

    pub fn with_clip(mut self, clip: f64) -> Self {
        self.clip_norm = Some(clip);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    /// Norm of the raw gradient.
    pub grad_norm: f64,
    /// Norm of the update actually applied to the parameters.
    pub update_norm: f64,
}

/// Gradient descent with optional Adam moments and global-norm clipping.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Optimizer {
            config,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn step<P: ParamSet + ?Sized>(&mut self, params: &mut P, grads: &P) -> Result<StepStats> {
        let n = param_count(params);
        let mut g = flatten(grads);
        if g.len() != n {
            return Err(Error::shape("gradients", n, g.len()));
        }
        let grad_norm = global_norm(grads);
        if let Some(clip) = self.config.clip_norm {
            if grad_norm > clip && grad_norm > 0.0 {
                let k = clip / grad_norm;
                g.iter_mut().for_each(|v| *v *= k);
            }
        }
        let lr = self.config.learning_rate;
        let update: Vec<f64> = match self.config.kind {
            OptimizerKind::Sgd => g.iter().map(|v| -lr * v).collect(),
            OptimizerKind::Adam => {
                if self.first.len() != n {
                    self.first = vec![0.0; n];
                    self.second = vec![0.0; n];
                    self.steps = 0;
                }
                self.steps += 1;
                let (b1, b2, eps) = (self.config.beta1, self.config.beta2, self.config.epsilon);
                let c1 = 1.0 - b1.powi(self.steps as i32);
                let c2 = 1.0 - b2.powi(self.steps as i32);
                g.iter()
                    .enumerate()
                    .map(|(k, &gk)| {
                        self.first[k] = b1 * self.first[k] + (1.0 - b1) * gk;
                        self.second[k] = b2 * self.second[k] + (1.0 - b2) * gk * gk;
                        -lr * (self.first[k] / c1) / ((self.second[k] / c2).sqrt() + eps)
                    })
                    .collect()
            }
        };
        let update_norm = update.iter().map(|u| u * u).sum::<f64>().sqrt();
        let mut offset = 0;
        params.visit_mut(&mut |_, d| {
            for v in d.iter_mut() {
                *v += update[offset];
                offset += 1;
            }
        });
        Ok(StepStats { grad_norm, update_norm })
    }
}

/// One stateless step: plain gradient descent with the config's step size
/// and clipping (Adam moments need an [`Optimizer`]).
pub fn optimizer_step<P: ParamSet + ?Sized>(params: &mut P, grads: &P, config: &OptimizerConfig) -> Result<StepStats> {
    let mut sgd = config.clone();
    sgd.kind = OptimizerKind::Sgd;
    Optimizer::new(sgd).step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::assign_flat;
    use ndarray::{array, Array1};

    #[derive(Clone)]
    struct Flat(Array1<f64>);
    crate::nn::params::array_param_set!(Flat { 0 });

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = Flat(array![1.0, -2.0, 3.0]);
        let g = Flat(Array1::zeros(3));
        optimizer_step(&mut p, &g, &OptimizerConfig::sgd(0.5)).unwrap();
        assert_eq!(p.0, array![1.0, -2.0, 3.0]);
        let mut adam = Optimizer::new(OptimizerConfig::adam(0.1));
        adam.step(&mut p, &g).unwrap();
        assert_eq!(p.0, array![1.0, -2.0, 3.0]);
    }

    #[test]
    fn scalar_descent() {
        let mut p = Flat(array![1.0]);
        optimizer_step(&mut p, &Flat(array![1.0]), &OptimizerConfig::sgd(0.1)).unwrap();
        assert!((p.0[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn clipping_bounds_the_update() {
        let mut p = Flat(Array1::zeros(4));
        let g = Flat(array![50.0, 50.0, 50.0, 50.0]);
        let stats = optimizer_step(&mut p, &g, &OptimizerConfig::sgd(0.1).with_clip(1.0)).unwrap();
        assert!((stats.grad_norm - 100.0).abs() < 1e-12);
        assert!(stats.update_norm <= 0.1 * 1.0 + 1e-12);
        let moved = p.0.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(moved <= 0.1 + 1e-12);
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut p = Flat(array![3.0, -4.0]);
        let mut opt = Optimizer::new(OptimizerConfig::adam(0.05));
        for _ in 0..2000 {
            let g = Flat(p.0.mapv(|v| 2.0 * v));
            opt.step(&mut p, &g).unwrap();
        }
        assert!(p.0.iter().all(|v| v.abs() < 1e-3), "{:?}", p.0);
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut p = Flat(array![1.0, 2.0]);
        let mut g = Flat(array![1.0]);
        assert!(optimizer_step(&mut p, &g, &OptimizerConfig::sgd(0.1)).is_err());
        assert!(assign_flat(&mut g, &[1.0, 2.0]).is_err());
    }
}
