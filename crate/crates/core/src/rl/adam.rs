use serde::{Deserialize, Serialize};

use crate::mgtn::GradientSet;
use crate::tensor::DenseTensor;

use super::{AgentError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments, one pair of accumulators per parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[&DenseTensor]) -> Self {
        Self {
            config,
            step: 0,
            first: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.second
    }

    /// One update `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: Vec<&mut DenseTensor>, grads: &GradientSet) -> Result<()> {
        if params.len() != self.first.len() || grads.arrays().len() != params.len() {
            return Err(AgentError::OptimizerShape(format!(
                "{} parameters, {} gradients, {} moment arrays",
                params.len(),
                grads.arrays().len(),
                self.first.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads.arrays()).enumerate() {
            if p.shape() != g.shape() || p.len() != self.first[k].len() {
                return Err(AgentError::OptimizerShape(grads.names()[k].clone()));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for (k, (p, g)) in params.into_iter().zip(grads.arrays()).enumerate() {
            let (m, v) = (&mut self.first[k], &mut self.second[k]);
            for (i, (theta, &gi)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

pub fn adam_step(adam: &mut AdamState, params: Vec<&mut DenseTensor>, grads: &GradientSet) -> Result<()> {
    adam.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grads(values: &[f64]) -> GradientSet {
        GradientSet::new(
            vec!["w".into()],
            vec![DenseTensor::new(vec![values.len()], values.to_vec()).unwrap()],
        )
    }

    #[test]
    fn zero_gradient_from_rest_changes_nothing() {
        let mut p = DenseTensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        let before = p.clone();
        let mut adam = AdamState::new(AdamConfig::default(), &[&p]);
        adam.step(vec![&mut p], &grads(&[0.0; 3])).unwrap();
        assert_eq!(p, before);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn moments_decay_under_zero_gradient() {
        let mut p = DenseTensor::zeros(&[2]);
        let mut adam = AdamState::new(AdamConfig::default(), &[&p]);
        adam.step(vec![&mut p], &grads(&[1.0, -2.0])).unwrap();
        let (m, v) = (adam.first_moments()[0].clone(), adam.second_moments()[0].clone());
        adam.step(vec![&mut p], &grads(&[0.0, 0.0])).unwrap();
        for i in 0..2 {
            assert!((adam.first_moments()[0][i] - 0.9 * m[i]).abs() < 1e-18);
            assert!((adam.second_moments()[0][i] - 0.999 * v[i]).abs() < 1e-18);
        }
    }

    #[test]
    fn first_step_closed_form() {
        let g = [0.3, -1e-3, 2.0];
        let mut p = DenseTensor::zeros(&[3]);
        let cfg = AdamConfig::default();
        let mut adam = AdamState::new(cfg, &[&p]);
        adam_step(&mut adam, vec![&mut p], &grads(&g)).unwrap();
        for (i, gi) in g.iter().enumerate() {
            let expected = -cfg.learning_rate * gi / (gi.abs() + cfg.epsilon);
            assert!((p.data()[i] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let run = || {
            let mut p = DenseTensor::new(vec![2], vec![0.1, 0.2]).unwrap();
            let mut adam = AdamState::new(AdamConfig::default(), &[&p]);
            for k in 0..5 {
                adam.step(vec![&mut p], &grads(&[k as f64, -1.0])).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
        let mut p = DenseTensor::zeros(&[2]);
        let mut adam = AdamState::new(AdamConfig::default(), &[&p]);
        assert!(matches!(
            adam.step(vec![&mut p], &grads(&[1.0, 2.0, 3.0])),
            Err(AgentError::OptimizerShape(_))
        ));
    }
}
