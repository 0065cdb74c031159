use serde::{Deserialize, Serialize};

use crate::error::{GramError, Result};
use crate::nn::layers::Params;
use crate::nn::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Self::default()
        }
    }
}

/// First/second moment estimates for every parameter of a [`Params`] set.
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &Params, config: AdamConfig) -> Self {
        let zeros = |(r, c)| Matrix::zeros(r, c);
        AdamState {
            config,
            m: params.shapes().into_iter().map(zeros).collect(),
            v: params.shapes().into_iter().map(zeros).collect(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut Params, grads: &[Matrix]) -> Result<()> {
        if grads.len() != params.len() || grads.len() != self.m.len() {
            return Err(GramError::shape(
                "adam_step",
                format!("{} gradients", self.m.len()),
                grads.len(),
            ));
        }
        for (k, g) in grads.iter().enumerate() {
            self.m[k].expect_same("adam_step", g)?;
        }

        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - b1.powi(t);
        let bc2 = 1.0 - b2.powi(t);

        for (k, (p, g)) in params.values_mut().zip(grads).enumerate() {
            let m = self.m[k].data_mut();
            let v = self.v[k].data_mut();
            for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
