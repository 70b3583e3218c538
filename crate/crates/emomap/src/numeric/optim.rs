use crate::error::{EmoError, Result};

use super::matrix::{Matrix, ParamRef};

/// Gradient-descent update rule. Implementations are registered by name in
/// [`create_optimizer`]; the parameter slice must keep a stable order across
/// steps so that per-parameter state stays attached.
pub trait Optimizer {
    fn name(&self) -> &'static str;

    /// Applies one update to every trainable parameter and zeroes all
    /// gradients afterwards. Frozen parameters are never modified.
    fn step(&mut self, params: &[ParamRef]);

    fn step_count(&self) -> usize;
}

/// Optimizer selection, resolved through the registry at run time.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub algorithm: String,
    pub learning_rate: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            algorithm: "adam".into(),
            learning_rate: 1e-3,
        }
    }
}

type Constructor = fn(f64) -> Box<dyn Optimizer>;

const REGISTRY: &[(&str, Constructor)] = &[
    ("sgd", |lr| Box::new(Sgd::new(lr))),
    ("adam", |lr| Box::new(Adam::new(lr))),
];

pub fn optimizer_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

pub fn create_optimizer(config: &OptimizerConfig) -> Result<Box<dyn Optimizer>> {
    if !(config.learning_rate > 0.0) {
        return Err(EmoError::Config(format!(
            "learning rate must be positive, got {}",
            config.learning_rate
        )));
    }
    REGISTRY
        .iter()
        .find(|(n, _)| *n == config.algorithm)
        .map(|(_, make)| make(config.learning_rate))
        .ok_or_else(|| {
            EmoError::Config(format!(
                "unknown optimizer '{}' (available: {})",
                config.algorithm,
                optimizer_names().join(", ")
            ))
        })
}

pub struct Sgd {
    lr: f64,
    t: usize,
}

impl Sgd {
    pub fn new(lr: f64) -> Self {
        Sgd { lr, t: 0 }
    }
}

impl Optimizer for Sgd {
    fn name(&self) -> &'static str {
        "sgd"
    }

    fn step(&mut self, params: &[ParamRef]) {
        self.t += 1;
        for p in params {
            let mut p = p.borrow_mut();
            if p.trainable {
                let lr = self.lr;
                let pr = &mut *p;
                let (value, grad) = (&mut pr.value, &pr.grad);
                for (v, g) in value.data_mut().iter_mut().zip(grad.data()) {
                    *v -= lr * g;
                }
            }
            p.zero_grad();
        }
    }

    fn step_count(&self) -> usize {
        self.t
    }
}

pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: usize,
    moments: Vec<(Matrix, Matrix)>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            moments: Vec::new(),
        }
    }
}

impl Optimizer for Adam {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn step(&mut self, params: &[ParamRef]) {
        self.t += 1;
        if self.moments.len() < params.len() {
            for p in &params[self.moments.len()..] {
                let p = p.borrow();
                let shape = (p.value.rows(), p.value.cols());
                self.moments
                    .push((Matrix::zeros(shape.0, shape.1), Matrix::zeros(shape.0, shape.1)));
            }
        }
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (p, (m, v)) in params.iter().zip(self.moments.iter_mut()) {
            let mut p = p.borrow_mut();
            if p.trainable {
                let (value, grad) = {
                    let pr = &mut *p;
                    (&mut pr.value, &pr.grad)
                };
                for (((val, g), mi), vi) in value
                    .data_mut()
                    .iter_mut()
                    .zip(grad.data())
                    .zip(m.data_mut())
                    .zip(v.data_mut())
                {
                    *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
                    *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
                    let mhat = *mi / bc1;
                    let vhat = *vi / bc2;
                    *val -= self.lr * mhat / (vhat.sqrt() + self.eps);
                }
            }
            p.zero_grad();
        }
    }

    fn step_count(&self) -> usize {
        self.t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::matrix::param;

    #[test]
    fn sgd_update() {
        let p = param(Matrix::from_vec(1, 1, vec![1.0]).unwrap());
        p.borrow_mut().grad.set(0, 0, 0.5);
        let mut opt = create_optimizer(&OptimizerConfig {
            algorithm: "sgd".into(),
            learning_rate: 0.1,
        })
        .unwrap();
        opt.step(&[p.clone()]);
        assert!((p.borrow().value.get(0, 0) - 0.95).abs() < 1e-15);
        assert_eq!(p.borrow().grad.get(0, 0), 0.0);
    }

    #[test]
    fn frozen_parameter_untouched() {
        let p = param(Matrix::from_vec(1, 1, vec![1.0]).unwrap());
        p.borrow_mut().trainable = false;
        p.borrow_mut().grad.set(0, 0, 123.0);
        for algo in optimizer_names() {
            let mut opt = create_optimizer(&OptimizerConfig {
                algorithm: algo.into(),
                learning_rate: 0.1,
            })
            .unwrap();
            opt.step(&[p.clone()]);
            assert_eq!(p.borrow().value.get(0, 0), 1.0);
        }
    }

    #[test]
    fn adam_first_step_matches_reference_recurrence() {
        // Hand-iterated Adam with g=0.5, lr=0.01, defaults:
        // m1 = 0.1*0.5, v1 = 0.001*0.25; mhat = 0.5, vhat = 0.25
        // theta = 1 - 0.01 * 0.5 / (0.5 + 1e-8)
        let p = param(Matrix::from_vec(1, 1, vec![1.0]).unwrap());
        p.borrow_mut().grad.set(0, 0, 0.5);
        let mut opt = Adam::new(0.01);
        opt.step(&[p.clone()]);
        let expected = 1.0 - 0.01 * 0.5 / (0.25f64.sqrt() + 1e-8);
        assert!((p.borrow().value.get(0, 0) - expected).abs() < 1e-15);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn unknown_optimizer_rejected() {
        assert!(create_optimizer(&OptimizerConfig {
            algorithm: "rmsprop".into(),
            learning_rate: 0.1,
        })
        .is_err());
    }
}
