use serde::{Deserialize, Serialize};

use super::{Grads, NeurVecModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-corrected Adam over a fixed list of tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    /// Learning rate of the next step; schedules overwrite it.
    pub lr: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    /// Zeroed moments for tensors of the given lengths.
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        Self {
            config,
            lr: config.lr,
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_model(config: AdamConfig, model: &NeurVecModel) -> Self {
        let shapes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
        Self::new(config, &shapes)
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let AdamConfig { beta1, beta2, eps, .. } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        let lr = self.lr;
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            assert_eq!(p.len(), g.len());
            for (((p, g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// One Adam update of every model parameter followed by the rational
/// denominator projection.
pub fn adam_step(model: &mut NeurVecModel, adam: &mut Adam, grads: &Grads) {
    let g = grads.slices();
    let mut p = model.params_mut();
    adam.step(&mut p, &g);
    model.rational.project();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut adam = Adam::new(AdamConfig::default(), &[3]);
        let mut p = vec![1.0, -2.0, 0.5];
        adam.step(&mut [&mut p], &[&[0.0; 3]]);
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn first_step_is_lr_sized() {
        let cfg = AdamConfig::default();
        let mut adam = Adam::new(cfg, &[1]);
        let mut p = vec![0.0];
        adam.step(&mut [&mut p], &[&[1.0]]);
        // m_hat = g and v_hat = g^2 after bias correction
        let expected = -cfg.lr * 1.0 / (1.0 + cfg.eps);
        assert!((p[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn quadratic_descends_monotonically_after_warmup() {
        // f(x) = (x - 3)^2
        let mut adam = Adam::new(AdamConfig { lr: 1e-2, ..AdamConfig::default() }, &[1]);
        let mut x = vec![0.0];
        let mut losses = Vec::new();
        for _ in 0..100 {
            losses.push((x[0] - 3.0f64).powi(2));
            let g = 2.0 * (x[0] - 3.0);
            adam.step(&mut [&mut x], &[&[g]]);
        }
        for w in losses[5..].windows(2) {
            assert!(w[1] < w[0]);
        }
    }
}
