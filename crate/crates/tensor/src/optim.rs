//! Adam with global-norm clipping and a linear warmup/decay schedule.

use crate::params::ParamStore;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub warmup_steps: u64,
    /// When set, the rate decays linearly to zero at this step after warmup.
    pub total_steps: Option<u64>,
    pub max_grad_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            warmup_steps: 0,
            total_steps: None,
            max_grad_norm: Some(1.0),
        }
    }
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    /// Multiplier in `[0, 1]` applied to the base rate at update `step` (0-based).
    pub fn schedule(&self, step: u64) -> f64 {
        if step < self.warmup_steps {
            return step as f64 / self.warmup_steps as f64;
        }
        match self.total_steps {
            Some(total) if total > self.warmup_steps => {
                let remaining = total.saturating_sub(step) as f64;
                (remaining / (total - self.warmup_steps) as f64).clamp(0.0, 1.0)
            }
            Some(_) => 0.0,
            None => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub learning_rate: f64,
    pub grad_norm: f64,
    pub clipped_norm: f64,
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let first = store.ids().map(|id| vec![0.0; store.value(id).len()]).collect();
        let second = store.ids().map(|id| vec![0.0; store.value(id).len()]).collect();
        Self {
            config,
            first,
            second,
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Clips, applies one Adam update with the scheduled rate, advances the
    /// step counter and zeroes the gradients.
    pub fn step(&mut self, store: &mut ParamStore) -> StepInfo {
        let grad_norm = store.grad_norm();
        let mut clipped_norm = grad_norm;
        if let Some(max) = self.config.max_grad_norm {
            if grad_norm > max {
                let coef = max / (grad_norm + 1e-6);
                store.scale_grads(coef);
                clipped_norm = store.grad_norm();
            }
        }
        let lr = self.config.learning_rate * self.config.schedule(self.step);
        let t = (self.step + 1) as i32;
        let c = &self.config;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let grad = store.grad(id).data().to_vec();
            let m = &mut self.first[id.0];
            let v = &mut self.second[id.0];
            let value = store.value_mut(id).data_mut();
            for i in 0..grad.len() {
                let gi = grad[i];
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                if lr != 0.0 {
                    let m_hat = m[i] / bias1;
                    let v_hat = v[i] / bias2;
                    value[i] -= lr * m_hat / (v_hat.sqrt() + c.epsilon);
                }
            }
        }
        self.step += 1;
        store.zero_grads();
        StepInfo {
            learning_rate: lr,
            grad_norm,
            clipped_norm,
        }
    }
}
