use serde::{Deserialize, Serialize};

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter length mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient length mismatch");
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut a = Adam::new(3, 1e-3, 0.9, 0.999, 1e-8);
        let mut p = vec![1.0, -2.0, 3.0];
        a.step(&mut p, &[0.0; 3]);
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut a = Adam::new(2, 1e-3, 0.9, 0.999, 1e-8);
        let mut p = vec![0.0, 0.0];
        a.step(&mut p, &[5.0, -0.01]);
        assert!((p[0] + 1e-3).abs() < 1e-9);
        assert!((p[1] - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut a = Adam::new(2, 1e-2, 0.9, 0.999, 1e-8);
            let mut p = vec![0.3, 0.7];
            for k in 0..50 {
                let g = [p[0] * 2.0 + k as f64 * 1e-3, (p[1] - 1.0).sin()];
                a.step(&mut p, &g);
            }
            p
        };
        assert_eq!(run(), run());
    }
}
