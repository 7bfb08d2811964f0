//! Adam with bias correction.

/// Optimizer state: first/second moment accumulators (zero-initialized) and a
/// step count that increases by one per update.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(dim: usize, lr: f64) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
        }
    }

    /// Standard update: `p -= lr · m̂ / (√v̂ + ε)`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step_scaled(params, grad, None);
    }

    /// Update with an optional per-parameter learning-rate multiplier
    /// (used to train O(10)-scale physical constants alongside network
    /// weights without separate optimizers).
    pub fn step_scaled(&mut self, params: &mut [f64], grad: &[f64], lr_scale: Option<&[f64]>) {
        assert_eq!(params.len(), self.m.len(), "adam: params length");
        assert_eq!(grad.len(), self.m.len(), "adam: grad length");
        if let Some(s) = lr_scale {
            assert_eq!(s.len(), self.m.len(), "adam: lr_scale length");
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            let scale = lr_scale.map_or(1.0, |s| s[i]);
            params[i] -= self.lr * scale * mhat / (vhat.sqrt() + self.eps);
        }
    }
}
