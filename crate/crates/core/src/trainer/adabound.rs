//! AdaBound with the fixed final rate of 0.01.

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const FINAL_LR: f64 = 0.01;
pub const EPSILON: f64 = 1e-8;

/// Clip interval for the per-coordinate rate at step `k >= 1`.
pub fn rate_bounds(k: u64) -> (f64, f64) {
    let kf = k as f64;
    let lower = FINAL_LR - FINAL_LR / ((1.0 - BETA2) * kf + 1.0);
    let upper = FINAL_LR + FINAL_LR / ((1.0 - BETA2) * kf);
    (lower, upper)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoundState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    rates: Vec<f64>,
}

impl AdaBoundState {
    pub fn new(num_params: usize) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
            rates: vec![0.0; num_params],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// Per-coordinate rates used by the most recent step.
    pub fn last_rates(&self) -> &[f64] {
        &self.rates
    }

    /// Advances `k` and updates `theta` in place.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(theta.len(), self.m.len(), "parameter length changed");
        assert_eq!(grad.len(), self.m.len(), "gradient length mismatch");
        self.step += 1;
        let k = self.step;
        let bc1 = 1.0 - BETA1.powi(k as i32);
        let bc2 = 1.0 - BETA2.powi(k as i32);
        let (lower, upper) = rate_bounds(k);

        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            let rate = (lr / (v_hat.sqrt() + EPSILON)).min(upper).max(lower);
            self.rates[i] = rate;
            theta[i] -= rate * m_hat;
        }
    }
}
