use serde::{Deserialize, Serialize};

use super::{GradientEstimate, TrainConfig};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Exponential learning-rate decay from `eta0` to `eta_final` over
/// `iterations`, floored at `eta_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub eta0: f64,
    pub eta_final: f64,
    pub eta_min: f64,
    pub iterations: usize,
}

impl Schedule {
    pub fn new(eta0: f64, eta_final: f64, eta_min: f64, iterations: usize) -> Self {
        Schedule { eta0, eta_final, eta_min, iterations }
    }

    /// `η(t) = max(η_min, η₀ · exp(t · ln(η_T/η₀) / T))`.
    pub fn rate(&self, t: usize) -> f64 {
        let decay = (self.eta_final / self.eta0).ln() / self.iterations as f64;
        (self.eta0 * (t as f64 * decay).exp()).max(self.eta_min)
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: usize,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        AdamState { m: vec![0.0; num_params], v: vec![0.0; num_params], t: 0 }
    }
}

/// Clamp, bias-corrected ADAM, descent step. Returns the learning rate used.
pub fn adam_step(
    params: &mut ModelParams,
    state: &mut AdamState,
    estimate: &GradientEstimate,
    t: usize,
    config: &TrainConfig,
) -> Result<f64> {
    if t == 0 {
        return Err(Error::Contract("optimizer steps are numbered from 1".into()));
    }
    estimate.check_shape(params)?;
    if !estimate.is_finite() {
        return Err(Error::Contract("non-finite gradient estimate".into()));
    }
    if state.m.len() != params.num_params() {
        return Err(Error::Dimension("optimizer state does not match the model".into()));
    }
    let eta = config.schedule.rate(t);
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    let mut theta = params.to_flat();
    for (i, g) in estimate.to_flat().into_iter().enumerate() {
        let g = g.clamp(-config.clamp, config.clamp);
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        theta[i] -= eta * m_hat / (v_hat.sqrt() + config.adam_eps);
    }
    state.t = t;
    params.set_flat(&theta)?;
    Ok(eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OperatorPool;

    fn setup() -> (ModelParams, AdamState, TrainConfig) {
        let params = ModelParams::zeros(1, 1, OperatorPool::classical()).unwrap();
        let state = AdamState::new(params.num_params());
        (params, state, TrainConfig::default())
    }

    #[test]
    fn schedule_endpoints() {
        let s = Schedule::new(0.01, 1e-3, 0.0, 5000);
        assert!((s.rate(1) / 0.01 - 1.0).abs() < 1e-3);
        assert!((s.rate(5000) - 1e-3).abs() < 1e-12);
        assert_eq!(Schedule::new(0.01, 1e-3, 5e-3, 10).rate(10), 5e-3);
    }

    #[test]
    fn first_step_magnitude_is_the_learning_rate() {
        let (mut params, mut state, config) = setup();
        let flat = [0.01, -0.02, 0.03];
        let g = GradientEstimate::from_flat(&params, &flat, 0).unwrap();
        let eta = adam_step(&mut params, &mut state, &g, 1, &config).unwrap();
        for (theta, grad) in params.to_flat().iter().zip(flat) {
            let expected = -eta * grad / (grad.abs() + config.adam_eps);
            assert!((theta - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let (mut params, mut state, config) = setup();
        let g = GradientEstimate::zeros(&params);
        adam_step(&mut params, &mut state, &g, 1, &config).unwrap();
        assert!(params.to_flat().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn clamp_applies_before_moments() {
        let (mut params, mut state, config) = setup();
        let g = GradientEstimate::from_flat(&params, &[0.2, 0.0, 0.0], 0).unwrap();
        adam_step(&mut params, &mut state, &g, 1, &config).unwrap();
        assert!((state.m[0] - 0.1 * 0.05).abs() < 1e-15);
        assert!(adam_step(&mut params, &mut state, &g, 0, &config).is_err());
    }
}
