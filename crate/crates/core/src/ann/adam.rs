use serde::{Deserialize, Serialize};

use super::network::NetworkParams;
use super::TrainingConfig;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(parameter_count: usize) -> Self {
        AdamState {
            first_moment: vec![0.0; parameter_count],
            second_moment: vec![0.0; parameter_count],
            step: 0,
        }
    }

    pub fn for_params(params: &NetworkParams) -> Self {
        Self::new(params.parameter_count())
    }
}

/// Adam update with bias correction over a flat parameter slice.
pub fn adam_update<'a>(
    params: impl Iterator<Item = &'a mut f64>,
    grads: impl Iterator<Item = &'a f64>,
    state: &mut AdamState,
    config: &TrainingConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    for (((p, &g), m), v) in params
        .zip(grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
}

pub fn adam_step(params: &mut NetworkParams, grads: &NetworkParams, state: &mut AdamState, config: &TrainingConfig) {
    adam_update(params.values_mut(), grads.values(), state, config);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let config = TrainingConfig::default();
        let mut p = [0.5];
        let mut state = AdamState::new(1);
        adam_update(p.iter_mut(), [1.0].iter(), &mut state, &config);
        assert!((0.5 - p[0] - 1e-3).abs() < 1e-6);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let config = TrainingConfig::default();
        let mut p = [0.5, -2.0];
        let mut state = AdamState::new(2);
        adam_update(p.iter_mut(), [0.0, 0.0].iter(), &mut state, &config);
        assert_eq!(p, [0.5, -2.0]);
    }

    #[test]
    fn second_step_by_hand() {
        let config = TrainingConfig::default();
        let mut p = [0.0];
        let mut state = AdamState::new(1);
        adam_update(p.iter_mut(), [1.0].iter(), &mut state, &config);
        adam_update(p.iter_mut(), [-1.0].iter(), &mut state, &config);
        let m = 0.9 * 0.1 - 0.1;
        let v = 0.999 * 0.001 + 0.001;
        let step2 = 1e-3 * (m / (1.0 - 0.81)) / ((v / (1.0 - 0.999f64.powi(2))).sqrt() + 1e-8);
        let expected = -1e-3 / (1.0 + 1e-8) - step2;
        assert!((p[0] - expected).abs() < 1e-15);
    }
}
