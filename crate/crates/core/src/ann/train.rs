use rand::seq::SliceRandom;

use super::adam::{adam_step, AdamState};
use super::network::{accumulate_gradients, init_network, NetworkParams, TrainingSample};
use super::{AnnError, TrainingConfig};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub params: NetworkParams,
    /// Per-sample mean loss of each epoch, measured before each batch's update.
    pub loss_history: Vec<f64>,
}

fn check_samples(samples: &[TrainingSample], n: usize, m: usize) -> Result<(), AnnError> {
    if samples.is_empty() {
        return Err(AnnError::NoSamples);
    }
    for (i, s) in samples.iter().enumerate() {
        if s.input.len() != n || s.target.len() != m {
            return Err(AnnError::SampleShape {
                index: i,
                input: s.input.len(),
                target: s.target.len(),
                expected_input: n,
                expected_target: m,
            });
        }
        if !s.input.iter().chain(&s.target).all(|v| v.is_finite()) {
            return Err(AnnError::NonFiniteSample { index: i });
        }
    }
    Ok(())
}

/// Trains a fresh `n -> 128 -> 64 -> m` network. Inputs are used as given;
/// apply [`super::InputScaling`] beforehand.
pub fn train(samples: &[TrainingSample], config: &TrainingConfig) -> Result<TrainingOutcome, AnnError> {
    let first = samples.first().ok_or(AnnError::NoSamples)?;
    let params = init_network(first.input.len(), first.target.len(), config.seed);
    train_from(params, samples, config)
}

/// Trains starting from the given parameters.
pub fn train_from(
    mut params: NetworkParams,
    samples: &[TrainingSample],
    config: &TrainingConfig,
) -> Result<TrainingOutcome, AnnError> {
    config.validate()?;
    check_samples(samples, params.input_size(), params.output_size())?;
    let mut state = AdamState::for_params(&params);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    let mut batch = Vec::with_capacity(config.batch_size);
    let mut grads = params.zeros_like();
    for epoch in 0..config.epochs {
        let mut rng = rng_for(config.seed, &["shuffle", &epoch.to_string()]);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| samples[i].clone()));
            grads.values_mut().for_each(|g| *g = 0.0);
            let batch_loss = accumulate_gradients(&params, &batch, &mut grads);
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(AnnError::NonFiniteLoss { epoch: epoch + 1 });
            }
            epoch_loss += batch_loss;
            adam_step(&mut params, &grads, &mut state, config);
            if !params.is_finite() {
                return Err(AnnError::NonFiniteLoss { epoch: epoch + 1 });
            }
        }
        let mean = epoch_loss / samples.len() as f64;
        log::debug!("epoch {} mean loss {mean:.6}", epoch + 1);
        loss_history.push(mean);
    }
    Ok(TrainingOutcome {
        params,
        loss_history,
    })
}
