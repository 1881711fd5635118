//! Three-layer network mapping instruction distributions to principal
//! component vectors, trained with Adam.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod adam;
pub mod network;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use network::{gradients, init_network, init_with_sizes, loss, Layer, NetworkParams, TrainingSample};
pub use train::{train, train_from, TrainingOutcome};

#[derive(Debug, Error, PartialEq)]
pub enum AnnError {
    #[error("no training samples")]
    NoSamples,
    #[error(
        "sample {index} has input length {input} and target length {target}, expected {expected_input} and {expected_target}"
    )]
    SampleShape {
        index: usize,
        input: usize,
        target: usize,
        expected_input: usize,
        expected_target: usize,
    },
    #[error("sample {index} contains a non-finite value")]
    NonFiniteSample { index: usize },
    #[error("loss became non-finite in epoch {epoch}; try a lower learning_rate")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid training config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScaling {
    None,
    /// `ln(1 + x)` per entry.
    #[default]
    Log1p,
}

impl InputScaling {
    pub fn apply(self, x: &[f64]) -> Vec<f64> {
        match self {
            InputScaling::None => x.to_vec(),
            InputScaling::Log1p => x.iter().map(|v| v.ln_1p()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub input_scaling: InputScaling,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            input_scaling: InputScaling::Log1p,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), AnnError> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(AnnError::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !open_unit(self.beta1) || !open_unit(self.beta2) {
            return Err(AnnError::Config("beta1 and beta2 must lie in (0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(AnnError::Config("epsilon must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(AnnError::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_checks() {
        assert!(TrainingConfig::default().validate().is_ok());
        let bad = TrainingConfig {
            beta1: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainingConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let parsed: TrainingConfig = serde_json::from_str(r#"{"epochs": 5, "input_scaling": "none"}"#).unwrap();
        assert_eq!(parsed.epochs, 5);
        assert_eq!(parsed.input_scaling, InputScaling::None);
        assert_eq!(parsed.learning_rate, 1e-3);
    }

    #[test]
    fn log1p_scaling() {
        assert_eq!(InputScaling::Log1p.apply(&[0.0, std::f64::consts::E - 1.0]), vec![0.0, 1.0]);
        assert_eq!(InputScaling::None.apply(&[3.0]), vec![3.0]);
    }
}
