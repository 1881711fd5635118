//! Trains the network that maps obfuscated distributions back onto the
//! principal components of their originals, and prints the loss curve.

use macneto::corpus::synth_features;
use macneto::features::{FeatureOptions, InstructionVocabulary};
use macneto::model::{fit_model, PipelineConfig};
use macneto::search::System;
use macneto::synth::{generate_corpus, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vocab = InstructionVocabulary::default_vocabulary();
    let pairs = generate_corpus(120, &SynthConfig::default(), &vocab)?;
    let features = synth_features(&pairs, &FeatureOptions::default(), &vocab);
    let mut config = PipelineConfig::default();
    config.training.epochs = 60;
    let model = fit_model(&features, System::Macneto, &config, vocab.fingerprint())?;
    for (epoch, loss) in model.loss_history.iter().enumerate() {
        if epoch % 10 == 0 || epoch + 1 == model.loss_history.len() {
            println!("epoch {epoch:>3}  loss {loss:.5}");
        }
    }
    let path = std::env::temp_dir().join("macneto-example-model.json");
    model.save(&path)?;
    println!("saved to {}", path.display());
    Ok(())
}
