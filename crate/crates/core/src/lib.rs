//! Search for obfuscated Java/Android apps by learning what their bytecode
//! looks like before and after obfuscation.

pub mod ann;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod features;
pub mod keywords;
pub mod ingest;
pub mod model;
pub mod obfuscate;
pub mod pca;
pub mod search;
pub mod seed;
pub mod synth;
