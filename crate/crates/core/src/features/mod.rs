//! Instruction abstraction, call graphs and instruction distributions.

pub mod callgraph;
pub mod distribution;
pub mod vocab;

pub use callgraph::{build_call_graph, CallGraph, DanglingRef, EntryPolicy, MethodRef};
pub use distribution::{
    app_id, distributions_to_csv, extract_app, method_id, FeatureOptions, InstructionDistribution,
};
pub use vocab::{abstract_opcode, Instruction, InstructionVocabulary, OpcodeGroup, VocabularyError};
