use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::callgraph::{build_call_graph, CallGraph, EntryPolicy};
use super::vocab::{abstract_opcode, Instruction, InstructionVocabulary};
use crate::ingest::{AppModel, MethodModel};

/// Per-slot instruction counts for a method or an app.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionDistribution {
    pub counts: Vec<u64>,
    pub vocabulary_id: String,
}

impl InstructionDistribution {
    pub fn zeros(vocab: &InstructionVocabulary) -> Self {
        InstructionDistribution {
            counts: vec![0; vocab.total_slots()],
            vocabulary_id: vocab.fingerprint().to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Counts divided by their total; an all-zero vector stays zero.
    pub fn l1_normalized(&self) -> Vec<f64> {
        let total = self.total();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

impl AddAssign<&InstructionDistribution> for InstructionDistribution {
    fn add_assign(&mut self, rhs: &InstructionDistribution) {
        assert_eq!(
            self.vocabulary_id, rhs.vocabulary_id,
            "distributions come from different vocabularies"
        );
        for (a, b) in self.counts.iter_mut().zip(&rhs.counts) {
            *a += b;
        }
    }
}

pub fn method_id(method: &MethodModel, vocab: &InstructionVocabulary) -> InstructionDistribution {
    let mut dist = InstructionDistribution::zeros(vocab);
    for (op, site) in method.instructions() {
        let instr = match site {
            Some(site) => Instruction::Call(site),
            None => Instruction::Opcode(op),
        };
        if let Some(slot) = abstract_opcode(instr, vocab) {
            dist.counts[slot] += 1;
        }
    }
    dist
}

/// Sum of `method_id` over the methods reachable from the graph's entry
/// points. Each reachable method counts once.
pub fn app_id(app: &AppModel, cg: &CallGraph, vocab: &InstructionVocabulary) -> InstructionDistribution {
    let mut dist = InstructionDistribution::zeros(vocab);
    for node in cg.reachable() {
        let (ci, mi) = cg.locations[node];
        dist += &method_id(&app.classes[ci].methods[mi], vocab);
    }
    dist
}

/// Options for turning an app into a feature vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureOptions {
    #[serde(default)]
    pub entry_policy: EntryPolicy,
    #[serde(default)]
    pub l1_normalize: bool,
}

/// Builds the call graph and returns the app's instruction distribution.
pub fn extract_app(
    app: &AppModel,
    vocab: &InstructionVocabulary,
    policy: EntryPolicy,
) -> InstructionDistribution {
    let cg = build_call_graph(app, vocab, policy);
    app_id(app, &cg, vocab)
}

impl FeatureOptions {
    pub fn features(&self, dist: &InstructionDistribution) -> Vec<f64> {
        if self.l1_normalize {
            dist.l1_normalized()
        } else {
            dist.to_f64()
        }
    }

    pub fn extract(&self, app: &AppModel, vocab: &InstructionVocabulary) -> Vec<f64> {
        self.features(&extract_app(app, vocab, self.entry_policy))
    }
}

/// CSV dump of distributions with a header of slot names.
pub fn distributions_to_csv(
    rows: &[(&str, &InstructionDistribution)],
    vocab: &InstructionVocabulary,
) -> String {
    let mut out = String::from("app_id");
    for name in vocab.slot_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (id, dist) in rows {
        out.push_str(&csv_field(id));
        for c in &dist.counts {
            out.push(',');
            out.push_str(&c.to_string());
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::OpcodeGroup;
    use crate::ingest::load_textual_app;

    fn vocab() -> InstructionVocabulary {
        InstructionVocabulary::default_vocabulary()
    }

    fn app(text: &str) -> AppModel {
        load_textual_app(text, &vocab()).unwrap()
    }

    #[test]
    fn method_counts_by_definition() {
        let a = app("app a\nclass A\nmethod f ()V\niadd\niadd\nifeq\nreturn\n");
        let d = method_id(&a.classes[0].methods[0], &vocab());
        assert_eq!(d.counts[OpcodeGroup::XAdd.slot()], 2);
        assert_eq!(d.counts[OpcodeGroup::IfXXX.slot()], 1);
        assert_eq!(d.total(), 3);
    }

    #[test]
    fn empty_method_is_zero() {
        let a = app("app a\nclass A\nmethod f ()V\n");
        assert!(method_id(&a.classes[0].methods[0], &vocab()).is_zero());
        assert!(extract_app(&a, &vocab(), EntryPolicy::AllMethods).is_zero());
    }

    #[test]
    fn cycle_counts_each_method_once() {
        let a = app("app a
class A
method f ()V public
iadd
call:A.g()V
return
method g ()V private
imul
call:A.f()V
return
");
        let v = vocab();
        let d = extract_app(&a, &v, EntryPolicy::PublicOnly);
        assert_eq!(d.counts[OpcodeGroup::XAdd.slot()], 1);
        assert_eq!(d.counts[OpcodeGroup::XMul.slot()], 1);
        assert_eq!(d.total(), 2);
    }

    #[test]
    fn unreachable_methods_contribute_nothing() {
        let a = app("app a
class A
method f ()V public
iadd
return
method g ()V private
imul
return
");
        let d = extract_app(&a, &vocab(), EntryPolicy::PublicOnly);
        assert_eq!(d.counts[OpcodeGroup::XMul.slot()], 0);
        let all = extract_app(&a, &vocab(), EntryPolicy::AllMethods);
        assert_eq!(all.counts[OpcodeGroup::XMul.slot()], 1);
    }

    #[test]
    fn normalization_and_csv() {
        let a = app("app a\nclass A\nmethod f ()V\niadd\nisub\nisub\nisub\nreturn\n");
        let v = vocab();
        let d = extract_app(&a, &v, EntryPolicy::AllMethods);
        let opts = FeatureOptions {
            l1_normalize: true,
            ..Default::default()
        };
        let f = opts.features(&d);
        assert_eq!(f[OpcodeGroup::XAdd.slot()], 0.25);
        assert_eq!(f[OpcodeGroup::XSub.slot()], 0.75);
        let csv = distributions_to_csv(&[("a,b", &d)], &v);
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("app_id,xaload,xastore"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("\"a,b\",0,0,0,1,3,"));
        assert_eq!(row.split(',').count(), 254);
    }
}
