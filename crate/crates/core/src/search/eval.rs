use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::metrics::summarize_ranks;
use super::System;
use crate::model::{corpus_fingerprint, fit_model, ModelError, PairFeatures, PipelineConfig};
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot split {pairs} pairs into {folds} folds")]
    InvalidFolds { pairs: usize, folds: usize },
    #[error("fold {fold}: only {available} training apps but {required} principal components were requested")]
    InsufficientFold {
        fold: usize,
        available: usize,
        required: usize,
    },
    #[error("fold {fold}, system {system}: {source}")]
    Model {
        fold: usize,
        system: System,
        #[source]
        source: ModelError,
    },
    #[error("metric invariant violated for {system}: {detail}")]
    MetricInvariant { system: System, detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub folds: usize,
    pub systems: Vec<System>,
    /// Result list length per query.
    pub n: usize,
    pub seed: u64,
    pub pipeline: PipelineConfig,
    /// Run folds on the rayon pool.
    pub parallel: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 8,
            systems: System::ALL.to_vec(),
            n: 10,
            seed: 0,
            pipeline: PipelineConfig::default(),
            parallel: true,
        }
    }
}

/// `K` disjoint index sets that together cover every pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub folds: Vec<Vec<usize>>,
}

impl CorpusSplit {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Every index outside fold `k`, ascending.
    pub fn training(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Seeded shuffle, then round-robin assignment to `k` folds.
pub fn split_folds(count: usize, k: usize, seed: u64) -> Result<CorpusSplit, EvalError> {
    if k < 2 || k > count {
        return Err(EvalError::InvalidFolds { pairs: count, folds: k });
    }
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut rng_for(seed, &["split"]));
    let mut folds = vec![Vec::new(); k];
    for (i, idx) in order.into_iter().enumerate() {
        folds[i % k].push(idx);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(CorpusSplit { folds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMetrics {
    pub top1: f64,
    pub top5: f64,
    pub top10: f64,
    pub mrr: f64,
    pub queries: usize,
    pub train_time_s: f64,
    pub query_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFold {
    pub metrics: SystemMetrics,
    /// 1-based rank of each query's ground truth, `None` when not returned.
    pub ranks: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_pairs: usize,
    pub test_ids: Vec<String>,
    pub systems: BTreeMap<System, SystemFold>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub folds_k: usize,
    pub seed: u64,
    pub n: usize,
    pub corpus_fingerprint: String,
    pub config_fingerprint: String,
    pub folds: Vec<FoldReport>,
    pub aggregate: BTreeMap<System, SystemMetrics>,
    /// Systems sorted by aggregate Top@1, best first.
    pub top1_ordering: Vec<System>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn check_metrics(system: System, m: &SystemMetrics) -> Result<(), EvalError> {
    const SLACK: f64 = 1e-12;
    let fail = |detail: String| Err(EvalError::MetricInvariant { system, detail });
    if !(0.0 <= m.top1 && m.top1 <= m.top5 && m.top5 <= m.top10 && m.top10 <= 1.0) {
        return fail(format!("top@1 {} <= top@5 {} <= top@10 {} does not hold", m.top1, m.top5, m.top10));
    }
    if !(m.mrr + SLACK >= m.top1 && m.mrr <= 1.0 + SLACK && m.mrr <= m.top10 + SLACK) {
        return fail(format!("mrr {} outside [top@1 {}, min(1, top@10 {})]", m.mrr, m.top1, m.top10));
    }
    Ok(())
}

fn metrics_from(ranks: &[Option<usize>], train_time_s: f64, query_time_s: f64) -> SystemMetrics {
    let s = summarize_ranks(ranks);
    SystemMetrics {
        top1: s.top1,
        top5: s.top5,
        top10: s.top10,
        mrr: s.mrr,
        queries: s.queries,
        train_time_s,
        query_time_s,
    }
}

fn evaluate_system(
    fold: usize,
    system: System,
    train: &[PairFeatures],
    test: &[&PairFeatures],
    config: &EvalConfig,
    pipeline: &PipelineConfig,
    vocabulary_fingerprint: &str,
) -> Result<SystemFold, EvalError> {
    let wrap = |source: ModelError| match source {
        ModelError::InsufficientFold { available, required } => EvalError::InsufficientFold {
            fold,
            available,
            required,
        },
        source => EvalError::Model { fold, system, source },
    };
    let started = Instant::now();
    let model = fit_model(train, system, pipeline, vocabulary_fingerprint).map_err(wrap)?;
    let train_time_s = started.elapsed().as_secs_f64();

    let originals: Vec<(String, Vec<f64>)> = train.iter().map(|p| (p.app_id.clone(), p.original.clone())).collect();
    let index = model.build_index(&originals).map_err(wrap)?;

    // the true original is not indexed, so the target is its nearest indexed app
    let truths = test
        .iter()
        .map(|p| {
            let v = model.embed_query(&p.original)?;
            Ok(index.best(&v)?)
        })
        .collect::<Result<Vec<String>, ModelError>>()
        .map_err(wrap)?;

    let started = Instant::now();
    let results = test
        .iter()
        .map(|p| model.query(&index, &p.obfuscated, config.n))
        .collect::<Result<Vec<_>, _>>()
        .map_err(wrap)?;
    let query_time_s = started.elapsed().as_secs_f64();

    let ranks: Vec<Option<usize>> = truths.iter().zip(&results).map(|(t, r)| r.rank_of(t)).collect();
    let metrics = metrics_from(&ranks, train_time_s, query_time_s);
    check_metrics(system, &metrics)?;
    Ok(SystemFold { metrics, ranks })
}

fn run_fold(
    k: usize,
    pairs: &[PairFeatures],
    split: &CorpusSplit,
    config: &EvalConfig,
    vocabulary_fingerprint: &str,
) -> Result<FoldReport, EvalError> {
    let train: Vec<PairFeatures> = split.training(k).into_iter().map(|i| pairs[i].clone()).collect();
    let test: Vec<&PairFeatures> = split.folds[k].iter().map(|&i| &pairs[i]).collect();
    let mut pipeline = config.pipeline.clone();
    pipeline.training.seed = derive_seed(config.seed, &["fold", &k.to_string()]);
    let mut systems = BTreeMap::new();
    for &system in &config.systems {
        let result = evaluate_system(k, system, &train, &test, config, &pipeline, vocabulary_fingerprint)?;
        systems.insert(system, result);
    }
    Ok(FoldReport {
        fold: k,
        train_pairs: train.len(),
        test_ids: test.iter().map(|p| p.app_id.clone()).collect(),
        systems,
    })
}

fn config_fingerprint(config: &EvalConfig) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    hex::encode(&Sha256::digest(text.as_bytes())[..16])
}

/// Runs the K-fold protocol: for each fold, fit every system on the other
/// folds' pairs, index their originals, and query with the held-out
/// obfuscated apps. Each query's ground truth is the indexed app closest to
/// its un-obfuscated original.
pub fn kfold_evaluate(
    pairs: &[PairFeatures],
    config: &EvalConfig,
    vocabulary_fingerprint: &str,
) -> Result<EvaluationReport, EvalError> {
    let split = split_folds(pairs.len(), config.folds, derive_seed(config.seed, &["folds"]))?;
    let run = |k: usize| run_fold(k, pairs, &split, config, vocabulary_fingerprint);
    let folds: Vec<FoldReport> = if config.parallel {
        (0..split.k()).into_par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        (0..split.k()).map(run).collect::<Result<_, _>>()?
    };

    let mut aggregate = BTreeMap::new();
    for &system in &config.systems {
        let ranks: Vec<Option<usize>> = folds
            .iter()
            .flat_map(|f| f.systems[&system].ranks.iter().copied())
            .collect();
        let k = folds.len() as f64;
        let train_time = folds.iter().map(|f| f.systems[&system].metrics.train_time_s).sum::<f64>() / k;
        let query_time = folds.iter().map(|f| f.systems[&system].metrics.query_time_s).sum::<f64>() / k;
        let metrics = metrics_from(&ranks, train_time, query_time);
        check_metrics(system, &metrics)?;
        aggregate.insert(system, metrics);
    }
    let mut top1_ordering = config.systems.clone();
    top1_ordering.sort_by(|a, b| aggregate[b].top1.total_cmp(&aggregate[a].top1).then(a.cmp(b)));

    let mut notes = Vec::new();
    if config.systems.iter().any(|&s| s != System::Naive) {
        notes.push("principal components are fit on mean-centered counts without per-slot variance scaling".into());
    }
    Ok(EvaluationReport {
        folds_k: split.k(),
        seed: config.seed,
        n: config.n,
        corpus_fingerprint: corpus_fingerprint(pairs),
        config_fingerprint: config_fingerprint(config),
        folds,
        aggregate,
        top1_ordering,
        notes,
    })
}

fn display_name(system: System) -> &'static str {
    match system {
        System::Macneto => "Macneto",
        System::PurePca => "PCA",
        System::Naive => "Naive",
    }
}

impl EvaluationReport {
    /// Relative Top@1 improvement over the naive system.
    pub fn boost_at_1(&self, system: System) -> Option<f64> {
        let naive = self.aggregate.get(&System::Naive)?.top1;
        if system == System::Naive || naive == 0.0 {
            return None;
        }
        Some((self.aggregate.get(&system)?.top1 - naive) / naive)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text table of the aggregate results.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>18} {:>15} {:>6} {:>6} {:>7} {:>6} {:>8}",
            "System", "Training Time (s)", "Query Time (s)", "Top@1", "Top@5", "Top@10", "MRR", "Boost@1"
        );
        for system in System::ALL {
            let Some(m) = self.aggregate.get(&system) else {
                continue;
            };
            let train = if system == System::Naive {
                "N/A".to_string()
            } else {
                format!("{:.4}", m.train_time_s)
            };
            let boost = self
                .boost_at_1(system)
                .map_or("N/A".to_string(), |b| format!("{:+.2}%", b * 100.0));
            let _ = writeln!(
                out,
                "{:<8} {:>18} {:>15.4} {:>6.3} {:>6.3} {:>7.3} {:>6.3} {:>8}",
                display_name(system),
                train,
                m.query_time_s,
                m.top1,
                m.top5,
                m.top10,
                m.mrr,
                boost
            );
        }
        let _ = writeln!(
            out,
            "{} folds, {} queries, seed {}",
            self.folds_k,
            self.aggregate.values().next().map_or(0, |m| m.queries),
            self.seed
        );
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }
}
