use super::index::RankedResult;

/// 1 if `truth` is ranked at `k` or better, else 0.
pub fn top_at_k(truth: &str, result: &RankedResult, k: usize) -> u8 {
    match result.rank_of(truth) {
        Some(rank) if rank <= k => 1,
        _ => 0,
    }
}

/// Mean reciprocal rank; a truth missing from its result contributes 0.
/// Returns 0 for no queries.
pub fn mrr<S: AsRef<str>>(truths: &[S], results: &[RankedResult]) -> f64 {
    assert_eq!(truths.len(), results.len(), "one result per ground truth");
    if truths.is_empty() {
        return 0.0;
    }
    let total: f64 = truths
        .iter()
        .zip(results)
        .map(|(t, r)| r.rank_of(t.as_ref()).map_or(0.0, |rank| 1.0 / rank as f64))
        .sum();
    total / truths.len() as f64
}

/// Top@K and MRR computed from 1-based ranks (`None` = not returned).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSummary {
    pub top1: f64,
    pub top5: f64,
    pub top10: f64,
    pub mrr: f64,
    pub queries: usize,
}

pub fn summarize_ranks(ranks: &[Option<usize>]) -> RankSummary {
    let q = ranks.len();
    if q == 0 {
        return RankSummary {
            top1: 0.0,
            top5: 0.0,
            top10: 0.0,
            mrr: 0.0,
            queries: 0,
        };
    }
    let within = |k: usize| ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count() as f64 / q as f64;
    let reciprocal: f64 = ranks.iter().map(|r| r.map_or(0.0, |r| 1.0 / r as f64)).sum();
    RankSummary {
        top1: within(1),
        top5: within(5),
        top10: within(10),
        mrr: reciprocal / q as f64,
        queries: q,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::index::Hit;

    fn result(ids: &[&str]) -> RankedResult {
        RankedResult {
            query_id: None,
            hits: ids
                .iter()
                .map(|id| Hit {
                    app_id: id.to_string(),
                    similarity: 0.5,
                })
                .collect(),
            n: 10,
        }
    }

    #[test]
    fn top_at_k_examples() {
        let r = result(&["a", "b", "c", "d", "e", "f"]);
        assert_eq!(top_at_k("a", &r, 1), 1);
        assert_eq!(top_at_k("f", &r, 5), 0);
        assert_eq!(top_at_k("f", &r, 6), 1);
        assert_eq!(top_at_k("zz", &r, 10), 0);
    }

    #[test]
    fn mrr_examples() {
        let r = result(&["a", "b"]);
        assert_eq!(mrr(&["a", "a"], &[r.clone(), r.clone()]), 1.0);
        assert_eq!(mrr(&["a", "b"], &[r.clone(), r.clone()]), 0.75);
        assert_eq!(mrr(&["x"], &[r]), 0.0);
        assert_eq!(mrr::<&str>(&[], &[]), 0.0);
    }

    #[test]
    fn rank_summary() {
        let s = summarize_ranks(&[Some(1), Some(2), Some(7), None]);
        assert_eq!(s.top1, 0.25);
        assert_eq!(s.top5, 0.5);
        assert_eq!(s.top10, 0.75);
        assert!((s.mrr - (1.0 + 0.5 + 1.0 / 7.0) / 4.0).abs() < 1e-15);
    }
}
