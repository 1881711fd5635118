use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use super::{SearchError, System};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn similarity(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        0.0
    } else {
        // `+ 0.0` folds -0.0 into 0.0 so equal similarities compare equal
        dot / (norm_a * norm_b) + 0.0
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, SearchError> {
    if a.len() != b.len() {
        return Err(SearchError::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(similarity(dot(a, b), norm(a), norm(b)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub app_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_id: Option<String>,
    pub hits: Vec<Hit>,
    pub n: usize,
}

impl RankedResult {
    /// 1-based rank of `app_id`, if it was returned.
    pub fn rank_of(&self, app_id: &str) -> Option<usize> {
        self.hits.iter().position(|h| h.app_id == app_id).map(|p| p + 1)
    }

    pub fn with_query_id(mut self, id: impl Into<String>) -> Self {
        self.query_id = Some(id.into());
        self
    }
}

/// Exhaustive cosine index over contiguous vectors with cached norms.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchIndex {
    system: System,
    dim: usize,
    ids: Vec<String>,
    data: Vec<f64>,
    norms: Vec<f64>,
    /// position of each id in ascending id order, for tie-breaks
    id_rank: Vec<u32>,
}

pub fn build_index(entries: Vec<(String, Vec<f64>)>, system: System) -> Result<SearchIndex, SearchError> {
    let dim = entries.first().ok_or(SearchError::EmptyCorpus)?.1.len();
    let mut seen = HashSet::new();
    let mut ids = Vec::with_capacity(entries.len());
    let mut data = Vec::with_capacity(entries.len() * dim);
    let mut norms = Vec::with_capacity(entries.len());
    for (id, v) in entries {
        if v.len() != dim {
            return Err(SearchError::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(SearchError::NonFinite(id));
        }
        if !seen.insert(id.clone()) {
            return Err(SearchError::DuplicateAppId(id));
        }
        norms.push(norm(&v));
        data.extend_from_slice(&v);
        ids.push(id);
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    let mut id_rank = vec![0u32; ids.len()];
    for (rank, &i) in order.iter().enumerate() {
        id_rank[i] = rank as u32;
    }
    Ok(SearchIndex {
        system,
        dim,
        ids,
        data,
        norms,
        id_rank,
    })
}

/// Candidate ordered so that the heap's top is the worst kept hit.
#[derive(PartialEq)]
struct Candidate {
    similarity: f64,
    rank: u32,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // greater = worse: lower similarity, then later id
        other
            .similarity
            .total_cmp(&self.similarity)
            .then(self.rank.cmp(&other.rank))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl SearchIndex {
    pub fn system(&self) -> System {
        self.system
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn is_zero(&self, i: usize) -> bool {
        self.norms[i] == 0.0
    }

    pub fn position(&self, app_id: &str) -> Option<usize> {
        self.ids.iter().position(|id| id == app_id)
    }

    /// Top `n` entries by cosine similarity, ties broken by ascending app id.
    pub fn search(&self, query: &[f64], n: usize) -> Result<RankedResult, SearchError> {
        if query.len() != self.dim {
            return Err(SearchError::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        if query.iter().any(|x| !x.is_finite()) {
            return Err(SearchError::NonFinite("query".into()));
        }
        let keep = n.min(self.len());
        let query_norm = norm(query);
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(keep + 1);
        if keep > 0 {
            for i in 0..self.len() {
                let similarity = similarity(dot(query, self.vector(i)), query_norm, self.norms[i]);
                let candidate = Candidate {
                    similarity,
                    rank: self.id_rank[i],
                    index: i,
                };
                if heap.len() < keep {
                    heap.push(candidate);
                } else if candidate < *heap.peek().expect("non-empty heap") {
                    heap.pop();
                    heap.push(candidate);
                }
            }
        }
        let hits = heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| Hit {
                app_id: self.ids[c.index].clone(),
                similarity: c.similarity,
            })
            .collect();
        Ok(RankedResult {
            query_id: None,
            hits,
            n,
        })
    }

    /// The single most similar entry.
    pub fn best(&self, query: &[f64]) -> Result<String, SearchError> {
        let result = self.search(query, 1)?;
        Ok(result.hits.into_iter().next().expect("index is never empty").app_id)
    }
}

pub fn search(index: &SearchIndex, query: &[f64], n: usize) -> Result<RankedResult, SearchError> {
    index.search(query, n)
}

pub fn best(index: &SearchIndex, query: &[f64]) -> Result<String, SearchError> {
    index.best(query)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(entries: &[(&str, &[f64])]) -> SearchIndex {
        build_index(
            entries.iter().map(|(id, v)| (id.to_string(), v.to_vec())).collect(),
            System::Naive,
        )
        .unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        let expected = 32.0 / (14f64.sqrt() * 77f64.sqrt());
        assert!((cosine(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.974631846).abs() < 1e-9);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(cosine(&[1.0], &[1.0, 2.0]), Err(SearchError::DimensionMismatch { .. })));
    }

    #[test]
    fn build_errors_and_norms() {
        assert!(matches!(build_index(vec![], System::Naive), Err(SearchError::EmptyCorpus)));
        let dup = vec![("a".to_string(), vec![1.0]), ("a".to_string(), vec![2.0])];
        assert!(matches!(build_index(dup, System::Naive), Err(SearchError::DuplicateAppId(_))));
        let index = idx(&[("a", &[3.0, 4.0]), ("b", &[0.0, 0.0]), ("c", &[1.0, 1.0])]);
        assert_eq!(index.len(), 3);
        assert_eq!(index.norm(0), 5.0);
        assert!(index.is_zero(1));
        assert_eq!(index.norm(2), 2f64.sqrt());
    }

    #[test]
    fn exact_match_ranks_first() {
        let index = idx(&[("a", &[1.0, 0.0]), ("b", &[0.5, 0.5]), ("c", &[0.0, 1.0])]);
        let r = index.search(&[0.5, 0.5], 2).unwrap();
        assert_eq!(r.hits[0].app_id, "b");
        assert!((r.hits[0].similarity - 1.0).abs() < 1e-15);
        let all = index.search(&[1.0, 0.2], 10).unwrap();
        assert_eq!(all.hits.len(), 3);
        assert_eq!(index.best(&[0.0, 2.0]).unwrap(), "c");
        assert!(index.search(&[1.0, 1.0], 0).unwrap().hits.is_empty());
    }

    #[test]
    fn ties_break_by_id() {
        let index = idx(&[("z", &[1.0, 0.0]), ("m", &[2.0, 0.0]), ("a", &[0.0, 1.0]), ("b", &[0.0, 0.0])]);
        let r = index.search(&[0.0, 0.0], 4).unwrap();
        let ids: Vec<_> = r.hits.iter().map(|h| h.app_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "m", "z"]);
        let r = index.search(&[5.0, 0.0], 3).unwrap();
        let ids: Vec<_> = r.hits.iter().map(|h| h.app_id.as_str()).collect();
        assert_eq!(ids, ["m", "z", "a"]);
        assert_eq!(r.rank_of("a"), Some(3));
        assert_eq!(r.rank_of("b"), None);
    }
}
