//! Dense/sparse retrieval by cosine, TREC run files, and NDCG@k / Recall@k.
//!
//! NDCG uses exponential gain `2^rel - 1` and a `log2(rank + 1)` discount.
//! It is averaged over every query that has at least one qrels entry;
//! queries whose entries are all zero contribute 0. Recall is averaged over
//! queries with at least one relevant (grade > 0) document.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{load_qrels, Qrels};
use crate::error::{Result, UdlError};
use crate::linker::write_file;
use crate::similarity::{ScoreIndex, VectorSet};

/// Ranked documents per query: score descending, ties by ascending doc id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Run {
    rankings: BTreeMap<String, Vec<(String, f64)>>,
}

fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

impl Run {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets a query's ranking, sorting it and rejecting duplicate documents.
    pub fn insert(&mut self, query_id: impl Into<String>, mut docs: Vec<(String, f64)>) -> Result<()> {
        let query_id = query_id.into();
        let mut seen = HashSet::new();
        if let Some(dup) = docs.iter().find(|(d, _)| !seen.insert(d.as_str())) {
            return Err(UdlError::Validation(format!(
                "document {:?} ranked twice for query {query_id:?}",
                dup.0
            )));
        }
        if docs.iter().any(|(_, s)| !s.is_finite()) {
            return Err(UdlError::Validation(format!("non-finite score for query {query_id:?}")));
        }
        docs.sort_by(rank_order);
        self.rankings.insert(query_id, docs);
        Ok(())
    }

    pub fn ranking(&self, query_id: &str) -> &[(String, f64)] {
        self.rankings.get(query_id).map_or(&[], Vec::as_slice)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.rankings.keys().map(String::as_str)
    }

    pub fn n_queries(&self) -> usize {
        self.rankings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rankings.is_empty()
    }

    /// Writes `query_id Q0 doc_id rank score tag` lines.
    pub fn write_trec(&self, path: &Path, tag: &str) -> Result<()> {
        let mut body = String::new();
        for (q, docs) in &self.rankings {
            for (rank, (d, s)) in docs.iter().enumerate() {
                body.push_str(&format!("{q} Q0 {d} {} {s} {tag}\n", rank + 1));
            }
        }
        write_file(path, &body)
    }
}

pub fn parse_run(path: &Path) -> Result<Run> {
    let file = File::open(path).map_err(|e| UdlError::io(path, e))?;
    let mut grouped: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| UdlError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(UdlError::parse(
                path,
                i + 1,
                format!(
                    "expected 6 columns (query_id Q0 doc_id rank score tag), got {}",
                    cols.len()
                ),
            ));
        }
        cols[3]
            .parse::<u64>()
            .map_err(|_| UdlError::parse(path, i + 1, format!("rank {:?} is not an integer", cols[3])))?;
        let score: f64 = cols[4]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| UdlError::parse(path, i + 1, format!("score {:?} is not a finite number", cols[4])))?;
        if !seen.insert((cols[0].to_string(), cols[2].to_string())) {
            return Err(UdlError::parse(
                path,
                i + 1,
                format!("document {:?} ranked twice for query {:?}", cols[2], cols[0]),
            ));
        }
        grouped
            .entry(cols[0].to_string())
            .or_default()
            .push((cols[2].to_string(), score));
    }
    let mut run = Run::new();
    for (q, docs) in grouped {
        run.insert(q, docs)?;
    }
    Ok(run)
}

type Ranking = Vec<(String, f64)>;

/// Top-`k` documents by cosine for every query.
pub fn rank_documents(query_vectors: &VectorSet, doc_vectors: &VectorSet, k: usize) -> Result<Run> {
    if k < 1 {
        return Err(UdlError::Argument("k must be at least 1".into()));
    }
    let index = ScoreIndex::new(doc_vectors);
    let n_docs = doc_vectors.len();
    let doc_ids = doc_vectors.ids();
    let rankings: Vec<Result<(String, Ranking)>> = (0..query_vectors.len())
        .into_par_iter()
        .map_init(
            || vec![0.0; n_docs],
            |scores, qi| {
                index.cosines_into(&query_vectors.get(qi), query_vectors.norm(qi), scores)?;
                let mut order: Vec<usize> = (0..n_docs).collect();
                let cmp = |&a: &usize, &b: &usize| {
                    scores[b]
                        .total_cmp(&scores[a])
                        .then_with(|| doc_ids[a].cmp(&doc_ids[b]))
                };
                if k < n_docs {
                    order.select_nth_unstable_by(k - 1, cmp);
                    order.truncate(k);
                }
                order.sort_unstable_by(cmp);
                let ranked = order.into_iter().map(|d| (doc_ids[d].clone(), scores[d])).collect();
                Ok((query_vectors.ids()[qi].clone(), ranked))
            },
        )
        .collect();
    let mut run = Run::new();
    for r in rankings {
        let (q, docs) = r?;
        run.insert(q, docs)?;
    }
    Ok(run)
}

fn gain(grade: u32) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

fn discount(rank: usize) -> f64 {
    ((rank + 1) as f64).log2()
}

/// NDCG@k of one query; 0 when it has no relevant documents.
pub fn query_ndcg(ranking: &[(String, f64)], judged: &BTreeMap<String, u32>, k: usize) -> f64 {
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, (d, _))| gain(judged.get(d).copied().unwrap_or(0)) / discount(i + 1))
        .sum();
    let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain(g) / discount(i + 1))
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        (dcg / idcg).min(1.0)
    }
}

/// Recall@k of one query, or `None` when it has no relevant documents.
pub fn query_recall(ranking: &[(String, f64)], judged: &BTreeMap<String, u32>, k: usize) -> Option<f64> {
    let total = judged.values().filter(|&&g| g > 0).count();
    if total == 0 {
        return None;
    }
    let hits = ranking
        .iter()
        .take(k)
        .filter(|(d, _)| judged.get(d).is_some_and(|&g| g > 0))
        .count();
    Some(hits as f64 / total as f64)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn ndcg_at_k(run: &Run, qrels: &Qrels, k: usize) -> f64 {
    mean(qrels.iter().map(|(q, judged)| query_ndcg(run.ranking(q), judged, k)))
}

pub fn recall_at_k(run: &Run, qrels: &Qrels, k: usize) -> f64 {
    mean(
        qrels
            .iter()
            .filter_map(|(q, judged)| query_recall(run.ranking(q), judged, k)),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub ks: Vec<usize>,
    /// `"NDCG@k"` / `"Recall@k"` averaged over queries.
    pub metrics: BTreeMap<String, f64>,
    pub per_query: BTreeMap<String, BTreeMap<String, f64>>,
    pub n_queries: usize,
    /// Run queries without qrels; left out of every average.
    pub excluded_queries: Vec<String>,
}

impl EvalResult {
    pub fn ndcg(&self, k: usize) -> Option<f64> {
        self.metrics.get(&format!("NDCG@{k}")).copied()
    }

    pub fn recall(&self, k: usize) -> Option<f64> {
        self.metrics.get(&format!("Recall@{k}")).copied()
    }
}

pub fn evaluate(run: &Run, qrels: &Qrels, ks: &[usize]) -> Result<EvalResult> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(UdlError::Argument(
            "cutoffs must be a non-empty list of positive integers".into(),
        ));
    }
    let ks: Vec<usize> = ks.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let queries: Vec<(&str, &BTreeMap<String, u32>)> = qrels.iter().collect();
    let per_query: Vec<(String, BTreeMap<String, f64>)> = queries
        .par_iter()
        .map(|&(q, judged)| {
            let ranking = run.ranking(q);
            let mut m = BTreeMap::new();
            for &k in &ks {
                m.insert(format!("NDCG@{k}"), query_ndcg(ranking, judged, k));
                if let Some(r) = query_recall(ranking, judged, k) {
                    m.insert(format!("Recall@{k}"), r);
                }
            }
            (q.to_string(), m)
        })
        .collect();
    let mut metrics = BTreeMap::new();
    for &k in &ks {
        for name in [format!("NDCG@{k}"), format!("Recall@{k}")] {
            let v = mean(per_query.iter().filter_map(|(_, m)| m.get(&name).copied()));
            metrics.insert(name, v);
        }
    }
    let excluded_queries: Vec<String> = run
        .query_ids()
        .filter(|q| qrels.judgments(q).is_none())
        .map(str::to_string)
        .collect();
    if !excluded_queries.is_empty() {
        log::warn!("{} run queries have no qrels and are excluded", excluded_queries.len());
    }
    Ok(EvalResult {
        ks,
        metrics,
        n_queries: per_query.len(),
        per_query: per_query.into_iter().collect(),
        excluded_queries,
    })
}

pub fn evaluate_run(run_path: &Path, qrels_path: &Path, ks: &[usize]) -> Result<EvalResult> {
    let run = parse_run(run_path)?;
    let qrels = load_qrels(qrels_path)?;
    evaluate(&run, &qrels, ks)
}
