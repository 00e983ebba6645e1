//! Quality check of synthetic queries against real training queries.
//!
//! A synthetic query generated from linked documents `a`, `b` is compared
//! with a training query judged relevant to both. It maps a document when
//! its cosine to that document strictly exceeds the training query's.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::corpus::{Qrels, Query};
use crate::error::{Result, UdlError};
use crate::similarity::VectorSet;
use crate::synthesis::TrainingPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    BothMapped,
    MapsAOnly,
    MapsBOnly,
    Neither,
    SingleMapped,
    SingleNotMapped,
}

impl Verdict {
    pub fn is_linked(self) -> bool {
        !matches!(self, Verdict::SingleMapped | Verdict::SingleNotMapped)
    }
}

/// Verdict for a two-document unit from `(score a, score b)` pairs.
pub fn classify_pair(train: (f64, f64), synthetic: (f64, f64)) -> Verdict {
    let maps_a = synthetic.0 > train.0;
    let maps_b = synthetic.1 > train.1;
    match (maps_a, maps_b) {
        (true, true) => Verdict::BothMapped,
        (true, false) => Verdict::MapsAOnly,
        (false, true) => Verdict::MapsBOnly,
        (false, false) => Verdict::Neither,
    }
}

pub fn classify_single(train: f64, synthetic: f64) -> Verdict {
    if synthetic > train {
        Verdict::SingleMapped
    } else {
        Verdict::SingleNotMapped
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityVerdict {
    pub query_id: String,
    pub doc_ids: Vec<String>,
    /// Training query the synthetic query was compared against.
    pub train_query_id: String,
    pub verdict: Verdict,
    /// Training query's cosine to each unit document.
    pub train_scores: Vec<f64>,
    /// Synthetic query's cosine to each unit document.
    pub synthetic_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    pub verdicts: Vec<QualityVerdict>,
    /// Synthetic queries whose documents no training query covers.
    pub uncovered: Vec<String>,
    pub n_linked: usize,
    pub n_single: usize,
    pub fraction_both: f64,
    pub fraction_single_mapped: f64,
}

impl QualityReport {
    pub fn count(&self, v: Verdict) -> usize {
        self.verdicts.iter().filter(|x| x.verdict == v).count()
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Classifies every synthetic query. When several training queries are
/// relevant to all of a unit's documents, the one whose weakest document
/// score is highest is the comparator (first in `train_queries` on ties).
pub fn quality_check(
    train_queries: &[Query],
    qrels: &Qrels,
    synthetic: &[TrainingPair],
    query_vectors: &VectorSet,
    doc_vectors: &VectorSet,
) -> Result<QualityReport> {
    let q_index = query_vectors.index();
    let d_index = doc_vectors.index();

    // doc -> training queries (by position) judged relevant to it
    let mut relevant: HashMap<&str, BTreeSet<usize>> = HashMap::new();
    for (pos, q) in train_queries.iter().enumerate() {
        if let Some(judged) = qrels.judgments(&q.id) {
            for (doc, &g) in judged {
                if g > 0 {
                    relevant.entry(doc.as_str()).or_default().insert(pos);
                }
            }
        }
    }

    let mut missing = BTreeSet::new();
    let mut need = |idx: &HashMap<&str, usize>, id: &str| -> Option<usize> {
        let found = idx.get(id).copied();
        if found.is_none() {
            missing.insert(id.to_string());
        }
        found
    };

    let mut verdicts = Vec::new();
    let mut uncovered = Vec::new();
    for pair in synthetic {
        let docs = &pair.positive_doc_ids;
        if docs.is_empty() || docs.len() > 2 {
            return Err(UdlError::Validation(format!(
                "synthetic query {:?} has {} positives, expected 1 or 2",
                pair.query_id,
                docs.len()
            )));
        }
        let candidates: Vec<usize> = {
            let mut sets = docs.iter().map(|d| relevant.get(d.as_str()));
            let first = sets.next().flatten().cloned().unwrap_or_default();
            sets.fold(first, |acc, s| match s {
                Some(s) => acc.intersection(s).copied().collect(),
                None => BTreeSet::new(),
            })
            .into_iter()
            .collect()
        };
        if candidates.is_empty() {
            uncovered.push(pair.query_id.clone());
            continue;
        }

        let doc_pos: Vec<Option<usize>> = docs.iter().map(|d| need(&d_index, d)).collect();
        let synth_pos = need(&q_index, &pair.query_id);
        let cand_pos: Vec<Option<usize>> = candidates
            .iter()
            .map(|&c| need(&q_index, &train_queries[c].id))
            .collect();
        let (Some(doc_pos), Some(synth_pos)) = (doc_pos.into_iter().collect::<Option<Vec<_>>>(), synth_pos) else {
            continue;
        };
        let Some(cand_pos) = cand_pos.into_iter().collect::<Option<Vec<_>>>() else {
            continue;
        };

        let scores_of = |qpos: usize| -> Result<Vec<f64>> {
            doc_pos
                .iter()
                .map(|&d| query_vectors.cosine_between(qpos, doc_vectors, d))
                .collect()
        };
        let mut best: Option<(usize, Vec<f64>)> = None;
        for (&c, &qpos) in candidates.iter().zip(&cand_pos) {
            let s = scores_of(qpos)?;
            let weakest = s.iter().copied().fold(f64::INFINITY, f64::min);
            if best
                .as_ref()
                .is_none_or(|(_, b)| weakest > b.iter().copied().fold(f64::INFINITY, f64::min))
            {
                best = Some((c, s));
            }
        }
        let (comparator, train_scores) = best.expect("candidates non-empty");
        let synthetic_scores = scores_of(synth_pos)?;
        let verdict = if docs.len() == 2 {
            classify_pair(
                (train_scores[0], train_scores[1]),
                (synthetic_scores[0], synthetic_scores[1]),
            )
        } else {
            classify_single(train_scores[0], synthetic_scores[0])
        };
        verdicts.push(QualityVerdict {
            query_id: pair.query_id.clone(),
            doc_ids: docs.clone(),
            train_query_id: train_queries[comparator].id.clone(),
            verdict,
            train_scores,
            synthetic_scores,
        });
    }
    if !missing.is_empty() {
        return Err(UdlError::Coverage(missing.into_iter().collect()));
    }

    let n_linked = verdicts.iter().filter(|v| v.verdict.is_linked()).count();
    let n_single = verdicts.len() - n_linked;
    let both = verdicts.iter().filter(|v| v.verdict == Verdict::BothMapped).count();
    let single_mapped = verdicts.iter().filter(|v| v.verdict == Verdict::SingleMapped).count();
    Ok(QualityReport {
        fraction_both: ratio(both, n_linked),
        fraction_single_mapped: ratio(single_mapped, n_single),
        verdicts,
        uncovered,
        n_linked,
        n_single,
    })
}
