//! Tokenization, TF-IDF fitting, per-term Shannon entropy, and the choice
//! between lexical and semantic similarity.
//!
//! Term weights are `tf(t, d) * idf(t)` with the smoothed
//! `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, rows L2-normalized. A term's
//! entropy is taken over its normalized weights in the documents that
//! contain it, in bits.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::Corpus;
use crate::error::{Result, UdlError};
use crate::vector::SparseVector;

pub const DEFAULT_MAX_FEATURES: usize = 36_000;
pub const DEFAULT_GAMMA: f64 = 0.7;

/// Terms with entropy strictly above this many bits count as high-entropy.
pub const ENTROPY_SPLIT_BITS: f64 = 1.0;

/// Lowercases and splits on every non-alphanumeric character, dropping
/// single-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().nth(1).is_some())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone)]
pub struct TfidfModel {
    terms: Vec<String>,
    vocabulary: HashMap<String, u32>,
    idf: Vec<f64>,
    df: Vec<usize>,
    doc_vectors: Vec<SparseVector>,
}

impl TfidfModel {
    pub fn n_docs(&self) -> usize {
        self.doc_vectors.len()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    /// Terms in column order (lexicographic).
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn column(&self, term: &str) -> Option<u32> {
        self.vocabulary.get(term).copied()
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn df(&self) -> &[usize] {
        &self.df
    }

    pub fn doc_vectors(&self) -> &[SparseVector] {
        &self.doc_vectors
    }

    /// Projects unseen text onto the fitted vocabulary and idf weights.
    pub fn transform(&self, text: &str) -> SparseVector {
        let mut counts: HashMap<u32, u32> = HashMap::new();
        for tok in tokenize(text) {
            if let Some(&col) = self.vocabulary.get(&tok) {
                *counts.entry(col).or_default() += 1;
            }
        }
        self.weigh(counts)
    }

    fn weigh(&self, counts: HashMap<u32, u32>) -> SparseVector {
        let entries = counts
            .into_iter()
            .map(|(col, tf)| (col, tf as f64 * self.idf[col as usize]))
            .collect();
        SparseVector::from_entries(entries).normalized()
    }
}

/// Fits TF-IDF over each document's title and text.
pub fn fit_tfidf(corpus: &Corpus, max_features: usize) -> Result<TfidfModel> {
    let texts: Vec<String> = corpus.iter().map(|d| d.full_text()).collect();
    fit_tfidf_texts(&texts, max_features)
}

pub fn fit_tfidf_texts<S: AsRef<str> + Sync>(texts: &[S], max_features: usize) -> Result<TfidfModel> {
    if texts.is_empty() {
        return Err(UdlError::Argument("cannot fit TF-IDF on an empty corpus".into()));
    }
    if max_features == 0 {
        return Err(UdlError::Argument("max_features must be positive".into()));
    }

    let per_doc: Vec<HashMap<String, u32>> = texts
        .par_iter()
        .map(|t| {
            let mut counts = HashMap::new();
            for tok in tokenize(t.as_ref()) {
                *counts.entry(tok).or_insert(0u32) += 1;
            }
            counts
        })
        .collect();

    let mut totals: HashMap<&str, (u64, usize)> = HashMap::new();
    for counts in &per_doc {
        for (term, &c) in counts {
            let e = totals.entry(term.as_str()).or_default();
            e.0 += c as u64;
            e.1 += 1;
        }
    }

    let mut kept: Vec<(&str, u64, usize)> = totals.into_iter().map(|(t, (c, df))| (t, c, df)).collect();
    if kept.len() > max_features {
        kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        kept.truncate(max_features);
    }
    kept.sort_unstable_by(|a, b| a.0.cmp(b.0));

    let n = texts.len() as f64;
    let terms: Vec<String> = kept.iter().map(|(t, _, _)| t.to_string()).collect();
    let df: Vec<usize> = kept.iter().map(|&(_, _, df)| df).collect();
    let idf: Vec<f64> = df.iter().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
    let vocabulary: HashMap<String, u32> = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();

    let mut model = TfidfModel {
        terms,
        vocabulary,
        idf,
        df,
        doc_vectors: Vec::new(),
    };
    let doc_vectors = per_doc
        .into_par_iter()
        .map(|counts| {
            let cols = counts
                .into_iter()
                .filter_map(|(t, c)| model.vocabulary.get(&t).map(|&col| (col, c)))
                .collect();
            model.weigh(cols)
        })
        .collect();
    model.doc_vectors = doc_vectors;
    Ok(model)
}

/// Shannon entropy in bits of the distribution obtained by normalizing
/// `weights`. Non-positive weights are ignored.
pub fn weight_entropy(weights: &[f64]) -> f64 {
    let positive = || weights.iter().copied().filter(|w| *w > 0.0);
    let count = positive().count();
    if count <= 1 {
        return 0.0;
    }
    let total: f64 = positive().sum();
    let h: f64 = positive()
        .map(|w| {
            let p = w / total;
            -p * p.log2()
        })
        .sum();
    // Rounding can push a uniform distribution a few ulps past the bound.
    h.clamp(0.0, (count as f64).log2())
}

/// `(term, entropy)` pairs.
pub type TermEntropies = Vec<(String, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    pub per_term_entropy: TermEntropies,
    pub n_above: usize,
    pub n_at_or_below: usize,
    pub d_m: f64,
}

impl EntropyReport {
    /// Builds a report from each term's per-document weights.
    pub fn from_term_weights<S, I>(columns: I) -> Self
    where
        S: Into<String>,
        I: IntoIterator<Item = (S, Vec<f64>)>,
    {
        let per_term_entropy: Vec<(String, f64)> = columns
            .into_iter()
            .map(|(t, w)| (t.into(), weight_entropy(&w)))
            .collect();
        Self::from_entropies(per_term_entropy)
    }

    pub fn from_entropies(per_term_entropy: Vec<(String, f64)>) -> Self {
        let n_above = per_term_entropy.iter().filter(|(_, e)| *e > ENTROPY_SPLIT_BITS).count();
        let n_at_or_below = per_term_entropy.len() - n_above;
        let d_m = if n_at_or_below == 0 {
            f64::INFINITY
        } else {
            n_above as f64 / n_at_or_below as f64
        };
        EntropyReport {
            per_term_entropy,
            n_above,
            n_at_or_below,
            d_m,
        }
    }

    pub fn entropy_of(&self, term: &str) -> Option<f64> {
        self.per_term_entropy.iter().find(|(t, _)| t == term).map(|(_, e)| *e)
    }

    /// The `top` highest- and lowest-entropy terms, ties by term.
    pub fn extremes(&self, top: usize) -> (TermEntropies, TermEntropies) {
        let mut sorted = self.per_term_entropy.clone();
        sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let highest = sorted.iter().take(top).cloned().collect();
        sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        let lowest = sorted.iter().take(top).cloned().collect();
        (highest, lowest)
    }
}

pub fn term_entropy(model: &TfidfModel) -> EntropyReport {
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); model.vocabulary_size()];
    for v in model.doc_vectors() {
        for (col, w) in v.iter() {
            columns[col as usize].push(w);
        }
    }
    let entropies: Vec<f64> = columns.par_iter().map(|w| weight_entropy(w)).collect();
    EntropyReport::from_entropies(model.terms().iter().cloned().zip(entropies).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityModel {
    Lexical,
    Semantic,
}

impl std::fmt::Display for SimilarityModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SimilarityModel::Lexical => "lexical",
            SimilarityModel::Semantic => "semantic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelDecision {
    pub model: SimilarityModel,
    pub d_m: f64,
    pub gamma: f64,
}

/// Semantic when the high/low entropy ratio strictly exceeds `gamma`.
pub fn decide_similarity_model(report: &EntropyReport, gamma: f64) -> ModelDecision {
    let model = if report.d_m > gamma {
        SimilarityModel::Semantic
    } else {
        SimilarityModel::Lexical
    };
    ModelDecision {
        model,
        d_m: report.d_m,
        gamma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Document::new(format!("d{i}"), "", *t))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn tokenize_rules() {
        assert_eq!(tokenize("The COVID-19 vaccine."), ["the", "covid", "19", "vaccine"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a b ab"), ["ab"]);
        assert_eq!(tokenize("Über straße"), ["über", "straße"]);
    }

    #[test]
    fn single_document_weights() {
        let m = fit_tfidf(&corpus(&["xx xx yy"]), 10).unwrap();
        assert_eq!(m.terms(), ["xx", "yy"]);
        assert_eq!(m.idf(), &[1.0, 1.0]);
        let v = &m.doc_vectors()[0];
        let s5 = 5f64.sqrt();
        assert!((v.values()[0] - 2.0 / s5).abs() < 1e-12);
        assert!((v.values()[1] - 1.0 / s5).abs() < 1e-12);
    }

    #[test]
    fn idf_is_one_for_ubiquitous_terms() {
        let m = fit_tfidf(&corpus(&["aa bb", "aa cc", "aa dd"]), 10).unwrap();
        let col = m.column("aa").unwrap() as usize;
        assert_eq!(m.idf()[col], 1.0);
        let col = m.column("bb").unwrap() as usize;
        assert!((m.idf()[col] - ((4.0f64 / 2.0).ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn max_features_keeps_most_frequent() {
        let m = fit_tfidf(&corpus(&["xx xx xx yy", "xx xx yy"]), 1).unwrap();
        assert_eq!(m.terms(), ["xx"]);
        // Equal counts fall back to lexicographic order.
        let m = fit_tfidf(&corpus(&["bb aa cc", "cc"]), 2).unwrap();
        assert_eq!(m.terms(), ["aa", "cc"]);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let empty: [&str; 0] = [];
        assert!(matches!(fit_tfidf_texts(&empty, 5), Err(UdlError::Argument(_))));
    }

    #[test]
    fn doc_without_kept_terms_is_zero() {
        let m = fit_tfidf(&corpus(&["xx yy", "a b c"]), 10).unwrap();
        assert!(m.doc_vectors()[1].is_zero());
    }

    #[test]
    fn transform_uses_fitted_vocab() {
        let m = fit_tfidf(&corpus(&["xx yy", "yy zz"]), 10).unwrap();
        let q = m.transform("xx unknown");
        assert_eq!(q.nnz(), 1);
        assert!((q.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(weight_entropy(&[0.4]), 0.0);
        assert!((weight_entropy(&[0.2; 4]) - 2.0).abs() < 1e-12);
        assert!((weight_entropy(&[0.3, 0.3]) - 1.0).abs() < 1e-12);
        assert_eq!(weight_entropy(&[]), 0.0);
    }

    #[test]
    fn entropy_report_counts() {
        let r = EntropyReport::from_term_weights(vec![
            ("a", vec![1.0]),
            ("b", vec![1.0, 1.0]),
            ("c", vec![1.0, 1.0, 1.0]),
        ]);
        // exactly 1 bit falls in the denominator
        assert_eq!((r.n_above, r.n_at_or_below), (1, 2));
        assert_eq!(r.d_m, 0.5);

        let r = EntropyReport::from_term_weights(vec![("c", vec![1.0, 1.0, 1.0])]);
        assert!(r.d_m.is_infinite());
        assert_eq!(decide_similarity_model(&r, 0.7).model, SimilarityModel::Semantic);
    }

    fn report(above: usize, below: usize) -> EntropyReport {
        let mut e = vec![(String::from("hi"), 2.0); above];
        e.extend(vec![(String::from("lo"), 0.0); below]);
        EntropyReport::from_entropies(e)
    }

    #[test]
    fn decision_is_strict() {
        assert_eq!(
            decide_similarity_model(&report(71, 100), 0.7).model,
            SimilarityModel::Semantic
        );
        assert_eq!(
            decide_similarity_model(&report(70, 100), 0.7).model,
            SimilarityModel::Lexical
        );
        assert_eq!(
            decide_similarity_model(&report(3, 0), 0.7).model,
            SimilarityModel::Semantic
        );
    }

    #[test]
    fn term_entropy_over_model() {
        // "aa" occurs once in each of four identical-length docs.
        let m = fit_tfidf(&corpus(&["aa bb", "aa cc", "aa dd", "aa ee"]), 100).unwrap();
        let r = term_entropy(&m);
        assert!((r.entropy_of("aa").unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(r.entropy_of("bb").unwrap(), 0.0);
        assert_eq!(r.n_above, 1);
        assert_eq!(r.n_at_or_below, 4);
    }

    #[test]
    fn extremes_are_sorted() {
        let r = EntropyReport::from_entropies(vec![("b".into(), 1.5), ("a".into(), 0.0), ("c".into(), 1.5)]);
        let (hi, lo) = r.extremes(2);
        assert_eq!(hi.iter().map(|t| t.0.as_str()).collect::<Vec<_>>(), ["b", "c"]);
        assert_eq!(lo[0].0, "a");
    }
}
