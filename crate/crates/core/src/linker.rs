//! End-to-end document linking: similarity-model choice, threshold choice,
//! nearest-neighbor linking and merging into generation units.

use std::borrow::Cow;
use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Result, UdlError};
use crate::keyword::{
    decide_threshold, normalize_corpus, KeywordExtractor, ThresholdDecision, Translator, DEFAULT_DELTA,
};
use crate::lexical::{
    decide_similarity_model, fit_tfidf, term_entropy, EntropyReport, ModelDecision, SimilarityModel, DEFAULT_GAMMA,
    DEFAULT_MAX_FEATURES,
};
use crate::similarity::{lexical_vectors, nearest_neighbors, semantic_vectors, EmbeddingProvider, NeighborList};

/// Corpora larger than this are capped even without an explicit `doc_cap`.
pub const LARGE_CORPUS: usize = 1_000_000;
pub const LARGE_CORPUS_CAP: usize = 30_000;
pub const DEFAULT_QUERIES_PER_UNIT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeStrategy {
    #[default]
    Concatenation,
    RandomPermutation,
}

impl std::str::FromStr for MergeStrategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "concatenation" | "concat" => Ok(MergeStrategy::Concatenation),
            "random_permutation" | "permutation" => Ok(MergeStrategy::RandomPermutation),
            other => Err(format!("unknown merge strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub gamma: f64,
    pub delta: f64,
    pub max_features: usize,
    pub doc_cap: Option<usize>,
    pub merge_strategy: MergeStrategy,
    pub seed: u64,
    pub n_queries_per_unit: usize,
    /// Leave documents whose translation fails out of keyword counting.
    pub skip_translation_failures: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            gamma: DEFAULT_GAMMA,
            delta: DEFAULT_DELTA,
            max_features: DEFAULT_MAX_FEATURES,
            doc_cap: None,
            merge_strategy: MergeStrategy::Concatenation,
            seed: 0,
            n_queries_per_unit: DEFAULT_QUERIES_PER_UNIT,
            skip_translation_failures: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(UdlError::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(UdlError::Config(format!(
                "delta must be in (0, 0.5), got {}",
                self.delta
            )));
        }
        if self.max_features == 0 {
            return Err(UdlError::Config("max_features must be positive".into()));
        }
        if self.doc_cap == Some(0) {
            return Err(UdlError::Config("doc_cap must be positive".into()));
        }
        if self.n_queries_per_unit == 0 {
            return Err(UdlError::Config("n_queries must be at least 1".into()));
        }
        if self.gamma >= 1.0 {
            log::warn!("gamma {} is outside the usual (0, 1) range", self.gamma);
        }
        Ok(())
    }

    /// Document cap to apply to a corpus of `len` documents.
    pub fn effective_cap(&self, len: usize) -> Option<usize> {
        match self.doc_cap {
            Some(cap) => Some(cap),
            None if len > LARGE_CORPUS => Some(LARGE_CORPUS_CAP),
            None => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPair {
    /// Proposing document.
    pub a: usize,
    /// Its nearest neighbor.
    pub b: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSet {
    pub ids: Vec<String>,
    pub pairs: Vec<LinkPair>,
    pub unlinked: Vec<usize>,
}

impl LinkSet {
    pub fn pair_ids(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.pairs
            .iter()
            .map(|p| (self.ids[p.a].as_str(), self.ids[p.b].as_str(), p.score))
    }

    pub fn unlinked_ids(&self) -> impl Iterator<Item = &str> {
        self.unlinked.iter().map(|&i| self.ids[i].as_str())
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Record<'a> {
            kind: &'a str,
            doc_ids: Vec<&'a str>,
            #[serde(skip_serializing_if = "Option::is_none")]
            score: Option<f64>,
        }
        let mut body = String::new();
        for (a, b, score) in self.pair_ids() {
            let rec = Record {
                kind: "pair",
                doc_ids: vec![a, b],
                score: Some(score),
            };
            body.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            body.push('\n');
        }
        for id in self.unlinked_ids() {
            let rec = Record {
                kind: "unlinked",
                doc_ids: vec![id],
                score: None,
            };
            body.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            body.push('\n');
        }
        write_file(path, &body)
    }
}

/// Links each document to its nearest neighbor when their cosine strictly
/// exceeds `threshold`. A mutual pair is kept once, as proposed by its
/// lower-ordinal member.
pub fn link_documents(nn: &NeighborList, threshold: f64) -> LinkSet {
    let n = nn.len();
    let proposes = |d: usize| nn.neighbors[d].1 > threshold;
    let mut pairs = Vec::new();
    let mut linked = vec![false; n];
    for d in 0..n {
        let (b, score) = nn.neighbors[d];
        if !proposes(d) {
            continue;
        }
        if b < d && nn.neighbors[b].0 == d && proposes(b) {
            continue;
        }
        pairs.push(LinkPair { a: d, b, score });
        linked[d] = true;
        linked[b] = true;
    }
    let unlinked = (0..n).filter(|&d| !linked[d]).collect();
    LinkSet {
        ids: nn.ids.clone(),
        pairs,
        unlinked,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedDocument {
    pub unit_id: String,
    #[serde(rename = "doc_ids")]
    pub source_ids: Vec<String>,
    pub text: String,
}

/// Title (as `"<title>. "`) followed by text.
pub fn titled_text(doc: &Document) -> String {
    if doc.title.is_empty() {
        doc.text.clone()
    } else if doc.text.is_empty() {
        format!("{}.", doc.title)
    } else {
        format!("{}. {}", doc.title, doc.text)
    }
}

/// Splits after each `.`, `!` or `?`; trailing text without a terminator is
/// its own sentence.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if matches!(c, '.' | '!' | '?') {
            let end = i + c.len_utf8();
            let s = text[start..end].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = end;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

pub fn merge_pair(a: &Document, b: &Document, strategy: MergeStrategy, seed: u64) -> MergedDocument {
    let text = match strategy {
        MergeStrategy::Concatenation => join_nonempty(&[titled_text(a), titled_text(b)]),
        MergeStrategy::RandomPermutation => {
            let sa = split_sentences(&a.text);
            let sb = split_sentences(&b.text);
            let mut pool: Vec<&str> = sa.iter().chain(&sb).copied().collect();
            pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let (first, second) = pool.split_at(sa.len());
            join_nonempty(&[block(&a.title, first), block(&b.title, second)])
        }
    };
    MergedDocument {
        unit_id: format!("{}+{}", a.id, b.id),
        source_ids: vec![a.id.clone(), b.id.clone()],
        text,
    }
}

fn block(title: &str, sentences: &[&str]) -> String {
    let mut parts = Vec::with_capacity(sentences.len() + 1);
    if !title.is_empty() {
        parts.push(format!("{title}."));
    }
    parts.extend(sentences.iter().map(|s| s.to_string()));
    parts.join(" ")
}

fn join_nonempty(parts: &[String]) -> String {
    parts
        .iter()
        .filter(|p| !p.is_empty())
        .cloned()
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn single_unit(doc: &Document) -> MergedDocument {
    MergedDocument {
        unit_id: doc.id.clone(),
        source_ids: vec![doc.id.clone()],
        text: titled_text(doc),
    }
}

/// Per-pair seed so that each merge draws from its own stream.
fn pair_seed(seed: u64, pair: usize) -> u64 {
    let mut z = seed ^ (pair as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Merged units for every pair (in pair order) followed by every unlinked
/// document (in corpus order).
pub fn build_units(
    corpus: &Corpus,
    links: &LinkSet,
    strategy: MergeStrategy,
    seed: u64,
) -> Result<Vec<MergedDocument>> {
    let docs = corpus.documents();
    let mut units: Vec<MergedDocument> = links
        .pairs
        .iter()
        .enumerate()
        .map(|(i, p)| merge_pair(&docs[p.a], &docs[p.b], strategy, pair_seed(seed, i)))
        .collect();
    units.extend(links.unlinked.iter().map(|&d| single_unit(&docs[d])));
    let mut seen = HashSet::new();
    for u in &units {
        if !seen.insert(u.unit_id.as_str()) {
            return Err(UdlError::Validation(format!("unit id {:?} is not unique", u.unit_id)));
        }
    }
    Ok(units)
}

pub fn write_units_jsonl(units: &[MergedDocument], path: &Path) -> Result<()> {
    let mut body = String::new();
    for u in units {
        body.push_str(&serde_json::to_string(u).expect("unit serializes"));
        body.push('\n');
    }
    write_file(path, &body)
}

pub(crate) fn write_file(path: &Path, body: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| UdlError::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(body.as_bytes()).map_err(|e| UdlError::io(path, e))?;
    out.flush().map_err(|e| UdlError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionReport {
    pub d_m: f64,
    pub gamma: f64,
    pub model: SimilarityModel,
    pub k_general: u64,
    pub k_specialized: u64,
    pub v_general: u64,
    pub v_specialized: u64,
    pub delta: f64,
    pub doc_type: crate::keyword::DocumentType,
    pub threshold: f64,
    pub n_pairs: usize,
    pub n_unlinked: usize,
}

impl DecisionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// General and specialized keyword extractors.
pub struct Extractors {
    pub general: KeywordExtractor,
    pub specialized: KeywordExtractor,
}

#[derive(Debug, Clone)]
pub struct UdlOutcome {
    pub entropy: EntropyReport,
    pub model: ModelDecision,
    pub threshold: ThresholdDecision,
    pub links: LinkSet,
    pub units: Vec<MergedDocument>,
    /// Corpus after the document cap.
    pub n_docs: usize,
}

impl UdlOutcome {
    pub fn report(&self) -> DecisionReport {
        DecisionReport {
            d_m: self.model.d_m,
            gamma: self.model.gamma,
            model: self.model.model,
            k_general: self.threshold.k_general,
            k_specialized: self.threshold.k_specialized,
            v_general: self.threshold.v_general,
            v_specialized: self.threshold.v_specialized,
            delta: self.threshold.delta,
            doc_type: self.threshold.doc_type,
            threshold: self.threshold.threshold,
            n_pairs: self.links.pairs.len(),
            n_unlinked: self.links.unlinked.len(),
        }
    }
}

/// Step A only: TF-IDF, term entropy and the similarity-model decision.
pub fn analyze(corpus: &Corpus, config: &PipelineConfig) -> Result<(EntropyReport, ModelDecision)> {
    config.validate()?;
    let corpus = capped(corpus, config);
    let model = fit_tfidf(&corpus, config.max_features)?;
    let entropy = term_entropy(&model);
    let decision = decide_similarity_model(&entropy, config.gamma);
    Ok((entropy, decision))
}

fn capped<'a>(corpus: &'a Corpus, config: &PipelineConfig) -> Cow<'a, Corpus> {
    match config.effective_cap(corpus.len()) {
        Some(cap) if cap < corpus.len() => Cow::Owned(corpus.truncated(cap)),
        _ => Cow::Borrowed(corpus),
    }
}

pub fn run_udl(
    corpus: &Corpus,
    config: &PipelineConfig,
    extractors: &Extractors,
    provider: Option<&dyn EmbeddingProvider>,
    translator: Option<&dyn Translator>,
) -> Result<UdlOutcome> {
    config.validate()?;
    let corpus = capped(corpus, config);
    if corpus.is_empty() {
        return Err(UdlError::Argument("corpus is empty".into()));
    }

    // Step A
    let tfidf = fit_tfidf(&corpus, config.max_features)?;
    let entropy = term_entropy(&tfidf);
    let model = decide_similarity_model(&entropy, config.gamma);
    log::info!(
        "D_M = {:.4} (gamma {}), using {} similarity",
        model.d_m,
        model.gamma,
        model.model
    );
    if model.model == SimilarityModel::Semantic && provider.is_none() {
        return Err(UdlError::Config(format!(
            "entropy ratio {:.4} > gamma {} selects semantic similarity, but no embedding provider is configured",
            model.d_m, model.gamma
        )));
    }

    // Step B
    let normalized = normalize_corpus(&corpus, translator, config.skip_translation_failures)?;
    let k_general = extractors.general.count_keywords(&normalized)?;
    let k_specialized = extractors.specialized.count_keywords(&normalized)?;
    let threshold = decide_threshold(
        k_general,
        k_specialized,
        extractors.general.vocabulary_size,
        extractors.specialized.vocabulary_size,
        config.delta,
    );
    log::info!(
        "keywords general={k_general} specialized={k_specialized}: {} documents, threshold {}",
        threshold.doc_type,
        threshold.threshold
    );

    // Step C
    let links = if corpus.len() < 2 {
        LinkSet {
            ids: corpus.ids(),
            pairs: Vec::new(),
            unlinked: (0..corpus.len()).collect(),
        }
    } else {
        let vectors = match (model.model, provider) {
            (SimilarityModel::Semantic, Some(p)) => semantic_vectors(p, &corpus)?,
            _ => lexical_vectors(&tfidf, &corpus)?,
        };
        let nn = nearest_neighbors(&vectors)?;
        link_documents(&nn, threshold.threshold)
    };
    let units = build_units(&corpus, &links, config.merge_strategy, config.seed)?;
    Ok(UdlOutcome {
        entropy,
        model,
        threshold,
        links,
        units,
        n_docs: corpus.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyword::{DocumentType, Gazetteer};

    fn nn(neighbors: Vec<(usize, f64)>) -> NeighborList {
        NeighborList {
            ids: (0..neighbors.len()).map(|i| format!("d{}", i + 1)).collect(),
            neighbors,
        }
    }

    #[test]
    fn nothing_above_threshold() {
        let links = link_documents(&nn(vec![(1, 0.5), (0, 0.5), (1, 0.6)]), 0.6);
        assert!(links.pairs.is_empty());
        assert_eq!(links.unlinked, vec![0, 1, 2]);
    }

    #[test]
    fn mutual_pair_kept_once() {
        let links = link_documents(&nn(vec![(1, 0.8), (0, 0.8)]), 0.6);
        assert_eq!(links.pair_ids().collect::<Vec<_>>(), vec![("d1", "d2", 0.8)]);
        assert!(links.unlinked.is_empty());
    }

    #[test]
    fn chains_share_a_document() {
        let links = link_documents(&nn(vec![(1, 0.7), (0, 0.7), (1, 0.65)]), 0.6);
        assert_eq!(
            links.pair_ids().map(|(a, b, _)| (a, b)).collect::<Vec<_>>(),
            vec![("d1", "d2"), ("d3", "d2")]
        );
    }

    #[test]
    fn concatenation() {
        let a = Document::new("a", "A", "x");
        let b = Document::new("b", "B", "y");
        assert_eq!(merge_pair(&a, &b, MergeStrategy::Concatenation, 0).text, "A. x B. y");
        let a = Document::new("a", "", "x");
        let b = Document::new("b", "", "y");
        let m = merge_pair(&a, &b, MergeStrategy::Concatenation, 0);
        assert_eq!(m.text, "x y");
        assert_eq!(m.source_ids, vec!["a", "b"]);
    }

    #[test]
    fn permutation_is_seeded() {
        let a = Document::new("a", "Alpha", "One. Two! Three?");
        let b = Document::new("b", "Beta", "Four. Five.");
        let m1 = merge_pair(&a, &b, MergeStrategy::RandomPermutation, 7);
        let m2 = merge_pair(&a, &b, MergeStrategy::RandomPermutation, 7);
        assert_eq!(m1, m2);
        assert!(m1.text.starts_with("Alpha. "));
        assert!(m1.text.contains(" Beta. "));
        let mut words: Vec<&str> = m1.text.split(' ').collect();
        words.sort();
        assert_eq!(words, ["Alpha.", "Beta.", "Five.", "Four.", "One.", "Three?", "Two!"]);
    }

    #[test]
    fn sentence_split() {
        assert_eq!(split_sentences("a b. c! d? tail"), vec!["a b.", "c!", "d?", "tail"]);
        assert!(split_sentences("  ").is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let bad = PipelineConfig {
            delta: 0.5,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(UdlError::Config(_))));
        let bad = PipelineConfig {
            gamma: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(PipelineConfig::default().effective_cap(2_000_000), Some(30_000));
        assert_eq!(PipelineConfig::default().effective_cap(50_000), None);
    }

    fn extractors(general: &[&str], specialized: &[&str]) -> Extractors {
        Extractors {
            general: KeywordExtractor::gazetteer(DocumentType::General, Gazetteer::new(general)),
            specialized: KeywordExtractor::gazetteer(DocumentType::Specialized, Gazetteer::new(specialized)),
        }
    }

    #[test]
    fn engineered_corpus_decisions() {
        // "shared" spreads over three documents (entropy > 1 bit); the two
        // unique terms stay at 0 bits, so D_M = 1 / 2.
        let corpus = Corpus::new(vec![
            Document::new("d1", "", "shared alpha"),
            Document::new("d2", "", "shared shared"),
            Document::new("d3", "", "shared beta"),
        ])
        .unwrap();
        let out = run_udl(
            &corpus,
            &PipelineConfig::default(),
            &extractors(&["alpha", "beta"], &[]),
            None,
            None,
        )
        .unwrap();
        assert_eq!(out.model.d_m, 0.5);
        assert_eq!(out.model.model, SimilarityModel::Lexical);
        assert_eq!(out.threshold.doc_type, DocumentType::General);
        assert_eq!(out.threshold.threshold, 0.4);
        let report = out.report();
        assert_eq!(report.n_pairs + report.n_unlinked, out.units.len());
    }

    #[test]
    fn two_similar_documents_link() {
        let corpus = Corpus::new(vec![
            Document::new("d1", "", "gene expression in tumour cells"),
            Document::new("d2", "", "gene expression in tumour tissue"),
        ])
        .unwrap();
        let out = run_udl(
            &corpus,
            &PipelineConfig::default(),
            &extractors(&[], &["gene"]),
            None,
            None,
        )
        .unwrap();
        assert_eq!(out.threshold.threshold, 0.6);
        assert!(out.links.pairs[0].score > 0.6);
        assert_eq!(out.links.pairs.len(), 1);
        assert!(out.links.unlinked.is_empty());
        assert_eq!(out.units.len(), 1);
        assert_eq!(out.units[0].unit_id, "d1+d2");
    }

    #[test]
    fn semantic_without_provider_fails_fast() {
        let corpus = Corpus::new(vec![
            Document::new("d1", "", "common words everywhere"),
            Document::new("d2", "", "common words everywhere"),
            Document::new("d3", "", "common words everywhere"),
        ])
        .unwrap();
        let err = run_udl(&corpus, &PipelineConfig::default(), &extractors(&[], &[]), None, None).unwrap_err();
        assert!(matches!(err, UdlError::Config(_)), "{err}");
    }
}
