//! Document normalization, keyword counting and the link-threshold choice.
//!
//! Two extractors are compared: one trained on general text and one on
//! specialized (medical/scientific) text. Each count is weighed against the
//! other extractor's vocabulary size so that a larger vocabulary does not
//! win by coverage alone.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::adapter::AdapterClient;
use crate::corpus::{Corpus, Document};
use crate::error::{Result, UdlError};

pub const DEFAULT_DELTA: f64 = 0.4;
pub const GENERAL_VOCABULARY_SIZE: u64 = 50_000;
pub const SPECIALIZED_VOCABULARY_SIZE: u64 = 785_000;

/// Replaces every non-alphanumeric character with a space and collapses
/// whitespace runs.
pub fn remove_special_characters(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

pub trait Translator: Sync {
    /// Translates `text` written in `language` into English.
    fn translate(&self, text: &str, language: &str) -> std::result::Result<String, String>;
}

/// Translation step followed by special-character removal.
pub fn normalize_document(doc: &Document, translator: Option<&dyn Translator>) -> Result<String> {
    let text = doc.full_text();
    let text = match translator {
        Some(t) if !doc.is_english() => t
            .translate(&text, &doc.language)
            .map_err(|message| UdlError::Translation {
                id: doc.id.clone(),
                message,
            })?,
        _ => text,
    };
    Ok(remove_special_characters(&text))
}

/// Normalizes every document. With `skip_failures`, documents whose
/// translation fails are left out instead of aborting.
pub fn normalize_corpus(
    corpus: &Corpus,
    translator: Option<&dyn Translator>,
    skip_failures: bool,
) -> Result<Vec<String>> {
    let results: Vec<Result<String>> = corpus
        .documents()
        .par_iter()
        .map(|d| normalize_document(d, translator))
        .collect();
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(s) => out.push(s),
            Err(e @ UdlError::Translation { .. }) if skip_failures => {
                log::warn!("skipping document: {e}");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Phrase list matched over whitespace-separated tokens, leftmost-longest,
/// case-insensitive.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    token_ids: HashMap<String, u32>,
    nodes: Vec<TrieNode>,
    n_phrases: usize,
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: HashMap<u32, usize>,
    terminal: bool,
}

impl Gazetteer {
    pub fn new<I, S>(phrases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut g = Gazetteer {
            nodes: vec![TrieNode::default()],
            ..Default::default()
        };
        let mut seen = HashSet::new();
        for phrase in phrases {
            let normalized = remove_special_characters(phrase.as_ref()).to_lowercase();
            if normalized.is_empty() || !seen.insert(normalized.clone()) {
                continue;
            }
            g.insert(&normalized);
        }
        g.n_phrases = seen.len();
        g
    }

    /// Loads one phrase per line. Blank lines and `#` comments are skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path)
            .map_err(|e| UdlError::Config(format!("cannot read gazetteer {}: {e}", path.display())))?;
        Ok(Self::new(
            body.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        ))
    }

    fn insert(&mut self, phrase: &str) {
        let mut node = 0;
        for tok in phrase.split(' ') {
            let next_id = self.token_ids.len() as u32;
            let id = *self.token_ids.entry(tok.to_string()).or_insert(next_id);
            node = match self.nodes[node].children.get(&id) {
                Some(&child) => child,
                None => {
                    self.nodes.push(TrieNode::default());
                    let child = self.nodes.len() - 1;
                    self.nodes[node].children.insert(id, child);
                    child
                }
            };
        }
        self.nodes[node].terminal = true;
    }

    pub fn len(&self) -> usize {
        self.n_phrases
    }

    pub fn is_empty(&self) -> bool {
        self.n_phrases == 0
    }

    /// Counts non-overlapping phrase mentions in `text`, which should
    /// already have gone through [`remove_special_characters`].
    pub fn count(&self, text: &str) -> u64 {
        let lowered = text.to_lowercase();
        let ids: Vec<Option<u32>> = lowered
            .split_whitespace()
            .map(|t| self.token_ids.get(t).copied())
            .collect();
        let mut count = 0;
        let mut i = 0;
        while i < ids.len() {
            let mut node = 0;
            let mut longest = None;
            for (j, id) in ids[i..].iter().enumerate() {
                let Some(next) = id.and_then(|id| self.nodes[node].children.get(&id)) else {
                    break;
                };
                node = *next;
                if self.nodes[node].terminal {
                    longest = Some(j + 1);
                }
            }
            match longest {
                Some(len) => {
                    count += 1;
                    i += len;
                }
                None => i += 1,
            }
        }
        count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DocumentType {
    General,
    Specialized,
}

impl DocumentType {
    /// Model name used on the adapter's `/ner` endpoint.
    pub fn as_str(self) -> &'static str {
        match self {
            DocumentType::General => "general",
            DocumentType::Specialized => "specialized",
        }
    }
}

impl std::fmt::Display for DocumentType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub enum KeywordBackend {
    Gazetteer {
        path: Option<PathBuf>,
        gazetteer: Gazetteer,
    },
    RemoteNer(AdapterClient),
}

#[derive(Debug, Clone)]
pub struct KeywordExtractor {
    pub kind: DocumentType,
    pub vocabulary_size: u64,
    pub backend: KeywordBackend,
}

impl KeywordExtractor {
    fn default_vocabulary(kind: DocumentType) -> u64 {
        match kind {
            DocumentType::General => GENERAL_VOCABULARY_SIZE,
            DocumentType::Specialized => SPECIALIZED_VOCABULARY_SIZE,
        }
    }

    pub fn gazetteer(kind: DocumentType, gazetteer: Gazetteer) -> Self {
        KeywordExtractor {
            kind,
            vocabulary_size: Self::default_vocabulary(kind),
            backend: KeywordBackend::Gazetteer { path: None, gazetteer },
        }
    }

    pub fn gazetteer_file(kind: DocumentType, path: &Path) -> Result<Self> {
        let gazetteer = Gazetteer::from_file(path)?;
        Ok(KeywordExtractor {
            kind,
            vocabulary_size: Self::default_vocabulary(kind),
            backend: KeywordBackend::Gazetteer {
                path: Some(path.to_path_buf()),
                gazetteer,
            },
        })
    }

    pub fn remote(kind: DocumentType, client: AdapterClient) -> Self {
        KeywordExtractor {
            kind,
            vocabulary_size: Self::default_vocabulary(kind),
            backend: KeywordBackend::RemoteNer(client),
        }
    }

    pub fn with_vocabulary_size(mut self, size: u64) -> Result<Self> {
        if size == 0 {
            return Err(UdlError::Config("NER vocabulary size must be positive".into()));
        }
        self.vocabulary_size = size;
        Ok(self)
    }

    /// Total keyword mentions across `docs`.
    pub fn count_keywords(&self, docs: &[String]) -> Result<u64> {
        match &self.backend {
            KeywordBackend::Gazetteer { gazetteer, .. } => Ok(docs.par_iter().map(|d| gazetteer.count(d)).sum()),
            KeywordBackend::RemoteNer(client) => {
                let (counts, reported) = client.ner(docs, self.kind.as_str())?;
                if let Some(v) = reported.filter(|v| *v != self.vocabulary_size) {
                    log::warn!(
                        "{} NER reports vocabulary size {v}, using configured {}",
                        self.kind,
                        self.vocabulary_size
                    );
                }
                Ok(counts.iter().sum())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdDecision {
    pub k_general: u64,
    pub k_specialized: u64,
    pub v_general: u64,
    pub v_specialized: u64,
    pub doc_type: DocumentType,
    pub threshold: f64,
    pub delta: f64,
}

/// General documents (looser threshold `delta`) when
/// `k_general * v_specialized > k_specialized * v_general`, otherwise
/// specialized (stricter `1 - delta`).
pub fn decide_threshold(
    k_general: u64,
    k_specialized: u64,
    v_general: u64,
    v_specialized: u64,
    delta: f64,
) -> ThresholdDecision {
    let general = k_general as u128 * v_specialized as u128 > k_specialized as u128 * v_general as u128;
    let (doc_type, threshold) = if general {
        (DocumentType::General, delta)
    } else {
        (DocumentType::Specialized, 1.0 - delta)
    };
    ThresholdDecision {
        k_general,
        k_specialized,
        v_general,
        v_specialized,
        doc_type,
        threshold,
        delta,
    }
}
