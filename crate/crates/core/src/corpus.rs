//! Corpus, query and relevance-judgment loading in BEIR layout.
//!
//! Corpora are JSONL (`_id`, `title`, `text`), or plain TSV
//! (`id<TAB>title<TAB>text`) when the file extension is `.tsv`.
//! Queries are JSONL (`_id`, `text`). Qrels are TSV with the header
//! `query-id<TAB>corpus-id<TAB>score`.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UdlError};

pub const DEFAULT_LANGUAGE: &str = "en";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    #[serde(rename = "_id")]
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub text: String,
    #[serde(default = "default_language", skip_serializing_if = "is_default_language")]
    pub language: String,
}

fn default_language() -> String {
    DEFAULT_LANGUAGE.to_string()
}

fn is_default_language(lang: &str) -> bool {
    lang == DEFAULT_LANGUAGE
}

impl Document {
    pub fn new(id: impl Into<String>, title: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            title: title.into(),
            text: text.into(),
            language: default_language(),
        }
    }

    /// Title and body joined by a single space; the text that lexical
    /// statistics are computed over.
    pub fn full_text(&self) -> String {
        match (self.title.is_empty(), self.text.is_empty()) {
            (true, _) => self.text.clone(),
            (false, true) => self.title.clone(),
            (false, false) => format!("{} {}", self.title, self.text),
        }
    }

    pub fn is_english(&self) -> bool {
        self.language.is_empty()
            || self.language.eq_ignore_ascii_case("en")
            || self.language.to_ascii_lowercase().starts_with("en-")
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("document id is empty".into());
        }
        if self.title.trim().is_empty() && self.text.trim().is_empty() {
            return Err(format!("document {:?} has neither title nor text", self.id));
        }
        Ok(())
    }
}

/// Ordered, immutable document collection with an id index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    index: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids and documents that violate
    /// the non-empty rule.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut index = HashMap::with_capacity(documents.len());
        for (pos, doc) in documents.iter().enumerate() {
            doc.validate().map_err(UdlError::Validation)?;
            if index.insert(doc.id.clone(), pos).is_some() {
                return Err(UdlError::Validation(format!("duplicate document id {:?}", doc.id)));
            }
        }
        Ok(Corpus { documents, index })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn get(&self, ordinal: usize) -> Option<&Document> {
        self.documents.get(ordinal)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn by_id(&self, id: &str) -> Option<&Document> {
        self.position(id).map(|p| &self.documents[p])
    }

    pub fn ids(&self) -> Vec<String> {
        self.documents.iter().map(|d| d.id.clone()).collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }

    /// Keeps the first `cap` documents in file order.
    pub fn truncated(&self, cap: usize) -> Corpus {
        if cap >= self.len() {
            return self.clone();
        }
        let documents = self.documents[..cap].to_vec();
        let index = documents.iter().enumerate().map(|(i, d)| (d.id.clone(), i)).collect();
        Corpus { documents, index }
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| UdlError::io(path, e))?;
        let mut out = BufWriter::new(file);
        for doc in &self.documents {
            let line = serde_json::to_string(doc).expect("document serializes");
            writeln!(out, "{line}").map_err(|e| UdlError::io(path, e))?;
        }
        out.flush().map_err(|e| UdlError::io(path, e))
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Document;
    type IntoIter = std::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.documents.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    #[serde(rename = "_id")]
    pub id: String,
    pub text: String,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Query {
            id: id.into(),
            text: text.into(),
        }
    }
}

/// Graded relevance judgments, keyed by query then document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    entries: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a judgment; a repeated `(query, doc)` key is an error.
    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u32) -> Result<()> {
        let per_query = self.entries.entry(query_id.to_string()).or_default();
        if per_query.insert(doc_id.to_string(), grade).is_some() {
            return Err(UdlError::Validation(format!(
                "duplicate qrels entry ({query_id}, {doc_id})"
            )));
        }
        Ok(())
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.entries
            .get(query_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn judgments(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.entries.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, u32>)> {
        self.entries.iter().map(|(q, m)| (q.as_str(), m))
    }

    pub fn n_queries(&self) -> usize {
        self.entries.len()
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| UdlError::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut body = String::from("query-id\tcorpus-id\tscore\n");
        for (q, docs) in &self.entries {
            for (d, g) in docs {
                body.push_str(&format!("{q}\t{d}\t{g}\n"));
            }
        }
        out.write_all(body.as_bytes()).map_err(|e| UdlError::io(path, e))?;
        out.flush().map_err(|e| UdlError::io(path, e))
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| UdlError::io(path, e))
}

/// Iterates non-blank lines with their 1-based line numbers.
fn numbered_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut lines = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| UdlError::io(path, e))?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }
    Ok(lines)
}

/// Loads a corpus in file order, truncated to `doc_cap` documents when set.
pub fn load_corpus(path: &Path, doc_cap: Option<usize>) -> Result<Corpus> {
    if doc_cap == Some(0) {
        return Err(UdlError::Argument("doc_cap must be positive".into()));
    }
    let tsv = path.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("tsv"));
    let cap = doc_cap.unwrap_or(usize::MAX);
    let mut documents = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (line_no, line) in numbered_lines(path)? {
        if documents.len() >= cap {
            break;
        }
        let doc = if tsv {
            parse_tsv_document(&line).map_err(|m| UdlError::parse(path, line_no, m))?
        } else {
            serde_json::from_str::<Document>(&line).map_err(|e| UdlError::parse(path, line_no, e.to_string()))?
        };
        doc.validate().map_err(|m| UdlError::parse(path, line_no, m))?;
        if let Some(first) = seen.insert(doc.id.clone(), line_no) {
            return Err(UdlError::Validation(format!(
                "duplicate document id {:?} (lines {first} and {line_no})",
                doc.id
            )));
        }
        documents.push(doc);
    }
    Corpus::new(documents)
}

fn parse_tsv_document(line: &str) -> std::result::Result<Document, String> {
    let mut cols = line.splitn(3, '\t');
    let id = cols.next().unwrap_or_default();
    let title = cols.next().ok_or("expected id<TAB>title<TAB>text")?;
    let text = cols.next().ok_or("expected id<TAB>title<TAB>text")?;
    Ok(Document::new(id, title, text))
}

pub fn load_queries(path: &Path) -> Result<Vec<Query>> {
    let mut queries = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (line_no, line) in numbered_lines(path)? {
        let query: Query = serde_json::from_str(&line).map_err(|e| UdlError::parse(path, line_no, e.to_string()))?;
        if query.id.is_empty() {
            return Err(UdlError::parse(path, line_no, "query id is empty"));
        }
        if let Some(first) = seen.insert(query.id.clone(), line_no) {
            return Err(UdlError::Validation(format!(
                "duplicate query id {:?} (lines {first} and {line_no})",
                query.id
            )));
        }
        queries.push(query);
    }
    Ok(queries)
}

pub fn write_queries(queries: &[Query], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| UdlError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for q in queries {
        let line = serde_json::to_string(q).expect("query serializes");
        writeln!(out, "{line}").map_err(|e| UdlError::io(path, e))?;
    }
    out.flush().map_err(|e| UdlError::io(path, e))
}

pub fn load_qrels(path: &Path) -> Result<Qrels> {
    let lines = numbered_lines(path)?;
    let mut rows = lines.into_iter();
    match rows.next() {
        Some((_, header)) if is_qrels_header(&header) => {}
        Some((line_no, _)) => {
            return Err(UdlError::format(
                path,
                format!("line {line_no}: expected header \"query-id\\tcorpus-id\\tscore\""),
            ))
        }
        None => return Err(UdlError::format(path, "missing qrels header")),
    }
    let mut qrels = Qrels::new();
    for (line_no, line) in rows {
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() < 3 {
            return Err(UdlError::parse(path, line_no, "expected 3 tab-separated columns"));
        }
        let grade: u32 = cols[2].parse().map_err(|_| {
            UdlError::parse(
                path,
                line_no,
                format!("score {:?} is not a non-negative integer", cols[2]),
            )
        })?;
        qrels.insert(cols[0], cols[1], grade)?;
    }
    Ok(qrels)
}

fn is_qrels_header(line: &str) -> bool {
    let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
    cols.len() >= 3 && cols[0] == "query-id" && cols[1] == "corpus-id" && cols[2] == "score"
}
