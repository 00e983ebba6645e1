//! Exchange of generation units and synthetic queries with an external
//! query generator, and assembly of training pairs.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapter::AdapterClient;
use crate::error::{Result, UdlError};
use crate::lexical::tokenize;
use crate::linker::{write_file, MergedDocument, DEFAULT_QUERIES_PER_UNIT};

fn default_n_queries() -> usize {
    DEFAULT_QUERIES_PER_UNIT
}

/// A single or merged document handed to a query generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationUnit {
    pub unit_id: String,
    pub doc_ids: Vec<String>,
    pub text: String,
    #[serde(default = "default_n_queries")]
    pub n_queries: usize,
}

impl GenerationUnit {
    pub fn from_merged(m: &MergedDocument, n_queries: usize) -> Self {
        GenerationUnit {
            unit_id: m.unit_id.clone(),
            doc_ids: m.source_ids.clone(),
            text: m.text.clone(),
            n_queries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticQuery {
    pub query_id: String,
    pub unit_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub query_id: String,
    pub query_text: String,
    pub positive_doc_ids: Vec<String>,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| UdlError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| UdlError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| UdlError::parse(path, i + 1, e.to_string()))?);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<()> {
    let mut body = String::new();
    for item in items {
        body.push_str(&serde_json::to_string(item).expect("record serializes"));
        body.push('\n');
    }
    write_file(path, &body)
}

/// Writes one record per unit, stamped with `n_queries`, in input order.
pub fn export_generation_units(
    merged: &[MergedDocument],
    n_queries: usize,
    path: &Path,
) -> Result<Vec<GenerationUnit>> {
    if n_queries == 0 {
        return Err(UdlError::Argument("n_queries must be at least 1".into()));
    }
    let units: Vec<GenerationUnit> = merged
        .iter()
        .map(|m| GenerationUnit::from_merged(m, n_queries))
        .collect();
    write_jsonl(&units, path)?;
    Ok(units)
}

/// Reads units written by either the linker (no `n_queries`, defaulting to
/// 3) or [`export_generation_units`].
pub fn load_generation_units(path: &Path) -> Result<Vec<GenerationUnit>> {
    let units: Vec<GenerationUnit> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    for u in &units {
        if !seen.insert(u.unit_id.as_str()) {
            return Err(UdlError::Validation(format!("duplicate unit id {:?}", u.unit_id)));
        }
        if u.n_queries == 0 || u.doc_ids.is_empty() {
            return Err(UdlError::Validation(format!(
                "unit {:?} needs at least one document and one query",
                u.unit_id
            )));
        }
    }
    Ok(units)
}

pub fn load_merged_units(path: &Path) -> Result<Vec<MergedDocument>> {
    read_jsonl(path)
}

pub fn load_synthetic_queries(path: &Path) -> Result<Vec<SyntheticQuery>> {
    read_jsonl(path)
}

pub fn write_synthetic_queries(queries: &[SyntheticQuery], path: &Path) -> Result<()> {
    write_jsonl(queries, path)
}

/// Turns synthetic queries into training pairs; each query is positive for
/// every document of its unit.
pub fn build_training_pairs(queries: &[SyntheticQuery], units: &[GenerationUnit]) -> Result<Vec<TrainingPair>> {
    let by_id: HashMap<&str, &GenerationUnit> = units.iter().map(|u| (u.unit_id.as_str(), u)).collect();
    let orphans: Vec<String> = queries
        .iter()
        .filter(|q| !by_id.contains_key(q.unit_id.as_str()))
        .map(|q| format!("{} -> {}", q.query_id, q.unit_id))
        .collect();
    if !orphans.is_empty() {
        return Err(UdlError::Validation(format!(
            "{} synthetic quer{} reference unknown units: {}",
            orphans.len(),
            if orphans.len() == 1 { "y" } else { "ies" },
            orphans.join(", ")
        )));
    }
    let mut seen = HashSet::new();
    let mut pairs = Vec::with_capacity(queries.len());
    for q in queries {
        if !seen.insert(q.query_id.as_str()) {
            return Err(UdlError::Validation(format!("duplicate query id {:?}", q.query_id)));
        }
        if q.text.trim().is_empty() {
            return Err(UdlError::Validation(format!("query {:?} has empty text", q.query_id)));
        }
        pairs.push(TrainingPair {
            query_id: q.query_id.clone(),
            query_text: q.text.clone(),
            positive_doc_ids: by_id[q.unit_id.as_str()].doc_ids.clone(),
        });
    }
    Ok(pairs)
}

pub fn import_synthetic_queries(path: &Path, units: &[GenerationUnit]) -> Result<Vec<TrainingPair>> {
    build_training_pairs(&load_synthetic_queries(path)?, units)
}

pub const TRAINING_PAIRS_HEADER: &str = "query_id\tquery_text\tdoc_id";

fn tsv_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// One row per (query, positive document). Tabs and line breaks inside
/// query text are written as spaces.
pub fn emit_training_pairs(pairs: &[TrainingPair], path: &Path) -> Result<usize> {
    let mut body = String::from(TRAINING_PAIRS_HEADER);
    body.push('\n');
    let mut rows = 0;
    for p in pairs {
        let text = tsv_field(&p.query_text);
        for doc in &p.positive_doc_ids {
            body.push_str(&format!("{}\t{}\t{}\n", tsv_field(&p.query_id), text, tsv_field(doc)));
            rows += 1;
        }
    }
    write_file(path, &body)?;
    Ok(rows)
}

/// Reads a training-pair TSV, grouping consecutive rows of one query.
pub fn read_training_pairs(path: &Path) -> Result<Vec<TrainingPair>> {
    let file = File::open(path).map_err(|e| UdlError::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h == TRAINING_PAIRS_HEADER => {}
        _ => return Err(UdlError::format(path, "missing training-pairs header")),
    }
    let mut pairs: Vec<TrainingPair> = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| UdlError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.splitn(3, '\t').collect();
        if cols.len() != 3 {
            return Err(UdlError::parse(path, i + 1, "expected 3 tab-separated columns"));
        }
        match pairs.last_mut() {
            Some(p) if p.query_id == cols[0] => p.positive_doc_ids.push(cols[2].to_string()),
            _ => pairs.push(TrainingPair {
                query_id: cols[0].to_string(),
                query_text: cols[1].to_string(),
                positive_doc_ids: vec![cols[2].to_string()],
            }),
        }
    }
    Ok(pairs)
}

/// Model-free stand-in generator: query `k` of a unit is the `n_tokens`
/// tokens starting at token `k`.
pub fn stub_generate(units: &[GenerationUnit], n_tokens: usize) -> Vec<SyntheticQuery> {
    let n_tokens = n_tokens.max(1);
    let mut out = Vec::new();
    for u in units {
        let tokens = tokenize(&u.text);
        for k in 0..u.n_queries {
            let start = if tokens.len() > n_tokens {
                k % (tokens.len() - n_tokens + 1)
            } else {
                0
            };
            let end = (start + n_tokens).min(tokens.len());
            let text = if tokens.is_empty() {
                u.text.trim().to_string()
            } else {
                tokens[start..end].join(" ")
            };
            out.push(SyntheticQuery {
                query_id: format!("{}-q{}", u.unit_id, k),
                unit_id: u.unit_id.clone(),
                text,
            });
        }
    }
    out
}

/// Queries from the adapter's `/generate` endpoint; exactly `n_queries`
/// per unit are required.
pub fn remote_generate(client: &AdapterClient, units: &[GenerationUnit]) -> Result<Vec<SyntheticQuery>> {
    let mut by_n: Vec<usize> = units.iter().map(|u| u.n_queries).collect();
    by_n.sort_unstable();
    by_n.dedup();
    let mut generated: HashMap<&str, Vec<String>> = HashMap::new();
    for n in by_n {
        let group: Vec<&GenerationUnit> = units.iter().filter(|u| u.n_queries == n).collect();
        let texts: Vec<String> = group.iter().map(|u| u.text.clone()).collect();
        for (u, qs) in group.iter().zip(client.generate(&texts, n)?) {
            if qs.len() != n {
                return Err(UdlError::Transport(format!(
                    "/generate returned {} queries for unit {:?}, expected {n}",
                    qs.len(),
                    u.unit_id
                )));
            }
            generated.insert(u.unit_id.as_str(), qs);
        }
    }
    let mut out = Vec::new();
    for u in units {
        for (k, text) in generated
            .remove(u.unit_id.as_str())
            .unwrap_or_default()
            .into_iter()
            .enumerate()
        {
            out.push(SyntheticQuery {
                query_id: format!("{}-q{}", u.unit_id, k),
                unit_id: u.unit_id.clone(),
                text,
            });
        }
    }
    Ok(out)
}
