//! Document vectors, cosine similarity and exact nearest-neighbor search.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapter::AdapterClient;
use crate::corpus::Corpus;
use crate::error::{Result, UdlError};
use crate::lexical::{SimilarityModel, TfidfModel};
use crate::vector::{dense_dot, dense_norm, SparseVector, Vector};

const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Vectors {
    Sparse(Vec<SparseVector>),
    Dense(Vec<Vec<f64>>),
}

/// Vectors aligned with an ordered list of ids.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    source: SimilarityModel,
    ids: Vec<String>,
    dim: usize,
    vectors: Vectors,
    norms: Vec<f64>,
}

impl VectorSet {
    pub fn sparse(source: SimilarityModel, ids: Vec<String>, dim: usize, vectors: Vec<SparseVector>) -> Result<Self> {
        if ids.len() != vectors.len() {
            return Err(UdlError::Argument(format!(
                "{} ids for {} vectors",
                ids.len(),
                vectors.len()
            )));
        }
        for (id, v) in ids.iter().zip(&vectors) {
            if v.min_dim() > dim {
                return Err(UdlError::Argument(format!("vector {id:?} exceeds dimension {dim}")));
            }
            if v.values().iter().any(|x| !x.is_finite()) {
                return Err(UdlError::Argument(format!("vector {id:?} has non-finite components")));
            }
        }
        let norms = vectors.iter().map(SparseVector::norm).collect();
        Ok(VectorSet {
            source,
            ids,
            dim,
            vectors: Vectors::Sparse(vectors),
            norms,
        })
    }

    pub fn dense(source: SimilarityModel, ids: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != vectors.len() {
            return Err(UdlError::Argument(format!(
                "{} ids for {} vectors",
                ids.len(),
                vectors.len()
            )));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        for (id, v) in ids.iter().zip(&vectors) {
            if v.len() != dim {
                return Err(UdlError::Argument(format!(
                    "vector {id:?} has dimension {}, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(UdlError::Argument(format!("vector {id:?} has non-finite components")));
            }
        }
        let norms = vectors.iter().map(|v| dense_norm(v)).collect();
        Ok(VectorSet {
            source,
            ids,
            dim,
            vectors: Vectors::Dense(vectors),
            norms,
        })
    }

    pub fn source(&self) -> SimilarityModel {
        self.source
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
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

    pub fn vectors(&self) -> &Vectors {
        &self.vectors
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn get(&self, i: usize) -> Vector {
        match &self.vectors {
            Vectors::Sparse(v) => Vector::Sparse(v[i].clone()),
            Vectors::Dense(v) => Vector::Dense(v[i].clone()),
        }
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Ordinals of all-zero vectors (e.g. documents with no kept terms).
    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.norms[i] == 0.0).collect()
    }

    /// id -> ordinal map for repeated lookups.
    pub fn index(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }

    /// Cosine between row `i` of `self` and row `j` of `other`.
    pub fn cosine_between(&self, i: usize, other: &VectorSet, j: usize) -> Result<f64> {
        let dot = match (&self.vectors, &other.vectors) {
            (Vectors::Sparse(a), Vectors::Sparse(b)) => {
                check_dims(self.dim, other.dim)?;
                a[i].dot(&b[j])
            }
            (Vectors::Dense(a), Vectors::Dense(b)) => {
                check_dims(self.dim, other.dim)?;
                dense_dot(&a[i], &b[j])
            }
            _ => return Err(UdlError::Argument("cannot compare sparse and dense vectors".into())),
        };
        Ok(finish_cosine(dot, self.norms[i], other.norms[j]))
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(UdlError::Argument(format!("dimension mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// Cosine from a dot product and the two norms; zero norms give 0.
#[inline]
pub(crate) fn finish_cosine(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    (dot / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

pub fn cosine(a: &Vector, b: &Vector) -> Result<f64> {
    let dot = match (a, b) {
        (Vector::Dense(x), Vector::Dense(y)) => {
            check_dims(x.len(), y.len())?;
            dense_dot(x, y)
        }
        (Vector::Sparse(x), Vector::Sparse(y)) => x.dot(y),
        _ => return Err(UdlError::Argument("cannot compare sparse and dense vectors".into())),
    };
    Ok(finish_cosine(dot, a.norm(), b.norm()))
}

pub fn lexical_vectors(model: &TfidfModel, corpus: &Corpus) -> Result<VectorSet> {
    if model.n_docs() != corpus.len() {
        return Err(UdlError::Argument(format!(
            "model was fitted on {} documents, corpus has {}",
            model.n_docs(),
            corpus.len()
        )));
    }
    VectorSet::sparse(
        SimilarityModel::Lexical,
        corpus.ids(),
        model.vocabulary_size(),
        model.doc_vectors().to_vec(),
    )
}

/// Something that can turn `(id, text)` items into vectors.
pub trait EmbeddingProvider {
    fn embed(&self, items: &[(String, String)]) -> Result<VectorSet>;
}

pub fn semantic_vectors(provider: &dyn EmbeddingProvider, corpus: &Corpus) -> Result<VectorSet> {
    let items: Vec<(String, String)> = corpus.iter().map(|d| (d.id.clone(), d.full_text())).collect();
    provider.embed(&items)
}

fn unit_normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = dense_norm(&v);
    if n > 0.0 && (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

#[derive(Serialize, Deserialize)]
struct EmbeddingsHeader {
    dim: usize,
    count: usize,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingRecord {
    id: String,
    vector: Vec<f64>,
}

/// Precomputed embeddings: a `{"dim", "count"}` header line followed by one
/// `{"id", "vector"}` record per line.
#[derive(Debug, Clone)]
pub struct EmbeddingsFile {
    path: PathBuf,
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingsFile {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| UdlError::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let header: EmbeddingsHeader = loop {
            match lines.next() {
                Some((i, line)) => {
                    let line = line.map_err(|e| UdlError::io(path, e))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break serde_json::from_str(&line)
                        .map_err(|e| UdlError::parse(path, i + 1, format!("bad embeddings header: {e}")))?;
                }
                None => return Err(UdlError::format(path, "missing embeddings header")),
            }
        };
        let mut vectors = HashMap::with_capacity(header.count);
        for (i, line) in lines {
            let line = line.map_err(|e| UdlError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmbeddingRecord =
                serde_json::from_str(&line).map_err(|e| UdlError::parse(path, i + 1, e.to_string()))?;
            if rec.vector.len() != header.dim {
                return Err(UdlError::format(
                    path,
                    format!(
                        "line {}: vector {:?} has dimension {}, header says {}",
                        i + 1,
                        rec.id,
                        rec.vector.len(),
                        header.dim
                    ),
                ));
            }
            if vectors.insert(rec.id.clone(), unit_normalize(rec.vector)).is_some() {
                return Err(UdlError::format(path, format!("duplicate id {:?}", rec.id)));
            }
        }
        if vectors.len() != header.count {
            return Err(UdlError::format(
                path,
                format!("header count {} but {} records", header.count, vectors.len()),
            ));
        }
        Ok(EmbeddingsFile {
            path: path.to_path_buf(),
            dim: header.dim,
            vectors,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }
}

impl EmbeddingProvider for EmbeddingsFile {
    fn embed(&self, items: &[(String, String)]) -> Result<VectorSet> {
        let missing: Vec<String> = items
            .iter()
            .filter(|(id, _)| !self.vectors.contains_key(id))
            .map(|(id, _)| id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(UdlError::Coverage(missing));
        }
        let ids = items.iter().map(|(id, _)| id.clone()).collect();
        let vectors = items.iter().map(|(id, _)| self.vectors[id].clone()).collect();
        VectorSet::dense(SimilarityModel::Semantic, ids, vectors)
    }
}

pub fn write_embeddings(path: &Path, ids: &[String], vectors: &[Vec<f64>]) -> Result<()> {
    let dim = vectors.first().map_or(0, Vec::len);
    let file = File::create(path).map_err(|e| UdlError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let header = serde_json::to_string(&EmbeddingsHeader { dim, count: ids.len() }).expect("header serializes");
    writeln!(out, "{header}").map_err(|e| UdlError::io(path, e))?;
    for (id, v) in ids.iter().zip(vectors) {
        let line = serde_json::to_string(&EmbeddingRecord {
            id: id.clone(),
            vector: v.clone(),
        })
        .expect("record serializes");
        writeln!(out, "{line}").map_err(|e| UdlError::io(path, e))?;
    }
    out.flush().map_err(|e| UdlError::io(path, e))
}

/// Embeddings served by the adapter's `/embed` endpoint.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    client: AdapterClient,
}

impl RemoteEmbedder {
    pub fn new(client: AdapterClient) -> Self {
        RemoteEmbedder { client }
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn embed(&self, items: &[(String, String)]) -> Result<VectorSet> {
        let texts: Vec<String> = items.iter().map(|(_, t)| t.clone()).collect();
        let (vectors, _) = self.client.embed(&texts)?;
        let vectors = vectors.into_iter().map(unit_normalize).collect();
        let ids = items.iter().map(|(id, _)| id.clone()).collect();
        VectorSet::dense(SimilarityModel::Semantic, ids, vectors)
            .map_err(|e| UdlError::Transport(format!("/embed: {e}")))
    }
}

/// Nearest other document of every document.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub ids: Vec<String>,
    /// `(neighbor ordinal, cosine)` per document.
    pub neighbors: Vec<(usize, f64)>,
}

impl NeighborList {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

/// Scores a query row against every row of a [`VectorSet`]. Sparse sets use
/// an inverted index so only shared columns are visited; products are
/// accumulated in ascending column order, which reproduces a direct dot
/// product bit for bit.
pub struct ScoreIndex<'a> {
    set: &'a VectorSet,
    postings: Vec<Vec<(u32, f64)>>,
}

impl<'a> ScoreIndex<'a> {
    pub fn new(set: &'a VectorSet) -> Self {
        let mut postings: Vec<Vec<(u32, f64)>> = Vec::new();
        if let Vectors::Sparse(rows) = &set.vectors {
            postings = vec![Vec::new(); set.dim];
            for (doc, row) in rows.iter().enumerate() {
                for (col, w) in row.iter() {
                    postings[col as usize].push((doc as u32, w));
                }
            }
        }
        ScoreIndex { set, postings }
    }

    /// Writes the cosine against every row into `scores` (length = set size).
    pub fn cosines_into(&self, query: &Vector, query_norm: f64, scores: &mut [f64]) -> Result<()> {
        match (&self.set.vectors, query) {
            (Vectors::Sparse(_), Vector::Sparse(q)) => {
                if q.min_dim() > self.set.dim {
                    return Err(UdlError::Argument("query exceeds index dimension".into()));
                }
                scores.iter_mut().for_each(|s| *s = 0.0);
                for (col, wq) in q.iter() {
                    for &(doc, wd) in &self.postings[col as usize] {
                        scores[doc as usize] += wq * wd;
                    }
                }
            }
            (Vectors::Dense(rows), Vector::Dense(q)) => {
                check_dims(self.set.dim, q.len())?;
                for (s, row) in scores.iter_mut().zip(rows) {
                    *s = dense_dot(q, row);
                }
            }
            _ => return Err(UdlError::Argument("cannot compare sparse and dense vectors".into())),
        }
        for (s, &n) in scores.iter_mut().zip(&self.set.norms) {
            *s = finish_cosine(*s, query_norm, n);
        }
        Ok(())
    }
}

/// Exact nearest other document for every document; ties go to the lower
/// ordinal.
pub fn nearest_neighbors(vs: &VectorSet) -> Result<NeighborList> {
    let n = vs.len();
    if n < 2 {
        return Err(UdlError::Argument(format!(
            "nearest neighbors need at least 2 documents, got {n}"
        )));
    }
    let index = ScoreIndex::new(vs);
    let neighbors = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |scores, i| {
                index
                    .cosines_into(&vs.get(i), vs.norms[i], scores)
                    .expect("rows of one set share a dimension");
                let mut best: Option<(usize, f64)> = None;
                for (j, &s) in scores.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((j, s));
                    }
                }
                best.expect("n >= 2")
            },
        )
        .collect();
    Ok(NeighborList {
        ids: vs.ids.clone(),
        neighbors,
    })
}
