//! Blocking HTTP client for the model adapter sidecar.
//!
//! Endpoints (JSON bodies):
//! - `GET  /manifest`
//! - `POST /embed`    `{"texts": [..]}` -> `{"vectors": [[..]..], "dim": n}`
//! - `POST /ner`      `{"texts": [..], "model": "general"|"specialized"}` -> `{"counts": [..], "vocabulary_size": n}`
//! - `POST /generate` `{"texts": [..], "n": k}` -> `{"queries": [[..]..]}`

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UdlError};

/// Environment variable naming the adapter base URL.
pub const ADAPTER_URL_ENV: &str = "UDL_ADAPTER_URL";

const DEFAULT_BATCH: usize = 64;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NerResponse {
    pub counts: Vec<u64>,
    pub vocabulary_size: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GenerateResponse {
    pub queries: Vec<Vec<String>>,
}

#[derive(Serialize)]
struct TextsRequest<'a> {
    texts: &'a [String],
}

#[derive(Serialize)]
struct NerRequest<'a> {
    texts: &'a [String],
    model: &'a str,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    texts: &'a [String],
    n: usize,
}

#[derive(Debug, Clone)]
pub struct AdapterClient {
    base_url: String,
    agent: ureq::Agent,
    batch_size: usize,
}

impl AdapterClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        AdapterClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
            batch_size: DEFAULT_BATCH,
        }
    }

    /// Client for the URL in `UDL_ADAPTER_URL`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var(ADAPTER_URL_ENV)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .map(Self::new)
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn post<B: Serialize, R: for<'de> Deserialize<'de>>(&self, endpoint: &str, body: &B) -> Result<R> {
        let url = format!("{}{}", self.base_url, endpoint);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| UdlError::Transport(format!("POST {url}: {e}")))?;
        resp.body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_json()
            .map_err(|e| UdlError::Transport(format!("POST {url}: invalid response: {e}")))
    }

    pub fn manifest(&self) -> Result<serde_json::Value> {
        let url = format!("{}/manifest", self.base_url);
        let mut resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| UdlError::Transport(format!("GET {url}: {e}")))?;
        resp.body_mut()
            .read_json()
            .map_err(|e| UdlError::Transport(format!("GET {url}: invalid response: {e}")))
    }

    /// Embeds `texts` in batches; returns one vector per text.
    pub fn embed(&self, texts: &[String]) -> Result<(Vec<Vec<f64>>, usize)> {
        let mut vectors = Vec::with_capacity(texts.len());
        let mut dim = None;
        for chunk in texts.chunks(self.batch_size) {
            let resp: EmbedResponse = self.post("/embed", &TextsRequest { texts: chunk })?;
            if resp.vectors.len() != chunk.len() {
                return Err(UdlError::Transport(format!(
                    "/embed returned {} vectors for {} texts",
                    resp.vectors.len(),
                    chunk.len()
                )));
            }
            if *dim.get_or_insert(resp.dim) != resp.dim || resp.vectors.iter().any(|v| v.len() != resp.dim) {
                return Err(UdlError::Transport("/embed returned inconsistent dimensions".into()));
            }
            vectors.extend(resp.vectors);
        }
        Ok((vectors, dim.unwrap_or(0)))
    }

    /// Per-text entity mention counts plus the model's reported vocabulary size.
    pub fn ner(&self, texts: &[String], model: &str) -> Result<(Vec<u64>, Option<u64>)> {
        let mut counts = Vec::with_capacity(texts.len());
        let mut vocab = None;
        for chunk in texts.chunks(self.batch_size) {
            let resp: NerResponse = self.post("/ner", &NerRequest { texts: chunk, model })?;
            if resp.counts.len() != chunk.len() {
                return Err(UdlError::Transport(format!(
                    "/ner returned {} counts for {} texts",
                    resp.counts.len(),
                    chunk.len()
                )));
            }
            vocab = Some(resp.vocabulary_size);
            counts.extend(resp.counts);
        }
        Ok((counts, vocab))
    }

    pub fn generate(&self, texts: &[String], n: usize) -> Result<Vec<Vec<String>>> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            let resp: GenerateResponse = self.post("/generate", &GenerateRequest { texts: chunk, n })?;
            if resp.queries.len() != chunk.len() {
                return Err(UdlError::Transport(format!(
                    "/generate returned {} query lists for {} texts",
                    resp.queries.len(),
                    chunk.len()
                )));
            }
            out.extend(resp.queries);
        }
        Ok(out)
    }
}
