//! Document linking for synthetic-query generation in zero-shot retrieval.
//!
//! The pipeline picks a similarity model from the entropy of TF-IDF term
//! weights, picks a link threshold by comparing general and specialized
//! keyword counts, links each document to its nearest neighbor when the
//! cosine clears that threshold, and merges linked pairs into generation
//! units. Around it sit BEIR-format loaders, the query-generator exchange,
//! a synthetic-query quality check and NDCG/Recall evaluation.

pub mod adapter;
pub mod corpus;
pub mod demo;
pub mod error;
pub mod evalir;
pub mod keyword;
pub mod lexical;
pub mod linker;
pub mod quality;
pub mod similarity;
pub mod synthesis;
pub mod vector;

pub use corpus::{load_corpus, load_qrels, load_queries, Corpus, Document, Qrels, Query};
pub use error::{ErrorClass, Result, UdlError};
pub use keyword::{decide_threshold, DocumentType, Gazetteer, KeywordExtractor, ThresholdDecision};
pub use lexical::{
    decide_similarity_model, fit_tfidf, term_entropy, tokenize, EntropyReport, ModelDecision, SimilarityModel,
    TfidfModel,
};
pub use linker::{link_documents, merge_pair, run_udl, LinkSet, MergeStrategy, MergedDocument, PipelineConfig};
pub use similarity::{cosine, nearest_neighbors, NeighborList, VectorSet};
pub use vector::{SparseVector, Vector};
