//! Deterministic synthetic corpus used by the bundled demo data and tests.
//!
//! Documents are drawn from a handful of topics. Each mixes shared filler
//! words, topic words and a few document-unique made-up words; every tenth
//! document is a light rewrite of the one before it, so a linking run has
//! obvious pairs to find.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, Qrels, Query};

const FILLER: &[&str] = &[
    "the", "of", "and", "in", "to", "with", "for", "was", "is", "study", "results", "patients", "data", "new", "this",
    "has", "have", "were", "from", "we",
];

const TOPICS: &[(&str, &[&str])] = &[
    (
        "diabetes",
        &[
            "insulin",
            "glucose",
            "diabetes",
            "pancreas",
            "glycemic",
            "metformin",
            "obesity",
            "diet",
        ],
    ),
    (
        "oncology",
        &[
            "tumour",
            "cancer",
            "chemotherapy",
            "metastasis",
            "oncology",
            "biopsy",
            "carcinoma",
            "radiation",
        ],
    ),
    (
        "cardiology",
        &[
            "heart",
            "cardiac",
            "artery",
            "hypertension",
            "statin",
            "cholesterol",
            "stroke",
            "arrhythmia",
        ],
    ),
    (
        "genetics",
        &[
            "gene",
            "expression",
            "genome",
            "mutation",
            "protein",
            "rna",
            "sequencing",
            "allele",
        ],
    ),
    (
        "travel",
        &[
            "london", "paris", "flight", "hotel", "museum", "tour", "river", "weekend",
        ],
    ),
    (
        "sports",
        &[
            "football",
            "league",
            "match",
            "season",
            "coach",
            "stadium",
            "goal",
            "championship",
        ],
    ),
    (
        "finance",
        &[
            "market",
            "stock",
            "bank",
            "inflation",
            "dollar",
            "investor",
            "bond",
            "currency",
        ],
    ),
    (
        "climate",
        &[
            "climate",
            "carbon",
            "emissions",
            "warming",
            "ocean",
            "temperature",
            "glacier",
            "rainfall",
        ],
    ),
];

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ru", "zen", "ta", "vo", "pe", "qui", "dar", "nel", "so", "bix", "fu",
];

pub const GENERAL_PHRASES: &[&str] = &[
    "london",
    "paris",
    "new york",
    "john smith",
    "monday",
    "dollar",
    "football",
    "league",
    "museum",
    "river",
    "weekend",
    "bank",
    "stadium",
    "january",
    "europe",
];

pub const SPECIALIZED_PHRASES: &[&str] = &[
    "insulin",
    "glucose",
    "tumour",
    "carcinoma",
    "gene expression",
    "genome",
    "mutation",
    "protein",
    "statin",
    "cholesterol",
    "metformin",
    "chemotherapy",
    "arrhythmia",
    "rna",
    "allele",
    "biopsy",
];

fn made_up_word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(3..=4);
    (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

pub struct DemoData {
    pub documents: Vec<Document>,
    pub queries: Vec<Query>,
    pub qrels: Qrels,
}

/// Topic index of demo document `i`.
pub fn topic_of(i: usize) -> usize {
    (i / 10) % TOPICS.len()
}

pub fn demo_data(n_docs: usize, seed: u64) -> DemoData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut documents: Vec<Document> = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let (_, words) = TOPICS[topic_of(i)];
        let id = format!("doc{i:04}");
        if i % 10 == 9 {
            // rewrite of the previous document: drop a couple of words, add one
            let prev = &documents[i - 1];
            let mut tokens: Vec<&str> = prev.text.split(' ').collect();
            for _ in 0..2 {
                let at = rng.random_range(0..tokens.len());
                tokens.remove(at);
            }
            let extra = made_up_word(&mut rng);
            tokens.push(&extra);
            let text = tokens.join(" ");
            documents.push(Document::new(id, prev.title.clone(), text));
            continue;
        }
        let title_words: Vec<&str> = words.choose_multiple(&mut rng, 2).copied().collect();
        let title = format!("{} {}", capitalize(title_words[0]), title_words[1]);
        let mut tokens: Vec<String> = Vec::new();
        for _ in 0..rng.random_range(14..22) {
            let pool = if rng.random_bool(0.45) { FILLER } else { words };
            tokens.push(pool.choose(&mut rng).unwrap().to_string());
        }
        for _ in 0..rng.random_range(3..6) {
            let at = rng.random_range(0..=tokens.len());
            tokens.insert(at, made_up_word(&mut rng));
        }
        documents.push(Document::new(id, title, tokens.join(" ")));
    }

    // one query per block of ten documents, so no query has more than ten
    // relevant documents
    let mut queries = Vec::new();
    let mut qrels = Qrels::new();
    for (b, block) in documents.chunks(10).enumerate() {
        let (name, words) = TOPICS[topic_of(b * 10)];
        let qid = format!("q{b:02}");
        let anchor = block[0].title.to_lowercase();
        queries.push(Query::new(&qid, format!("{name} {anchor}")));
        let key = anchor.split(' ').next().unwrap_or(words[0]).to_string();
        for d in block {
            let grade = if d.title.to_lowercase().contains(&key) { 2 } else { 1 };
            qrels.insert(&qid, &d.id, grade).expect("unique ids");
        }
    }
    DemoData {
        documents,
        queries,
        qrels,
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;

    #[test]
    fn deterministic_and_valid() {
        let a = demo_data(50, 42);
        let b = demo_data(50, 42);
        assert_eq!(a.documents, b.documents);
        assert!(Corpus::new(a.documents).is_ok());
        assert_eq!(a.queries.len(), 5);
        assert!(a.qrels.iter().all(|(_, j)| j.len() <= 10));
    }
}
