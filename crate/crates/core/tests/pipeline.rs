use std::collections::BTreeSet;

use proptest::prelude::*;
use udl_core::demo::{demo_data, GENERAL_PHRASES, SPECIALIZED_PHRASES};
use udl_core::linker::{split_sentences, Extractors};
use udl_core::quality::{classify_pair, classify_single, quality_check, Verdict};
use udl_core::synthesis::{
    build_training_pairs, emit_training_pairs, read_training_pairs, stub_generate, GenerationUnit,
};
use udl_core::{
    merge_pair, run_udl, Corpus, Document, DocumentType, Gazetteer, KeywordExtractor, MergeStrategy, PipelineConfig,
    Qrels, Query, SimilarityModel, VectorSet,
};

fn sentence_doc() -> impl Strategy<Value = Document> {
    let sentence = "[a-z]{1,6}( [a-z]{1,6}){0,4}[.!?]";
    ("[a-z]{1,8}", "[A-Z][a-z]{0,8}", prop::collection::vec(sentence, 1..6))
        .prop_map(|(id, title, s)| Document::new(id, title, s.join(" ")))
}

fn rank(v: Verdict) -> u8 {
    match v {
        Verdict::Neither | Verdict::SingleNotMapped => 0,
        Verdict::MapsAOnly | Verdict::MapsBOnly => 1,
        Verdict::BothMapped | Verdict::SingleMapped => 2,
    }
}

proptest! {
    #[test]
    fn permutation_keeps_sentences(mut a in sentence_doc(), b in sentence_doc(), seed in any::<u64>()) {
        a.id.push('a');
        let m = merge_pair(&a, &b, MergeStrategy::RandomPermutation, seed);
        let mut before: Vec<&str> = split_sentences(&a.text);
        before.extend(split_sentences(&b.text));
        before.push(&a.title);
        before.push(&b.title);
        let titles = format!("{}. {}.", a.title, b.title);
        let mut after: Vec<String> = split_sentences(&m.text).into_iter().map(str::to_string).collect();
        let mut expected: Vec<String> = before.iter().map(|s| s.to_string()).collect();
        // titles come back with their terminating period
        for t in split_sentences(&titles) {
            let bare = t.trim_end_matches('.').to_string();
            let pos = expected.iter().position(|s| *s == bare).unwrap();
            expected[pos] = t.to_string();
        }
        after.sort();
        expected.sort();
        prop_assert_eq!(after, expected);
        let lead = format!("{}.", a.title);
        prop_assert!(m.text.starts_with(&lead));
        prop_assert_eq!(&m, &merge_pair(&a, &b, MergeStrategy::RandomPermutation, seed));
    }

    #[test]
    fn concatenation_is_title_text_title_text(a in sentence_doc(), b in sentence_doc()) {
        let m = merge_pair(&a, &b, MergeStrategy::Concatenation, 0);
        prop_assert_eq!(m.text, format!("{}. {} {}. {}", a.title, a.text, b.title, b.text));
        prop_assert_eq!(m.unit_id, format!("{}+{}", a.id, b.id));
    }

    #[test]
    fn raising_synthetic_scores_never_demotes(
        t in (-1.0..1.0f64, -1.0..1.0f64), s in (-1.0..1.0f64, -1.0..1.0f64), eps in 1e-9..0.5f64,
    ) {
        let before = classify_pair(t, s);
        let after = classify_pair(t, (s.0 + eps, s.1 + eps));
        prop_assert!(rank(after) >= rank(before));
        prop_assert!(rank(classify_single(t.0, s.0 + eps)) >= rank(classify_single(t.0, s.0)));
    }

    #[test]
    fn training_rows_equal_query_unit_sizes(sizes in prop::collection::vec((1usize..3, 1usize..5), 1..12)) {
        let units: Vec<GenerationUnit> = sizes
            .iter()
            .enumerate()
            .map(|(i, &(docs, n))| GenerationUnit {
                unit_id: format!("u{i}"),
                doc_ids: (0..docs).map(|d| format!("u{i}d{d}")).collect(),
                text: format!("alpha beta gamma delta unit {i}"),
                n_queries: n,
            })
            .collect();
        let queries = stub_generate(&units, 3);
        let per_unit: usize = sizes.iter().map(|&(_, n)| n).sum();
        prop_assert_eq!(queries.len(), per_unit);
        let pairs = build_training_pairs(&queries, &units).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.tsv");
        let rows = emit_training_pairs(&pairs, &path).unwrap();
        prop_assert_eq!(rows, sizes.iter().map(|&(d, n)| d * n).sum::<usize>());
        prop_assert_eq!(read_training_pairs(&path).unwrap(), pairs);
    }
}

#[test]
fn branch_table() {
    assert_eq!(classify_pair((0.5, 0.5), (0.6, 0.6)), Verdict::BothMapped);
    assert_eq!(classify_pair((0.5, 0.5), (0.6, 0.4)), Verdict::MapsAOnly);
    assert_eq!(classify_pair((0.5, 0.5), (0.4, 0.6)), Verdict::MapsBOnly);
    assert_eq!(classify_pair((0.5, 0.5), (0.5, 0.5)), Verdict::Neither);
    assert_eq!(classify_single(0.5, 0.6), Verdict::SingleMapped);
    assert_eq!(classify_single(0.5, 0.5), Verdict::SingleNotMapped);
}

fn unit(angle: f64) -> Vec<f64> {
    vec![angle.cos(), angle.sin()]
}

#[test]
fn quality_picks_strongest_comparator_and_ignores_unrelated_queries() {
    let docs = VectorSet::dense(
        SimilarityModel::Semantic,
        vec!["a".into(), "b".into(), "c".into()],
        vec![unit(0.0), unit(0.2), unit(1.5)],
    )
    .unwrap();
    let mut qrels = Qrels::new();
    for (q, d) in [("t1", "a"), ("t1", "b"), ("t2", "a"), ("t2", "b"), ("t3", "c")] {
        qrels.insert(q, d, 1).unwrap();
    }
    let pairs = vec![udl_core::synthesis::TrainingPair {
        query_id: "s".into(),
        query_text: String::new(),
        positive_doc_ids: vec!["a".into(), "b".into()],
    }];
    let make = |order: &[&str]| {
        let train: Vec<Query> = order.iter().map(|q| Query::new(*q, "")).collect();
        let mut ids: Vec<String> = order.iter().map(|q| q.to_string()).collect();
        let mut vecs: Vec<Vec<f64>> = order
            .iter()
            .map(|q| match *q {
                "t1" => unit(1.0), // weak on both
                "t2" => unit(0.1), // strong on both
                _ => unit(1.5),
            })
            .collect();
        ids.push("s".into());
        vecs.push(unit(0.05));
        let qv = VectorSet::dense(SimilarityModel::Semantic, ids, vecs).unwrap();
        quality_check(&train, &qrels, &pairs, &qv, &docs).unwrap()
    };
    let r1 = make(&["t1", "t2", "t3"]);
    let r2 = make(&["t3", "t1", "t2"]);
    assert_eq!(r1.verdicts, r2.verdicts);
    let v = &r1.verdicts[0];
    assert_eq!(v.train_query_id, "t2");
    // synthetic is closer to a than t2 is, but farther from b
    assert_eq!(v.verdict, Verdict::MapsAOnly);
    assert_eq!(r1.n_linked, 1);
    assert_eq!(r1.fraction_both, 0.0);
}

fn demo_extractors() -> Extractors {
    Extractors {
        general: KeywordExtractor::gazetteer(DocumentType::General, Gazetteer::new(GENERAL_PHRASES)),
        specialized: KeywordExtractor::gazetteer(DocumentType::Specialized, Gazetteer::new(SPECIALIZED_PHRASES)),
    }
}

#[test]
fn demo_pipeline_is_deterministic_and_complete() {
    let corpus = Corpus::new(demo_data(200, 42).documents).unwrap();
    let config = PipelineConfig {
        seed: 42,
        merge_strategy: MergeStrategy::RandomPermutation,
        ..PipelineConfig::default()
    };
    let a = run_udl(&corpus, &config, &demo_extractors(), None, None).unwrap();
    let b = run_udl(&corpus, &config, &demo_extractors(), None, None).unwrap();
    assert_eq!(a.units, b.units);
    assert_eq!(a.report(), b.report());
    assert_eq!(a.model.model, SimilarityModel::Lexical);
    assert!([0.4, 0.6].contains(&a.threshold.threshold));
    assert_eq!(a.units.len(), a.links.pairs.len() + a.links.unlinked.len());

    let covered: BTreeSet<&str> = a
        .units
        .iter()
        .flat_map(|u| u.source_ids.iter().map(String::as_str))
        .collect();
    assert_eq!(covered.len(), corpus.len());
    // rewrites sit next to their source and should find each other
    let pairs: BTreeSet<(&str, &str)> = a.links.pair_ids().map(|(x, y, _)| (x, y)).collect();
    assert!(pairs.contains(&("doc0009", "doc0008")) || pairs.contains(&("doc0008", "doc0009")));
}

#[test]
fn doc_cap_limits_linking() {
    let corpus = Corpus::new(demo_data(60, 1).documents).unwrap();
    let config = PipelineConfig {
        doc_cap: Some(25),
        ..PipelineConfig::default()
    };
    let out = run_udl(&corpus, &config, &demo_extractors(), None, None).unwrap();
    assert_eq!(out.n_docs, 25);
    assert_eq!(out.links.ids, corpus.ids()[..25].to_vec());
}

#[test]
fn semantic_without_provider_fails_before_linking() {
    let corpus = Corpus::new(demo_data(40, 3).documents).unwrap();
    let config = PipelineConfig {
        gamma: 1e-6,
        ..PipelineConfig::default()
    };
    let err = run_udl(&corpus, &config, &demo_extractors(), None, None).unwrap_err();
    assert_eq!(err.class(), udl_core::ErrorClass::Config);
}
