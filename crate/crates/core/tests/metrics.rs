use std::collections::BTreeMap;

use proptest::prelude::*;
use udl_core::evalir::{evaluate, ndcg_at_k, parse_run, recall_at_k, Run};
use udl_core::Qrels;

type Judged = BTreeMap<String, u32>;

/// Reference NDCG@k / Recall@k written from the textbook definitions.
fn reference(run: &BTreeMap<String, Vec<(String, f64)>>, qrels: &BTreeMap<String, Judged>, k: usize) -> (f64, f64) {
    let mut ndcg_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut recall_n = 0;
    for (q, judged) in qrels {
        let mut ranked = run.get(q).cloned().unwrap_or_default();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        let grade = |d: &str| *judged.get(d).unwrap_or(&0);
        let dcg: f64 = ranked
            .iter()
            .enumerate()
            .map(|(i, (d, _))| (2f64.powi(grade(d) as i32) - 1.0) / (i as f64 + 2.0).log2())
            .sum();
        let mut ideal: Vec<u32> = judged.values().copied().collect();
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        let idcg: f64 = ideal
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, &g)| (2f64.powi(g as i32) - 1.0) / (i as f64 + 2.0).log2())
            .sum();
        ndcg_sum += if idcg > 0.0 { dcg / idcg } else { 0.0 };
        let n_rel = judged.values().filter(|&&g| g > 0).count();
        if n_rel > 0 {
            let hits = ranked.iter().filter(|(d, _)| grade(d) > 0).count();
            recall_sum += hits as f64 / n_rel as f64;
            recall_n += 1;
        }
    }
    let ndcg = if qrels.is_empty() {
        0.0
    } else {
        ndcg_sum / qrels.len() as f64
    };
    let recall = if recall_n == 0 {
        0.0
    } else {
        recall_sum / recall_n as f64
    };
    (ndcg, recall)
}

#[derive(Debug, Clone)]
struct Case {
    run: BTreeMap<String, Vec<(String, f64)>>,
    qrels: BTreeMap<String, Judged>,
}

impl Case {
    fn build(&self) -> (Run, Qrels) {
        let mut run = Run::new();
        for (q, docs) in &self.run {
            run.insert(q, docs.clone()).unwrap();
        }
        let mut qrels = Qrels::new();
        for (q, judged) in &self.qrels {
            for (d, &g) in judged {
                qrels.insert(q, d, g).unwrap();
            }
        }
        (run, qrels)
    }
}

fn case() -> impl Strategy<Value = Case> {
    let docs = prop::collection::btree_map(
        0u16..150,
        prop_oneof![(0u8..20).prop_map(|s| f64::from(s) / 4.0), -1.0..1.0f64],
        0..120,
    );
    let judged = prop::collection::btree_map(0u16..150, 0u32..4, 1..30);
    prop::collection::btree_map(0u8..8, (docs, prop::option::weighted(0.85, judged)), 1..8).prop_map(|m| {
        let mut run = BTreeMap::new();
        let mut qrels = BTreeMap::new();
        for (q, (docs, judged)) in m {
            let q = format!("q{q}");
            run.insert(q.clone(), docs.into_iter().map(|(d, s)| (format!("d{d}"), s)).collect());
            if let Some(j) = judged {
                qrels.insert(q, j.into_iter().map(|(d, g)| (format!("d{d}"), g)).collect());
            }
        }
        Case { run, qrels }
    })
}

proptest! {
    #[test]
    fn matches_reference(c in case()) {
        let (run, qrels) = c.build();
        for k in [1, 3, 10, 100] {
            let (ndcg, recall) = reference(&c.run, &c.qrels, k);
            prop_assert!((ndcg_at_k(&run, &qrels, k) - ndcg).abs() < 1e-9);
            prop_assert!((recall_at_k(&run, &qrels, k) - recall).abs() < 1e-9);
        }
    }

    #[test]
    fn bounded_and_monotone_recall(c in case()) {
        let (run, qrels) = c.build();
        let r = evaluate(&run, &qrels, &[1, 5, 10, 100]).unwrap();
        let mut prev = 0.0;
        for k in [1, 5, 10, 100] {
            let n = r.ndcg(k).unwrap();
            let rec = r.recall(k).unwrap();
            prop_assert!((0.0..=1.0).contains(&n));
            prop_assert!(rec >= prev - 1e-12 && rec <= 1.0);
            prev = rec;
        }
    }

    #[test]
    fn perfect_run_scores_one(c in case()) {
        let (_, qrels) = c.build();
        let mut run = Run::new();
        let mut any_relevant = !c.qrels.is_empty();
        for (q, judged) in &c.qrels {
            any_relevant &= judged.values().any(|&g| g > 0);
            run.insert(q, judged.iter().map(|(d, &g)| (d.clone(), f64::from(g))).collect()).unwrap();
        }
        if any_relevant {
            prop_assert_eq!(ndcg_at_k(&run, &qrels, 100), 1.0);
            prop_assert_eq!(recall_at_k(&run, &qrels, 100), 1.0);
        }
        prop_assert_eq!(ndcg_at_k(&Run::new(), &qrels, 10), 0.0);
        prop_assert_eq!(recall_at_k(&Run::new(), &qrels, 10), 0.0);
    }

    #[test]
    fn trec_round_trip(c in case()) {
        let (run, _) = c.build();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.trec");
        run.write_trec(&path, "t").unwrap();
        let back = parse_run(&path).unwrap();
        for q in run.query_ids() {
            prop_assert_eq!(run.ranking(q), back.ranking(q));
        }
    }
}

#[test]
fn query_without_relevant_documents() {
    let mut qrels = Qrels::new();
    qrels.insert("q1", "d1", 1).unwrap();
    qrels.insert("q2", "d2", 0).unwrap();
    let mut run = Run::new();
    run.insert("q1", vec![("d1".into(), 1.0)]).unwrap();
    run.insert("q2", vec![("d2".into(), 1.0)]).unwrap();
    run.insert("q3", vec![("d3".into(), 1.0)]).unwrap();
    let r = evaluate(&run, &qrels, &[10]).unwrap();
    // q2 counts as 0 for NDCG and is skipped for recall; q3 has no qrels
    assert_eq!(r.ndcg(10), Some(0.5));
    assert_eq!(r.recall(10), Some(1.0));
    assert_eq!(r.excluded_queries, vec!["q3".to_string()]);
}

#[test]
fn malformed_run_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.trec");
    std::fs::write(&path, "q1 Q0 d1 1 0.5 t\nq1 Q0 d2 2 notanumber t\n").unwrap();
    let err = parse_run(&path).unwrap_err().to_string();
    assert!(err.contains(":2:"), "{err}");
}
