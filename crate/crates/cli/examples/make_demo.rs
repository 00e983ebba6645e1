//! Regenerates the bundled demo data: `cargo run -p udl-cli --example make_demo [dir]`.

use std::path::PathBuf;

use udl_core::corpus::write_queries;
use udl_core::demo::{demo_data, GENERAL_PHRASES, SPECIALIZED_PHRASES};
use udl_core::evalir::Run;
use udl_core::Corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/demo"));
    std::fs::create_dir_all(&dir)?;
    let demo = demo_data(200, 42);
    Corpus::new(demo.documents)?.write_jsonl(&dir.join("corpus.jsonl"))?;
    write_queries(&demo.queries, &dir.join("queries.jsonl"))?;
    demo.qrels.write_tsv(&dir.join("qrels.tsv"))?;
    std::fs::write(dir.join("general.txt"), GENERAL_PHRASES.join("\n") + "\n")?;
    std::fs::write(dir.join("specialized.txt"), SPECIALIZED_PHRASES.join("\n") + "\n")?;

    // every judged document, scored by its grade
    let mut run = Run::new();
    for (q, judged) in demo.qrels.iter() {
        run.insert(q, judged.iter().map(|(d, &g)| (d.clone(), g as f64)).collect())?;
    }
    run.write_trec(&dir.join("perfect.trec"), "perfect")?;
    println!("wrote {}", dir.display());
    Ok(())
}
