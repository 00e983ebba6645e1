use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::LevelFilter;
use serde_json::json;
use udl_core::adapter::AdapterClient;
use udl_core::evalir::{evaluate, parse_run, rank_documents};
use udl_core::keyword::{DocumentType, KeywordExtractor};
use udl_core::lexical::{fit_tfidf, DEFAULT_GAMMA, DEFAULT_MAX_FEATURES};
use udl_core::linker::{analyze, run_udl, write_units_jsonl, Extractors, DEFAULT_QUERIES_PER_UNIT};
use udl_core::quality::quality_check;
use udl_core::similarity::{EmbeddingProvider, EmbeddingsFile, RemoteEmbedder, VectorSet};
use udl_core::synthesis::{
    emit_training_pairs, export_generation_units, import_synthetic_queries, load_generation_units, load_merged_units,
    read_training_pairs, remote_generate, stub_generate, write_synthetic_queries,
};
use udl_core::{load_corpus, load_qrels, load_queries, MergeStrategy, PipelineConfig, SimilarityModel};

use crate::config::ConfigFile;
use crate::{AnalyzeArgs, Cli, CliError, Command, EvalArgs, ExportArgs, ImportArgs, LinkArgs, QualityArgs, RankArgs};

pub const REPORT_FILE: &str = "decision_report.json";
pub const LINKSET_FILE: &str = "linkset.jsonl";
pub const UNITS_FILE: &str = "units.jsonl";

type CliResult<T> = Result<T, CliError>;

struct Globals {
    config: ConfigFile,
    adapter_url: Option<String>,
}

impl Globals {
    fn adapter(&self, what: &str) -> CliResult<AdapterClient> {
        match &self.adapter_url {
            Some(url) if !url.trim().is_empty() => Ok(AdapterClient::new(url.trim())),
            _ => Err(CliError::config(format!(
                "{what} needs an adapter: set UDL_ADAPTER_URL, --adapter-url or adapter_url"
            ))),
        }
    }
}

pub fn dispatch(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    init_logging(config.resolve(cli.log_level.clone(), "log_level")?.as_deref())?;
    if let Some(n) = config.resolve(cli.threads, "threads")? {
        if n == 0 {
            return Err(CliError::config("threads must be at least 1"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
    let adapter_url = cli
        .adapter_url
        .clone()
        .or_else(|| config.raw("adapter_url").map(str::to_string));
    let globals = Globals { config, adapter_url };
    match cli.command {
        Command::Analyze(a) => cmd_analyze(&globals, a),
        Command::Link(a) => cmd_link(&globals, a),
        Command::ExportUnits(a) => cmd_export(&globals, a),
        Command::ImportQueries(a) => cmd_import(a),
        Command::Quality(a) => cmd_quality(&globals, a),
        Command::Rank(a) => cmd_rank(&globals, a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn init_logging(level: Option<&str>) -> CliResult<()> {
    let level = match level.map(str::to_ascii_lowercase).as_deref() {
        None | Some("warn") => LevelFilter::Warn,
        Some("error") => LevelFilter::Error,
        Some("info") => LevelFilter::Info,
        Some("debug") => LevelFilter::Debug,
        Some("trace") => LevelFilter::Trace,
        Some("off") => LevelFilter::Off,
        Some(other) => return Err(CliError::config(format!("unknown log level {other:?}"))),
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    Ok(())
}

fn require_input(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::config(format!("{what} {} does not exist", path.display())))
    }
}

fn write_text(path: &Path, body: &str) -> CliResult<()> {
    std::fs::write(path, body).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>) -> CliResult<()> {
    let body = serde_json::to_string_pretty(value).expect("json serializes") + "\n";
    match out {
        Some(p) => write_text(p, &body),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(body.as_bytes()).and_then(|()| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(CliError::data(format!("writing to standard output: {e}")))
                }
                _ => Ok(()),
            }
        }
    }
}

/// Infinite ratios have no JSON number; they are written as null.
fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn terms_json(terms: &[(String, f64)]) -> serde_json::Value {
    terms.iter().map(|(t, e)| json!({"term": t, "entropy": e})).collect()
}

fn cmd_analyze(g: &Globals, a: AnalyzeArgs) -> CliResult<()> {
    let cfg = &g.config;
    let pipeline = PipelineConfig {
        gamma: cfg.resolve_or(a.gamma, "gamma", DEFAULT_GAMMA)?,
        max_features: cfg.resolve_or(a.max_features, "max_features", DEFAULT_MAX_FEATURES)?,
        doc_cap: cfg.resolve(a.doc_cap, "doc_cap")?,
        ..PipelineConfig::default()
    };
    pipeline.validate()?;
    require_input(&a.corpus, "corpus")?;
    let corpus = load_corpus(&a.corpus, None)?;
    let n_docs = pipeline
        .effective_cap(corpus.len())
        .map_or(corpus.len(), |c| c.min(corpus.len()));
    let (entropy, decision) = analyze(&corpus, &pipeline)?;
    let (highest, lowest) = entropy.extremes(a.top);
    let report = json!({
        "n_docs": n_docs,
        "n_terms": entropy.per_term_entropy.len(),
        "d_m": finite_or_null(entropy.d_m),
        "n_above": entropy.n_above,
        "n_at_or_below": entropy.n_at_or_below,
        "gamma": decision.gamma,
        "decision": decision.model,
        "highest_entropy": terms_json(&highest),
        "lowest_entropy": terms_json(&lowest),
    });
    emit_json(&report, a.out.as_deref())
}

fn extractor(
    g: &Globals,
    kind: DocumentType,
    backend: &str,
    gazetteer: Option<PathBuf>,
    vocabulary: Option<u64>,
) -> CliResult<KeywordExtractor> {
    let ex = match backend {
        "gazetteer" => {
            let Some(path) = gazetteer else {
                return Err(CliError::config(format!(
                    "the gazetteer backend needs --{kind}-gazetteer (or {kind}_gazetteer in the config)"
                )));
            };
            KeywordExtractor::gazetteer_file(kind, &path)?
        }
        "remote" => KeywordExtractor::remote(kind, g.adapter("remote NER")?),
        other => return Err(CliError::config(format!("unknown ner_backend {other:?}"))),
    };
    match vocabulary {
        Some(v) => Ok(ex.with_vocabulary_size(v)?),
        None => Ok(ex),
    }
}

fn embedding_provider(
    g: &Globals,
    backend: Option<String>,
    file: Option<PathBuf>,
) -> CliResult<Option<Box<dyn EmbeddingProvider>>> {
    let backend = backend.unwrap_or_else(|| if file.is_some() { "file".into() } else { "none".into() });
    match backend.as_str() {
        "none" => Ok(None),
        "file" => {
            let Some(path) = file else {
                return Err(CliError::config("embed_backend = file needs --embeddings"));
            };
            require_input(&path, "embeddings file")?;
            Ok(Some(Box::new(EmbeddingsFile::load(&path)?)))
        }
        "remote" => Ok(Some(Box::new(RemoteEmbedder::new(g.adapter("remote embeddings")?)))),
        other => Err(CliError::config(format!("unknown embed_backend {other:?}"))),
    }
}

fn cmd_link(g: &Globals, a: LinkArgs) -> CliResult<()> {
    let cfg = &g.config;
    let merge: String = cfg.resolve_or(a.merge, "merge", "concatenation".to_string())?;
    let merge_strategy: MergeStrategy = merge.parse().map_err(CliError::config)?;
    let skip: bool = cfg.resolve_or(None, "skip_translation_failures", false)?;
    let pipeline = PipelineConfig {
        gamma: cfg.resolve_or(a.gamma, "gamma", DEFAULT_GAMMA)?,
        delta: cfg.resolve_or(a.delta, "delta", udl_core::keyword::DEFAULT_DELTA)?,
        max_features: cfg.resolve_or(a.max_features, "max_features", DEFAULT_MAX_FEATURES)?,
        doc_cap: cfg.resolve(a.doc_cap, "doc_cap")?,
        merge_strategy,
        seed: cfg.resolve_or(a.seed, "seed", 0)?,
        n_queries_per_unit: cfg.resolve_or(a.n_queries, "n_queries", DEFAULT_QUERIES_PER_UNIT)?,
        skip_translation_failures: a.skip_translation_failures || skip,
    };
    pipeline.validate()?;
    let ner_backend: String = cfg.resolve_or(a.ner_backend, "ner_backend", "gazetteer".to_string())?;
    let general_gaz = cfg.resolve_path(a.general_gazetteer, "general_gazetteer")?;
    let specialized_gaz = cfg.resolve_path(a.specialized_gazetteer, "specialized_gazetteer")?;
    let v_general = cfg.resolve(a.v_general, "v_general")?;
    let v_specialized = cfg.resolve(a.v_specialized, "v_specialized")?;
    let embed_backend = cfg.resolve(a.embed_backend, "embed_backend")?;
    let embeddings = cfg.resolve_path(a.embeddings, "embeddings")?;

    require_input(&a.corpus, "corpus")?;
    let extractors = Extractors {
        general: extractor(g, DocumentType::General, &ner_backend, general_gaz, v_general)?,
        specialized: extractor(
            g,
            DocumentType::Specialized,
            &ner_backend,
            specialized_gaz,
            v_specialized,
        )?,
    };
    let provider = embedding_provider(g, embed_backend, embeddings)?;

    let corpus = load_corpus(&a.corpus, None)?;
    let outcome = run_udl(&corpus, &pipeline, &extractors, provider.as_deref(), None)?;

    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::data(format!("{}: {e}", a.out_dir.display())))?;
    write_text(&a.out_dir.join(REPORT_FILE), &(outcome.report().to_json() + "\n"))?;
    outcome.links.write_jsonl(&a.out_dir.join(LINKSET_FILE))?;
    write_units_jsonl(&outcome.units, &a.out_dir.join(UNITS_FILE))?;
    eprintln!(
        "{} documents: {} similarity (D_M {}), {} documents, threshold {}, {} pairs, {} unlinked",
        outcome.n_docs,
        outcome.model.model,
        outcome.model.d_m,
        outcome.threshold.doc_type,
        outcome.threshold.threshold,
        outcome.links.pairs.len(),
        outcome.links.unlinked.len()
    );
    Ok(())
}

fn cmd_export(g: &Globals, a: ExportArgs) -> CliResult<()> {
    let n: usize = g
        .config
        .resolve_or(a.n_queries, "n_queries", DEFAULT_QUERIES_PER_UNIT)?;
    if n == 0 {
        return Err(CliError::config("n_queries must be at least 1"));
    }
    let generator = match a.generate.as_deref() {
        None => None,
        Some(kind @ ("stub" | "remote")) => {
            if a.queries_out.is_none() {
                return Err(CliError::config("--generate needs --queries-out"));
            }
            Some(kind)
        }
        Some(other) => return Err(CliError::config(format!("unknown generator {other:?}"))),
    };
    let client = match generator {
        Some("remote") => Some(g.adapter("remote generation")?),
        _ => None,
    };
    require_input(&a.units, "units file")?;
    let merged = load_merged_units(&a.units)?;
    let units = export_generation_units(&merged, n, &a.out)?;
    if let (Some(kind), Some(path)) = (generator, a.queries_out.as_deref()) {
        let queries = match (kind, &client) {
            ("remote", Some(c)) => remote_generate(c, &units)?,
            _ => stub_generate(&units, a.stub_tokens),
        };
        write_synthetic_queries(&queries, path)?;
        eprintln!("{} units, {} queries", units.len(), queries.len());
    } else {
        eprintln!("{} units", units.len());
    }
    Ok(())
}

fn cmd_import(a: ImportArgs) -> CliResult<()> {
    require_input(&a.units, "units file")?;
    require_input(&a.queries, "queries file")?;
    let units = load_generation_units(&a.units)?;
    let pairs = import_synthetic_queries(&a.queries, &units)?;
    let rows = emit_training_pairs(&pairs, &a.out)?;
    eprintln!("{} queries, {rows} training rows", pairs.len());
    Ok(())
}

/// Document and query vectors in one space: TF-IDF fitted on the corpus,
/// or a precomputed embeddings file covering both.
fn vector_spaces(
    corpus_path: &Path,
    queries: &[(String, String)],
    embeddings: Option<&Path>,
    max_features: usize,
) -> CliResult<(VectorSet, VectorSet)> {
    let corpus = load_corpus(corpus_path, None)?;
    match embeddings {
        Some(path) => {
            let file = EmbeddingsFile::load(path)?;
            let docs: Vec<(String, String)> = corpus.iter().map(|d| (d.id.clone(), d.full_text())).collect();
            Ok((file.embed(&docs)?, file.embed(queries)?))
        }
        None => {
            let model = fit_tfidf(&corpus, max_features)?;
            let docs = udl_core::similarity::lexical_vectors(&model, &corpus)?;
            let ids = queries.iter().map(|(id, _)| id.clone()).collect();
            let vecs = queries.iter().map(|(_, t)| model.transform(t)).collect();
            let qs = VectorSet::sparse(SimilarityModel::Lexical, ids, model.vocabulary_size(), vecs)?;
            Ok((docs, qs))
        }
    }
}

fn cmd_quality(g: &Globals, a: QualityArgs) -> CliResult<()> {
    let max_features = g
        .config
        .resolve_or(a.max_features, "max_features", DEFAULT_MAX_FEATURES)?;
    let embeddings = g.config.resolve_path(a.embeddings, "embeddings")?;
    for (p, what) in [
        (&a.corpus, "corpus"),
        (&a.train_queries, "train queries"),
        (&a.qrels, "qrels"),
        (&a.pairs, "training pairs"),
    ] {
        require_input(p, what)?;
    }
    let train = load_queries(&a.train_queries)?;
    let qrels = load_qrels(&a.qrels)?;
    let pairs = read_training_pairs(&a.pairs)?;

    let mut seen = HashSet::new();
    let mut items = Vec::new();
    for q in &train {
        seen.insert(q.id.clone());
        items.push((q.id.clone(), q.text.clone()));
    }
    for p in &pairs {
        if !seen.insert(p.query_id.clone()) {
            return Err(CliError::data(format!(
                "query id {:?} is used by both a training and a synthetic query",
                p.query_id
            )));
        }
        items.push((p.query_id.clone(), p.query_text.clone()));
    }
    let (docs, queries) = vector_spaces(&a.corpus, &items, embeddings.as_deref(), max_features)?;
    let report = quality_check(&train, &qrels, &pairs, &queries, &docs)?;
    eprintln!(
        "{} linked units ({:.3} both mapped), {} single ({:.3} mapped), {} uncovered",
        report.n_linked,
        report.fraction_both,
        report.n_single,
        report.fraction_single_mapped,
        report.uncovered.len()
    );
    emit_json(
        &serde_json::to_value(&report).expect("report serializes"),
        a.out.as_deref(),
    )
}

fn cmd_rank(g: &Globals, a: RankArgs) -> CliResult<()> {
    let max_features = g
        .config
        .resolve_or(a.max_features, "max_features", DEFAULT_MAX_FEATURES)?;
    let embeddings = g.config.resolve_path(a.embeddings, "embeddings")?;
    if a.k == 0 {
        return Err(CliError::config("k must be at least 1"));
    }
    require_input(&a.corpus, "corpus")?;
    require_input(&a.queries, "queries")?;
    let queries: Vec<(String, String)> = load_queries(&a.queries)?.into_iter().map(|q| (q.id, q.text)).collect();
    let (docs, qs) = vector_spaces(&a.corpus, &queries, embeddings.as_deref(), max_features)?;
    let run = rank_documents(&qs, &docs, a.k)?;
    run.write_trec(&a.out, &a.tag)?;
    Ok(())
}

/// Parses a comma-separated list of positive cutoffs.
pub fn parse_cutoffs(s: &str) -> CliResult<Vec<usize>> {
    let ks: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::config(format!("bad cutoff list {s:?}: {e}")))?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(CliError::config(format!(
            "bad cutoff list {s:?}: cutoffs must be positive"
        )));
    }
    Ok(ks)
}

fn cmd_eval(a: EvalArgs) -> CliResult<()> {
    let ks = parse_cutoffs(&a.k)?;
    require_input(&a.run, "run file")?;
    require_input(&a.qrels, "qrels")?;
    let run = parse_run(&a.run)?;
    let qrels = load_qrels(&a.qrels)?;
    let result = evaluate(&run, &qrels, &ks)?;
    emit_json(
        &serde_json::to_value(&result).expect("result serializes"),
        a.out.as_deref(),
    )
}
