use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};
use udl_core::adapter::AdapterClient;
use udl_core::keyword::{DocumentType, KeywordExtractor};
use udl_core::similarity::{EmbeddingProvider, RemoteEmbedder};
use udl_core::synthesis::{build_training_pairs, remote_generate, GenerationUnit};
use udl_core::{ErrorClass, UdlError};

type Handler = dyn Fn(&str, &Value) -> (u16, Value) + Send + Sync;

/// Minimal HTTP/1.1 server: one thread per connection, keep-alive aware.
struct Mock {
    url: String,
    requests: Arc<Mutex<Vec<(String, Value)>>>,
}

fn serve(handler: impl Fn(&str, &Value) -> (u16, Value) + Send + Sync + 'static) -> Mock {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let handler: Arc<Handler> = Arc::new(handler);
    let log = requests.clone();
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let handler = handler.clone();
            let log = log.clone();
            thread::spawn(move || handle(stream, &*handler, &log));
        }
    });
    Mock { url, requests }
}

fn handle(stream: TcpStream, handler: &Handler, log: &Mutex<Vec<(String, Value)>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut out = stream;
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
            return;
        }
        let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    length = v.trim().parse().unwrap();
                }
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body).unwrap();
        let body: Value = if body.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&body).unwrap()
        };
        log.lock().unwrap().push((path.clone(), body.clone()));
        let (status, reply) = handler(&path, &body);
        let reply = reply.to_string();
        write!(
            out,
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{reply}",
            reply.len()
        )
        .unwrap();
        out.flush().unwrap();
    }
}

fn texts(body: &Value) -> Vec<String> {
    body["texts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t.as_str().unwrap().to_string())
        .collect()
}

fn adapter(path: &str, body: &Value) -> (u16, Value) {
    match path {
        "/manifest" => (200, json!({"embedding": {"name": "toy", "dim": 2}})),
        "/embed" => {
            let v: Vec<Value> = texts(body).iter().map(|t| json!([t.len() as f64, 1.0])).collect();
            (200, json!({"vectors": v, "dim": 2}))
        }
        "/ner" => {
            let vocab = if body["model"] == "general" { 50_000 } else { 785_000 };
            let counts: Vec<usize> = texts(body).iter().map(|t| t.split_whitespace().count()).collect();
            (200, json!({"counts": counts, "vocabulary_size": vocab}))
        }
        "/generate" => {
            let n = body["n"].as_u64().unwrap() as usize;
            let q: Vec<Vec<String>> = texts(body)
                .iter()
                .map(|t| (0..n).map(|k| format!("{t} #{k}")).collect())
                .collect();
            (200, json!({"queries": q}))
        }
        _ => (404, json!({"error": "not found"})),
    }
}

fn strings(n: usize) -> Vec<String> {
    (0..n).map(|i| "w ".repeat(i + 1).trim().to_string()).collect()
}

#[test]
fn embed_batches_and_preserves_order() {
    let mock = serve(adapter);
    let client = AdapterClient::new(&mock.url).with_batch_size(4);
    let input = strings(10);
    let (vectors, dim) = client.embed(&input).unwrap();
    assert_eq!(dim, 2);
    assert_eq!(vectors.len(), 10);
    for (t, v) in input.iter().zip(&vectors) {
        assert_eq!(v[0], t.len() as f64);
    }
    let reqs = mock.requests.lock().unwrap();
    let sizes: Vec<usize> = reqs.iter().map(|(_, b)| b["texts"].as_array().unwrap().len()).collect();
    assert_eq!(sizes, vec![4, 4, 2]);
}

#[test]
fn remote_embedder_returns_unit_vectors() {
    let mock = serve(adapter);
    let emb = RemoteEmbedder::new(AdapterClient::new(&mock.url));
    let set = emb
        .embed(&[("x".into(), "abc".into()), ("y".into(), "abc".into())])
        .unwrap();
    assert_eq!(set.ids(), ["x", "y"]);
    for i in 0..2 {
        assert!((set.norm(i) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn ner_counts_and_vocabulary() {
    let mock = serve(adapter);
    let client = AdapterClient::new(&mock.url).with_batch_size(3);
    let (counts, vocab) = client.ner(&strings(5), "specialized").unwrap();
    assert_eq!(counts, vec![1, 2, 3, 4, 5]);
    assert_eq!(vocab, Some(785_000));
    assert_eq!(mock.requests.lock().unwrap()[0].1["model"], "specialized");

    // a configured vocabulary size wins over the reported one
    let ex = KeywordExtractor::remote(DocumentType::General, AdapterClient::new(&mock.url))
        .with_vocabulary_size(123)
        .unwrap();
    assert_eq!(ex.count_keywords(&strings(3)).unwrap(), 6);
    assert_eq!(ex.vocabulary_size, 123);
}

#[test]
fn generate_yields_n_queries_per_unit() {
    let mock = serve(adapter);
    let client = AdapterClient::new(&mock.url);
    let units: Vec<GenerationUnit> = (0..5)
        .map(|i| GenerationUnit {
            unit_id: format!("u{i}"),
            doc_ids: if i % 2 == 0 {
                vec![format!("a{i}"), format!("b{i}")]
            } else {
                vec![format!("a{i}")]
            },
            text: format!("unit text {i}"),
            n_queries: 3,
        })
        .collect();
    let queries = remote_generate(&client, &units).unwrap();
    assert_eq!(queries.len(), 15);
    let pairs = build_training_pairs(&queries, &units).unwrap();
    for u in &units {
        let n = pairs.iter().filter(|p| p.positive_doc_ids == u.doc_ids).count();
        assert_eq!(n, 3);
    }
    assert_eq!(client.manifest().unwrap()["embedding"]["dim"], 2);
}

#[test]
fn short_responses_are_backend_errors() {
    let mock = serve(|path, body| match path {
        "/embed" => (200, json!({"vectors": [[1.0, 0.0]], "dim": 2})),
        "/ner" => (200, json!({"counts": [], "vocabulary_size": 1})),
        "/generate" => {
            let n = texts(body).len();
            (200, json!({"queries": vec![vec!["only one"]; n]}))
        }
        _ => (500, json!({})),
    });
    let client = AdapterClient::new(&mock.url);
    let err = client.embed(&strings(2)).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Backend);
    assert!(matches!(
        client.ner(&strings(1), "general"),
        Err(UdlError::Transport(_))
    ));
    let unit = GenerationUnit {
        unit_id: "u".into(),
        doc_ids: vec!["d".into()],
        text: "t".into(),
        n_queries: 3,
    };
    assert!(matches!(remote_generate(&client, &[unit]), Err(UdlError::Transport(_))));
}

#[test]
fn http_errors_and_unreachable_servers_are_backend_errors() {
    let mock = serve(|_, _| (503, json!({"error": "model not loaded"})));
    let err = AdapterClient::new(&mock.url).embed(&strings(1)).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Backend);

    // bind then drop to get a port nobody listens on
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = AdapterClient::new(format!("http://127.0.0.1:{port}"))
        .manifest()
        .unwrap_err();
    assert_eq!(err.class(), ErrorClass::Backend);
}
