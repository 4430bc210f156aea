//! Remote backends against a throwaway HTTP server on localhost.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use densaug::embed::{embed_texts, EmbeddingProvider, RemoteEmbedder};
use densaug::llm::{ChatBackend, ChatRequest, Gateway, RemoteChatBackend, RetryPolicy};
use densaug::Error;

struct Server {
    url: String,
    requests: Arc<Mutex<Vec<Value>>>,
}

fn read_request(stream: &mut TcpStream) -> Option<(String, Value)> {
    let mut reader = BufReader::new(stream);
    let mut head = String::new();
    let mut length = 0;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            length = v.trim().parse().ok()?;
        }
        if line == "\r\n" {
            break;
        }
        head.push_str(&line);
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).ok()?;
    Some((head, serde_json::from_slice(&body).unwrap_or(Value::Null)))
}

/// Serves `responses` in order, one per connection, then stops.
/// `respond` builds a body from each request when the status is 200.
fn serve(responses: Vec<u16>, respond: impl Fn(&Value) -> Value + Send + 'static) -> Server {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let seen = Arc::clone(&requests);
    thread::spawn(move || {
        for status in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let Some((head, body)) = read_request(&mut stream) else { continue };
            assert!(head.starts_with("POST /v1"), "{head}");
            let payload = if status == 200 { respond(&body) } else { json!({"error": "busy"}) };
            seen.lock().unwrap().push(body);
            let text = payload.to_string();
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{text}",
                text.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    Server { url, requests }
}

fn fast_retry(max_retries: u32) -> RetryPolicy {
    RetryPolicy {
        max_retries,
        initial_backoff: Duration::from_millis(1),
        max_backoff: Duration::from_millis(5),
    }
}

fn chat_reply(_: &Value) -> Value {
    json!({"choices": [{"message": {"role": "assistant", "content": "{\"total score\": 10, \"detail\": []}"}}]})
}

#[test]
fn chat_retries_a_rate_limit_then_succeeds() {
    let server = serve(vec![429, 200], chat_reply);
    let backend = RemoteChatBackend::new(&server.url, Some("k".into()), Duration::from_secs(5)).unwrap();
    let gateway = Gateway::new(Arc::new(backend), fast_retry(3), 1);
    let resp = gateway
        .complete(&ChatRequest::new("m1", "hello").with_system_prompt("be brief"))
        .unwrap();
    assert_eq!(resp.attempts, 2);
    assert_eq!(resp.retries.len(), 1);
    assert!(resp.text.contains("total score"));

    let requests = server.requests.lock().unwrap();
    assert_eq!(requests.len(), 2);
    assert_eq!(requests[1]["model"], "m1");
    assert_eq!(requests[1]["messages"][0]["role"], "system");
    assert_eq!(requests[1]["messages"][1]["content"], "hello");
    assert_eq!(requests[1]["temperature"], 0.0);
}

#[test]
fn chat_gives_up_after_the_retry_budget() {
    let server = serve(vec![503, 503], chat_reply);
    let backend = RemoteChatBackend::new(&server.url, None, Duration::from_secs(5)).unwrap();
    let gateway = Gateway::new(Arc::new(backend), fast_retry(1), 1);
    let err = gateway.complete(&ChatRequest::new("m", "x")).unwrap_err();
    assert!(matches!(err, Error::Backend { status: 503, .. }), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let server = serve(vec![400], chat_reply);
    let backend = RemoteChatBackend::new(&server.url, None, Duration::from_secs(5)).unwrap();
    let gateway = Gateway::new(Arc::new(backend), fast_retry(3), 1);
    assert!(matches!(gateway.complete(&ChatRequest::new("m", "x")), Err(Error::Backend { status: 400, .. })));
    assert_eq!(server.requests.lock().unwrap().len(), 1);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let backend = RemoteChatBackend::new(format!("http://127.0.0.1:{port}/v1"), None, Duration::from_secs(2)).unwrap();
    let err = backend.send(&ChatRequest::new("m", "x")).unwrap_err();
    assert!(matches!(err, Error::Transport(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn embedder_batches_and_reorders_by_index() {
    // Answers in reverse order with explicit indices.
    let server = serve(vec![200, 200, 200], |body| {
        let n = body["input"].as_array().unwrap().len();
        let data: Vec<Value> = (0..n)
            .rev()
            .map(|i| json!({"index": i, "embedding": [i as f64 + 1.0, 1.0]}))
            .collect();
        json!({"data": data})
    });
    let embedder = RemoteEmbedder::new(&server.url, "e", None, 2, 2, Duration::from_secs(5), fast_retry(0)).unwrap();
    assert_eq!(embedder.batch_size(), 2);
    let texts: Vec<String> = (0..5).map(|i| format!("text {i}")).collect();
    let vectors = embed_texts(&texts, &embedder).unwrap();
    assert_eq!(vectors.len(), 5);

    let requests = server.requests.lock().unwrap();
    let sizes: Vec<usize> = requests.iter().map(|r| r["input"].as_array().unwrap().len()).collect();
    let mut sorted = sizes.clone();
    sorted.sort();
    assert_eq!(sorted, [1, 2, 2]);
    // Within each batch, the first text got [1, 1] and the second [2, 1].
    let ratio = |i: usize| vectors[i].values()[0] / vectors[i].values()[1];
    assert_eq!((ratio(0), ratio(1), ratio(4)), (1.0, 2.0, 1.0));
    assert!(requests.iter().all(|r| r["model"] == "e"));
}

#[test]
fn embedder_rejects_wrong_dimensions() {
    let server = serve(vec![200], |_| json!([[1.0, 2.0, 3.0]]));
    let embedder = RemoteEmbedder::new(&server.url, "e", None, 2, 8, Duration::from_secs(5), fast_retry(0)).unwrap();
    assert!(embed_texts(&["one".to_string()], &embedder).is_err());
}
