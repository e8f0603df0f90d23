//! HTTP clients against a local socket that scripts its answers.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use procgraph::http::{HttpChatBackend, HttpNli, JsonClient, RetryPolicy};
use procgraph_core::backends::{ChatBackend, ChatMessage, ChatParams, NliBackend, NliLabel};

struct Seen {
    head: String,
    body: String,
}

/// Serve one connection per scripted (status, body) reply.
fn serve(replies: Vec<(u16, &'static str)>) -> (String, mpsc::Receiver<Seen>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut head = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                head.push_str(&line);
            }
            let len = head
                .lines()
                .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                .unwrap_or(0);
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                status,
                body.len(),
                body
            )
            .unwrap();
            tx.send(Seen {
                head,
                body: String::from_utf8(buf).unwrap(),
            })
            .unwrap();
        }
    });
    (url, rx)
}

fn quick(max_retries: u32, key_env: &str) -> JsonClient {
    let retry = RetryPolicy {
        max_retries,
        base_delay: Duration::from_millis(5),
        max_delay: Duration::from_millis(20),
        per_try_timeout: Duration::from_secs(5),
    };
    JsonClient::new(retry, key_env, 2).unwrap()
}

const REPLY: &str = r#"{"choices":[{"message":{"role":"assistant","content":"Graph:\nStart -> End"}}]}"#;

#[test]
fn chat_retries_rate_limits_then_succeeds() {
    let (url, seen) = serve(vec![(429, "{}"), (429, "{}"), (200, REPLY)]);
    std::env::set_var("PROCGRAPH_MOCK_TOKEN_A", "sekrit");
    let backend = HttpChatBackend {
        transport: quick(4, "PROCGRAPH_MOCK_TOKEN_A"),
    };
    let params = ChatParams {
        endpoint: url,
        ..ChatParams::default()
    };
    let answer = backend.chat(&[ChatMessage::user("hello")], &params).unwrap();
    assert_eq!(answer, "Graph:\nStart -> End");
    let requests: Vec<Seen> = seen.try_iter().collect();
    assert_eq!(requests.len(), 3);
    for r in &requests {
        assert!(r.head.starts_with("POST /chat/completions "), "{}", r.head);
        assert!(r.head.to_ascii_lowercase().contains("authorization: bearer sekrit"));
        let body: serde_json::Value = serde_json::from_str(&r.body).unwrap();
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["seed"], 42);
        assert_eq!(body["messages"][0]["content"], "hello");
    }
}

#[test]
fn chat_gives_up_after_retry_budget() {
    let (url, seen) = serve(vec![(503, "{}"), (503, "{}")]);
    let backend = HttpChatBackend {
        transport: quick(1, "PROCGRAPH_MOCK_TOKEN_UNSET"),
    };
    let params = ChatParams {
        endpoint: url,
        ..ChatParams::default()
    };
    let e = backend.chat(&[ChatMessage::user("hello")], &params).unwrap_err();
    assert!(e.to_string().contains("503"), "{}", e);
    let requests: Vec<Seen> = seen.try_iter().collect();
    assert_eq!(requests.len(), 2);
    assert!(!requests[0].head.to_ascii_lowercase().contains("authorization"));
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = serve(vec![(401, r#"{"error":"no"}"#)]);
    let backend = HttpChatBackend {
        transport: quick(4, "PROCGRAPH_MOCK_TOKEN_UNSET"),
    };
    let params = ChatParams {
        endpoint: url,
        ..ChatParams::default()
    };
    assert!(backend.chat(&[ChatMessage::user("x")], &params).is_err());
    assert_eq!(seen.try_iter().count(), 1);
}

#[test]
fn nli_reads_label_and_confidence() {
    let (url, seen) = serve(vec![(200, r#"{"label":"contradiction","confidence":0.93}"#)]);
    let nli = HttpNli {
        transport: quick(0, "PROCGRAPH_MOCK_TOKEN_UNSET"),
        url,
    };
    let v = nli.nli("membership expired", "membership not expired").unwrap();
    assert_eq!(v.label, NliLabel::Contradiction);
    assert!((v.confidence - 0.93).abs() < 1e-12);
    let body: serde_json::Value = serde_json::from_str(&seen.recv().unwrap().body).unwrap();
    assert_eq!(body["premise"], "membership expired");
    assert_eq!(body["hypothesis"], "membership not expired");
}
