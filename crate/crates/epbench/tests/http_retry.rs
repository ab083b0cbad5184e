//! Retry behavior of the HTTP provider against a local canned server.
//!
//! A plain TcpListener serves two 429 responses followed by one successful
//! chat completion; the gateway must retry through the rate limits and
//! return the final content after exactly three requests.

use epbench::gateway::{ChatBackend, ChatRequest, Gateway, HttpProvider, RetryPolicy};
use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::time::Duration;

fn read_request(stream: &mut std::net::TcpStream) {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    loop {
        let n = stream.read(&mut chunk).unwrap();
        buf.extend_from_slice(&chunk[..n]);
        let text = String::from_utf8_lossy(&buf);
        if let Some(header_end) = text.find("\r\n\r\n") {
            let content_length: usize = text
                .lines()
                .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse().unwrap()))
                .unwrap_or(0);
            if buf.len() >= header_end + 4 + content_length {
                return;
            }
        }
        if n == 0 {
            return;
        }
    }
}

fn respond(stream: &mut std::net::TcpStream, status: &str, body: &str) {
    let response = format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(response.as_bytes()).unwrap();
}

#[test]
fn retries_through_rate_limits_then_succeeds() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = std::thread::spawn(move || {
        let mut served = 0usize;
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            read_request(&mut stream);
            served += 1;
            if served < 3 {
                respond(&mut stream, "429 Too Many Requests", r#"{"error": "slow down"}"#);
            } else {
                respond(
                    &mut stream,
                    "200 OK",
                    r#"{"choices": [{"message": {"role": "assistant", "content": "hello world"}}]}"#,
                );
                break;
            }
        }
        served
    });

    let provider = HttpProvider::new("fake", &format!("http://{addr}")).with_api_key("test-key");
    let gateway = Gateway::new(
        RetryPolicy {
            max_attempts: 5,
            base_backoff: Duration::from_millis(10),
        },
        1000.0,
    )
    .with_provider("fake", Arc::new(provider));

    let response = gateway
        .chat(&ChatRequest {
            provider_id: "fake".into(),
            model: "test-model".into(),
            system_prompt: "You are a test.".into(),
            user_prompt: "Say hello.".into(),
            max_output_tokens: 16,
            temperature: 0.0,
            seed: Some(1),
        })
        .unwrap();
    assert_eq!(response, "hello world");
    assert_eq!(server.join().unwrap(), 3, "expected exactly three requests");
    assert_eq!(gateway.live_call_count(), 3);
}
