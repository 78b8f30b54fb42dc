//! A scripted chat-completion endpoint on a loopback socket.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

#[derive(Debug, Clone)]
pub enum Reply {
    Status {
        code: u16,
        headers: Vec<(String, String)>,
        body: String,
    },
    /// Accept the connection and say nothing for this long.
    Stall(Duration),
}

impl Reply {
    pub fn ok(content: &str) -> Reply {
        let body = serde_json::json!({
            "model": "stub-model",
            "choices": [{"message": {"role": "assistant", "content": content}}],
        });
        Reply::Status { code: 200, headers: vec![], body: body.to_string() }
    }

    pub fn status(code: u16) -> Reply {
        Reply::Status { code, headers: vec![], body: "{}".into() }
    }

    pub fn with_header(mut self, k: &str, v: &str) -> Reply {
        if let Reply::Status { headers, .. } = &mut self {
            headers.push((k.into(), v.into()));
        }
        self
    }
}

pub struct Stub {
    pub url: String,
    pub requests: Arc<Mutex<Vec<serde_json::Value>>>,
    pub hits: Arc<AtomicUsize>,
    pub max_concurrent: Arc<AtomicUsize>,
}

type Script = Arc<dyn Fn(usize, &serde_json::Value) -> Reply + Send + Sync>;

fn read_request(stream: &mut TcpStream) -> Option<serde_json::Value> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body).ok()?;
    serde_json::from_slice(&body).ok()
}

/// Serves each connection on its own thread; `script` picks the reply for the n-th request.
pub fn serve(script: impl Fn(usize, &serde_json::Value) -> Reply + Send + Sync + 'static) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let script: Script = Arc::new(script);
    let requests = Arc::new(Mutex::new(Vec::new()));
    let hits = Arc::new(AtomicUsize::new(0));
    let current = Arc::new(AtomicUsize::new(0));
    let max_concurrent = Arc::new(AtomicUsize::new(0));
    let (r, h, c, m) = (requests.clone(), hits.clone(), current.clone(), max_concurrent.clone());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let (script, r, h, c, m) = (script.clone(), r.clone(), h.clone(), c.clone(), m.clone());
            thread::spawn(move || {
                let now = c.fetch_add(1, Ordering::SeqCst) + 1;
                m.fetch_max(now, Ordering::SeqCst);
                if let Some(req) = read_request(&mut stream) {
                    let n = h.fetch_add(1, Ordering::SeqCst);
                    r.lock().unwrap().push(req.clone());
                    match script(n, &req) {
                        Reply::Stall(d) => thread::sleep(d),
                        Reply::Status { code, headers, body } => {
                            let mut head = format!(
                                "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n",
                                body.len()
                            );
                            for (k, v) in headers {
                                head.push_str(&format!("{k}: {v}\r\n"));
                            }
                            head.push_str("\r\n");
                            let _ = stream.write_all(head.as_bytes());
                            let _ = stream.write_all(body.as_bytes());
                        }
                    }
                }
                c.fetch_sub(1, Ordering::SeqCst);
            });
        }
    });
    Stub { url, requests, hits, max_concurrent }
}

/// An address nothing listens on.
pub fn dead_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}/v1/chat/completions")
}
