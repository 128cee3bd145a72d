//! A tiny blocking HTTP/1.1 server for tests: one request per connection.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;

pub struct Request {
    pub method: String,
    pub path: String,
    pub body: Vec<u8>,
}

pub struct Response {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl Response {
    pub fn json(status: u16, value: serde_json::Value) -> Self {
        Response { status, content_type: "application/json", body: value.to_string().into_bytes() }
    }
}

/// Serves `handler` on an ephemeral local port; returns the base URL.
pub fn serve<F>(handler: F) -> String
where
    F: Fn(&Request) -> Response + Send + Sync + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handler = Arc::new(handler);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let handler = handler.clone();
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                if reader.read_line(&mut line).is_err() {
                    return;
                }
                let mut parts = line.split_whitespace();
                let method = parts.next().unwrap_or_default().to_string();
                let path = parts.next().unwrap_or_default().to_string();
                let mut length = 0usize;
                loop {
                    let mut h = String::new();
                    if reader.read_line(&mut h).is_err() || h.trim().is_empty() {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            length = v.trim().parse().unwrap_or(0);
                        }
                    }
                }
                let mut body = vec![0; length];
                let _ = reader.read_exact(&mut body);
                let resp = handler(&Request { method, path, body });
                let head = format!(
                    "HTTP/1.1 {} X\r\nContent-Type: {}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                    resp.status,
                    resp.content_type,
                    resp.body.len()
                );
                let _ = stream.write_all(head.as_bytes());
                let _ = stream.write_all(&resp.body);
            });
        }
    });
    format!("http://{addr}")
}

/// Static files under `root`; directories serve their `index.html`.
pub fn serve_dir(root: std::path::PathBuf) -> String {
    serve(move |req| {
        let rel = req.path.split(['?', '#']).next().unwrap_or("/").trim_start_matches('/');
        let mut path = root.join(rel);
        if path.is_dir() {
            path = path.join("index.html");
        }
        match std::fs::read(&path) {
            Ok(body) => {
                let content_type = match path.extension().and_then(|e| e.to_str()) {
                    Some("css") => "text/css",
                    Some("png") => "image/png",
                    _ => "text/html; charset=utf-8",
                };
                Response { status: 200, content_type, body }
            }
            Err(_) => Response { status: 404, content_type: "text/plain", body: b"not found".to_vec() },
        }
    })
}
