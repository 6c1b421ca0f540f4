//! A loopback HTTP server that replays scripted chat-completions answers.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum StubReply {
    /// 200 with this JSON body.
    Json(Value),
    /// 200 with this raw body.
    Raw(String),
    /// Waits before answering with the JSON body.
    Delayed(Duration, Value),
    Status(u16, String),
}

/// Serves replies in order; the last one repeats once the script runs out.
pub struct StubServer {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    requests: Arc<Mutex<Vec<Value>>>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(script: Vec<StubReply>) -> std::io::Result<StubServer> {
        assert!(!script.is_empty(), "stub needs at least one reply");
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let hits = Arc::new(AtomicUsize::new(0));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let handle = {
            let (hits, requests, stop) = (hits.clone(), requests.clone(), stop.clone());
            thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let n = hits.fetch_add(1, Ordering::SeqCst);
                    let reply = script[n.min(script.len() - 1)].clone();
                    let requests = requests.clone();
                    // Each connection gets its own thread so a delayed reply
                    // does not hold up the client's retry.
                    thread::spawn(move || serve(stream, reply, &requests));
                }
            })
        };
        Ok(StubServer {
            addr,
            hits,
            requests,
            stop,
            handle: Some(handle),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    /// Connections accepted so far.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    /// Request bodies received so far, in arrival order.
    pub fn requests(&self) -> Vec<Value> {
        self.requests.lock().expect("stub lock").clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, reply: StubReply, requests: &Mutex<Vec<Value>>) {
    let mut reader = BufReader::new(&stream);
    let mut len = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; len];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    if let Ok(v) = serde_json::from_slice(&body) {
        requests.lock().expect("stub lock").push(v);
    }
    let (status, text) = match reply {
        StubReply::Json(v) => (200, v.to_string()),
        StubReply::Raw(s) => (200, s),
        StubReply::Delayed(d, v) => {
            thread::sleep(d);
            (200, v.to_string())
        }
        StubReply::Status(s, t) => (s, t),
    };
    let mut w = &stream;
    let _ = write!(
        w,
        "HTTP/1.1 {status} STUB\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    );
    let _ = w.flush();
}

/// A response carrying one native tool call.
pub fn tool_call_reply(name: &str, arguments: Value) -> Value {
    tool_calls_reply(&[(name, arguments)])
}

pub fn tool_calls_reply(calls: &[(&str, Value)]) -> Value {
    let calls: Vec<Value> = calls
        .iter()
        .enumerate()
        .map(|(i, (name, args))| {
            json!({
                "id": format!("call_{i}"),
                "type": "function",
                "function": { "name": name, "arguments": args.to_string() },
            })
        })
        .collect();
    json!({ "choices": [{ "index": 0, "message": { "role": "assistant", "content": null, "tool_calls": calls } }] })
}

/// A response with plain assistant text.
pub fn text_reply(content: &str) -> Value {
    json!({ "choices": [{ "index": 0, "message": { "role": "assistant", "content": content } }] })
}
