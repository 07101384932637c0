//! A tiny blocking HTTP/1.1 server for tests. Routes are fixed at start,
//! every request is counted per path, and connections close after each
//! response.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

#[derive(Debug, Clone)]
pub enum Route {
    Body {
        status: u16,
        content_type: String,
        body: Vec<u8>,
    },
    Redirect {
        status: u16,
        location: String,
    },
    /// Waits before answering 200, to provoke client timeouts.
    Slow {
        delay: Duration,
        body: Vec<u8>,
    },
    /// Closes the connection without answering.
    Drop,
}

impl Route {
    pub fn csv(body: impl Into<Vec<u8>>) -> Route {
        Route::Body { status: 200, content_type: "text/csv".into(), body: body.into() }
    }

    pub fn json(body: impl Into<String>) -> Route {
        Route::Body { status: 200, content_type: "application/json".into(), body: body.into().into_bytes() }
    }

    pub fn status(status: u16) -> Route {
        Route::Body { status, content_type: "text/plain".into(), body: Vec::new() }
    }
}

pub struct FixtureServer {
    addr: SocketAddr,
    hits: Arc<Mutex<HashMap<String, usize>>>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl FixtureServer {
    pub fn start(routes: HashMap<String, Route>) -> std::io::Result<FixtureServer> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let hits = Arc::new(Mutex::new(HashMap::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let routes = Arc::new(routes);
        let handle = {
            let (hits, stop) = (hits.clone(), stop.clone());
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let (routes, hits) = (routes.clone(), hits.clone());
                    std::thread::spawn(move || {
                        let _ = serve(stream, &routes, &hits);
                    });
                }
            })
        };
        Ok(FixtureServer { addr, hits, stop, handle: Some(handle) })
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn hits(&self, path: &str) -> usize {
        self.hits.lock().expect("hits poisoned").get(path).copied().unwrap_or(0)
    }

    pub fn total_hits(&self) -> usize {
        self.hits.lock().expect("hits poisoned").values().sum()
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, routes: &HashMap<String, Route>, hits: &Mutex<HashMap<String, usize>>) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let path = request_line.split_whitespace().nth(1).unwrap_or("/");
    let path = path.split('?').next().unwrap_or(path).to_string();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
    }
    *hits.lock().expect("hits poisoned").entry(path.clone()).or_default() += 1;
    let mut out = stream;
    let (status, headers, body) = match routes.get(&path) {
        None => (404, vec![], Vec::new()),
        Some(Route::Drop) => return Ok(()),
        Some(Route::Body { status, content_type, body }) => (*status, vec![("Content-Type", content_type.clone())], body.clone()),
        Some(Route::Redirect { status, location }) => (*status, vec![("Location", location.clone())], Vec::new()),
        Some(Route::Slow { delay, body }) => {
            std::thread::sleep(*delay);
            (200, vec![], body.clone())
        }
    };
    let mut head = format!("HTTP/1.1 {status} X\r\nContent-Length: {}\r\nConnection: close\r\n", body.len());
    for (k, v) in headers {
        head.push_str(&format!("{k}: {v}\r\n"));
    }
    head.push_str("\r\n");
    out.write_all(head.as_bytes())?;
    out.write_all(&body)?;
    out.flush()
}
