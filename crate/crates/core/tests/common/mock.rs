//! Minimal HTTP server for protocol and planner tests.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

pub struct Request {
    pub method: String,
    pub path: String,
    pub body: String,
}

pub type Handler = dyn Fn(&Request) -> (u16, String) + Send + Sync;

pub struct MockServer {
    pub url: String,
    pub log: Arc<Mutex<Vec<Request>>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(handler: impl Fn(&Request) -> (u16, String) + Send + Sync + 'static) -> Self {
        let server = tiny_http::Server::http("127.0.0.1:0").expect("bind mock server");
        let port = server.server_addr().to_ip().expect("ip listener").port();
        let log: Arc<Mutex<Vec<Request>>> = Arc::default();
        let stop = Arc::new(AtomicBool::new(false));
        let (log2, stop2) = (log.clone(), stop.clone());
        let handler: Arc<Handler> = Arc::new(handler);
        let thread = std::thread::spawn(move || {
            while !stop2.load(Ordering::SeqCst) {
                let Ok(Some(mut rq)) = server.recv_timeout(Duration::from_millis(20)) else { continue };
                let mut body = String::new();
                let _ = rq.as_reader().read_to_string(&mut body);
                let req = Request { method: rq.method().to_string(), path: rq.url().to_string(), body };
                let (status, out) = handler(&req);
                log2.lock().unwrap().push(req);
                let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
                let _ = rq.respond(tiny_http::Response::from_string(out).with_status_code(status).with_header(header));
            }
        });
        MockServer { url: format!("http://127.0.0.1:{port}"), log, stop, thread: Some(thread) }
    }

    pub fn requests(&self) -> usize {
        self.log.lock().unwrap().len()
    }

    pub fn bodies(&self) -> Vec<String> {
        self.log.lock().unwrap().iter().map(|r| r.body.clone()).collect()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
