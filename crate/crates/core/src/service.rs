//! The embedding oracle over HTTP.
//!
//! `POST /embed` takes a binary PGM body and answers with the watermarked
//! PGM; `GET /health` answers `ok`. Bodies are raw PGM bytes.

use std::io::Read;
use std::net::{SocketAddr, TcpListener, ToSocketAddrs};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use socket2::{Domain, Protocol, Socket, Type};
use thiserror::Error;

use crate::attack::Oracle;
use crate::image::GrayImage;
use crate::pgm::{decode_pgm, encode_pgm, PgmError};
use crate::scheme::{embed, SchemeKey, WatermarkPattern};

/// Request and response body cap, on both ends.
pub const DEFAULT_MAX_BODY: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl Reply {
    fn text(status: u16, msg: impl Into<String>) -> Self {
        Self {
            status,
            content_type: "text/plain; charset=utf-8",
            body: msg.into().into_bytes(),
        }
    }
}

/// Request routing, independent of the transport.
#[derive(Debug, Clone)]
pub struct OracleService {
    key: SchemeKey,
    watermark: WatermarkPattern,
}

impl OracleService {
    pub fn new(key: SchemeKey, watermark: WatermarkPattern) -> Self {
        Self { key, watermark }
    }

    pub fn handle(&self, method: &str, path: &str, body: &[u8]) -> Reply {
        match (path, method) {
            ("/health", "GET") => Reply::text(200, "ok"),
            ("/embed", "POST") => self.embed(body),
            ("/health" | "/embed", _) => Reply::text(405, "method not allowed"),
            _ => Reply::text(404, "not found"),
        }
    }

    fn embed(&self, body: &[u8]) -> Reply {
        let img = match decode_pgm(body) {
            Ok(img) => img,
            Err(e @ PgmError::NonSquare { .. }) => return Reply::text(422, e.to_string()),
            Err(e) => return Reply::text(400, e.to_string()),
        };
        if img.side() != self.watermark.side() {
            return Reply::text(
                422,
                format!(
                    "image side {} does not match watermark side {}",
                    img.side(),
                    self.watermark.side()
                ),
            );
        }
        match embed(&self.key, &img, &self.watermark) {
            Ok(marked) => Reply {
                status: 200,
                content_type: "application/octet-stream",
                body: encode_pgm(&marked),
            },
            Err(e) => Reply::text(422, e.to_string()),
        }
    }
}

/// A running HTTP server around an [`OracleService`]. Requests are handled
/// one at a time on a background thread.
pub struct OracleServer {
    server: Arc<tiny_http::Server>,
    addr: SocketAddr,
    worker: Option<JoinHandle<()>>,
}

impl OracleServer {
    pub fn bind(service: OracleService, bind: &str, max_body: usize) -> std::io::Result<Self> {
        let server = tiny_http::Server::from_listener(nodelay_listener(bind)?, None)
            .map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("server is not bound to an IP address"))?;
        let server = Arc::new(server);
        let worker = {
            let server = Arc::clone(&server);
            std::thread::spawn(move || serve_loop(&server, &service, max_body))
        };
        Ok(Self {
            server,
            addr,
            worker: Some(worker),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server stops.
    pub fn join(mut self) {
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.server.unblock();
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

impl Drop for OracleServer {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Accepted sockets inherit TCP_NODELAY from the listener; without it,
/// responses on kept-alive connections stall on delayed ACKs.
fn nodelay_listener(bind: &str) -> std::io::Result<TcpListener> {
    let addr = bind
        .to_socket_addrs()?
        .next()
        .ok_or_else(|| std::io::Error::other(format!("cannot resolve {bind}")))?;
    let socket = Socket::new(Domain::for_address(addr), Type::STREAM, Some(Protocol::TCP))?;
    socket.set_reuse_address(true)?;
    socket.set_nodelay(true)?;
    socket.bind(&addr.into())?;
    socket.listen(128)?;
    Ok(socket.into())
}

fn serve_loop(server: &tiny_http::Server, service: &OracleService, max_body: usize) {
    for mut request in server.incoming_requests() {
        let reply = match read_body(&mut request, max_body) {
            Ok(body) => service.handle(request.method().as_str(), request.url(), &body),
            Err(reply) => reply,
        };
        let mut response =
            tiny_http::Response::from_data(reply.body).with_status_code(reply.status);
        if let Ok(h) = tiny_http::Header::from_bytes("Content-Type", reply.content_type) {
            response.add_header(h);
        }
        if reply.status == 405 {
            let allow = if request.url() == "/health" {
                "GET"
            } else {
                "POST"
            };
            if let Ok(h) = tiny_http::Header::from_bytes("Allow", allow) {
                response.add_header(h);
            }
        }
        if let Err(e) = request.respond(response) {
            log::warn!("failed to send response: {e}");
        }
    }
}

fn read_body(request: &mut tiny_http::Request, max_body: usize) -> Result<Vec<u8>, Reply> {
    if request.body_length().is_some_and(|n| n > max_body) {
        return Err(Reply::text(413, "request body too large"));
    }
    let mut body = Vec::new();
    request
        .as_reader()
        .take(max_body as u64 + 1)
        .read_to_end(&mut body)
        .map_err(|e| Reply::text(400, format!("cannot read body: {e}")))?;
    if body.len() > max_body {
        return Err(Reply::text(413, "request body too large"));
    }
    Ok(body)
}

#[derive(Debug, Error)]
pub enum RemoteOracleError {
    #[error("cannot reach oracle at {url}: {reason}")]
    Connection { url: String, reason: String },
    #[error("oracle answered HTTP {status}: {message}")]
    Status { status: u16, message: String },
    #[error("oracle response is not a valid PGM: {0}")]
    Decode(#[from] PgmError),
    #[error("cannot read oracle response: {0}")]
    Read(#[from] std::io::Error),
    #[error("request body of {size} bytes exceeds the {limit}-byte limit")]
    BodyTooLarge { size: usize, limit: usize },
}

/// Client side of the oracle service.
#[derive(Debug, Clone)]
pub struct RemoteOracle {
    base: String,
    agent: ureq::Agent,
    max_body: usize,
}

/// Handle for the oracle at `addr` (`host:port` or an `http://` URL).
pub fn remote_oracle(addr: &str) -> RemoteOracle {
    RemoteOracle::new(addr, DEFAULT_MAX_BODY)
}

impl RemoteOracle {
    pub fn new(addr: &str, max_body: usize) -> Self {
        let addr = addr.trim_end_matches('/');
        let base = if addr.contains("://") {
            addr.to_owned()
        } else {
            format!("http://{addr}")
        };
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(5))
            .timeout(Duration::from_secs(120))
            .build();
        Self {
            base,
            agent,
            max_body,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn call(&self, req: ureq::Request, body: Option<&[u8]>) -> Result<Vec<u8>, RemoteOracleError> {
        let url = req.url().to_owned();
        let result = match body {
            Some(bytes) => req
                .set("Content-Type", "application/octet-stream")
                .send_bytes(bytes),
            None => req.call(),
        };
        let response = match result {
            Ok(r) => r,
            Err(ureq::Error::Status(status, r)) => {
                let message = r.into_string().unwrap_or_default();
                return Err(RemoteOracleError::Status { status, message });
            }
            Err(ureq::Error::Transport(t)) => {
                return Err(RemoteOracleError::Connection {
                    url,
                    reason: t.to_string(),
                })
            }
        };
        let mut out = Vec::new();
        response
            .into_reader()
            .take(self.max_body as u64 + 1)
            .read_to_end(&mut out)?;
        if out.len() > self.max_body {
            return Err(RemoteOracleError::BodyTooLarge {
                size: out.len(),
                limit: self.max_body,
            });
        }
        Ok(out)
    }

    pub fn health(&self) -> Result<(), RemoteOracleError> {
        let body = self.call(self.agent.get(&format!("{}/health", self.base)), None)?;
        if body == b"ok" {
            Ok(())
        } else {
            Err(RemoteOracleError::Status {
                status: 200,
                message: String::from_utf8_lossy(&body).into_owned(),
            })
        }
    }

    /// POSTs raw bytes to `/embed`, returning the raw response body.
    pub fn post_embed(&self, body: &[u8]) -> Result<Vec<u8>, RemoteOracleError> {
        if body.len() > self.max_body {
            return Err(RemoteOracleError::BodyTooLarge {
                size: body.len(),
                limit: self.max_body,
            });
        }
        self.call(self.agent.post(&format!("{}/embed", self.base)), Some(body))
    }
}

impl Oracle for RemoteOracle {
    type Error = RemoteOracleError;

    fn submit(&self, img: &GrayImage) -> Result<GrayImage, RemoteOracleError> {
        let body = self.post_embed(&encode_pgm(img))?;
        Ok(decode_pgm(&body)?)
    }
}
