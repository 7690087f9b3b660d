//! Line-delimited request/response transports for external tools,
//! evaluators and planners.
//!
//! Every exchange writes exactly one line (a JSON document) and reads exactly
//! one line back.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("cannot reach endpoint {endpoint}: {msg}")]
    Connect { endpoint: String, msg: String },
    #[error("i/o failure talking to {endpoint}: {msg}")]
    Io { endpoint: String, msg: String },
    #[error("endpoint {0} closed the connection")]
    Closed(String),
}

pub trait Transport: Send + Sync + fmt::Debug {
    /// Send one request line and return the response line (without newline).
    fn exchange(&self, request: &str) -> Result<String, TransportError>;
}

/// Where an external component lives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    /// `host:port`; one connection per request.
    Tcp(String),
    /// A long-lived child process speaking the protocol on stdin/stdout.
    Process(Vec<String>),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tcp(addr) => write!(f, "tcp://{addr}"),
            Endpoint::Process(cmd) => write!(f, "process:{}", cmd.join(" ")),
        }
    }
}

impl Endpoint {
    pub fn connect(&self) -> Result<Arc<dyn Transport>, TransportError> {
        match self {
            Endpoint::Tcp(addr) => Ok(Arc::new(TcpTransport::new(addr.clone()))),
            Endpoint::Process(cmd) => Ok(Arc::new(ProcessTransport::spawn(cmd)?)),
        }
    }
}

#[derive(Debug)]
pub struct TcpTransport {
    addr: String,
    timeout: Duration,
}

impl TcpTransport {
    pub fn new(addr: impl Into<String>) -> Self {
        TcpTransport {
            addr: addr.into(),
            timeout: Duration::from_secs(60),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl Transport for TcpTransport {
    fn exchange(&self, request: &str) -> Result<String, TransportError> {
        let io = |e: std::io::Error| TransportError::Io {
            endpoint: self.addr.clone(),
            msg: e.to_string(),
        };
        let mut stream = TcpStream::connect(&self.addr).map_err(|e| TransportError::Connect {
            endpoint: self.addr.clone(),
            msg: e.to_string(),
        })?;
        stream.set_read_timeout(Some(self.timeout)).map_err(io)?;
        stream.write_all(request.as_bytes()).map_err(io)?;
        stream.write_all(b"\n").map_err(io)?;
        stream.flush().map_err(io)?;
        let mut line = String::new();
        let n = BufReader::new(stream).read_line(&mut line).map_err(io)?;
        if n == 0 {
            return Err(TransportError::Closed(self.addr.clone()));
        }
        Ok(line.trim_end_matches(['\r', '\n']).to_string())
    }
}

#[derive(Debug)]
pub struct ProcessTransport {
    label: String,
    inner: Mutex<ProcessPipes>,
}

#[derive(Debug)]
struct ProcessPipes {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ProcessTransport {
    pub fn spawn(cmd: &[String]) -> Result<Self, TransportError> {
        let label = cmd.join(" ");
        let (program, args) = cmd.split_first().ok_or_else(|| TransportError::Connect {
            endpoint: label.clone(),
            msg: "empty command".into(),
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| TransportError::Connect {
                endpoint: label.clone(),
                msg: e.to_string(),
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ProcessTransport {
            label,
            inner: Mutex::new(ProcessPipes {
                child,
                stdin,
                stdout,
            }),
        })
    }
}

impl Transport for ProcessTransport {
    fn exchange(&self, request: &str) -> Result<String, TransportError> {
        let mut pipes = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        let io = |e: std::io::Error| TransportError::Io {
            endpoint: self.label.clone(),
            msg: e.to_string(),
        };
        pipes.stdin.write_all(request.as_bytes()).map_err(io)?;
        pipes.stdin.write_all(b"\n").map_err(io)?;
        pipes.stdin.flush().map_err(io)?;
        let mut line = String::new();
        let n = pipes.stdout.read_line(&mut line).map_err(io)?;
        if n == 0 {
            return Err(TransportError::Closed(self.label.clone()));
        }
        Ok(line.trim_end_matches(['\r', '\n']).to_string())
    }
}

impl Drop for ProcessTransport {
    fn drop(&mut self) {
        if let Ok(mut pipes) = self.inner.lock() {
            let _ = pipes.child.kill();
            let _ = pipes.child.wait();
        }
    }
}

/// In-process transport backed by a closure; handy for tests and embedding.
pub struct FnTransport<F>(pub F);

impl<F> fmt::Debug for FnTransport<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnTransport")
    }
}

impl<F> Transport for FnTransport<F>
where
    F: Fn(&str) -> Result<String, TransportError> + Send + Sync,
{
    fn exchange(&self, request: &str) -> Result<String, TransportError> {
        (self.0)(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::TcpListener;
    use std::thread;

    #[test]
    fn tcp_round_trip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let server = thread::spawn(move || {
            for _ in 0..2 {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let mut w = stream;
                writeln!(w, "echo:{}", line.trim()).unwrap();
            }
        });
        let t = TcpTransport::new(addr);
        assert_eq!(t.exchange("hello").unwrap(), "echo:hello");
        assert_eq!(t.exchange("again").unwrap(), "echo:again");
        server.join().unwrap();
    }

    #[test]
    fn tcp_connect_failure() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        drop(listener);
        let err = TcpTransport::new(addr).exchange("x").unwrap_err();
        assert!(matches!(err, TransportError::Connect { .. }));
    }

    #[test]
    fn process_round_trip() {
        let cmd = vec!["sh".to_string(), "-c".into(), "while read l; do echo \"got $l\"; done".into()];
        let t = ProcessTransport::spawn(&cmd).unwrap();
        assert_eq!(t.exchange("a").unwrap(), "got a");
        assert_eq!(t.exchange("b c").unwrap(), "got b c");
    }

    #[test]
    fn process_missing_binary() {
        let cmd = vec!["/nonexistent/binary".to_string()];
        assert!(matches!(ProcessTransport::spawn(&cmd), Err(TransportError::Connect { .. })));
    }
}
