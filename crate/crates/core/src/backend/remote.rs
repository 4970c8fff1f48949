//! Client for model servers speaking the line-delimited JSON protocol.
//!
//! Writes go through one mutex. A reader thread parses every response line
//! and hands it to whichever caller is waiting on that request id, so
//! responses may arrive in any order.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::wire::{info_from_hello, Request, Response};
use super::{Backend, BackendError, BackendInfo, ProbabilityVector};
use crate::stream::Clip;
use crate::Scalar;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(5000);

type Reply<R> = Sender<Result<R, BackendError>>;

struct HelloFields {
    num_classes: usize,
    clip_depth: usize,
    input_size: usize,
    labels: Vec<String>,
}

#[derive(Default)]
struct Shared {
    pending: Mutex<HashMap<u64, Reply<Vec<f64>>>>,
    hello: Mutex<Option<Reply<HelloFields>>>,
    /// Ids whose caller gave up; a late answer to one is dropped silently.
    abandoned: Mutex<HashSet<u64>>,
    failure: Mutex<Option<BackendError>>,
}

impl Shared {
    fn failure(&self) -> Option<BackendError> {
        self.failure.lock().unwrap().clone()
    }

    /// Marks the connection unusable and fails every waiter.
    fn poison(&self, err: BackendError) {
        {
            let mut failure = self.failure.lock().unwrap();
            if failure.is_none() {
                *failure = Some(err.clone());
            }
        }
        if let Some(tx) = self.hello.lock().unwrap().take() {
            let _ = tx.send(Err(err.clone()));
        }
        for (_, tx) in self.pending.lock().unwrap().drain() {
            let _ = tx.send(Err(err.clone()));
        }
    }

    fn dispatch(&self, line: &str) -> Result<(), BackendError> {
        match Response::parse(line)? {
            Response::Hello {
                num_classes,
                clip_depth,
                input_size,
                labels,
            } => {
                let tx = self
                    .hello
                    .lock()
                    .unwrap()
                    .take()
                    .ok_or_else(|| BackendError::ProtocolViolation("unsolicited hello".into()))?;
                let _ = tx.send(Ok(HelloFields {
                    num_classes,
                    clip_depth,
                    input_size,
                    labels,
                }));
            }
            Response::Infer { id, .. } | Response::Error { id: Some(id), .. }
                if self.abandoned.lock().unwrap().remove(&id) => {}
            Response::Infer { id, probs } => {
                let tx = self.pending.lock().unwrap().remove(&id).ok_or_else(|| {
                    BackendError::ProtocolViolation(format!("response id {id} matches no outstanding request"))
                })?;
                let _ = tx.send(Ok(probs));
            }
            Response::Error { id: Some(id), message } => {
                let tx = self.pending.lock().unwrap().remove(&id).ok_or_else(|| {
                    BackendError::ProtocolViolation(format!("error id {id} matches no outstanding request"))
                })?;
                let _ = tx.send(Err(BackendError::Remote { id: Some(id), message }));
            }
            Response::Error { id: None, message } => {
                if let Some(tx) = self.hello.lock().unwrap().take() {
                    let _ = tx.send(Err(BackendError::Remote { id: None, message }));
                } else {
                    return Err(BackendError::Remote { id: None, message });
                }
            }
        }
        Ok(())
    }
}

fn read_loop(reader: Box<dyn Read + Send>, shared: Arc<Shared>) {
    let mut reader = BufReader::new(reader);
    let mut line = String::new();
    loop {
        line.clear();
        match reader.read_line(&mut line) {
            Ok(0) => {
                shared.poison(BackendError::Unavailable("connection closed by peer".into()));
                return;
            }
            Ok(_) if line.trim().is_empty() => continue,
            Ok(_) => {
                if let Err(err) = shared.dispatch(&line) {
                    shared.poison(err);
                    return;
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                shared.poison(BackendError::ProtocolViolation(format!("response is not UTF-8: {e}")));
                return;
            }
            Err(e) => {
                shared.poison(BackendError::Unavailable(e.to_string()));
                return;
            }
        }
    }
}

enum Transport {
    Tcp(TcpStream),
    Child(Mutex<Child>),
    Other,
}

/// A model served by another process, reached over TCP or a child's stdio.
pub struct RemoteBackend {
    info: BackendInfo,
    shared: Arc<Shared>,
    writer: Mutex<Box<dyn Write + Send>>,
    next_id: AtomicU64,
    timeout: Duration,
    transport: Transport,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("info", &self.info)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

impl RemoteBackend {
    /// Connects to `addr` and performs the hello handshake.
    pub fn connect_tcp(addr: &str, label_set_id: &str, timeout: Duration) -> Result<Self, BackendError> {
        let sock = addr
            .to_socket_addrs()
            .map_err(|e| BackendError::Unavailable(format!("{addr}: {e}")))?
            .next()
            .ok_or_else(|| BackendError::Unavailable(format!("{addr}: no address")))?;
        let stream = TcpStream::connect_timeout(&sock, timeout)
            .map_err(|e| BackendError::Unavailable(format!("{addr}: {e}")))?;
        let _ = stream.set_nodelay(true);
        let reader = stream
            .try_clone()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let writer = stream
            .try_clone()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Self::handshake(
            Box::new(reader),
            Box::new(writer),
            Transport::Tcp(stream),
            label_set_id,
            timeout,
        )
    }

    /// Spawns `command` through the shell and talks to it over stdin/stdout.
    pub fn spawn_stdio(command: &str, label_set_id: &str, timeout: Duration) -> Result<Self, BackendError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| BackendError::Unavailable(format!("spawn {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Self::handshake(
            Box::new(stdout),
            Box::new(stdin),
            Transport::Child(Mutex::new(child)),
            label_set_id,
            timeout,
        )
    }

    /// Performs the handshake over an arbitrary byte stream pair.
    pub fn from_streams(
        reader: Box<dyn Read + Send>,
        writer: Box<dyn Write + Send>,
        label_set_id: &str,
        timeout: Duration,
    ) -> Result<Self, BackendError> {
        Self::handshake(reader, writer, Transport::Other, label_set_id, timeout)
    }

    fn handshake(
        reader: Box<dyn Read + Send>,
        writer: Box<dyn Write + Send>,
        transport: Transport,
        label_set_id: &str,
        timeout: Duration,
    ) -> Result<Self, BackendError> {
        let shared = Arc::new(Shared::default());
        let (tx, rx) = channel();
        *shared.hello.lock().unwrap() = Some(tx);
        {
            let shared = Arc::clone(&shared);
            std::thread::Builder::new()
                .name("backend-reader".into())
                .spawn(move || read_loop(reader, shared))
                .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        }
        let mut backend = Self {
            info: BackendInfo {
                num_classes: 0,
                clip_depth: 0,
                input_size: 0,
                label_set: super::LabelSet::detector(),
            },
            shared,
            writer: Mutex::new(writer),
            next_id: AtomicU64::new(1),
            timeout,
            transport,
        };
        backend.send(&Request::Hello)?;
        let hello = wait(&rx, timeout)?;
        backend.info = info_from_hello(
            hello.num_classes,
            hello.clip_depth,
            hello.input_size,
            hello.labels,
            label_set_id,
        )?;
        Ok(backend)
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    fn send(&self, request: &Request) -> Result<(), BackendError> {
        if let Some(err) = self.shared.failure() {
            return Err(err);
        }
        let line = request.to_line();
        let mut writer = self.writer.lock().unwrap();
        writer
            .write_all(line.as_bytes())
            .and_then(|_| writer.flush())
            .map_err(|e| BackendError::Unavailable(format!("write failed: {e}")))
    }

    /// Registers a waiter for a fresh id and writes the request.
    fn submit(&self, clip: &Clip) -> Result<(u64, Receiver<Result<Vec<f64>, BackendError>>), BackendError> {
        self.info.check_clip(clip)?;
        if let Some(err) = self.shared.failure() {
            return Err(err);
        }
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = channel();
        self.shared.pending.lock().unwrap().insert(id, tx);
        if let Err(err) = self.send(&Request::infer(id, clip)) {
            self.shared.pending.lock().unwrap().remove(&id);
            return Err(err);
        }
        Ok((id, rx))
    }

    fn collect<T: Scalar>(
        &self,
        id: u64,
        rx: Receiver<Result<Vec<f64>, BackendError>>,
    ) -> Result<ProbabilityVector<T>, BackendError> {
        let probs = match wait(&rx, self.timeout) {
            Ok(probs) => probs,
            Err(err) => {
                if self.shared.pending.lock().unwrap().remove(&id).is_some() {
                    self.shared.abandoned.lock().unwrap().insert(id);
                }
                return Err(err);
            }
        };
        if probs.len() != self.info.num_classes {
            return Err(BackendError::ShapeMismatch {
                expected: format!("{} probabilities", self.info.num_classes),
                got: format!("{} probabilities", probs.len()),
            });
        }
        ProbabilityVector::new(probs.into_iter().map(T::of).collect(), self.info.label_set.shared_id())
            .map_err(|e| BackendError::ProtocolViolation(format!("response {id}: {e}")))
    }
}

fn wait<R>(rx: &Receiver<Result<R, BackendError>>, timeout: Duration) -> Result<R, BackendError> {
    match rx.recv_timeout(timeout) {
        Ok(result) => result,
        Err(RecvTimeoutError::Timeout) => Err(BackendError::Timeout(timeout)),
        Err(RecvTimeoutError::Disconnected) => Err(BackendError::Unavailable("reader stopped".into())),
    }
}

impl<T: Scalar> Backend<T> for RemoteBackend {
    fn info(&self) -> &BackendInfo {
        &self.info
    }

    fn infer(&self, clip: &Clip) -> Result<ProbabilityVector<T>, BackendError> {
        let (id, rx) = self.submit(clip)?;
        self.collect(id, rx)
    }

    /// Pipelines all requests before waiting on any response.
    fn infer_batch(&self, clips: &[Clip]) -> Result<Vec<ProbabilityVector<T>>, BackendError> {
        let submitted = clips
            .iter()
            .map(|clip| self.submit(clip))
            .collect::<Result<Vec<_>, _>>()?;
        submitted.into_iter().map(|(id, rx)| self.collect(id, rx)).collect()
    }
}

impl Drop for RemoteBackend {
    fn drop(&mut self) {
        match &self.transport {
            Transport::Tcp(stream) => {
                let _ = stream.shutdown(Shutdown::Both);
            }
            Transport::Child(child) => {
                if let Ok(mut child) = child.lock() {
                    let _ = child.kill();
                    let _ = child.wait();
                }
            }
            Transport::Other => {}
        }
    }
}
