//! Blocking framed-TCP client used by the simulator, replayer and tests.

use std::io::{BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use log::{debug, warn};

use super::BridgeError;
use crate::wire::{encode, monotonic_ns, read_frame, Body, Role, SubscribeAction, WireMessage};

#[derive(Debug, Clone)]
pub struct ClientOptions {
    pub name: String,
    pub role: Role,
    pub heartbeat_interval: Duration,
}

impl ClientOptions {
    pub fn new(name: impl Into<String>, role: Role) -> Self {
        Self {
            name: name.into(),
            role,
            heartbeat_interval: Duration::from_secs(1),
        }
    }
}

/// A bridge connection. A background thread decodes incoming frames and
/// another sends heartbeats; heartbeats from the bridge are counted and not
/// returned by [`BridgeClient::recv_timeout`].
pub struct BridgeClient {
    writer: Arc<Mutex<TcpStream>>,
    incoming: Receiver<WireMessage>,
    stop: Arc<AtomicBool>,
    heartbeats: Arc<AtomicU64>,
    threads: Vec<JoinHandle<()>>,
}

impl BridgeClient {
    pub fn connect(addr: impl ToSocketAddrs, name: &str, role: Role) -> Result<Self, BridgeError> {
        Self::connect_with(addr, &ClientOptions::new(name, role))
    }

    /// Retries a refused connection with doubling backoff.
    pub fn connect_with_retry(
        addr: SocketAddr,
        opts: &ClientOptions,
        attempts: u32,
        initial_backoff: Duration,
    ) -> Result<Self, BridgeError> {
        let mut backoff = initial_backoff;
        let mut last = None;
        for attempt in 1..=attempts.max(1) {
            match Self::connect_with(addr, opts) {
                Ok(c) => return Ok(c),
                Err(e) => {
                    warn!("bridge {addr} unreachable (attempt {attempt}/{attempts}): {e}");
                    last = Some(e);
                    std::thread::sleep(backoff);
                    backoff = (backoff * 2).min(Duration::from_secs(5));
                }
            }
        }
        Err(last.unwrap_or(BridgeError::Closed))
    }

    pub fn connect_with(
        addr: impl ToSocketAddrs,
        opts: &ClientOptions,
    ) -> Result<Self, BridgeError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let read_half = stream.try_clone()?;
        let writer = Arc::new(Mutex::new(stream));
        let stop = Arc::new(AtomicBool::new(false));
        let heartbeats = Arc::new(AtomicU64::new(0));
        let (tx, incoming) = mpsc::channel();

        let reader = {
            let (stop, heartbeats) = (stop.clone(), heartbeats.clone());
            std::thread::spawn(move || {
                let mut r = BufReader::new(read_half);
                while !stop.load(Ordering::SeqCst) {
                    match read_frame(&mut r) {
                        Ok(Some((m, _))) if matches!(m.body, Body::Heartbeat) => {
                            heartbeats.fetch_add(1, Ordering::Relaxed);
                        }
                        Ok(Some((m, _))) => {
                            if tx.send(m).is_err() {
                                break;
                            }
                        }
                        Ok(None) => break,
                        Err(e) => {
                            if !stop.load(Ordering::SeqCst) {
                                debug!("client reader stops: {e}");
                            }
                            break;
                        }
                    }
                }
            })
        };

        let pinger = {
            let (stop, writer, every) = (stop.clone(), writer.clone(), opts.heartbeat_interval);
            std::thread::spawn(move || {
                let mut next = Instant::now() + every;
                while !stop.load(Ordering::SeqCst) {
                    std::thread::sleep(Duration::from_millis(10).min(every));
                    if Instant::now() < next {
                        continue;
                    }
                    next += every;
                    let frame =
                        encode(&WireMessage::heartbeat(monotonic_ns())).expect("heartbeat encodes");
                    if writer
                        .lock()
                        .expect("writer lock")
                        .write_all(&frame)
                        .is_err()
                    {
                        break;
                    }
                }
            })
        };

        let client = Self {
            writer,
            incoming,
            stop,
            heartbeats,
            threads: vec![reader, pinger],
        };
        client.publish(&WireMessage::new(
            monotonic_ns(),
            "",
            Body::Hello {
                role: opts.role,
                name: opts.name.clone(),
            },
        ))?;
        Ok(client)
    }

    pub fn publish(&self, msg: &WireMessage) -> Result<(), BridgeError> {
        let frame = encode(msg)?;
        self.send_frame(&frame)
    }

    /// Sends pre-encoded frame bytes.
    pub fn send_frame(&self, frame: &[u8]) -> Result<(), BridgeError> {
        self.writer.lock().expect("writer lock").write_all(frame)?;
        Ok(())
    }

    pub fn subscribe(&self, topic: &str) -> Result<(), BridgeError> {
        self.subscription(SubscribeAction::Subscribe, topic)
    }

    pub fn unsubscribe(&self, topic: &str) -> Result<(), BridgeError> {
        self.subscription(SubscribeAction::Unsubscribe, topic)
    }

    fn subscription(&self, action: SubscribeAction, topic: &str) -> Result<(), BridgeError> {
        self.publish(&WireMessage::new(
            monotonic_ns(),
            "",
            Body::Subscribe {
                action,
                topic: topic.into(),
            },
        ))
    }

    /// Next non-heartbeat message, or `None` on timeout or disconnect.
    pub fn recv_timeout(&self, timeout: Duration) -> Option<WireMessage> {
        self.incoming.recv_timeout(timeout).ok()
    }

    pub fn try_recv(&self) -> Option<WireMessage> {
        self.incoming.try_recv().ok()
    }

    pub fn heartbeats_received(&self) -> u64 {
        self.heartbeats.load(Ordering::Relaxed)
    }
}

impl Drop for BridgeClient {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Ok(w) = self.writer.lock() {
            let _ = w.shutdown(Shutdown::Both);
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}
