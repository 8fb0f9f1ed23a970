//! Network front ends for the hub: framed TCP and the browser gateway.

use std::io::{BufReader, ErrorKind, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use tungstenite::{Message, WebSocket};

use super::{
    apply_gateway_op, apply_inbound, BridgeError, GatewayOp, GatewayReply, Hub, TopicSpec,
};
use crate::bridge::hub::{default_topics, Session, Transport};
use crate::wire::{decode, encode, monotonic_ns, read_frame, Role, WireError, WireMessage};

pub const DEFAULT_TCP_PORT: u16 = 9870;
pub const DEFAULT_WS_PORT: u16 = 9871;

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    pub tcp_addr: SocketAddr,
    /// `None` disables the browser gateway.
    pub ws_addr: Option<SocketAddr>,
    pub heartbeat_interval: Duration,
    /// Silent intervals tolerated before a session is dropped.
    pub max_missed_heartbeats: u32,
    pub topics: Vec<TopicSpec>,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            tcp_addr: SocketAddr::from(([127, 0, 0, 1], DEFAULT_TCP_PORT)),
            ws_addr: Some(SocketAddr::from(([127, 0, 0, 1], DEFAULT_WS_PORT))),
            heartbeat_interval: Duration::from_secs(1),
            max_missed_heartbeats: 5,
            topics: default_topics(),
        }
    }
}

impl BridgeConfig {
    /// Both listeners on ephemeral loopback ports.
    pub fn ephemeral() -> Self {
        Self {
            tcp_addr: SocketAddr::from(([127, 0, 0, 1], 0)),
            ws_addr: Some(SocketAddr::from(([127, 0, 0, 1], 0))),
            ..Self::default()
        }
    }

    fn liveness_timeout(&self) -> Duration {
        self.heartbeat_interval * self.max_missed_heartbeats.max(1)
    }
}

/// A running bridge. Dropping the handle stops the listeners.
pub struct BridgeHandle {
    hub: Arc<Hub>,
    tcp_addr: SocketAddr,
    ws_addr: Option<SocketAddr>,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl BridgeHandle {
    pub fn start(config: BridgeConfig) -> Result<Self, BridgeError> {
        let hub = Arc::new(Hub::new(config.topics.clone())?);
        let stop = Arc::new(AtomicBool::new(false));
        let config = Arc::new(config);

        let tcp = TcpListener::bind(config.tcp_addr)?;
        let tcp_addr = tcp.local_addr()?;
        let mut threads = vec![spawn_acceptor(
            tcp,
            hub.clone(),
            config.clone(),
            stop.clone(),
            serve_framed,
        )?];

        let ws_addr = match config.ws_addr {
            Some(addr) => {
                let ws = TcpListener::bind(addr)?;
                let local = ws.local_addr()?;
                threads.push(spawn_acceptor(
                    ws,
                    hub.clone(),
                    config.clone(),
                    stop.clone(),
                    serve_gateway,
                )?);
                Some(local)
            }
            None => None,
        };
        info!("bridge listening: framed {tcp_addr}, gateway {ws_addr:?}");
        Ok(Self {
            hub,
            tcp_addr,
            ws_addr,
            stop,
            threads,
        })
    }

    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }

    pub fn tcp_addr(&self) -> SocketAddr {
        self.tcp_addr
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws_addr
    }

    /// Setting this flag stops the listeners and closes every session.
    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        self.stop.clone()
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for BridgeHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}

type ConnHandler = fn(TcpStream, Arc<Hub>, Arc<BridgeConfig>, Arc<AtomicBool>);

fn spawn_acceptor(
    listener: TcpListener,
    hub: Arc<Hub>,
    config: Arc<BridgeConfig>,
    stop: Arc<AtomicBool>,
    handler: ConnHandler,
) -> std::io::Result<JoinHandle<()>> {
    listener.set_nonblocking(true)?;
    Ok(std::thread::spawn(move || {
        while !stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, peer)) => {
                    debug!("connection from {peer}");
                    if stream.set_nonblocking(false).is_err() {
                        continue;
                    }
                    let (hub, config, stop) = (hub.clone(), config.clone(), stop.clone());
                    std::thread::spawn(move || handler(stream, hub, config, stop));
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => {
                    std::thread::sleep(Duration::from_millis(10))
                }
                Err(e) => {
                    warn!("accept failed: {e}");
                    std::thread::sleep(Duration::from_millis(50));
                }
            }
        }
    }))
}

/// Header-level failures leave the stream position unknown, so the session
/// ends. Payload-level failures consumed exactly one frame and are skipped.
fn is_fatal(e: &WireError) -> bool {
    matches!(
        e,
        WireError::BadMagic(_)
            | WireError::UnsupportedVersion(_)
            | WireError::UnknownType(_)
            | WireError::PayloadTooLarge(_)
            | WireError::Truncated { .. }
            | WireError::Io(_)
    )
}

struct Liveness(Mutex<Instant>);

impl Liveness {
    fn touch(&self) {
        *self.0.lock().expect("liveness lock") = Instant::now();
    }

    fn silent_for(&self) -> Duration {
        self.0.lock().expect("liveness lock").elapsed()
    }
}

fn serve_framed(
    stream: TcpStream,
    hub: Arc<Hub>,
    config: Arc<BridgeConfig>,
    stop: Arc<AtomicBool>,
) {
    let _ = stream.set_nodelay(true);
    let Ok(write_half) = stream.try_clone() else {
        return;
    };
    let session = hub.open_session(Role::Both, Transport::FramedStream);
    let live = Arc::new(Liveness(Mutex::new(Instant::now())));
    info!("framed session {} opened", session.id());

    let writer = {
        let (session, live, config, stop) =
            (session.clone(), live.clone(), config.clone(), stop.clone());
        std::thread::spawn(move || framed_writer(write_half, &session, &live, &config, &stop))
    };

    let mut reader = BufReader::new(&stream);
    loop {
        match read_frame(&mut reader) {
            Ok(Some((msg, _))) => {
                live.touch();
                if let Err(e) = apply_inbound(&hub, &session, msg) {
                    warn!("session {}: {e}", session.id());
                }
            }
            Ok(None) => break,
            Err(e) if is_fatal(&e) => {
                if !session.is_closed() {
                    debug!("session {}: closing on {e}", session.id());
                }
                break;
            }
            Err(e) => {
                live.touch();
                warn!("session {}: dropped bad frame: {e}", session.id());
            }
        }
    }
    hub.disconnect(session.id());
    let _ = stream.shutdown(Shutdown::Both);
    let _ = writer.join();
    info!("framed session {} closed", session.id());
}

fn framed_writer(
    mut out: TcpStream,
    session: &Session,
    live: &Liveness,
    config: &BridgeConfig,
    stop: &AtomicBool,
) {
    let tick = config.heartbeat_interval.min(Duration::from_millis(100));
    let mut next_heartbeat = Instant::now() + config.heartbeat_interval;
    let heartbeat = |out: &mut TcpStream| -> std::io::Result<()> {
        let frame = encode(&WireMessage::heartbeat(monotonic_ns())).expect("heartbeat encodes");
        out.write_all(&frame)
    };
    let reason = loop {
        if session.is_closed() {
            break "closed";
        }
        if stop.load(Ordering::SeqCst) {
            break "bridge stopping";
        }
        if let Some(d) = session.recv_timeout(tick) {
            if out.write_all(&d.frame).is_err() {
                break "write failed";
            }
        }
        if Instant::now() >= next_heartbeat {
            next_heartbeat += config.heartbeat_interval;
            if heartbeat(&mut out).is_err() {
                break "write failed";
            }
        }
        if live.silent_for() > config.liveness_timeout() {
            break "missed heartbeats";
        }
    };
    debug!("session {} writer exits: {reason}", session.id());
    session.close();
    let _ = out.shutdown(Shutdown::Both);
}

fn serve_gateway(
    stream: TcpStream,
    hub: Arc<Hub>,
    config: Arc<BridgeConfig>,
    stop: Arc<AtomicBool>,
) {
    let _ = stream.set_nodelay(true);
    let _ = stream.set_read_timeout(Some(Duration::from_secs(5)));
    let mut ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            warn!("gateway handshake failed: {e}");
            return;
        }
    };
    let poll = config.heartbeat_interval.min(Duration::from_millis(10));
    if ws.get_ref().set_read_timeout(Some(poll)).is_err() {
        return;
    }
    let session = hub.open_session(Role::Both, Transport::BrowserGateway);
    info!("gateway session {} opened", session.id());
    let reason = gateway_loop(&mut ws, &hub, &session, &config, &stop);
    debug!("gateway session {} ends: {reason}", session.id());
    hub.disconnect(session.id());
    let _ = ws.close(None);
    let _ = ws.flush();
}

fn gateway_loop(
    ws: &mut WebSocket<TcpStream>,
    hub: &Hub,
    session: &Session,
    config: &BridgeConfig,
    stop: &AtomicBool,
) -> String {
    let mut last_seen = Instant::now();
    let mut next_heartbeat = Instant::now() + config.heartbeat_interval;
    loop {
        if stop.load(Ordering::SeqCst) {
            return "bridge stopping".into();
        }
        match ws.read() {
            Ok(msg) => {
                last_seen = Instant::now();
                let reply = match msg {
                    Message::Text(text) => Some(match serde_json::from_str::<GatewayOp>(&text) {
                        Ok(op) => apply_gateway_op(hub, session.id(), op),
                        Err(e) => GatewayReply::Error {
                            message: format!("bad control message: {e}"),
                        },
                    }),
                    Message::Binary(bytes) => match decode(&bytes) {
                        Ok(m) => {
                            apply_inbound(hub, session, m)
                                .err()
                                .map(|e| GatewayReply::Error {
                                    message: e.to_string(),
                                })
                        }
                        Err(e) => Some(GatewayReply::Error {
                            message: format!("bad frame: {e}"),
                        }),
                    },
                    Message::Close(_) => return "client closed".into(),
                    _ => None,
                };
                if let Some(r) = reply {
                    let text = serde_json::to_string(&r).expect("reply serializes");
                    if let Err(e) = ws.send(Message::text(text)) {
                        if !is_would_block(&e) {
                            return format!("send failed: {e}");
                        }
                    }
                }
            }
            Err(e) if is_would_block(&e) => {}
            Err(e) => return format!("read failed: {e}"),
        }

        let mut wrote = false;
        while let Some(d) = session.try_recv() {
            match ws.write(Message::binary(d.frame.clone())) {
                Ok(()) => wrote = true,
                Err(tungstenite::Error::WriteBufferFull(_)) => {
                    debug!(
                        "gateway session {}: write buffer full, frame dropped",
                        session.id()
                    );
                    break;
                }
                Err(e) if is_would_block(&e) => break,
                Err(e) => return format!("write failed: {e}"),
            }
        }
        if Instant::now() >= next_heartbeat {
            next_heartbeat += config.heartbeat_interval;
            let frame = encode(&WireMessage::heartbeat(monotonic_ns())).expect("heartbeat encodes");
            if let Err(e) = ws.write(Message::binary(frame)) {
                if !is_would_block(&e) {
                    return format!("write failed: {e}");
                }
            }
            wrote = true;
        }
        if wrote {
            if let Err(e) = ws.flush() {
                if !is_would_block(&e) {
                    return format!("flush failed: {e}");
                }
            }
        }
        if last_seen.elapsed() > config.liveness_timeout() {
            return "missed heartbeats".into();
        }
    }
}

fn is_would_block(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}
