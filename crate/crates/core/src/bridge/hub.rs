//! In-process topic table and per-session inboxes.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wire::{encode, Body, MsgType, Role, WireError, WireMessage};

pub type SessionId = u64;

#[derive(Debug, Error)]
pub enum HubError {
    #[error("unknown topic {0:?}")]
    UnknownTopic(String),
    #[error("topic {topic:?} carries {expected:?}, got {got:?}")]
    TypeMismatch {
        topic: String,
        expected: MsgType,
        got: MsgType,
    },
    #[error("no topic accepts {0:?} messages")]
    Unroutable(MsgType),
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("invalid topic definition: {0}")]
    InvalidTopic(String),
    #[error("malformed twist: {0}")]
    MalformedTwist(String),
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSpec {
    pub name: String,
    pub msg_type: MsgType,
    pub queue_depth: usize,
    #[serde(default)]
    pub latched: bool,
}

impl TopicSpec {
    pub fn new(name: impl Into<String>, msg_type: MsgType, queue_depth: usize) -> Self {
        Self {
            name: name.into(),
            msg_type,
            queue_depth,
            latched: false,
        }
    }

    pub fn latched(mut self) -> Self {
        self.latched = true;
        self
    }
}

pub const TOPIC_CLOUD: &str = "map/cloud";
pub const TOPIC_POSE: &str = "robot/pose";
pub const TOPIC_TWIST: &str = "robot/twist";
pub const TOPIC_TAGS: &str = "tag/observations";
pub const TOPIC_MODE: &str = "viewer/mode";
pub const TOPIC_CAMERA: &str = "camera/stream";

pub fn default_topics() -> Vec<TopicSpec> {
    vec![
        TopicSpec::new(TOPIC_CLOUD, MsgType::PointCloud, 4),
        TopicSpec::new(TOPIC_POSE, MsgType::Pose, 16).latched(),
        TopicSpec::new(TOPIC_TWIST, MsgType::Twist, 16),
        TopicSpec::new(TOPIC_TAGS, MsgType::TagObservation, 64),
        TopicSpec::new(TOPIC_MODE, MsgType::ModeChange, 4).latched(),
        TopicSpec::new(TOPIC_CAMERA, MsgType::StreamFrame, 8),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transport {
    FramedStream,
    BrowserGateway,
    InProcess,
}

/// A message as delivered to subscribers, with its frame bytes encoded once.
#[derive(Debug)]
pub struct Delivery {
    pub topic: Arc<str>,
    pub msg: WireMessage,
    pub frame: Vec<u8>,
}

#[derive(Debug, Default)]
struct Inbox {
    queue: VecDeque<Arc<Delivery>>,
    per_topic: HashMap<Arc<str>, usize>,
}

/// One connected client. The hub is the only producer into its inbox.
#[derive(Debug)]
pub struct Session {
    id: SessionId,
    transport: Transport,
    role: Mutex<Role>,
    inbox: Mutex<Inbox>,
    ready: Condvar,
    closed: AtomicBool,
    dropped: AtomicU64,
}

impl Session {
    pub fn id(&self) -> SessionId {
        self.id
    }

    pub fn transport(&self) -> Transport {
        self.transport
    }

    pub fn role(&self) -> Role {
        *self.role.lock().expect("session lock")
    }

    pub fn set_role(&self, role: Role) {
        *self.role.lock().expect("session lock") = role;
    }

    /// Messages discarded by drop-oldest so far.
    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::Acquire)
    }

    pub fn close(&self) {
        self.closed.store(true, Ordering::Release);
        self.ready.notify_all();
    }

    pub fn queued(&self) -> usize {
        self.inbox.lock().expect("session lock").queue.len()
    }

    fn push(&self, d: Arc<Delivery>, depth: usize) {
        let mut inbox = self.inbox.lock().expect("session lock");
        let count = inbox.per_topic.entry(d.topic.clone()).or_insert(0);
        if *count >= depth {
            *count -= 1;
            let pos = inbox
                .queue
                .iter()
                .position(|q| q.topic == d.topic)
                .expect("counted message present");
            inbox.queue.remove(pos);
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
        *inbox.per_topic.get_mut(&d.topic).expect("entry") += 1;
        inbox.queue.push_back(d);
        drop(inbox);
        self.ready.notify_one();
    }

    fn pop_locked(inbox: &mut Inbox) -> Option<Arc<Delivery>> {
        let d = inbox.queue.pop_front()?;
        if let Some(c) = inbox.per_topic.get_mut(&d.topic) {
            *c -= 1;
        }
        Some(d)
    }

    pub fn try_recv(&self) -> Option<Arc<Delivery>> {
        Self::pop_locked(&mut self.inbox.lock().expect("session lock"))
    }

    /// Waits up to `timeout` for the next delivery. Returns `None` on timeout
    /// or once the session is closed and drained.
    pub fn recv_timeout(&self, timeout: Duration) -> Option<Arc<Delivery>> {
        let deadline = Instant::now() + timeout;
        let mut inbox = self.inbox.lock().expect("session lock");
        loop {
            if let Some(d) = Self::pop_locked(&mut inbox) {
                return Some(d);
            }
            let now = Instant::now();
            if self.is_closed() || now >= deadline {
                return None;
            }
            inbox = self
                .ready
                .wait_timeout(inbox, deadline - now)
                .expect("session lock")
                .0;
        }
    }

    pub fn drain(&self) -> Vec<Arc<Delivery>> {
        let mut inbox = self.inbox.lock().expect("session lock");
        inbox.per_topic.clear();
        inbox.queue.drain(..).collect()
    }
}

#[derive(Debug)]
struct TopicEntry {
    spec: TopicSpec,
    name: Arc<str>,
    subscribers: BTreeSet<SessionId>,
    latched: Mutex<Option<Arc<Delivery>>>,
}

#[derive(Debug, Default)]
struct HubState {
    topics: Vec<TopicEntry>,
    index: HashMap<String, usize>,
    sessions: HashMap<SessionId, Arc<Session>>,
}

/// Topic-based pub/sub router. Publishing takes the table's read lock and
/// only per-session inbox locks, so a stalled consumer never blocks it.
#[derive(Debug)]
pub struct Hub {
    state: RwLock<HubState>,
    next_session: AtomicU64,
    published: AtomicU64,
}

impl Hub {
    pub fn new(topics: Vec<TopicSpec>) -> Result<Self, HubError> {
        let mut state = HubState::default();
        for spec in topics {
            if spec.name.is_empty() || spec.name.len() > 255 {
                return Err(HubError::InvalidTopic(format!(
                    "topic name must be 1..=255 bytes: {:?}",
                    spec.name
                )));
            }
            if spec.queue_depth == 0 {
                return Err(HubError::InvalidTopic(format!(
                    "{}: queue_depth must be at least 1",
                    spec.name
                )));
            }
            if state.index.contains_key(&spec.name) {
                return Err(HubError::InvalidTopic(format!(
                    "duplicate topic {}",
                    spec.name
                )));
            }
            state.index.insert(spec.name.clone(), state.topics.len());
            state.topics.push(TopicEntry {
                name: spec.name.as_str().into(),
                spec,
                subscribers: BTreeSet::new(),
                latched: Mutex::new(None),
            });
        }
        Ok(Self {
            state: RwLock::new(state),
            next_session: AtomicU64::new(1),
            published: AtomicU64::new(0),
        })
    }

    pub fn with_default_topics() -> Self {
        Self::new(default_topics()).expect("default topics are valid")
    }

    pub fn topics(&self) -> Vec<TopicSpec> {
        let s = self.state.read().expect("hub lock");
        s.topics.iter().map(|t| t.spec.clone()).collect()
    }

    pub fn published(&self) -> u64 {
        self.published.load(Ordering::Relaxed)
    }

    pub fn session_count(&self) -> usize {
        self.state.read().expect("hub lock").sessions.len()
    }

    pub fn subscribers(&self, topic: &str) -> Result<Vec<SessionId>, HubError> {
        let s = self.state.read().expect("hub lock");
        let i = *s
            .index
            .get(topic)
            .ok_or_else(|| HubError::UnknownTopic(topic.into()))?;
        Ok(s.topics[i].subscribers.iter().copied().collect())
    }

    pub fn open_session(&self, role: Role, transport: Transport) -> Arc<Session> {
        let id = self.next_session.fetch_add(1, Ordering::Relaxed);
        let session = Arc::new(Session {
            id,
            transport,
            role: Mutex::new(role),
            inbox: Mutex::new(Inbox::default()),
            ready: Condvar::new(),
            closed: AtomicBool::new(false),
            dropped: AtomicU64::new(0),
        });
        self.state
            .write()
            .expect("hub lock")
            .sessions
            .insert(id, session.clone());
        session
    }

    /// Removes the session and all of its subscriptions.
    pub fn disconnect(&self, id: SessionId) {
        let mut s = self.state.write().expect("hub lock");
        for t in &mut s.topics {
            t.subscribers.remove(&id);
        }
        if let Some(sess) = s.sessions.remove(&id) {
            sess.close();
        }
    }

    /// Subscribing twice is a no-op. Returns whether the subscription is new.
    /// A new subscriber to a latched topic immediately receives its last
    /// message.
    pub fn subscribe(&self, id: SessionId, topic: &str) -> Result<bool, HubError> {
        let mut s = self.state.write().expect("hub lock");
        let session = s
            .sessions
            .get(&id)
            .cloned()
            .ok_or(HubError::UnknownSession(id))?;
        let i = *s
            .index
            .get(topic)
            .ok_or_else(|| HubError::UnknownTopic(topic.into()))?;
        let entry = &mut s.topics[i];
        if !entry.subscribers.insert(id) {
            return Ok(false);
        }
        if entry.spec.latched {
            if let Some(d) = entry.latched.lock().expect("latch lock").clone() {
                session.push(d, entry.spec.queue_depth);
            }
        }
        Ok(true)
    }

    pub fn unsubscribe(&self, id: SessionId, topic: &str) -> Result<bool, HubError> {
        let mut s = self.state.write().expect("hub lock");
        let i = *s
            .index
            .get(topic)
            .ok_or_else(|| HubError::UnknownTopic(topic.into()))?;
        Ok(s.topics[i].subscribers.remove(&id))
    }

    /// Enqueues `msg` for every current subscriber of `topic` and returns how
    /// many received it.
    pub fn publish(&self, topic: &str, msg: WireMessage) -> Result<usize, HubError> {
        let s = self.state.read().expect("hub lock");
        let i = *s
            .index
            .get(topic)
            .ok_or_else(|| HubError::UnknownTopic(topic.into()))?;
        Self::publish_at(&s, i, msg).inspect(|_| {
            self.published.fetch_add(1, Ordering::Relaxed);
        })
    }

    /// Publishes on the first topic registered for the message's type.
    pub fn publish_routed(&self, msg: WireMessage) -> Result<(String, usize), HubError> {
        let s = self.state.read().expect("hub lock");
        let ty = msg.msg_type();
        let i = s
            .topics
            .iter()
            .position(|t| t.spec.msg_type == ty)
            .ok_or(HubError::Unroutable(ty))?;
        let n = Self::publish_at(&s, i, msg)?;
        self.published.fetch_add(1, Ordering::Relaxed);
        Ok((s.topics[i].spec.name.clone(), n))
    }

    fn publish_at(s: &HubState, i: usize, msg: WireMessage) -> Result<usize, HubError> {
        let entry = &s.topics[i];
        if msg.msg_type() != entry.spec.msg_type {
            return Err(HubError::TypeMismatch {
                topic: entry.spec.name.clone(),
                expected: entry.spec.msg_type,
                got: msg.msg_type(),
            });
        }
        let frame = encode(&msg)?;
        let d = Arc::new(Delivery {
            topic: entry.name.clone(),
            msg,
            frame,
        });
        if entry.spec.latched {
            *entry.latched.lock().expect("latch lock") = Some(d.clone());
        }
        let mut n = 0;
        for id in &entry.subscribers {
            if let Some(sess) = s.sessions.get(id) {
                sess.push(d.clone(), entry.spec.queue_depth);
                n += 1;
            }
        }
        Ok(n)
    }

    /// Forwards a teleop command on `robot/twist`.
    pub fn route_teleop(&self, twist: WireMessage) -> Result<usize, HubError> {
        match twist.body {
            Body::Twist { linear, angular } if linear.is_finite() && angular.is_finite() => {
                self.publish(TOPIC_TWIST, twist)
            }
            Body::Twist { .. } => Err(HubError::MalformedTwist("non-finite velocity".into())),
            ref other => Err(HubError::MalformedTwist(format!(
                "expected a twist, got {:?}",
                other.msg_type()
            ))),
        }
    }
}
