//! In-process publish/subscribe bus with timestamped envelopes.
//!
//! One bus per session. Publishers and subscribers may live on different
//! threads; delivery is FIFO per topic, and cross-topic ordering is defined
//! only through stamps.

pub mod bag;
pub mod sync;

use std::collections::HashMap;
use std::sync::mpsc;
use std::sync::Mutex;

use thiserror::Error;

use crate::timebase::SimTime;

pub use bag::{
    bag_inspect, encode_bag, read_bag, read_bag_lossy, replay_into_bus, write_bag, BagError,
    BagFile, BagRecord, BagSummary, BagTopic, Recorder,
};
pub use sync::ApproxSync;

/// Per-message metadata. The stamp comes from the shared clock at publish
/// time; the frame names the coordinate frame the payload refers to (may be
/// empty for frameless data).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Header {
    pub stamp: SimTime,
    pub frame_id: String,
}

/// One published message: topic, schema name, header, a per-topic sequence
/// number assigned by the bus, and the schema-encoded payload bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub topic: String,
    pub schema: String,
    pub header: Header,
    pub seq: u32,
    pub payload: Vec<u8>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BusError {
    #[error("topic `{topic}` already carries schema `{existing}`, rejected `{attempted}`")]
    SchemaMismatch {
        topic: String,
        existing: String,
        attempted: String,
    },
}

#[derive(Default)]
struct TopicState {
    schema: Option<String>,
    next_seq: u32,
    subscribers: Vec<mpsc::Sender<Envelope>>,
}

#[derive(Default)]
struct Inner {
    topics: HashMap<String, TopicState>,
    /// Taps receive every envelope of every topic (used by the recorder).
    taps: Vec<mpsc::Sender<Envelope>>,
}

/// The session bus. Wrap in `Arc` to share across threads.
#[derive(Default)]
pub struct Bus {
    inner: Mutex<Inner>,
}

/// Receiving side of a subscription; envelopes arrive in per-topic FIFO
/// order.
pub struct Subscriber {
    rx: mpsc::Receiver<Envelope>,
}

impl Subscriber {
    /// All envelopes delivered so far, without blocking.
    pub fn drain(&self) -> Vec<Envelope> {
        let mut out = Vec::new();
        while let Ok(env) = self.rx.try_recv() {
            out.push(env);
        }
        out
    }

    /// Blocking receive; `None` once every publisher handle is gone.
    pub fn recv(&self) -> Option<Envelope> {
        self.rx.recv().ok()
    }
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Publishes one message. The first publish on a topic pins its schema;
    /// later publishes must match. Returns the assigned sequence number.
    pub fn publish(
        &self,
        topic: &str,
        schema: &str,
        header: Header,
        payload: Vec<u8>,
    ) -> Result<u32, BusError> {
        let mut inner = self.inner.lock().expect("bus lock poisoned");
        let state = inner.topics.entry(topic.to_string()).or_default();
        match &state.schema {
            Some(existing) if existing != schema => {
                return Err(BusError::SchemaMismatch {
                    topic: topic.to_string(),
                    existing: existing.clone(),
                    attempted: schema.to_string(),
                });
            }
            Some(_) => {}
            None => state.schema = Some(schema.to_string()),
        }
        let seq = state.next_seq;
        state.next_seq += 1;
        let envelope = Envelope {
            topic: topic.to_string(),
            schema: schema.to_string(),
            header,
            seq,
            payload,
        };
        state
            .subscribers
            .retain(|tx| tx.send(envelope.clone()).is_ok());
        inner.taps.retain(|tx| tx.send(envelope.clone()).is_ok());
        Ok(seq)
    }

    /// Subscribes to one topic; the topic need not exist yet.
    pub fn subscribe(&self, topic: &str) -> Subscriber {
        let (tx, rx) = mpsc::channel();
        let mut inner = self.inner.lock().expect("bus lock poisoned");
        inner
            .topics
            .entry(topic.to_string())
            .or_default()
            .subscribers
            .push(tx);
        Subscriber { rx }
    }

    /// Subscribes to every topic, present and future.
    pub fn tap(&self) -> Subscriber {
        let (tx, rx) = mpsc::channel();
        self.inner.lock().expect("bus lock poisoned").taps.push(tx);
        Subscriber { rx }
    }

    /// Topic names seen so far, sorted.
    pub fn topics(&self) -> Vec<String> {
        let inner = self.inner.lock().expect("bus lock poisoned");
        let mut names: Vec<String> = inner.topics.keys().cloned().collect();
        names.sort();
        names
    }
}
