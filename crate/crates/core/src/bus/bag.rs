//! Session bag: a bit-exact binary capture of bus traffic.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! magic "SABG" | u16 version=1 | u32 topic_count
//! per topic:  u16 id | u16 name_len + name | u16 schema_len + schema
//! per record: u64 stamp_ns | u16 topic_id | u32 seq | u32 len | payload
//! ```
//!
//! Records are ordered by stamp, keeping publish order within a stamp. The
//! record payload embeds the envelope's frame id as a u16-length-prefixed
//! string ahead of the message body, so a replayed envelope reconstructs
//! its header exactly.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::timebase::{SimClock, SimTime};
use crate::wire::{self, Reader, WireError};

use super::{Bus, Envelope, Header, Subscriber};

pub const BAG_MAGIC: &[u8; 4] = b"SABG";
pub const BAG_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum BagError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a bag file (bad magic)")]
    BadMagic,
    #[error("unsupported bag version {0}")]
    UnsupportedVersion(u16),
    #[error("corrupt bag: {0}")]
    Corrupt(WireError),
    #[error("corrupt bag: record {index} truncated after {delivered} complete records")]
    TruncatedRecord { index: usize, delivered: usize },
    #[error("record references undeclared topic id {0}")]
    UndeclaredTopic(u16),
    #[error("bag holds more than 65535 topics")]
    TooManyTopics,
    #[error("clock went backwards during replay")]
    NonMonotonicReplay,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BagTopic {
    pub id: u16,
    pub name: String,
    pub schema: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BagRecord {
    pub stamp: SimTime,
    pub topic_id: u16,
    pub seq: u32,
    pub frame_id: String,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Default)]
pub struct BagFile {
    pub topics: Vec<BagTopic>,
    pub records: Vec<BagRecord>,
}

impl BagFile {
    pub fn topic(&self, id: u16) -> Option<&BagTopic> {
        self.topics.iter().find(|t| t.id == id)
    }

    pub fn topic_id(&self, name: &str) -> Option<u16> {
        self.topics.iter().find(|t| t.name == name).map(|t| t.id)
    }

    /// Reconstructs the envelope a record was written from.
    pub fn envelope(&self, record: &BagRecord) -> Envelope {
        let topic = self.topic(record.topic_id).expect("validated on read");
        Envelope {
            topic: topic.name.clone(),
            schema: topic.schema.clone(),
            header: Header {
                stamp: record.stamp,
                frame_id: record.frame_id.clone(),
            },
            seq: record.seq,
            payload: record.payload.clone(),
        }
    }
}

/// Human-facing totals for `bag inspect`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BagSummary {
    pub version: u16,
    /// (name, schema, record count) in topic-id order.
    pub topics: Vec<(String, String, u64)>,
    pub record_count: u64,
    pub first_stamp: Option<SimTime>,
    pub last_stamp: Option<SimTime>,
}

// ============================================================================
// Writing
// ============================================================================

/// Serializes envelopes into the bag layout. Records are stamp-sorted but
/// keep their arrival order within a stamp, so the publish order inside a
/// tick (clock, then transforms, then everything derived) survives the
/// round trip. Topic ids are assigned in order of first appearance, which
/// makes the bytes a pure function of the envelope sequence.
pub fn encode_bag(envelopes: &[Envelope]) -> Result<Vec<u8>, BagError> {
    let mut sorted: Vec<&Envelope> = envelopes.iter().collect();
    sorted.sort_by_key(|e| e.header.stamp);

    let mut topic_ids: HashMap<&str, u16> = HashMap::new();
    let mut topics: Vec<(&str, &str)> = Vec::new();
    for env in &sorted {
        if !topic_ids.contains_key(env.topic.as_str()) {
            let id = topics.len();
            if id > u16::MAX as usize {
                return Err(BagError::TooManyTopics);
            }
            topic_ids.insert(&env.topic, id as u16);
            topics.push((&env.topic, &env.schema));
        }
    }

    let mut out = Vec::new();
    out.extend_from_slice(BAG_MAGIC);
    wire::put_u16(&mut out, BAG_VERSION);
    wire::put_u32(&mut out, topics.len() as u32);
    for (id, (name, schema)) in topics.iter().enumerate() {
        wire::put_u16(&mut out, id as u16);
        wire::put_str(&mut out, name).map_err(BagError::Corrupt)?;
        wire::put_str(&mut out, schema).map_err(BagError::Corrupt)?;
    }
    for env in &sorted {
        let mut body = Vec::with_capacity(2 + env.header.frame_id.len() + env.payload.len());
        wire::put_str(&mut body, &env.header.frame_id).map_err(BagError::Corrupt)?;
        body.extend_from_slice(&env.payload);
        wire::put_u64(&mut out, env.header.stamp.nanos());
        wire::put_u16(&mut out, topic_ids[env.topic.as_str()]);
        wire::put_u32(&mut out, env.seq);
        wire::put_u32(&mut out, body.len() as u32);
        out.extend_from_slice(&body);
    }
    Ok(out)
}

pub fn write_bag(path: &Path, envelopes: &[Envelope]) -> Result<(), BagError> {
    fs::write(path, encode_bag(envelopes)?)?;
    Ok(())
}

/// Buffers bus traffic for an eventual bag write. Attach before the session
/// starts so nothing is missed; call [`Recorder::finish`] at the end.
pub struct Recorder {
    sub: Subscriber,
    /// `None` records everything.
    topics: Option<Vec<String>>,
    buffer: Vec<Envelope>,
}

impl Recorder {
    pub fn attach_all(bus: &Bus) -> Self {
        Self {
            sub: bus.tap(),
            topics: None,
            buffer: Vec::new(),
        }
    }

    pub fn attach(bus: &Bus, topics: &[&str]) -> Self {
        Self {
            sub: bus.tap(),
            topics: Some(topics.iter().map(|s| s.to_string()).collect()),
            buffer: Vec::new(),
        }
    }

    /// Drains pending envelopes into the buffer.
    pub fn collect(&mut self) {
        for env in self.sub.drain() {
            let keep = match &self.topics {
                None => true,
                Some(list) => list.iter().any(|t| *t == env.topic),
            };
            if keep {
                self.buffer.push(env);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn finish(mut self, path: &Path) -> Result<BagSummary, BagError> {
        self.collect();
        write_bag(path, &self.buffer)?;
        bag_inspect(path)
    }
}

// ============================================================================
// Reading
// ============================================================================

fn decode_header<'a>(bytes: &'a [u8]) -> Result<(Vec<BagTopic>, Reader<'a>), BagError> {
    if bytes.len() < 4 || &bytes[..4] != BAG_MAGIC {
        return Err(BagError::BadMagic);
    }
    let mut r = Reader::new(&bytes[4..]);
    let version = r.u16("version").map_err(BagError::Corrupt)?;
    if version != BAG_VERSION {
        return Err(BagError::UnsupportedVersion(version));
    }
    let topic_count = r.u32("topic count").map_err(BagError::Corrupt)?;
    let mut topics = Vec::with_capacity(topic_count as usize);
    for _ in 0..topic_count {
        let id = r.u16("topic id").map_err(BagError::Corrupt)?;
        let name = r.str("topic name").map_err(BagError::Corrupt)?;
        let schema = r.str("topic schema").map_err(BagError::Corrupt)?;
        topics.push(BagTopic { id, name, schema });
    }
    Ok((topics, r))
}

fn decode_records(
    topics: &[BagTopic],
    mut r: Reader<'_>,
) -> (Vec<BagRecord>, Option<BagError>) {
    let mut records = Vec::new();
    while r.remaining() > 0 {
        let index = records.len();
        let parsed = (|| -> Result<BagRecord, BagError> {
            let stamp = r.u64("record stamp").map_err(BagError::Corrupt)?;
            let topic_id = r.u16("record topic id").map_err(BagError::Corrupt)?;
            let seq = r.u32("record seq").map_err(BagError::Corrupt)?;
            let len = r.u32("record length").map_err(BagError::Corrupt)? as usize;
            let body = r.take(len, "record payload").map_err(BagError::Corrupt)?;
            if topics.iter().all(|t| t.id != topic_id) {
                return Err(BagError::UndeclaredTopic(topic_id));
            }
            let mut br = Reader::new(body);
            let frame_id = br.str("frame id").map_err(BagError::Corrupt)?;
            let payload = br.take(br.remaining(), "payload").unwrap().to_vec();
            Ok(BagRecord {
                stamp: SimTime::from_nanos(stamp),
                topic_id,
                seq,
                frame_id,
                payload,
            })
        })();
        match parsed {
            Ok(rec) => records.push(rec),
            Err(BagError::Corrupt(WireError::Truncated(_))) => {
                return (
                    records.clone(),
                    Some(BagError::TruncatedRecord {
                        index,
                        delivered: records.len(),
                    }),
                );
            }
            Err(e) => return (records.clone(), Some(e)),
        }
    }
    (records, None)
}

/// Strict read: any corruption is an error.
pub fn read_bag(path: &Path) -> Result<BagFile, BagError> {
    let bytes = fs::read(path)?;
    let (topics, r) = decode_header(&bytes)?;
    let (records, err) = decode_records(&topics, r);
    match err {
        Some(e) => Err(e),
        None => Ok(BagFile { topics, records }),
    }
}

/// Tolerant read: header corruption is still fatal, but a truncated record
/// tail returns every complete record alongside the error that stopped the
/// parse.
pub fn read_bag_lossy(path: &Path) -> Result<(BagFile, Option<BagError>), BagError> {
    let bytes = fs::read(path)?;
    let (topics, r) = decode_header(&bytes)?;
    let (records, err) = decode_records(&topics, r);
    Ok((BagFile { topics, records }, err))
}

pub fn bag_inspect(path: &Path) -> Result<BagSummary, BagError> {
    let bag = read_bag(path)?;
    let mut counts: HashMap<u16, u64> = HashMap::new();
    for rec in &bag.records {
        *counts.entry(rec.topic_id).or_default() += 1;
    }
    Ok(BagSummary {
        version: BAG_VERSION,
        topics: bag
            .topics
            .iter()
            .map(|t| (t.name.clone(), t.schema.clone(), counts.get(&t.id).copied().unwrap_or(0)))
            .collect(),
        record_count: bag.records.len() as u64,
        first_stamp: bag.records.first().map(|r| r.stamp),
        last_stamp: bag.records.last().map(|r| r.stamp),
    })
}

// ============================================================================
// Replay
// ============================================================================

/// Re-publishes every record on the bus at its stored stamp, driving the
/// clock forward to match. The session ends when the bag does.
pub fn replay_into_bus(bag: &BagFile, bus: &Bus, clock: &mut SimClock) -> Result<(), BagError> {
    for rec in &bag.records {
        if rec.stamp > clock.now() {
            clock.set(rec.stamp).map_err(|_| BagError::NonMonotonicReplay)?;
        } else if rec.stamp < clock.now() {
            return Err(BagError::NonMonotonicReplay);
        }
        let env = bag.envelope(rec);
        bus.publish(&env.topic, &env.schema, env.header, env.payload)
            .expect("schemas are consistent within a bag");
    }
    Ok(())
}
