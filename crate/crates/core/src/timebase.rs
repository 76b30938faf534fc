//! Simulated time and the coordinate-frame tree.
//!
//! One clock drives the whole session; every published message is stamped
//! from it. Frames form a single tree rooted at a configured world frame,
//! with per-edge time-indexed transform histories.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::{Pose, Vec3};

// ============================================================================
// SimTime
// ============================================================================

/// Simulated time: nanoseconds since session start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_nanos(ns: u64) -> Self {
        Self(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        Self(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        Self(ms * 1_000_000)
    }

    /// Seconds to nanoseconds, rounding to the nearest tick of 1 ns.
    pub fn from_secs_f64(secs: f64) -> Self {
        debug_assert!(secs >= 0.0 && secs.is_finite());
        Self((secs * 1e9).round() as u64)
    }

    pub const fn nanos(self) -> u64 {
        self.0
    }

    pub fn secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub const fn saturating_add(self, ns: u64) -> Self {
        Self(self.0.saturating_add(ns))
    }

    /// Absolute difference in nanoseconds.
    pub const fn abs_diff(self, other: Self) -> u64 {
        self.0.abs_diff(other.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}s", self.secs_f64())
    }
}

// ============================================================================
// SimClock
// ============================================================================

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClockError {
    #[error("clock advance of 0 ns rejected")]
    ZeroAdvance,
}

/// The session clock. A single driver advances it; everyone else reads.
#[derive(Debug, Clone)]
pub struct SimClock {
    now: SimTime,
}

impl SimClock {
    pub fn new() -> Self {
        Self { now: SimTime::ZERO }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Advances by exactly `dt_ns` and returns the new time.
    pub fn advance(&mut self, dt_ns: u64) -> Result<SimTime, ClockError> {
        if dt_ns == 0 {
            return Err(ClockError::ZeroAdvance);
        }
        self.now = self.now.saturating_add(dt_ns);
        Ok(self.now)
    }

    /// Jump used by bag replay, where stored stamps dictate the timeline.
    /// Must not move backwards.
    pub fn set(&mut self, t: SimTime) -> Result<SimTime, ClockError> {
        if t < self.now {
            return Err(ClockError::ZeroAdvance);
        }
        self.now = t;
        Ok(self.now)
    }
}

impl Default for SimClock {
    fn default() -> Self {
        Self::new()
    }
}

// ============================================================================
// FrameTree
// ============================================================================

/// One timestamped edge of the frame tree: the pose of `child` expressed in
/// `parent` (maps child-frame points into the parent frame).
#[derive(Debug, Clone, PartialEq)]
pub struct StampedTransform {
    pub stamp: SimTime,
    pub parent: String,
    pub child: String,
    pub pose: Pose,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("edge `{parent}` -> `{child}` would create a cycle")]
    Cycle { parent: String, child: String },
    #[error("frame `{child}` already has parent `{existing}`, rejected new parent `{attempted}`")]
    SecondParent {
        child: String,
        existing: String,
        attempted: String,
    },
    #[error("no transform for `{frame}` at {at} (history spans {first}..{last}, slack {slack_ns} ns)")]
    OutOfRange {
        frame: String,
        at: SimTime,
        first: SimTime,
        last: SimTime,
        slack_ns: u64,
    },
}

#[derive(Debug, Clone, Default)]
struct EdgeHistory {
    parent: String,
    /// Sorted by stamp; duplicate stamps keep the latest write.
    samples: Vec<(SimTime, Pose)>,
}

impl EdgeHistory {
    fn insert(&mut self, stamp: SimTime, pose: Pose) {
        match self.samples.binary_search_by_key(&stamp, |s| s.0) {
            Ok(i) => self.samples[i].1 = pose,
            Err(i) => self.samples.insert(i, (stamp, pose)),
        }
    }

    /// Interpolated pose at `t`. Exact stamps return the stored pose
    /// untouched; queries past the newest stamp hold it for up to
    /// `slack_ns` (zero-order hold), then error.
    fn sample(&self, t: SimTime, slack_ns: u64, frame: &str) -> Result<Pose, FrameError> {
        let (first, last) = (
            self.samples.first().map(|s| s.0),
            self.samples.last().map(|s| s.0),
        );
        let out_of_range = || FrameError::OutOfRange {
            frame: frame.to_string(),
            at: t,
            first: first.unwrap_or(SimTime::ZERO),
            last: last.unwrap_or(SimTime::ZERO),
            slack_ns,
        };
        if self.samples.is_empty() {
            return Err(out_of_range());
        }
        match self.samples.binary_search_by_key(&t, |s| s.0) {
            Ok(i) => Ok(self.samples[i].1),
            Err(0) => Err(out_of_range()),
            Err(i) if i == self.samples.len() => {
                let (newest, pose) = self.samples[i - 1];
                if t.nanos() <= newest.nanos() + slack_ns {
                    Ok(pose)
                } else {
                    Err(out_of_range())
                }
            }
            Err(i) => {
                let (t0, p0) = self.samples[i - 1];
                let (t1, p1) = self.samples[i];
                let u = (t.nanos() - t0.nanos()) as f64 / (t1.nanos() - t0.nanos()) as f64;
                Ok(p0.interpolate(&p1, u))
            }
        }
    }
}

/// Tree of named coordinate frames with time-indexed edges. Grows only from
/// the root, which keeps it single-rooted and acyclic by construction.
#[derive(Debug, Clone)]
pub struct FrameTree {
    root: String,
    /// child name -> its edge (parent + history). The root has no entry.
    edges: HashMap<String, EdgeHistory>,
    /// Queries newer than an edge's last stamp succeed up to this many
    /// nanoseconds past it (zero-order hold), then fail.
    pub extrapolation_slack_ns: u64,
}

impl FrameTree {
    pub fn new(world: &str, extrapolation_slack_ns: u64) -> Self {
        Self {
            root: world.to_string(),
            edges: HashMap::new(),
            extrapolation_slack_ns,
        }
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn has_frame(&self, name: &str) -> bool {
        name == self.root || self.edges.contains_key(name)
    }

    /// All registered frame names, root first, children sorted.
    pub fn frames(&self) -> Vec<String> {
        let mut out: Vec<String> = self.edges.keys().cloned().collect();
        out.sort();
        out.insert(0, self.root.clone());
        out
    }

    pub fn set_transform(&mut self, tf: &StampedTransform) -> Result<(), FrameError> {
        if !self.has_frame(&tf.parent) {
            return Err(FrameError::UnknownFrame(tf.parent.clone()));
        }
        if tf.child == self.root || self.is_ancestor(&tf.child, &tf.parent) {
            return Err(FrameError::Cycle {
                parent: tf.parent.clone(),
                child: tf.child.clone(),
            });
        }
        match self.edges.get_mut(&tf.child) {
            Some(edge) if edge.parent != tf.parent => Err(FrameError::SecondParent {
                child: tf.child.clone(),
                existing: edge.parent.clone(),
                attempted: tf.parent.clone(),
            }),
            Some(edge) => {
                edge.insert(tf.stamp, tf.pose);
                Ok(())
            }
            None => {
                let mut edge = EdgeHistory {
                    parent: tf.parent.clone(),
                    samples: Vec::new(),
                };
                edge.insert(tf.stamp, tf.pose);
                self.edges.insert(tf.child.clone(), edge);
                Ok(())
            }
        }
    }

    /// True when `maybe_ancestor` lies on the path from `frame` to the root
    /// (inclusive of `frame` itself).
    fn is_ancestor(&self, maybe_ancestor: &str, frame: &str) -> bool {
        let mut cur = frame;
        loop {
            if cur == maybe_ancestor {
                return true;
            }
            match self.edges.get(cur) {
                Some(edge) => cur = &edge.parent,
                None => return false,
            }
        }
    }

    /// Pose of `frame` expressed in the root frame at time `t`.
    fn pose_in_root(&self, frame: &str, t: SimTime) -> Result<Pose, FrameError> {
        if frame == self.root {
            return Ok(Pose::identity());
        }
        // Walk up collecting edges, then compose root-down.
        let mut chain = Vec::new();
        let mut cur = frame;
        while cur != self.root {
            let edge = self
                .edges
                .get(cur)
                .ok_or_else(|| FrameError::UnknownFrame(cur.to_string()))?;
            chain.push((cur, edge));
            cur = &edge.parent;
        }
        let mut pose = Pose::identity();
        for (name, edge) in chain.into_iter().rev() {
            pose = pose.compose(&edge.sample(t, self.extrapolation_slack_ns, name)?);
        }
        Ok(pose)
    }

    /// Pose of `target` expressed in `source` at time `t`: the transform
    /// mapping target-frame points into source-frame coordinates.
    pub fn lookup_transform(
        &self,
        source: &str,
        target: &str,
        t: SimTime,
    ) -> Result<Pose, FrameError> {
        if !self.has_frame(source) {
            return Err(FrameError::UnknownFrame(source.to_string()));
        }
        if !self.has_frame(target) {
            return Err(FrameError::UnknownFrame(target.to_string()));
        }
        if source == target {
            return Ok(Pose::identity());
        }
        let a = self.pose_in_root(source, t)?;
        let b = self.pose_in_root(target, t)?;
        Ok(a.inverse().compose(&b))
    }
}

/// Convenience constructor for the common literal case in tests and setup.
pub fn stamped(stamp: SimTime, parent: &str, child: &str, pose: Pose) -> StampedTransform {
    StampedTransform {
        stamp,
        parent: parent.to_string(),
        child: child.to_string(),
        pose,
    }
}

pub fn pose_xyz(x: f64, y: f64, z: f64) -> Pose {
    Pose::from_translation(Vec3::new(x, y, z))
}
