//! Approximate-time synchronizer.
//!
//! Pairs up envelopes from several topics whose stamps agree within a slop
//! window. Greedy policy: whenever every queue has a head, test the heads;
//! if the stamp spread fits the slop, emit the tuple, otherwise drop the
//! single oldest head and try again. Each envelope is used at most once.

use std::collections::VecDeque;

use super::Envelope;

pub struct ApproxSync {
    topics: Vec<String>,
    slop_ns: u64,
    queues: Vec<VecDeque<Envelope>>,
}

impl ApproxSync {
    /// `topics` must name at least two distinct topics.
    pub fn new(topics: &[&str], slop_ns: u64) -> Self {
        assert!(topics.len() >= 2, "synchronizer needs at least two topics");
        Self {
            topics: topics.iter().map(|s| s.to_string()).collect(),
            slop_ns,
            queues: vec![VecDeque::new(); topics.len()],
        }
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    /// Feeds one envelope; returns every tuple that became ready, in emit
    /// order. Envelopes for unknown topics are ignored.
    pub fn push(&mut self, env: Envelope) -> Vec<Vec<Envelope>> {
        let Some(slot) = self.topics.iter().position(|t| *t == env.topic) else {
            return Vec::new();
        };
        self.queues[slot].push_back(env);
        let mut tuples = Vec::new();
        while let Some(result) = self.try_emit() {
            tuples.push(result);
        }
        tuples
    }

    /// One round of the greedy policy; `None` when some queue is empty or
    /// after the heads fail the slop test and a drop occurred but a queue
    /// went empty.
    fn try_emit(&mut self) -> Option<Vec<Envelope>> {
        loop {
            if self.queues.iter().any(VecDeque::is_empty) {
                return None;
            }
            let stamps: Vec<u64> = self
                .queues
                .iter()
                .map(|q| q.front().unwrap().header.stamp.nanos())
                .collect();
            let min = *stamps.iter().min().unwrap();
            let max = *stamps.iter().max().unwrap();
            if max - min <= self.slop_ns {
                return Some(
                    self.queues
                        .iter_mut()
                        .map(|q| q.pop_front().unwrap())
                        .collect(),
                );
            }
            // Heads too spread out: the oldest head can never participate
            // in a tuple (later arrivals only widen the gap), drop it.
            let oldest = stamps.iter().position(|&s| s == min).unwrap();
            self.queues[oldest].pop_front();
        }
    }

    /// Envelopes still waiting, per topic.
    pub fn pending(&self) -> Vec<usize> {
        self.queues.iter().map(VecDeque::len).collect()
    }
}
