//! Messages and the bounded per-node message buffer.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Run-unique message identifier, allocated sequentially from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageId(pub u32);

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.0)
    }
}

/// A store-carry-forward payload descriptor.
///
/// `hops_remaining` belongs to the copy: every completed relay hands the
/// receiver a copy with one hop less. `None` means the copy may travel any
/// number of hops until its TTL runs out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub id: MessageId,
    pub src: NodeId,
    pub dst: NodeId,
    pub size_bytes: u64,
    pub created_at: SimTime,
    pub ttl: f64,
    pub hops_remaining: Option<u32>,
}

impl Message {
    pub fn deadline(&self) -> SimTime {
        self.created_at + self.ttl
    }

    /// Expiry is strict: a message is still alive at exactly its deadline.
    pub fn is_expired(&self, now: SimTime) -> bool {
        now > self.deadline()
    }

    /// Whether this copy may be handed to `peer`. A copy with no hops left
    /// can only reach its final destination.
    pub fn may_relay_to(&self, peer: NodeId) -> bool {
        peer == self.dst || self.hops_remaining.is_none_or(|h| h > 0)
    }

    /// The copy a receiver stores after a completed relay.
    pub fn relayed_copy(&self) -> Message {
        Message { hops_remaining: self.hops_remaining.map(|h| h.saturating_sub(1)), ..*self }
    }
}

/// A message copy held in a node's buffer plus per-copy routing state.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferEntry {
    pub msg: Message,
    pub received_at: SimTime,
    /// Number of relays this copy has travelled so far.
    pub hop_count: u32,
    /// Remaining copy budget (Integrated routing). `None` is unlimited.
    pub copies_left: Option<u32>,
    /// Time after which the holder may fall back to broadcasting.
    pub wait_deadline: SimTime,
}

impl BufferEntry {
    pub fn new(msg: Message, received_at: SimTime, hop_count: u32) -> Self {
        BufferEntry { msg, received_at, hop_count, copies_left: None, wait_deadline: received_at }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Admission {
    /// Stored; `evicted` lists the copies removed to make room.
    Admitted { evicted: Vec<BufferEntry> },
    /// The buffer already holds this id. Nothing changes.
    Duplicate,
    /// Larger than the whole buffer.
    Oversize,
}

/// Bounded FIFO message store.
///
/// Entries are kept in arrival order. When space runs out, relayed copies are
/// evicted oldest-first before any message the owner originated.
#[derive(Debug, Clone)]
pub struct Buffer {
    owner: NodeId,
    capacity: u64,
    used: u64,
    entries: Vec<BufferEntry>,
}

impl Buffer {
    pub fn new(owner: NodeId, capacity: u64) -> Self {
        Buffer { owner, capacity, used: 0, entries: Vec::new() }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: MessageId) -> bool {
        self.entries.iter().any(|e| e.msg.id == id)
    }

    pub fn get(&self, id: MessageId) -> Option<&BufferEntry> {
        self.entries.iter().find(|e| e.msg.id == id)
    }

    pub fn get_mut(&mut self, id: MessageId) -> Option<&mut BufferEntry> {
        self.entries.iter_mut().find(|e| e.msg.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &BufferEntry> {
        self.entries.iter()
    }

    /// The summary vector: ids currently buffered, in arrival order.
    pub fn summary_vector(&self) -> Vec<MessageId> {
        self.entries.iter().map(|e| e.msg.id).collect()
    }

    pub fn admit(&mut self, entry: BufferEntry) -> Admission {
        if self.contains(entry.msg.id) {
            return Admission::Duplicate;
        }
        let size = entry.msg.size_bytes;
        if size > self.capacity {
            return Admission::Oversize;
        }
        let mut evicted = Vec::new();
        while self.used + size > self.capacity {
            let victim = self.entries.iter().position(|e| e.msg.src != self.owner).unwrap_or(0);
            let gone = self.entries.remove(victim);
            self.used -= gone.msg.size_bytes;
            evicted.push(gone);
        }
        self.used += size;
        self.entries.push(entry);
        Admission::Admitted { evicted }
    }

    pub fn remove(&mut self, id: MessageId) -> Option<BufferEntry> {
        let idx = self.entries.iter().position(|e| e.msg.id == id)?;
        let gone = self.entries.remove(idx);
        self.used -= gone.msg.size_bytes;
        Some(gone)
    }

    /// Removes every copy whose TTL has run out at `now`.
    pub fn expire(&mut self, now: SimTime) -> Vec<BufferEntry> {
        let (dead, alive): (Vec<_>, Vec<_>) = std::mem::take(&mut self.entries).into_iter().partition(|e| e.msg.is_expired(now));
        self.entries = alive;
        self.used = self.entries.iter().map(|e| e.msg.size_bytes).sum();
        dead
    }
}
