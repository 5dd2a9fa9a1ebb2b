//! Range-based contact detection and link timing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::message::{MessageId, NodeId};
use crate::mobility::Position;
use crate::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioProfile {
    pub name: String,
    pub range_m: f64,
    pub bandwidth_bps: f64,
}

impl RadioProfile {
    pub fn bluetooth() -> Self {
        RadioProfile { name: "bluetooth".into(), range_m: 10.0, bandwidth_bps: 2_000_000.0 }
    }

    pub fn wlan() -> Self {
        RadioProfile { name: "wlan".into(), range_m: 30.0, bandwidth_bps: 4_500_000.0 }
    }
}

/// Seconds needed to push `size_bytes` over a link of `bandwidth_bps`.
pub fn transfer_time(size_bytes: u64, bandwidth_bps: f64) -> f64 {
    debug_assert!(bandwidth_bps > 0.0);
    size_bytes as f64 * 8.0 / bandwidth_bps
}

/// The fastest radio both nodes carry (matched by name) whose range covers
/// `distance`.
pub fn best_shared_link<'a>(a: &'a [RadioProfile], b: &[RadioProfile], distance: f64) -> Option<&'a RadioProfile> {
    a.iter()
        .filter(|r| distance <= r.range_m && b.iter().any(|o| o.name == r.name))
        .max_by(|x, y| x.bandwidth_bps.total_cmp(&y.bandwidth_bps))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContactDelta {
    Up { a: NodeId, b: NodeId, link: RadioProfile },
    Down { a: NodeId, b: NodeId },
}

/// Tracks which unordered node pairs are currently in contact. Pairs are
/// stored with the lower id first, so `(a, b)` and `(b, a)` are the same
/// contact and a node is never in contact with itself.
#[derive(Debug, Clone, Default)]
pub struct ContactTracker {
    links: BTreeMap<(NodeId, NodeId), RadioProfile>,
}

impl ContactTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_up(&self, a: NodeId, b: NodeId) -> bool {
        self.links.contains_key(&ordered(a, b))
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Re-evaluates every pair against the current positions. Downs are
    /// reported before ups; within each kind pairs come in id order.
    pub fn detect(&mut self, positions: &[Position], radios: &[&[RadioProfile]]) -> Vec<ContactDelta> {
        debug_assert_eq!(positions.len(), radios.len());
        let max_range = radios.iter().flat_map(|rs| rs.iter().map(|r| r.range_m)).fold(0.0f64, f64::max);
        let max_range_sq = max_range * max_range;

        let mut downs = Vec::new();
        let mut ups = Vec::new();
        let n = positions.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let d2 = positions[i].distance_sq(&positions[j]);
                let key = (NodeId(i as u32), NodeId(j as u32));
                let link = if d2 <= max_range_sq { best_shared_link(radios[i], radios[j], d2.sqrt()) } else { None };
                match (link, self.links.contains_key(&key)) {
                    (Some(link), false) => {
                        self.links.insert(key, link.clone());
                        ups.push(ContactDelta::Up { a: key.0, b: key.1, link: link.clone() });
                    }
                    (None, true) => {
                        self.links.remove(&key);
                        downs.push(ContactDelta::Down { a: key.0, b: key.1 });
                    }
                    _ => {}
                }
            }
        }
        downs.extend(ups);
        downs
    }
}

fn ordered(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// An in-progress transfer over one directed link.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferJob {
    pub id: u64,
    pub message: MessageId,
    pub from: NodeId,
    pub to: NodeId,
    pub started_at: SimTime,
    pub completes_at: SimTime,
}

impl TransferJob {
    pub fn new(id: u64, message: MessageId, from: NodeId, to: NodeId, size_bytes: u64, link: &RadioProfile, now: SimTime) -> Self {
        TransferJob { id, message, from, to, started_at: now, completes_at: now + transfer_time(size_bytes, link.bandwidth_bps) }
    }
}
