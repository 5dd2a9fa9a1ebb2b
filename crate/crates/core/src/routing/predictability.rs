//! Delivery-predictability matrix.
//!
//! Each node owns one row (its own predictabilities towards every other node)
//! and keeps copies of other nodes' rows learned through matrix exchange. Row
//! copies carry the time their owner last updated them from an encounter, and
//! a merge only ever adopts strictly fresher copies.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::message::NodeId;
use crate::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictabilityParams {
    /// Encounter boost, `P0`.
    pub p_init: f64,
    /// Aging factor applied once per elapsed time unit.
    pub alpha: f64,
    /// Weight of transitive updates.
    pub beta: f64,
    /// Length of one aging step, in seconds.
    pub time_unit: f64,
}

impl Default for PredictabilityParams {
    fn default() -> Self {
        PredictabilityParams { p_init: 0.75, alpha: 0.98, beta: 0.25, time_unit: 30.0 }
    }
}

/// One node's predictabilities plus the time of its last encounter update.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictabilityRow {
    pub probs: BTreeMap<NodeId, f64>,
    pub updated_at: SimTime,
}

impl PredictabilityRow {
    pub fn get(&self, node: NodeId) -> f64 {
        self.probs.get(&node).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct PredictabilityTable {
    owner: NodeId,
    params: PredictabilityParams,
    own: PredictabilityRow,
    /// Aging clock. Advances in whole time units so that a partial unit is
    /// carried over to the next call instead of being lost.
    aged_until: SimTime,
    rows: BTreeMap<NodeId, Arc<PredictabilityRow>>,
}

impl PredictabilityTable {
    pub fn new(owner: NodeId, params: PredictabilityParams) -> Self {
        PredictabilityTable { owner, params, own: PredictabilityRow::default(), aged_until: 0.0, rows: BTreeMap::new() }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn params(&self) -> &PredictabilityParams {
        &self.params
    }

    /// `P(owner, dst)`; zero when never learned.
    pub fn get(&self, dst: NodeId) -> f64 {
        self.own.get(dst)
    }

    /// Overwrites `P(owner, dst)`. Intended for seeding tables in tests and
    /// scripted scenarios.
    pub fn set(&mut self, dst: NodeId, p: f64) {
        assert!((0.0..=1.0).contains(&p), "predictability {p} outside [0, 1]");
        self.own.probs.insert(dst, p);
    }

    pub fn own_row(&self) -> &PredictabilityRow {
        &self.own
    }

    pub fn own_updated_at(&self) -> SimTime {
        self.own.updated_at
    }

    /// A learned copy of another node's row.
    pub fn row(&self, subject: NodeId) -> Option<&PredictabilityRow> {
        self.rows.get(&subject).map(Arc::as_ref)
    }

    pub fn known_rows(&self) -> impl Iterator<Item = (NodeId, &PredictabilityRow)> {
        self.rows.iter().map(|(k, v)| (*k, v.as_ref()))
    }

    /// Encounter update: `P = P + (1 - P) * P0`.
    pub fn update_direct(&mut self, peer: NodeId, now: SimTime) {
        let p0 = self.params.p_init;
        let p = self.own.probs.entry(peer).or_insert(0.0);
        *p += (1.0 - *p) * p0;
        self.own.updated_at = now;
    }

    /// Aging: every entry of the own row is scaled by `alpha^k`, `k` being the
    /// number of whole time units elapsed since the aging clock last moved.
    pub fn age(&mut self, now: SimTime) {
        let elapsed = now - self.aged_until;
        if elapsed < self.params.time_unit {
            return;
        }
        let k = (elapsed / self.params.time_unit).floor();
        let factor = self.params.alpha.powf(k);
        for p in self.own.probs.values_mut() {
            *p *= factor;
        }
        self.aged_until += k * self.params.time_unit;
    }

    /// Transitive update through `peer`:
    /// `P(x,z) = P(x,z) + (1 - P(x,z)) * P(x,y) * P(y,z) * beta` for every
    /// `z` in the peer's row other than the owner and the peer itself.
    pub fn update_transitive(&mut self, peer: NodeId, peer_row: &PredictabilityRow) {
        let p_xy = self.get(peer);
        if p_xy == 0.0 {
            return;
        }
        let beta = self.params.beta;
        for (&z, &p_yz) in &peer_row.probs {
            if z == self.owner || z == peer || p_yz == 0.0 {
                continue;
            }
            let p = self.own.probs.entry(z).or_insert(0.0);
            *p += (1.0 - *p) * p_xy * p_yz * beta;
        }
    }

    /// Adopts every row of `peer`'s matrix (its own row included) whose
    /// timestamp is strictly newer than the local copy. The owner's row is
    /// never replaced; ties keep the local copy.
    pub fn merge(&mut self, peer: &PredictabilityTable) {
        let peer_own = (peer.owner, Arc::new(peer.own.clone()));
        let incoming = peer.rows.iter().map(|(k, v)| (*k, Arc::clone(v)));
        for (subject, row) in std::iter::once(peer_own).chain(incoming) {
            if subject == self.owner {
                continue;
            }
            let fresher = self.rows.get(&subject).is_none_or(|local| row.updated_at > local.updated_at);
            if fresher {
                self.rows.insert(subject, row);
            }
        }
    }

    /// Inserts a learned row directly, bypassing the recency rule.
    pub fn insert_row(&mut self, subject: NodeId, row: PredictabilityRow) {
        assert_ne!(subject, self.owner, "the own row is not a learned row");
        self.rows.insert(subject, Arc::new(row));
    }
}

/// Full predictability exchange for one encounter, in order: age both
/// tables, apply the direct update on both sides, swap own rows, apply the
/// transitive update on both sides, then (optionally) merge matrices.
pub fn exchange_tables(a: &mut PredictabilityTable, b: &mut PredictabilityTable, now: SimTime, merge: bool) {
    a.age(now);
    b.age(now);
    a.update_direct(b.owner, now);
    b.update_direct(a.owner, now);
    let row_a = a.own.clone();
    let row_b = b.own.clone();
    a.update_transitive(b.owner, &row_b);
    b.update_transitive(a.owner, &row_a);
    if merge {
        a.merge(b);
        b.merge(a);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const X: NodeId = NodeId(0);
    const Y: NodeId = NodeId(1);
    const Z: NodeId = NodeId(2);

    fn table(owner: NodeId) -> PredictabilityTable {
        PredictabilityTable::new(owner, PredictabilityParams::default())
    }

    #[test]
    fn direct_update_values() {
        let mut t = table(X);
        t.update_direct(Y, 10.0);
        assert_eq!(t.get(Y), 0.75);
        t.update_direct(Y, 20.0);
        assert!((t.get(Y) - 0.9375).abs() < 1e-15);
        assert_eq!(t.own_updated_at(), 20.0);
        t.set(Z, 1.0);
        t.update_direct(Z, 30.0);
        assert_eq!(t.get(Z), 1.0);
    }

    #[test]
    fn aging_values() {
        let mut t = table(X);
        t.set(Y, 0.9375);
        t.age(29.9);
        assert_eq!(t.get(Y), 0.9375);
        t.age(900.0);
        let expected = 0.9375 * 0.98f64.powi(30);
        assert!((t.get(Y) - expected).abs() < 1e-12);
        assert!((t.get(Y) - 0.5114).abs() < 1e-4);
        t.set(Z, 0.0);
        t.age(5000.0);
        assert_eq!(t.get(Z), 0.0);
    }

    #[test]
    fn aging_keeps_partial_units() {
        let mut split = table(X);
        let mut whole = table(X);
        split.set(Y, 0.8);
        whole.set(Y, 0.8);
        split.age(45.0);
        split.age(60.0);
        whole.age(60.0);
        assert!((split.get(Y) - whole.get(Y)).abs() < 1e-15);
        assert!((whole.get(Y) - 0.8 * 0.98 * 0.98).abs() < 1e-15);
    }

    #[test]
    fn transitive_values() {
        let mut t = table(X);
        t.set(Y, 0.75);
        let mut peer = PredictabilityRow::default();
        peer.probs.insert(Z, 0.8);
        peer.probs.insert(X, 0.9);
        t.update_transitive(Y, &peer);
        assert!((t.get(Z) - 0.15).abs() < 1e-15);
        // entries for the owner and the peer itself are skipped
        assert_eq!(t.get(X), 0.0);
        assert_eq!(t.get(Y), 0.75);

        let mut cold = table(X);
        cold.update_transitive(Y, &peer);
        assert_eq!(cold.get(Z), 0.0);

        let mut saturated = table(X);
        saturated.set(Y, 0.75);
        saturated.set(Z, 1.0);
        saturated.update_transitive(Y, &peer);
        assert_eq!(saturated.get(Z), 1.0);
    }

    #[test]
    fn merge_prefers_strictly_newer_rows() {
        let c = NodeId(7);
        let d = NodeId(8);
        let mut mine = table(X);
        let mut theirs = table(Y);
        mine.insert_row(c, PredictabilityRow { probs: [(Z, 0.1)].into(), updated_at: 300.0 });
        theirs.insert_row(c, PredictabilityRow { probs: [(Z, 0.6)].into(), updated_at: 500.0 });
        theirs.insert_row(d, PredictabilityRow { probs: [(Z, 0.2)].into(), updated_at: 10.0 });
        theirs.insert_row(X, PredictabilityRow { probs: [(Z, 0.99)].into(), updated_at: 1e6 });
        mine.set(Z, 0.3);
        mine.merge(&theirs);
        assert_eq!(mine.row(c).unwrap().get(Z), 0.6);
        assert_eq!(mine.row(d).unwrap().get(Z), 0.2);
        assert!(mine.row(Y).is_some());
        assert_eq!(mine.get(Z), 0.3);
        assert!(mine.row(X).is_none());
    }

    #[test]
    fn merge_tie_keeps_local_row() {
        let c = NodeId(7);
        let mut mine = table(X);
        let mut theirs = table(Y);
        mine.insert_row(c, PredictabilityRow { probs: [(Z, 0.1)].into(), updated_at: 300.0 });
        theirs.insert_row(c, PredictabilityRow { probs: [(Z, 0.6)].into(), updated_at: 300.0 });
        mine.merge(&theirs);
        assert_eq!(mine.row(c).unwrap().get(Z), 0.1);
    }

    #[test]
    fn encounter_exchange_order() {
        let mut a = table(X);
        let mut b = table(Y);
        b.set(Z, 0.5);
        exchange_tables(&mut a, &mut b, 0.0, true);
        assert_eq!(a.get(Y), 0.75);
        assert_eq!(b.get(X), 0.75);
        assert!((a.get(Z) - 0.75 * 0.5 * 0.25).abs() < 1e-15);
        assert_eq!(a.row(Y).unwrap().get(Z), 0.5);
        assert_eq!(b.row(X).unwrap().get(Z), a.get(Z));
    }
}
