use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::message::{Buffer, MessageId, NodeId};
use crate::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Epidemic,
    Prophet,
    Integrated,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::Epidemic, StrategyKind::Prophet, StrategyKind::Integrated];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Epidemic => "epidemic",
            StrategyKind::Prophet => "prophet",
            StrategyKind::Integrated => "integrated",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epidemic" => Ok(StrategyKind::Epidemic),
            "prophet" => Ok(StrategyKind::Prophet),
            "integrated" => Ok(StrategyKind::Integrated),
            other => Err(format!("unknown strategy `{other}` (expected epidemic, prophet or integrated)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ForwardDecision {
    /// The peer is the destination.
    Deliver,
    /// Hand a copy to the peer and keep one.
    Forward,
    Hold,
    /// Receiver-side rejection of an arriving copy.
    Discard,
    /// Timed fallback: copy to every current neighbor.
    Broadcast,
}

/// Everything a strategy needs to decide about one buffered copy and one peer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionInput {
    pub now: SimTime,
    pub peer_is_dst: bool,
    /// Sender's predictability towards the destination, aged to `now`.
    pub p_self: f64,
    /// Peer's predictability towards the destination, aged to `now`.
    pub p_peer: f64,
    pub copies_left: Option<u32>,
    pub wait_deadline: SimTime,
    /// True when at least one current neighbor of the sender has a non-zero
    /// predictability towards the destination.
    pub neighbors_know_dst: bool,
}

/// PROPHET rule: deliver to the destination, otherwise forward only to a peer
/// with a strictly higher predictability.
pub fn prophet_decide(peer_is_dst: bool, p_self: f64, p_peer: f64) -> ForwardDecision {
    if peer_is_dst {
        ForwardDecision::Deliver
    } else if p_peer > p_self {
        ForwardDecision::Forward
    } else {
        ForwardDecision::Hold
    }
}

/// Integrated rule. Forwards like PROPHET when the peer also clears
/// `threshold`; once the copy has waited past its deadline and no neighbor
/// knows anything about the destination it broadcasts instead. Both consume
/// the copy budget.
pub fn integrated_decide(input: &DecisionInput, threshold: f64) -> ForwardDecision {
    if input.peer_is_dst {
        return ForwardDecision::Deliver;
    }
    let has_budget = input.copies_left.is_none_or(|c| c > 0);
    if !has_budget {
        return ForwardDecision::Hold;
    }
    if input.p_peer > input.p_self && input.p_peer >= threshold {
        ForwardDecision::Forward
    } else if input.now >= input.wait_deadline && !input.neighbors_know_dst {
        ForwardDecision::Broadcast
    } else {
        ForwardDecision::Hold
    }
}

/// Recently-seen suppression: returns false (and leaves `seen` untouched)
/// when `peer` was exchanged with less than `window` seconds ago; otherwise
/// stamps `peer` and returns true.
pub fn should_exchange_summary(seen: &mut BTreeMap<NodeId, SimTime>, peer: NodeId, now: SimTime, window: f64) -> bool {
    if let Some(&last) = seen.get(&peer) {
        if now - last < window {
            return false;
        }
    }
    seen.insert(peer, now);
    true
}

/// Summary-vector difference: ids `sender` holds that the receiver lacks
/// (`receiver_has`), minus copies whose hop budget forbids relaying to the
/// receiver. Arrival order is preserved.
pub fn epidemic_requests(sender: &Buffer, receiver: NodeId, receiver_has: impl Fn(MessageId) -> bool) -> Vec<MessageId> {
    sender.iter().filter(|e| !receiver_has(e.msg.id) && e.msg.may_relay_to(receiver)).map(|e| e.msg.id).collect()
}

/// Contract every routing strategy implements. Strategies are stateless
/// decision rules; per-node state (tables, buffers, seen lists) lives in the
/// simulator.
pub trait RoutingStrategy: fmt::Debug + Send + Sync {
    fn kind(&self) -> StrategyKind;

    /// Whether nodes keep and exchange delivery-predictability tables.
    fn uses_predictability(&self) -> bool {
        false
    }

    /// Whether encounters also merge full matrices by recency.
    fn merges_matrices(&self) -> bool {
        false
    }

    /// Recently-seen window suppressing repeated summary-vector exchanges.
    fn seen_window(&self) -> Option<f64> {
        None
    }

    /// Whether decisions need [`DecisionInput::neighbors_know_dst`].
    fn needs_neighbor_knowledge(&self) -> bool {
        false
    }

    /// Copy budget assigned to a copy when a node acquires it.
    fn initial_copies(&self) -> Option<u32> {
        None
    }

    /// Delay before a freshly acquired copy may be broadcast.
    fn wait_time(&self) -> f64 {
        f64::INFINITY
    }

    fn decide(&self, input: &DecisionInput) -> ForwardDecision;

    /// Receiver-side check for a copy that arrived through `decision`.
    /// `p_receiver` is the receiver's aged predictability towards the
    /// destination.
    fn accepts(&self, decision: ForwardDecision, p_receiver: f64) -> bool {
        let _ = (decision, p_receiver);
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicRouter {
    pub seen_window: f64,
}

impl RoutingStrategy for EpidemicRouter {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Epidemic
    }

    fn seen_window(&self) -> Option<f64> {
        Some(self.seen_window)
    }

    fn decide(&self, input: &DecisionInput) -> ForwardDecision {
        if input.peer_is_dst {
            ForwardDecision::Deliver
        } else {
            ForwardDecision::Forward
        }
    }
}

/// PROPHET. A non-zero `threshold` adds the Integrated threshold conjunct on
/// both the forwarding and the receiving side; the default of 0 is plain
/// PROPHET.
#[derive(Debug, Clone, PartialEq)]
pub struct ProphetRouter {
    pub threshold: f64,
}

impl RoutingStrategy for ProphetRouter {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Prophet
    }

    fn uses_predictability(&self) -> bool {
        true
    }

    fn decide(&self, input: &DecisionInput) -> ForwardDecision {
        match prophet_decide(input.peer_is_dst, input.p_self, input.p_peer) {
            ForwardDecision::Forward if input.p_peer < self.threshold => ForwardDecision::Hold,
            d => d,
        }
    }

    fn accepts(&self, decision: ForwardDecision, p_receiver: f64) -> bool {
        decision != ForwardDecision::Forward || p_receiver >= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedRouter {
    pub threshold: f64,
    pub wait_time: f64,
    pub max_copies: Option<u32>,
}

impl RoutingStrategy for IntegratedRouter {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Integrated
    }

    fn uses_predictability(&self) -> bool {
        true
    }

    fn merges_matrices(&self) -> bool {
        true
    }

    fn needs_neighbor_knowledge(&self) -> bool {
        true
    }

    fn initial_copies(&self) -> Option<u32> {
        self.max_copies
    }

    fn wait_time(&self) -> f64 {
        self.wait_time
    }

    fn decide(&self, input: &DecisionInput) -> ForwardDecision {
        integrated_decide(input, self.threshold)
    }

    /// Only copies that arrived through thresholded forwarding are subject to
    /// the receiver's threshold; broadcast copies are kept regardless.
    fn accepts(&self, decision: ForwardDecision, p_receiver: f64) -> bool {
        decision != ForwardDecision::Forward || p_receiver >= self.threshold
    }
}
