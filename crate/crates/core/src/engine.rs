//! Simulation clock, event queue, traffic generation and the run loop.
//!
//! A run is single-threaded and fully determined by its config and seed.
//! Randomness comes from three independent ChaCha streams (POI layout,
//! population and movement, traffic) so that routing choices never perturb
//! mobility or traffic: every strategy sees the same world for a given seed.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::message::{Admission, Buffer, BufferEntry, Message, MessageId, NodeId};
use crate::mobility::{build_population, layout_pois, Movement, PoiGroup, Rect};
use crate::radio::{ContactDelta, ContactTracker, RadioProfile, TransferJob};
use crate::routing::{exchange_tables, should_exchange_summary, DecisionInput, ForwardDecision, PredictabilityTable, RoutingStrategy};
use crate::scenario::{ConfigError, RoutingConfig, ScenarioConfig, TrafficConfig};
use crate::stats::{StatsCollector, StatsError, StatsEvent, StatsReport, TimeseriesRow};
use crate::SimTime;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Accounting(#[from] StatsError),
}

const STREAM_POIS: u64 = 1;
const STREAM_MOBILITY: u64 = 2;
const STREAM_TRAFFIC: u64 = 3;

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// ---------------------------------------------------------------------------
// Event queue

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// Movement update followed by a contact check. Carries the tick index.
    Tick(u64),
    TtlSweep(u64),
    MessageGeneration(NodeId),
    TransferComplete {
        from: NodeId,
        to: NodeId,
        job: u64,
    },
    /// Scripted link events.
    ContactUp {
        a: NodeId,
        b: NodeId,
        link: RadioProfile,
    },
    ContactDown {
        a: NodeId,
        b: NodeId,
    },
    ScriptedMessage(usize),
    Sample(u64),
    SimEnd,
}

#[derive(Debug, Clone)]
pub struct Event {
    pub fire_at: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    /// Reversed so that the max-heap pops the earliest `(fire_at, seq)`.
    fn cmp(&self, other: &Self) -> Ordering {
        other.fire_at.total_cmp(&self.fire_at).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Min-queue over `(fire_at, seq)`; `seq` is the insertion order and breaks
/// timestamp ties.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, fire_at: SimTime, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { fire_at, seq, kind });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Traffic

/// Draws a new message from `src`: destination uniform over the other
/// traffic generators, size uniform in the configured byte range, TTL picked
/// uniformly from the configured set. Returns `None` when `src` has nobody
/// to talk to.
pub fn generate_message<R: Rng + ?Sized>(
    id: MessageId,
    src: NodeId,
    now: SimTime,
    generators: &[NodeId],
    traffic: &TrafficConfig,
    rng: &mut R,
) -> Option<Message> {
    let others: Vec<NodeId> = generators.iter().copied().filter(|&n| n != src).collect();
    if others.is_empty() {
        return None;
    }
    let dst = others[rng.random_range(0..others.len())];
    let size_bytes = rng.random_range(traffic.size_min..=traffic.size_max);
    let ttl = traffic.ttls[rng.random_range(0..traffic.ttls.len())];
    Some(Message { id, src, dst, size_bytes, created_at: now, ttl, hops_remaining: traffic.hop_limit })
}

/// Exponential inter-generation gap with the given mean.
pub fn generation_gap<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    Exp::new(1.0 / mean).expect("positive rate").sample(rng)
}

// ---------------------------------------------------------------------------
// Node and link state

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub group: Option<usize>,
    pub generates_traffic: bool,
    pub radios: Vec<RadioProfile>,
    pub movement: Option<Movement>,
    pub buffer: Buffer,
    pub recently_seen: BTreeMap<NodeId, SimTime>,
    pub table: Option<PredictabilityTable>,
    /// Messages this node has received as their destination.
    pub delivered: BTreeSet<MessageId>,
    /// Messages currently arriving over some link.
    pub incoming: BTreeSet<MessageId>,
    pub neighbors: BTreeSet<NodeId>,
}

impl NodeState {
    fn has(&self, id: MessageId) -> bool {
        self.buffer.contains(id) || self.delivered.contains(&id)
    }

    fn p_to(&self, dst: NodeId) -> f64 {
        self.table.as_ref().map_or(0.0, |t| t.get(dst))
    }
}

#[derive(Debug, Clone)]
struct ActiveTransfer {
    job: TransferJob,
    decision: ForwardDecision,
    payload: BufferEntry,
}

#[derive(Debug, Clone, Default)]
struct DirectedLink {
    deliver_queue: VecDeque<MessageId>,
    relay_queue: VecDeque<MessageId>,
    active: Option<ActiveTransfer>,
}

#[derive(Debug, Clone)]
struct Link {
    profile: RadioProfile,
    /// Whether the encounter at link-up exchanged summary vectors. Links that
    /// skipped the exchange (recently-seen peer) carry no traffic.
    exchanged: bool,
    /// `[lower id -> higher id, higher id -> lower id]`
    dirs: [DirectedLink; 2],
}

fn link_key(a: NodeId, b: NodeId) -> ((NodeId, NodeId), usize) {
    if a < b {
        ((a, b), 0)
    } else {
        ((b, a), 1)
    }
}

fn pair_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    assert_ne!(i, j);
    if i < j {
        let (l, r) = v.split_at_mut(j);
        (&mut l[i], &mut r[0])
    } else {
        let (l, r) = v.split_at_mut(i);
        (&mut r[0], &mut l[j])
    }
}

// ---------------------------------------------------------------------------
// Scripted scenarios

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedContact {
    pub a: NodeId,
    pub b: NodeId,
    pub up: SimTime,
    pub down: SimTime,
    pub link: RadioProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedMessage {
    pub at: SimTime,
    pub src: NodeId,
    pub dst: NodeId,
    pub size_bytes: u64,
    pub ttl: f64,
    pub hop_limit: Option<u32>,
}

/// A hand-written contact plan: no movement, links go up and down at the
/// listed times, messages appear at the listed times.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedScenario {
    pub nodes: usize,
    pub sim_time: SimTime,
    pub routing: RoutingConfig,
    pub contacts: Vec<ScriptedContact>,
    pub messages: Vec<ScriptedMessage>,
    /// Initial `(owner, destination, P)` entries of the predictability tables.
    pub predictability: Vec<(NodeId, NodeId, f64)>,
}

/// A first delivery as seen by the destination.
#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryRecord {
    pub id: MessageId,
    pub at: SimTime,
    pub hops: u32,
}

// ---------------------------------------------------------------------------
// Simulation

pub struct Simulation {
    now: SimTime,
    sim_time: SimTime,
    tick: f64,
    sample_interval: Option<f64>,
    nodes: Vec<NodeState>,
    links: BTreeMap<(NodeId, NodeId), Link>,
    queue: EventQueue,
    strategy: Box<dyn RoutingStrategy>,
    learning: bool,
    stats: StatsCollector,
    timeseries: Vec<TimeseriesRow>,
    deliveries: Vec<DeliveryRecord>,
    tracker: Option<ContactTracker>,
    pois: Vec<PoiGroup>,
    world: Rect,
    mobility_rng: ChaCha8Rng,
    traffic_rng: ChaCha8Rng,
    traffic: TrafficConfig,
    generators: Vec<NodeId>,
    scripted_messages: Vec<ScriptedMessage>,
    next_message: u32,
    next_job: u64,
    finished: Option<StatsReport>,
}

impl Simulation {
    /// Builds a mobility-driven run from a validated config.
    pub fn from_config(cfg: &ScenarioConfig, seed: u64) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut poi_rng = rng_stream(seed, STREAM_POIS);
        let mut mobility_rng = rng_stream(seed, STREAM_MOBILITY);
        let mut traffic_rng = rng_stream(seed, STREAM_TRAFFIC);
        let pois = layout_pois(cfg, &mut poi_rng);
        let population = build_population(cfg, &mut mobility_rng)?;
        let strategy = cfg.routing.build_strategy();

        let nodes: Vec<NodeState> = population
            .into_iter()
            .map(|m| NodeState {
                id: m.id,
                group: Some(m.group),
                generates_traffic: m.generates_traffic,
                radios: m.radios,
                movement: Some(m.movement),
                buffer: Buffer::new(m.id, cfg.routing.buffer_bytes),
                recently_seen: BTreeMap::new(),
                table: strategy.uses_predictability().then(|| PredictabilityTable::new(m.id, cfg.routing.predictability)),
                delivered: BTreeSet::new(),
                incoming: BTreeSet::new(),
                neighbors: BTreeSet::new(),
            })
            .collect();
        let generators: Vec<NodeId> = nodes.iter().filter(|n| n.generates_traffic).map(|n| n.id).collect();

        let mut queue = EventQueue::new();
        queue.push(cfg.sim_time, EventKind::SimEnd);
        queue.push(0.0, EventKind::TtlSweep(0));
        queue.push(0.0, EventKind::Tick(0));
        queue.push(cfg.sample_interval, EventKind::Sample(1));
        for &g in &generators {
            let gap = generation_gap(cfg.traffic.interval_mean, &mut traffic_rng);
            queue.push(gap, EventKind::MessageGeneration(g));
        }

        Ok(Simulation {
            now: 0.0,
            sim_time: cfg.sim_time,
            tick: cfg.tick,
            sample_interval: Some(cfg.sample_interval),
            nodes,
            links: BTreeMap::new(),
            queue,
            strategy,
            learning: cfg.routing.learning,
            stats: StatsCollector::new(),
            timeseries: Vec::new(),
            deliveries: Vec::new(),
            tracker: Some(ContactTracker::new()),
            pois,
            world: cfg.world_rect(),
            mobility_rng,
            traffic_rng,
            traffic: cfg.traffic.clone(),
            generators,
            scripted_messages: Vec::new(),
            next_message: 1,
            next_job: 1,
            finished: None,
        })
    }

    /// Builds a run driven by a fixed contact plan.
    pub fn scripted(sc: &ScriptedScenario) -> Result<Self, SimError> {
        let strategy = sc.routing.build_strategy();
        let mut nodes: Vec<NodeState> = (0..sc.nodes)
            .map(|i| {
                let id = NodeId(i as u32);
                NodeState {
                    id,
                    group: None,
                    generates_traffic: false,
                    radios: Vec::new(),
                    movement: None,
                    buffer: Buffer::new(id, sc.routing.buffer_bytes),
                    recently_seen: BTreeMap::new(),
                    table: strategy.uses_predictability().then(|| PredictabilityTable::new(id, sc.routing.predictability)),
                    delivered: BTreeSet::new(),
                    incoming: BTreeSet::new(),
                    neighbors: BTreeSet::new(),
                }
            })
            .collect();
        for &(owner, dst, p) in &sc.predictability {
            if let Some(t) = nodes.get_mut(owner.index()).and_then(|n| n.table.as_mut()) {
                t.set(dst, p);
            }
        }
        let check = |id: NodeId, what: &str| {
            if id.index() >= sc.nodes {
                Err(SimError::Config(ConfigError::invalid(what, format!("node {id} does not exist"))))
            } else {
                Ok(())
            }
        };
        let mut queue = EventQueue::new();
        queue.push(sc.sim_time, EventKind::SimEnd);
        queue.push(0.0, EventKind::TtlSweep(0));
        for (i, m) in sc.messages.iter().enumerate() {
            check(m.src, "messages.src")?;
            check(m.dst, "messages.dst")?;
            queue.push(m.at, EventKind::ScriptedMessage(i));
        }
        for c in &sc.contacts {
            check(c.a, "contacts.a")?;
            check(c.b, "contacts.b")?;
            if c.a == c.b || c.down < c.up {
                return Err(SimError::Config(ConfigError::invalid("contacts", "contact must join two nodes with up <= down")));
            }
            queue.push(c.up, EventKind::ContactUp { a: c.a, b: c.b, link: c.link.clone() });
            queue.push(c.down, EventKind::ContactDown { a: c.a, b: c.b });
        }
        Ok(Simulation {
            now: 0.0,
            sim_time: sc.sim_time,
            tick: 1.0,
            sample_interval: None,
            nodes,
            links: BTreeMap::new(),
            queue,
            strategy,
            learning: sc.routing.learning,
            stats: StatsCollector::new(),
            timeseries: Vec::new(),
            deliveries: Vec::new(),
            tracker: None,
            pois: Vec::new(),
            world: Rect::world(0.0, 0.0),
            mobility_rng: rng_stream(0, STREAM_MOBILITY),
            traffic_rng: rng_stream(0, STREAM_TRAFFIC),
            traffic: TrafficConfig::default(),
            generators: Vec::new(),
            scripted_messages: sc.messages.clone(),
            next_message: 1,
            next_job: 1,
            finished: None,
        })
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn pois(&self) -> &[PoiGroup] {
        &self.pois
    }

    pub fn timeseries(&self) -> &[TimeseriesRow] {
        &self.timeseries
    }

    pub fn deliveries(&self) -> &[DeliveryRecord] {
        &self.deliveries
    }

    pub fn contacts_up(&self) -> usize {
        self.links.len()
    }

    /// Runs the event loop until the configured horizon and returns the
    /// report. Calling it again returns the same report.
    pub fn run(&mut self) -> Result<StatsReport, SimError> {
        if let Some(r) = &self.finished {
            return Ok(r.clone());
        }
        while let Some(ev) = self.queue.pop() {
            debug_assert!(ev.fire_at >= self.now, "event at {} fired after {}", ev.fire_at, self.now);
            self.now = ev.fire_at;
            match ev.kind {
                EventKind::SimEnd => break,
                EventKind::Tick(k) => self.on_tick(k),
                EventKind::TtlSweep(k) => self.on_ttl_sweep(k),
                EventKind::MessageGeneration(node) => self.on_generation(node),
                EventKind::TransferComplete { from, to, job } => self.on_transfer_complete(from, to, job),
                EventKind::ContactUp { a, b, link } => self.contact_up(a, b, link),
                EventKind::ContactDown { a, b } => self.contact_down(a, b),
                EventKind::ScriptedMessage(i) => self.on_scripted_message(i),
                EventKind::Sample(k) => self.on_sample(k),
            }
        }
        self.now = self.sim_time;
        let report = self.finish()?;
        self.finished = Some(report.clone());
        Ok(report)
    }

    fn finish(&mut self) -> Result<StatsReport, SimError> {
        let end = self.sim_time;
        for node in &self.nodes {
            for e in node.buffer.iter() {
                self.stats.record(StatsEvent::Buffered { duration: end - e.received_at });
            }
        }
        let in_flight = self.links.values().flat_map(|l| l.dirs.iter()).filter(|d| d.active.is_some()).count() as u64;
        if self.sample_interval.is_some() {
            self.timeseries.push(self.stats.snapshot(end));
        }
        Ok(self.stats.finalize(end, in_flight)?)
    }

    // -- periodic events ---------------------------------------------------

    fn on_tick(&mut self, k: u64) {
        if k > 0 {
            let start = (k - 1) as f64 * self.tick;
            for node in &mut self.nodes {
                if let Some(m) = node.movement.as_mut() {
                    m.step(start, self.tick, &self.pois, &self.world, &mut self.mobility_rng);
                }
            }
        }
        if let Some(mut tracker) = self.tracker.take() {
            let positions: Vec<_> = self.nodes.iter().map(|n| n.movement.as_ref().map(|m| m.position).unwrap_or_default()).collect();
            let radios: Vec<&[RadioProfile]> = self.nodes.iter().map(|n| n.radios.as_slice()).collect();
            let deltas = tracker.detect(&positions, &radios);
            self.tracker = Some(tracker);
            for d in deltas {
                match d {
                    ContactDelta::Down { a, b } => self.contact_down(a, b),
                    ContactDelta::Up { a, b, link } => self.contact_up(a, b, link),
                }
            }
        }
        self.queue.push((k + 1) as f64 * self.tick, EventKind::Tick(k + 1));
    }

    fn on_ttl_sweep(&mut self, k: u64) {
        let now = self.now;
        for node in &mut self.nodes {
            for e in node.buffer.expire(now) {
                self.stats.record(StatsEvent::Dropped);
                self.stats.record(StatsEvent::Buffered { duration: now - e.received_at });
            }
        }
        self.queue.push((k + 1) as f64 * self.tick, EventKind::TtlSweep(k + 1));
    }

    fn on_sample(&mut self, k: u64) {
        self.timeseries.push(self.stats.snapshot(self.now));
        if let Some(interval) = self.sample_interval {
            self.queue.push((k + 1) as f64 * interval, EventKind::Sample(k + 1));
        }
    }

    // -- traffic -----------------------------------------------------------

    fn on_generation(&mut self, src: NodeId) {
        let id = MessageId(self.next_message);
        if let Some(msg) = generate_message(id, src, self.now, &self.generators, &self.traffic, &mut self.traffic_rng) {
            self.next_message += 1;
            self.originate(msg);
        }
        let gap = generation_gap(self.traffic.interval_mean, &mut self.traffic_rng);
        self.queue.push(self.now + gap, EventKind::MessageGeneration(src));
    }

    fn on_scripted_message(&mut self, i: usize) {
        let m = self.scripted_messages[i].clone();
        let msg = Message {
            id: MessageId(self.next_message),
            src: m.src,
            dst: m.dst,
            size_bytes: m.size_bytes,
            created_at: self.now,
            ttl: m.ttl,
            hops_remaining: m.hop_limit,
        };
        self.next_message += 1;
        self.originate(msg);
    }

    fn originate(&mut self, msg: Message) {
        self.stats.record(StatsEvent::Created(msg.id));
        let entry = self.fresh_entry(msg, self.now, 0);
        self.store(msg.src, entry);
    }

    fn fresh_entry(&self, msg: Message, now: SimTime, hop_count: u32) -> BufferEntry {
        BufferEntry {
            msg,
            received_at: now,
            hop_count,
            copies_left: self.strategy.initial_copies(),
            wait_deadline: now + self.strategy.wait_time(),
        }
    }

    /// Buffers a copy at `node` and offers it to current neighbors.
    fn store(&mut self, node: NodeId, entry: BufferEntry) {
        let id = entry.msg.id;
        let now = self.now;
        match self.nodes[node.index()].buffer.admit(entry) {
            Admission::Admitted { evicted } => {
                for e in evicted {
                    self.stats.record(StatsEvent::Dropped);
                    self.stats.record(StatsEvent::Buffered { duration: now - e.received_at });
                }
                self.offer(node, id);
            }
            Admission::Oversize => self.stats.record(StatsEvent::Dropped),
            Admission::Duplicate => {}
        }
    }

    /// Queues a newly acquired message on every exchanged link of `node`.
    fn offer(&mut self, node: NodeId, id: MessageId) {
        let Some(msg) = self.nodes[node.index()].buffer.get(id).map(|e| e.msg) else {
            return;
        };
        let neighbors: Vec<NodeId> = self.nodes[node.index()].neighbors.iter().copied().collect();
        for peer in neighbors {
            if self.nodes[peer.index()].has(id) || !msg.may_relay_to(peer) {
                continue;
            }
            let (key, dir) = link_key(node, peer);
            let Some(link) = self.links.get_mut(&key) else { continue };
            if !link.exchanged {
                continue;
            }
            let d = &mut link.dirs[dir];
            if msg.dst == peer {
                d.deliver_queue.push_back(id);
            } else {
                d.relay_queue.push_back(id);
            }
            self.try_start(node, peer);
        }
    }

    // -- contacts ----------------------------------------------------------

    fn contact_up(&mut self, a: NodeId, b: NodeId, profile: RadioProfile) {
        let (key, _) = link_key(a, b);
        if self.links.contains_key(&key) {
            return;
        }
        let now = self.now;
        self.nodes[a.index()].neighbors.insert(b);
        self.nodes[b.index()].neighbors.insert(a);

        let exchanged = match self.strategy.seen_window() {
            Some(window) => {
                let (na, nb) = pair_mut(&mut self.nodes, a.index(), b.index());
                let go = should_exchange_summary(&mut na.recently_seen, b, now, window);
                if go {
                    nb.recently_seen.insert(a, now);
                }
                go
            }
            None => true,
        };
        if self.strategy.uses_predictability() && self.learning {
            let merge = self.strategy.merges_matrices();
            let (na, nb) = pair_mut(&mut self.nodes, a.index(), b.index());
            if let (Some(ta), Some(tb)) = (na.table.as_mut(), nb.table.as_mut()) {
                exchange_tables(ta, tb, now, merge);
            }
        }

        let mut link = Link { profile, exchanged, dirs: Default::default() };
        if exchanged {
            for (from, to) in [(a, b), (b, a)] {
                let (_, dir) = link_key(from, to);
                let sender = &self.nodes[from.index()];
                let receiver = &self.nodes[to.index()];
                let d = &mut link.dirs[dir];
                for id in crate::routing::epidemic_requests(&sender.buffer, to, |id| receiver.has(id)) {
                    let dst = sender.buffer.get(id).map(|e| e.msg.dst);
                    if dst == Some(to) {
                        d.deliver_queue.push_back(id);
                    } else {
                        d.relay_queue.push_back(id);
                    }
                }
            }
        }
        self.links.insert(key, link);
        if exchanged {
            self.try_start(a, b);
            self.try_start(b, a);
        }
    }

    fn contact_down(&mut self, a: NodeId, b: NodeId) {
        let (key, _) = link_key(a, b);
        let Some(link) = self.links.remove(&key) else { return };
        self.nodes[a.index()].neighbors.remove(&b);
        self.nodes[b.index()].neighbors.remove(&a);
        for d in link.dirs {
            if let Some(active) = d.active {
                self.abort(active);
            }
        }
    }

    /// The message stays at the sender; a consumed copy budget is refunded.
    fn abort(&mut self, active: ActiveTransfer) {
        self.stats.record(StatsEvent::Aborted);
        let id = active.job.message;
        self.nodes[active.job.to.index()].incoming.remove(&id);
        if matches!(active.decision, ForwardDecision::Forward | ForwardDecision::Broadcast) {
            if let Some(e) = self.nodes[active.job.from.index()].buffer.get_mut(id) {
                if let Some(c) = e.copies_left.as_mut() {
                    *c += 1;
                }
            }
        }
    }

    // -- transfers ---------------------------------------------------------

    fn decision_input(&mut self, from: NodeId, to: NodeId, entry: &BufferEntry) -> DecisionInput {
        let now = self.now;
        let dst = entry.msg.dst;
        let mut p_self = 0.0;
        let mut p_peer = 0.0;
        if self.strategy.uses_predictability() {
            let (s, p) = pair_mut(&mut self.nodes, from.index(), to.index());
            if let (Some(ts), Some(tp)) = (s.table.as_mut(), p.table.as_mut()) {
                ts.age(now);
                tp.age(now);
                p_self = ts.get(dst);
                p_peer = tp.get(dst);
            }
        }
        let neighbors_know_dst = self.strategy.needs_neighbor_knowledge()
            && self.nodes[from.index()].neighbors.iter().any(|n| self.nodes[n.index()].p_to(dst) > 0.0);
        DecisionInput {
            now,
            peer_is_dst: to == dst,
            p_self,
            p_peer,
            copies_left: entry.copies_left,
            wait_deadline: entry.wait_deadline,
            neighbors_know_dst,
        }
    }

    /// Starts the next eligible queued transfer on the directed link, if the
    /// link is idle. Entries that became stale or that the strategy holds are
    /// dropped from the queue without counting as started.
    fn try_start(&mut self, from: NodeId, to: NodeId) {
        let (key, dir) = link_key(from, to);
        loop {
            let Some(link) = self.links.get_mut(&key) else { return };
            let d = &mut link.dirs[dir];
            if d.active.is_some() {
                return;
            }
            let Some(id) = d.deliver_queue.pop_front().or_else(|| d.relay_queue.pop_front()) else {
                return;
            };
            let Some(entry) = self.nodes[from.index()].buffer.get(id).cloned() else { continue };
            let receiver = &self.nodes[to.index()];
            if entry.msg.is_expired(self.now) || receiver.has(id) || receiver.incoming.contains(&id) || !entry.msg.may_relay_to(to) {
                continue;
            }
            let input = self.decision_input(from, to, &entry);
            let decision = self.strategy.decide(&input);
            match decision {
                ForwardDecision::Hold | ForwardDecision::Discard => continue,
                ForwardDecision::Deliver => {}
                ForwardDecision::Forward | ForwardDecision::Broadcast => {
                    if let Some(e) = self.nodes[from.index()].buffer.get_mut(id) {
                        if let Some(c) = e.copies_left.as_mut() {
                            *c = c.saturating_sub(1);
                        }
                    }
                }
            }
            let job_id = self.next_job;
            self.next_job += 1;
            let link = self.links.get_mut(&key).expect("link checked above");
            let job = TransferJob::new(job_id, id, from, to, entry.msg.size_bytes, &link.profile, self.now);
            self.queue.push(job.completes_at, EventKind::TransferComplete { from, to, job: job_id });
            link.dirs[dir].active = Some(ActiveTransfer { job, decision, payload: entry });
            self.nodes[to.index()].incoming.insert(id);
            self.stats.record(StatsEvent::Started);
            return;
        }
    }

    fn on_transfer_complete(&mut self, from: NodeId, to: NodeId, job: u64) {
        let (key, dir) = link_key(from, to);
        let Some(link) = self.links.get_mut(&key) else { return };
        let d = &mut link.dirs[dir];
        if d.active.as_ref().is_none_or(|a| a.job.id != job) {
            return;
        }
        let active = d.active.take().expect("checked");
        let now = self.now;
        let msg = active.payload.msg;
        self.stats.record(StatsEvent::Relayed);
        self.nodes[to.index()].incoming.remove(&msg.id);

        if msg.is_expired(now) {
            self.stats.record(StatsEvent::Dropped);
        } else if to == msg.dst {
            let receiver = &mut self.nodes[to.index()];
            let hops = active.payload.hop_count + 1;
            if receiver.delivered.insert(msg.id) {
                self.deliveries.push(DeliveryRecord { id: msg.id, at: now, hops });
            }
            self.stats.record(StatsEvent::Delivered { id: msg.id, latency: now - msg.created_at, ttl: msg.ttl, hops });
            // the sender's copy has done its job
            if let Some(e) = self.nodes[from.index()].buffer.remove(msg.id) {
                self.stats.record(StatsEvent::Buffered { duration: now - e.received_at });
            }
        } else {
            let p_receiver = match self.nodes[to.index()].table.as_mut() {
                Some(t) => {
                    t.age(now);
                    t.get(msg.dst)
                }
                None => 0.0,
            };
            if self.strategy.accepts(active.decision, p_receiver) {
                let entry = self.fresh_entry(msg.relayed_copy(), now, active.payload.hop_count + 1);
                self.store(to, entry);
            } else {
                self.stats.record(StatsEvent::Dropped);
            }
        }
        self.try_start(from, to);
    }
}

/// Runs a config-driven scenario to its horizon.
pub fn run(cfg: &ScenarioConfig, seed: u64) -> Result<StatsReport, SimError> {
    Simulation::from_config(cfg, seed)?.run()
}

/// Like [`run`], also returning the cumulative time series sampled every
/// `sample_interval` seconds plus a final sample at the horizon.
pub fn run_with_timeseries(cfg: &ScenarioConfig, seed: u64) -> Result<(StatsReport, Vec<TimeseriesRow>), SimError> {
    let mut sim = Simulation::from_config(cfg, seed)?;
    let report = sim.run()?;
    Ok((report, sim.timeseries.clone()))
}

pub fn run_scripted(sc: &ScriptedScenario) -> Result<StatsReport, SimError> {
    Simulation::scripted(sc)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::StrategyKind;
    use crate::scenario::{PoiScenario, KIB};

    #[test]
    fn queue_orders_by_time_then_insertion() {
        let mut q = EventQueue::new();
        q.push(5.0, EventKind::Sample(1));
        q.push(1.0, EventKind::Sample(2));
        q.push(5.0, EventKind::Sample(3));
        q.push(1.0, EventKind::Sample(4));
        let order: Vec<_> = std::iter::from_fn(|| q.pop()).map(|e| e.kind).collect();
        assert_eq!(order, vec![EventKind::Sample(2), EventKind::Sample(4), EventKind::Sample(1), EventKind::Sample(3)]);
    }

    #[test]
    fn generated_messages_follow_traffic_config() {
        let traffic = TrafficConfig::default();
        let gens: Vec<NodeId> = (0..10).map(NodeId).collect();
        let mut rng = rng_stream(7, STREAM_TRAFFIC);
        for i in 0..2000 {
            let m = generate_message(MessageId(i), NodeId(3), 0.0, &gens, &traffic, &mut rng).unwrap();
            assert_ne!(m.dst, NodeId(3));
            assert!(gens.contains(&m.dst));
            assert!((100 * KIB..=2048 * KIB).contains(&m.size_bytes));
            assert!([10800.0, 21600.0, 43200.0].contains(&m.ttl));
            assert_eq!(m.hops_remaining, None);
        }
        assert!(generate_message(MessageId(1), NodeId(0), 0.0, &[NodeId(0)], &traffic, &mut rng).is_none());
    }

    #[test]
    fn generation_gap_mean() {
        let mut rng = rng_stream(11, STREAM_TRAFFIC);
        let n = 100_000;
        let mean = (0..n).map(|_| generation_gap(3600.0, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 3600.0).abs() < 3600.0 * 0.02, "{mean}");
    }

    #[test]
    fn zero_horizon_creates_nothing() {
        let mut cfg = ScenarioConfig::preset(PoiScenario::Pois2, StrategyKind::Epidemic);
        cfg.sim_time = 0.0;
        let r = run(&cfg, 1).unwrap();
        assert_eq!(r.created, 0);
        assert_eq!(r.sim_time, 0.0);
    }

    #[test]
    fn empty_population_gives_empty_report() {
        let mut cfg = ScenarioConfig::preset(PoiScenario::Pois2, StrategyKind::Prophet);
        cfg.total_nodes = None;
        for g in &mut cfg.groups {
            g.count = 0;
        }
        cfg.sim_time = 600.0;
        let r = run(&cfg, 3).unwrap();
        assert_eq!((r.created, r.started, r.relayed, r.aborted, r.dropped), (0, 0, 0, 0, 0));
    }

    #[test]
    fn same_seed_same_message_stream() {
        let mut cfg = ScenarioConfig::preset(PoiScenario::Pois2, StrategyKind::Epidemic);
        cfg.sim_time = 3600.0;
        let a = Simulation::from_config(&cfg, 42).unwrap();
        let b = Simulation::from_config(&cfg, 42).unwrap();
        let draw = |mut s: Simulation| {
            (0..50)
                .map(|i| generate_message(MessageId(i), NodeId(0), 0.0, &s.generators, &s.traffic, &mut s.traffic_rng).unwrap())
                .map(|m| (m.dst, m.size_bytes, m.ttl))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(a), draw(b));
    }

    #[test]
    fn trams_do_not_generate_traffic() {
        let cfg = ScenarioConfig::preset(PoiScenario::Pois2, StrategyKind::Epidemic);
        let sim = Simulation::from_config(&cfg, 1).unwrap();
        assert_eq!(sim.generators.len(), 96);
        let trams = sim.nodes.iter().filter(|n| n.radios.len() == 2).count();
        assert_eq!(trams, 4);
    }
}
