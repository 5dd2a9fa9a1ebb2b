//! Deterministic discrete-event simulator for opportunistic (delay-tolerant)
//! networks.
//!
//! Nodes move on an open plane, meet each other over short-range radios, and
//! carry messages between encounters. Three routing strategies are provided:
//! Epidemic flooding, PROPHET probabilistic forwarding, and the Integrated
//! protocol that forwards on delivery predictability while context exists and
//! falls back to timed flooding when it does not.
//!
//! The entry points are [`engine::run`] for config-driven scenarios and
//! [`engine::run_scripted`] for hand-written contact plans.

pub mod engine;
pub mod message;
pub mod mobility;
pub mod radio;
pub mod routing;
pub mod scenario;
pub mod stats;

pub use engine::{run, run_scripted, run_with_timeseries, ScriptedContact, ScriptedMessage, ScriptedScenario};
pub use message::{Buffer, BufferEntry, Message, MessageId, NodeId};
pub use routing::{ForwardDecision, PredictabilityParams, PredictabilityTable, StrategyKind};
pub use scenario::{ConfigError, ScenarioConfig};
pub use stats::{StatsReport, TimeseriesRow};

/// Seconds since the start of a simulation run.
pub type SimTime = f64;
