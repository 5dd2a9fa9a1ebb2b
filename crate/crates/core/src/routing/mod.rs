//! Routing strategies and the delivery-predictability machinery they share.

mod predictability;
mod strategy;

pub use predictability::{exchange_tables, PredictabilityParams, PredictabilityRow, PredictabilityTable};
pub use strategy::{
    epidemic_requests, integrated_decide, prophet_decide, should_exchange_summary, DecisionInput, EpidemicRouter, ForwardDecision,
    IntegratedRouter, ProphetRouter, RoutingStrategy, StrategyKind,
};
