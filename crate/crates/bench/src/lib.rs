//! Scenario builders shared by the benchmarks.

use oppnet_core::scenario::PoiScenario;
use oppnet_core::{ScenarioConfig, StrategyKind};

/// The full POIs2 population with a shortened horizon.
pub fn pois2(strategy: StrategyKind, sim_time: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::preset(PoiScenario::Pois2, strategy);
    cfg.sim_time = sim_time;
    cfg
}
