//! Scenario configuration.
//!
//! Scenarios are flat `key=value` files with dotted prefixes:
//!
//! ```text
//! # comment
//! sim.time=43200
//! routing.strategy=prophet
//! group.walkers.count=20
//! group.walkers.speed=0.5,1.5
//! group.walkers.poi.shops=0.4
//! ```
//!
//! Every key except `routing.strategy` and `group.<name>.count` has a
//! default. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::mobility::Rect;
use crate::radio::RadioProfile;
use crate::routing::{EpidemicRouter, IntegratedRouter, PredictabilityParams, ProphetRouter, RoutingStrategy, StrategyKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required keys: {}", .keys.join(", "))]
    MissingKeys { keys: Vec<String> },
    #[error("{}{key}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { key: String, line: Option<usize>, message: String },
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { key: key.into(), line: None, message: message.into() }
    }

    /// The offending key, when the error is about one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey { key, .. } | ConfigError::DuplicateKey { key, .. } | ConfigError::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

pub const MIB: u64 = 1024 * 1024;
pub const KIB: u64 = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct PoiGroupConfig {
    pub name: String,
    pub count: usize,
    /// Sub-rectangle the group's points are drawn from.
    pub area: Rect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeGroupConfig {
    pub name: String,
    pub count: usize,
    /// Speed range in m/s.
    pub speed: (f64, f64),
    /// Pause range in seconds.
    pub pause: (f64, f64),
    pub radios: Vec<String>,
    /// Whether members generate messages.
    pub traffic: bool,
    /// `(poi group name, probability)`; the remainder picks a random point.
    pub poi: Vec<(String, f64)>,
}

impl NodeGroupConfig {
    fn new(name: &str) -> Self {
        NodeGroupConfig {
            name: name.to_string(),
            count: 0,
            speed: (0.5, 1.5),
            pause: (0.0, 120.0),
            radios: vec!["bluetooth".into()],
            traffic: true,
            poi: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficConfig {
    /// Mean of the exponential inter-generation gap, seconds.
    pub interval_mean: f64,
    pub size_min: u64,
    pub size_max: u64,
    /// TTL choices in seconds, picked uniformly per message.
    pub ttls: Vec<f64>,
    /// Initial hop budget; `None` is unlimited.
    pub hop_limit: Option<u32>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            interval_mean: 3600.0,
            size_min: 100 * KIB,
            size_max: 2 * MIB,
            ttls: vec![3.0 * 3600.0, 6.0 * 3600.0, 12.0 * 3600.0],
            hop_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingConfig {
    pub strategy: StrategyKind,
    pub buffer_bytes: u64,
    /// Epidemic recently-seen window, seconds.
    pub seen_window: f64,
    /// When false, predictability tables never change (everything stays 0).
    pub learning: bool,
    pub predictability: PredictabilityParams,
    /// Optional threshold for PROPHET; 0 is plain PROPHET.
    pub prophet_threshold: f64,
    pub threshold: f64,
    pub wait_time: f64,
    pub max_copies: Option<u32>,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        RoutingConfig {
            strategy: StrategyKind::Epidemic,
            buffer_bytes: 20 * MIB,
            seen_window: 300.0,
            learning: true,
            predictability: PredictabilityParams::default(),
            prophet_threshold: 0.0,
            threshold: 0.1,
            wait_time: 1800.0,
            max_copies: Some(8),
        }
    }
}

impl RoutingConfig {
    pub fn build_strategy(&self) -> Box<dyn RoutingStrategy> {
        match self.strategy {
            StrategyKind::Epidemic => Box::new(EpidemicRouter { seen_window: self.seen_window }),
            StrategyKind::Prophet => Box::new(ProphetRouter { threshold: self.prophet_threshold }),
            StrategyKind::Integrated => {
                Box::new(IntegratedRouter { threshold: self.threshold, wait_time: self.wait_time, max_copies: self.max_copies })
            }
        }
    }
}

/// Which of the shipped mobility scenarios to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoiScenario {
    /// One random-waypoint group, three groups at 0.1 per POI group, and cars
    /// restricted to the car-accessible groups.
    Pois1,
    /// Four groups with a preferred POI group at 0.4 and 0.1 for the others.
    Pois2,
    /// The POIs2 population with every POI probability set to 0.
    NoPois,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub world_width: f64,
    pub world_height: f64,
    pub sim_time: f64,
    pub tick: f64,
    pub seed: u64,
    /// Interval of the cumulative time-series samples.
    pub sample_interval: f64,
    pub total_nodes: Option<usize>,
    pub radios: Vec<RadioProfile>,
    pub pois: Vec<PoiGroupConfig>,
    pub groups: Vec<NodeGroupConfig>,
    pub traffic: TrafficConfig,
    pub routing: RoutingConfig,
}

impl Default for ScenarioConfig {
    /// Default world, radios, POI layout, traffic and routing knobs,
    /// with no node groups.
    fn default() -> Self {
        ScenarioConfig {
            world_width: 4500.0,
            world_height: 3400.0,
            sim_time: 43200.0,
            tick: 1.0,
            seed: 1,
            sample_interval: 3600.0,
            total_nodes: None,
            radios: vec![RadioProfile::bluetooth(), RadioProfile::wlan()],
            pois: default_pois(),
            groups: Vec::new(),
            traffic: TrafficConfig::default(),
            routing: RoutingConfig::default(),
        }
    }
}

fn default_pois() -> Vec<PoiGroupConfig> {
    let poi = |name: &str, count, area| PoiGroupConfig { name: name.into(), count, area };
    vec![
        poi("west", 3, Rect::new(150.0, 900.0, 900.0, 2500.0)),
        poi("central", 4, Rect::new(1700.0, 1100.0, 2800.0, 2300.0)),
        poi("shops", 22, Rect::new(1300.0, 700.0, 3200.0, 2700.0)),
        poi("parks", 11, Rect::new(3100.0, 200.0, 4350.0, 3200.0)),
    ]
}

const POI_NAMES: [&str; 4] = ["west", "central", "shops", "parks"];
const CAR_POIS: [&str; 2] = ["west", "central"];

impl ScenarioConfig {
    /// The 100-node population: four pedestrian groups of 19, 20 cars, and 4
    /// trams carrying both radios.
    pub fn preset(scenario: PoiScenario, strategy: StrategyKind) -> Self {
        let mut cfg = ScenarioConfig { total_nodes: Some(100), ..Default::default() };
        cfg.routing.strategy = strategy;

        let pedestrian_names = match scenario {
            PoiScenario::Pois1 => ["mbm_walkers", "walkers_b", "walkers_c", "walkers_d"],
            PoiScenario::Pois2 | PoiScenario::NoPois => ["west_walkers", "central_walkers", "shoppers", "park_walkers"],
        };
        for (i, name) in pedestrian_names.iter().enumerate() {
            let mut g = NodeGroupConfig::new(name);
            g.count = 19;
            g.poi = POI_NAMES
                .iter()
                .map(|p| {
                    let prob = match scenario {
                        PoiScenario::Pois1 if i == 0 => 0.0,
                        PoiScenario::Pois1 => 0.1,
                        PoiScenario::Pois2 if POI_NAMES[i] == *p => 0.4,
                        PoiScenario::Pois2 => 0.1,
                        PoiScenario::NoPois => 0.0,
                    };
                    (p.to_string(), prob)
                })
                .collect();
            cfg.groups.push(g);
        }

        let poi_prob = if scenario == PoiScenario::NoPois { 0.0 } else { 0.1 };
        let mut cars = NodeGroupConfig::new("cars");
        cars.count = 20;
        cars.speed = (2.78, 13.9);
        cars.poi = CAR_POIS.iter().map(|p| (p.to_string(), poi_prob)).collect();
        cfg.groups.push(cars);

        let tram_prob = if scenario == PoiScenario::NoPois { 0.0 } else { 0.5 };
        let mut trams = NodeGroupConfig::new("trams");
        trams.count = 4;
        trams.speed = (7.0, 10.0);
        trams.pause = (10.0, 30.0);
        trams.radios = vec!["bluetooth".into(), "wlan".into()];
        trams.traffic = false;
        trams.poi = CAR_POIS.iter().map(|p| (p.to_string(), tram_prob)).collect();
        cfg.groups.push(trams);
        cfg
    }

    pub fn world_rect(&self) -> Rect {
        Rect::world(self.world_width, self.world_height)
    }

    pub fn radio(&self, name: &str) -> Option<&RadioProfile> {
        self.radios.iter().find(|r| r.name == name)
    }

    pub fn node_count(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        text.parse()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: String, msg: String| Err(ConfigError::invalid(key, msg));
        positive("world.width", self.world_width)?;
        positive("world.height", self.world_height)?;
        non_negative("sim.time", self.sim_time)?;
        positive("sim.tick", self.tick)?;
        positive("sim.sample_interval", self.sample_interval)?;

        for r in &self.radios {
            positive(&format!("radio.{}.range", r.name), r.range_m)?;
            positive(&format!("radio.{}.bandwidth", r.name), r.bandwidth_bps)?;
        }
        let world = self.world_rect();
        for p in &self.pois {
            let key = format!("poi.{}.area", p.name);
            let a = p.area;
            if !(a.x0 <= a.x1 && a.y0 <= a.y1) {
                return bad(key, "area must be x0,y0,x1,y1 with x0 <= x1 and y0 <= y1".into());
            }
            if !world.contains_rect(&a) {
                return bad(key, "area lies outside the world".into());
            }
        }

        for g in &self.groups {
            let key = |k: &str| format!("group.{}.{k}", g.name);
            range(&key("speed"), g.speed)?;
            if g.speed.0 <= 0.0 {
                return bad(key("speed"), "speed must be positive".into());
            }
            range(&key("pause"), g.pause)?;
            non_negative(&key("pause"), g.pause.0)?;
            if g.radios.is_empty() {
                return bad(key("radios"), "at least one radio is required".into());
            }
            for r in &g.radios {
                if self.radio(r).is_none() {
                    return bad(key("radios"), format!("unknown radio `{r}`"));
                }
            }
            let mut sum = 0.0;
            for (name, p) in &g.poi {
                let k = format!("group.{}.poi.{name}", g.name);
                probability(&k, *p)?;
                match self.pois.iter().find(|x| &x.name == name) {
                    None => return bad(k, "unknown POI group".into()),
                    Some(x) if *p > 0.0 && x.count == 0 => return bad(k, "POI group has no points".into()),
                    _ => {}
                }
                sum += p;
            }
            if sum > 1.0 + 1e-9 {
                return bad(key("poi"), format!("POI probabilities sum to {sum}, above 1"));
            }
        }
        if let Some(total) = self.total_nodes {
            let sum = self.node_count();
            if sum != total {
                return bad("nodes.total".into(), format!("group counts sum to {sum}, expected {total}"));
            }
        }

        let t = &self.traffic;
        positive("traffic.interval", t.interval_mean)?;
        if t.size_min > t.size_max {
            return bad("traffic.size".into(), "min must not exceed max".into());
        }
        if t.ttls.is_empty() {
            return bad("traffic.ttl".into(), "at least one TTL is required".into());
        }
        for ttl in &t.ttls {
            positive("traffic.ttl", *ttl)?;
        }

        let r = &self.routing;
        if r.buffer_bytes == 0 {
            return bad("routing.buffer_bytes".into(), "must be positive".into());
        }
        non_negative("routing.seen_window", r.seen_window)?;
        probability("prophet.p_init", r.predictability.p_init)?;
        probability("prophet.beta", r.predictability.beta)?;
        if !(r.predictability.alpha > 0.0 && r.predictability.alpha <= 1.0) {
            return bad("prophet.alpha".into(), format!("{} is outside (0, 1]", r.predictability.alpha));
        }
        positive("prophet.time_unit", r.predictability.time_unit)?;
        probability("prophet.threshold", r.prophet_threshold)?;
        probability("integrated.threshold", r.threshold)?;
        if r.wait_time.is_nan() || r.wait_time < 0.0 {
            return bad("integrated.wait_time".into(), "must be non-negative".into());
        }
        Ok(())
    }

    /// Canonical text form. Parsing the output yields an equal config.
    pub fn to_conf_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("world.width", &self.world_width);
        kv("world.height", &self.world_height);
        kv("sim.time", &self.sim_time);
        kv("sim.tick", &self.tick);
        kv("sim.seed", &self.seed);
        kv("sim.sample_interval", &self.sample_interval);
        if let Some(n) = self.total_nodes {
            kv("nodes.total", &n);
        }
        for r in &self.radios {
            kv(&format!("radio.{}.range", r.name), &r.range_m);
            kv(&format!("radio.{}.bandwidth", r.name), &r.bandwidth_bps);
        }
        for p in &self.pois {
            kv(&format!("poi.{}.count", p.name), &p.count);
            let a = p.area;
            kv(&format!("poi.{}.area", p.name), &format_args!("{},{},{},{}", a.x0, a.y0, a.x1, a.y1));
        }
        for g in &self.groups {
            let k = |s: &str| format!("group.{}.{s}", g.name);
            kv(&k("count"), &g.count);
            kv(&k("speed"), &format_args!("{},{}", g.speed.0, g.speed.1));
            kv(&k("pause"), &format_args!("{},{}", g.pause.0, g.pause.1));
            kv(&k("radios"), &g.radios.join(","));
            kv(&k("traffic"), &g.traffic);
            for (name, p) in &g.poi {
                kv(&k(&format!("poi.{name}")), p);
            }
        }
        let t = &self.traffic;
        kv("traffic.interval", &t.interval_mean);
        kv("traffic.size", &format_args!("{},{}", t.size_min, t.size_max));
        kv("traffic.ttl", &join(&t.ttls));
        kv("traffic.hop_limit", &OptCount(t.hop_limit));
        let r = &self.routing;
        kv("routing.strategy", &r.strategy);
        kv("routing.buffer_bytes", &r.buffer_bytes);
        kv("routing.seen_window", &r.seen_window);
        kv("routing.learning", &r.learning);
        kv("prophet.p_init", &r.predictability.p_init);
        kv("prophet.alpha", &r.predictability.alpha);
        kv("prophet.beta", &r.predictability.beta);
        kv("prophet.time_unit", &r.predictability.time_unit);
        kv("prophet.threshold", &r.prophet_threshold);
        kv("integrated.threshold", &r.threshold);
        kv("integrated.wait_time", &r.wait_time);
        kv("integrated.max_copies", &OptCount(r.max_copies));
        out
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

struct OptCount(Option<u32>);

impl fmt::Display for OptCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(n) => write!(f, "{n}"),
            None => f.write_str("unlimited"),
        }
    }
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, format!("{v} must be positive")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, format!("{v} must be non-negative")))
    }
}

fn probability(key: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, format!("probability {v} is outside [0, 1]")))
    }
}

fn range(key: &str, (lo, hi): (f64, f64)) -> Result<(), ConfigError> {
    if lo <= hi && lo.is_finite() && hi.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, format!("range {lo},{hi} needs min <= max")))
    }
}

impl FromStr for ScenarioConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let entries = read_entries(text)?;
        let lines: BTreeMap<&str, usize> = entries.iter().map(|(k, (_, l))| (k.as_str(), *l)).collect();
        let mut cfg = ScenarioConfig::default();
        let mut missing = Vec::new();
        let mut strategy_seen = false;
        let mut group_counts: BTreeMap<String, bool> = BTreeMap::new();
        let mut new_radios: BTreeMap<String, (bool, bool)> = BTreeMap::new();
        let mut new_pois: BTreeMap<String, (bool, bool)> = BTreeMap::new();

        // preserve first-appearance order for groups
        let mut ordered: Vec<(&String, &(String, usize))> = entries.iter().collect();
        ordered.sort_by_key(|(_, (_, line))| *line);

        for (key, (value, line)) in ordered {
            let line = *line;
            let at = |e: ConfigError| with_line(e, line);
            let parts: Vec<&str> = key.split('.').collect();
            match parts.as_slice() {
                ["world", "width"] => cfg.world_width = num(key, value).map_err(at)?,
                ["world", "height"] => cfg.world_height = num(key, value).map_err(at)?,
                ["sim", "time"] => cfg.sim_time = num(key, value).map_err(at)?,
                ["sim", "tick"] => cfg.tick = num(key, value).map_err(at)?,
                ["sim", "seed"] => cfg.seed = int(key, value).map_err(at)?,
                ["sim", "sample_interval"] => cfg.sample_interval = num(key, value).map_err(at)?,
                ["nodes", "total"] => cfg.total_nodes = Some(int(key, value).map_err(at)?),
                ["radio", name, field @ ("range" | "bandwidth")] => {
                    let v: f64 = num(key, value).map_err(at)?;
                    let idx = match cfg.radios.iter().position(|r| r.name == *name) {
                        Some(i) => i,
                        None => {
                            cfg.radios.push(RadioProfile { name: name.to_string(), range_m: 0.0, bandwidth_bps: 0.0 });
                            new_radios.insert(name.to_string(), (false, false));
                            cfg.radios.len() - 1
                        }
                    };
                    let seen = new_radios.get_mut(*name);
                    if *field == "range" {
                        cfg.radios[idx].range_m = v;
                        if let Some(s) = seen {
                            s.0 = true;
                        }
                    } else {
                        cfg.radios[idx].bandwidth_bps = v;
                        if let Some(s) = seen {
                            s.1 = true;
                        }
                    }
                }
                ["poi", name, field @ ("count" | "area")] => {
                    let idx = match cfg.pois.iter().position(|p| p.name == *name) {
                        Some(i) => i,
                        None => {
                            cfg.pois.push(PoiGroupConfig { name: name.to_string(), count: 0, area: Rect::new(0.0, 0.0, 0.0, 0.0) });
                            new_pois.insert(name.to_string(), (false, false));
                            cfg.pois.len() - 1
                        }
                    };
                    let seen = new_pois.get_mut(*name);
                    if *field == "count" {
                        cfg.pois[idx].count = int(key, value).map_err(at)?;
                        if let Some(s) = seen {
                            s.0 = true;
                        }
                    } else {
                        let v = list(key, value, 4).map_err(at)?;
                        cfg.pois[idx].area = Rect::new(v[0], v[1], v[2], v[3]);
                        if let Some(s) = seen {
                            s.1 = true;
                        }
                    }
                }
                ["group", name, rest @ ..] if !rest.is_empty() => {
                    let idx = match cfg.groups.iter().position(|g| g.name == *name) {
                        Some(i) => i,
                        None => {
                            cfg.groups.push(NodeGroupConfig::new(name));
                            group_counts.insert(name.to_string(), false);
                            cfg.groups.len() - 1
                        }
                    };
                    let g = &mut cfg.groups[idx];
                    match rest {
                        ["count"] => {
                            g.count = int(key, value).map_err(at)?;
                            group_counts.insert(name.to_string(), true);
                        }
                        ["speed"] => g.speed = pair(key, value).map_err(at)?,
                        ["pause"] => g.pause = pair(key, value).map_err(at)?,
                        ["radios"] => g.radios = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
                        ["traffic"] => g.traffic = boolean(key, value).map_err(at)?,
                        ["poi", poi] => g.poi.push((poi.to_string(), num(key, value).map_err(at)?)),
                        _ => return Err(ConfigError::UnknownKey { line, key: key.clone() }),
                    }
                }
                ["traffic", "interval"] => cfg.traffic.interval_mean = num(key, value).map_err(at)?,
                ["traffic", "size"] => {
                    let (lo, hi): (u64, u64) = {
                        let v: Vec<&str> = value.split(',').map(str::trim).collect();
                        if v.len() != 2 {
                            return Err(at(ConfigError::invalid(key.as_str(), "expected min,max")));
                        }
                        (int(key, v[0]).map_err(at)?, int(key, v[1]).map_err(at)?)
                    };
                    cfg.traffic.size_min = lo;
                    cfg.traffic.size_max = hi;
                }
                ["traffic", "ttl"] => cfg.traffic.ttls = list(key, value, 0).map_err(at)?,
                ["traffic", "hop_limit"] => cfg.traffic.hop_limit = opt_count(key, value).map_err(at)?,
                ["routing", "strategy"] => {
                    cfg.routing.strategy = value.parse().map_err(|m: String| at(ConfigError::invalid(key.as_str(), m)))?;
                    strategy_seen = true;
                }
                ["routing", "buffer_bytes"] => cfg.routing.buffer_bytes = int(key, value).map_err(at)?,
                ["routing", "seen_window"] => cfg.routing.seen_window = num(key, value).map_err(at)?,
                ["routing", "learning"] => cfg.routing.learning = boolean(key, value).map_err(at)?,
                ["prophet", "p_init"] => cfg.routing.predictability.p_init = num(key, value).map_err(at)?,
                ["prophet", "alpha"] => cfg.routing.predictability.alpha = num(key, value).map_err(at)?,
                ["prophet", "beta"] => cfg.routing.predictability.beta = num(key, value).map_err(at)?,
                ["prophet", "time_unit"] => cfg.routing.predictability.time_unit = num(key, value).map_err(at)?,
                ["prophet", "threshold"] => cfg.routing.prophet_threshold = num(key, value).map_err(at)?,
                ["integrated", "threshold"] => cfg.routing.threshold = num(key, value).map_err(at)?,
                ["integrated", "wait_time"] => cfg.routing.wait_time = num(key, value).map_err(at)?,
                ["integrated", "max_copies"] => cfg.routing.max_copies = opt_count(key, value).map_err(at)?,
                _ => return Err(ConfigError::UnknownKey { line, key: key.clone() }),
            }
        }

        if !strategy_seen {
            missing.push("routing.strategy".to_string());
        }
        if group_counts.is_empty() {
            missing.push("group.<name>.count".to_string());
        }
        missing.extend(group_counts.iter().filter(|(_, seen)| !**seen).map(|(n, _)| format!("group.{n}.count")));
        for (name, (range, bw)) in &new_radios {
            if !range {
                missing.push(format!("radio.{name}.range"));
            }
            if !bw {
                missing.push(format!("radio.{name}.bandwidth"));
            }
        }
        for (name, (count, area)) in &new_pois {
            if !count {
                missing.push(format!("poi.{name}.count"));
            }
            if !area {
                missing.push(format!("poi.{name}.area"));
            }
        }
        if !missing.is_empty() {
            return Err(ConfigError::MissingKeys { keys: missing });
        }

        cfg.validate().map_err(|e| match e {
            ConfigError::Invalid { key, line: None, message } => {
                let line = lines.get(key.as_str()).copied().or_else(|| {
                    // group-level errors (e.g. POI sum) point at the first key of the group
                    lines.iter().filter(|(k, _)| k.starts_with(&format!("{key}."))).map(|(_, l)| *l).min()
                });
                ConfigError::Invalid { key, line, message }
            }
            other => other,
        })?;
        Ok(cfg)
    }
}

fn with_line(e: ConfigError, line: usize) -> ConfigError {
    match e {
        ConfigError::Invalid { key, message, .. } => ConfigError::Invalid { key, line: Some(line), message },
        other => other,
    }
}

/// Splits the text into `key -> (value, line)`, rejecting malformed lines and
/// duplicate keys.
fn read_entries(text: &str) -> Result<BTreeMap<String, (String, usize)>, ConfigError> {
    let mut out: BTreeMap<String, (String, usize)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((k, v)) = trimmed.split_once('=') else {
            return Err(ConfigError::Syntax { line, message: format!("expected key=value, got `{trimmed}`") });
        };
        let key = k.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(ConfigError::Syntax { line, message: format!("malformed key `{key}`") });
        }
        if out.contains_key(key) {
            return Err(ConfigError::DuplicateKey { line, key: key.to_string() });
        }
        out.insert(key.to_string(), (v.trim().to_string(), line));
    }
    Ok(out)
}

fn num(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.trim().parse::<f64>().ok().filter(|x| !x.is_nan()).ok_or_else(|| ConfigError::invalid(key, format!("`{v}` is not a number")))
}

fn int<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim().parse::<T>().map_err(|_| ConfigError::invalid(key, format!("`{v}` is not a non-negative integer")))
}

fn boolean(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::invalid(key, format!("`{v}` is not a boolean"))),
    }
}

fn opt_count(key: &str, v: &str) -> Result<Option<u32>, ConfigError> {
    if v.trim() == "unlimited" {
        Ok(None)
    } else {
        int(key, v).map(Some)
    }
}

fn pair(key: &str, v: &str) -> Result<(f64, f64), ConfigError> {
    let xs = list(key, v, 2)?;
    Ok((xs[0], xs[1]))
}

/// Comma-separated numbers; `want == 0` accepts any non-empty length.
fn list(key: &str, v: &str, want: usize) -> Result<Vec<f64>, ConfigError> {
    let xs = v.split(',').map(|s| num(key, s)).collect::<Result<Vec<_>, _>>()?;
    if (want > 0 && xs.len() != want) || xs.is_empty() {
        return Err(ConfigError::invalid(key, format!("expected {want} comma-separated values, got `{v}`")));
    }
    Ok(xs)
}
