//! Node movement on an open rectangular plane.
//!
//! Nodes travel in straight lines between destinations, pause on arrival, and
//! pick their next destination either from a point-of-interest group (with
//! the group's configured probability) or uniformly from the whole world.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::message::NodeId;
use crate::radio::RadioProfile;
use crate::scenario::{ConfigError, ScenarioConfig};
use crate::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance_sq(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Position) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

/// Axis-aligned rectangle, `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn world(width: f64, height: f64) -> Self {
        Rect::new(0.0, 0.0, width, height)
    }

    pub fn contains(&self, p: &Position) -> bool {
        (self.x0..=self.x1).contains(&p.x) && (self.y0..=self.y1).contains(&p.y)
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.y0 >= self.y0 && other.x1 <= self.x1 && other.y1 <= self.y1
    }

    /// Snaps rounding error at the edges back inside.
    pub fn clamp(&self, p: Position) -> Position {
        Position { x: p.x.clamp(self.x0, self.x1), y: p.y.clamp(self.y0, self.y1) }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Position {
        Position { x: uniform(rng, self.x0, self.x1), y: uniform(rng, self.y0, self.y1) }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoiGroup {
    pub name: String,
    pub points: Vec<Position>,
}

/// Places each configured POI group's points uniformly inside its area.
pub fn layout_pois<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Vec<PoiGroup> {
    config.pois.iter().map(|g| PoiGroup { name: g.name.clone(), points: (0..g.count).map(|_| g.area.sample(rng)).collect() }).collect()
}

/// Draws the next destination. Each `(poi_group_index, p)` entry claims
/// probability `p`; whatever probability is left over picks a uniform point
/// in `world`.
pub fn next_destination<R: Rng + ?Sized>(selection: &[(usize, f64)], pois: &[PoiGroup], world: &Rect, rng: &mut R) -> Position {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(group, p) in selection {
        acc += p;
        if u < acc {
            let points = &pois[group].points;
            return points[rng.random_range(0..points.len())];
        }
    }
    world.sample(rng)
}

/// Moves `from` towards `to` at `speed` for `dt` seconds. Returns the new
/// position and, when the destination was reached, the time spent getting
/// there.
pub fn step_position(from: Position, to: Position, speed: f64, dt: f64) -> (Position, Option<f64>) {
    let remaining = from.distance(&to);
    let travel = speed * dt;
    if travel >= remaining {
        let needed = if speed > 0.0 { remaining / speed } else { 0.0 };
        (to, Some(needed))
    } else {
        let f = travel / remaining;
        (Position { x: from.x + (to.x - from.x) * f, y: from.y + (to.y - from.y) * f }, None)
    }
}

/// Per-node movement state.
#[derive(Debug, Clone, PartialEq)]
pub struct Movement {
    pub position: Position,
    pub destination: Option<Position>,
    pub speed: f64,
    pub pause_until: SimTime,
    pub speed_range: (f64, f64),
    pub pause_range: (f64, f64),
    /// `(poi group index, probability)` pairs.
    pub selection: Vec<(usize, f64)>,
}

impl Movement {
    pub fn is_paused(&self, now: SimTime) -> bool {
        self.pause_until > now
    }

    /// Advances the node over `[now, now + dt]`. A pause that ends inside the
    /// window lets the node start its next leg; time left after an arrival
    /// inside the window is spent pausing.
    pub fn step<R: Rng + ?Sized>(&mut self, now: SimTime, dt: f64, pois: &[PoiGroup], world: &Rect, rng: &mut R) {
        let end = now + dt;
        let mut t = now;
        if self.pause_until > t {
            if self.pause_until >= end {
                return;
            }
            t = self.pause_until;
        }
        let dest = match self.destination {
            Some(d) => d,
            None => {
                let d = next_destination(&self.selection, pois, world, rng);
                self.speed = uniform(rng, self.speed_range.0, self.speed_range.1);
                self.destination = Some(d);
                d
            }
        };
        let (pos, arrived) = step_position(self.position, dest, self.speed, end - t);
        self.position = world.clamp(pos);
        if let Some(needed) = arrived {
            self.destination = None;
            self.pause_until = t + needed + uniform(rng, self.pause_range.0, self.pause_range.1);
        }
    }
}

/// A node as produced by [`build_population`].
#[derive(Debug, Clone, PartialEq)]
pub struct MobileNode {
    pub id: NodeId,
    pub group: usize,
    pub generates_traffic: bool,
    pub radios: Vec<RadioProfile>,
    pub movement: Movement,
}

/// Instantiates every configured node group in order, assigning ids from 0.
/// Initial positions are uniform over the world.
pub fn build_population<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Vec<MobileNode>, ConfigError> {
    let total: usize = config.groups.iter().map(|g| g.count).sum();
    if let Some(expected) = config.total_nodes {
        if expected != total {
            return Err(ConfigError::invalid("nodes.total", format!("group counts sum to {total}, expected {expected}")));
        }
    }
    let world = config.world_rect();
    let mut nodes = Vec::with_capacity(total);
    for (gi, group) in config.groups.iter().enumerate() {
        let radios = group
            .radios
            .iter()
            .map(|name| {
                config
                    .radio(name)
                    .cloned()
                    .ok_or_else(|| ConfigError::invalid(format!("group.{}.radios", group.name), format!("unknown radio `{name}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let selection = group
            .poi
            .iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(name, p)| {
                config
                    .pois
                    .iter()
                    .position(|g| &g.name == name)
                    .map(|idx| (idx, *p))
                    .ok_or_else(|| ConfigError::invalid(format!("group.{}.poi.{name}", group.name), "unknown POI group"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for _ in 0..group.count {
            nodes.push(MobileNode {
                id: NodeId(nodes.len() as u32),
                group: gi,
                generates_traffic: group.traffic,
                radios: radios.clone(),
                movement: Movement {
                    position: world.sample(rng),
                    destination: None,
                    speed: group.speed.0,
                    pause_until: 0.0,
                    speed_range: group.speed,
                    pause_range: group.pause,
                    selection: selection.clone(),
                },
            });
        }
    }
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn world() -> Rect {
        Rect::world(4500.0, 3400.0)
    }

    fn pedestrian(selection: Vec<(usize, f64)>) -> Movement {
        Movement {
            position: Position::new(0.0, 0.0),
            destination: Some(Position::new(100.0, 0.0)),
            speed: 1.5,
            pause_until: 0.0,
            speed_range: (0.5, 1.5),
            pause_range: (0.0, 120.0),
            selection,
        }
    }

    #[test]
    fn linear_motion() {
        let (p, arrived) = step_position(Position::new(0.0, 0.0), Position::new(100.0, 0.0), 1.5, 10.0);
        assert_eq!(p, Position::new(15.0, 0.0));
        assert!(arrived.is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = pedestrian(vec![]);
        m.step(0.0, 10.0, &[], &world(), &mut rng);
        assert_eq!(m.position, Position::new(15.0, 0.0));
    }

    #[test]
    fn paused_node_stays_put() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = pedestrian(vec![]);
        m.position = Position::new(100.0, 0.0);
        m.destination = None;
        m.pause_until = 60.0;
        m.step(0.0, 10.0, &[], &world(), &mut rng);
        assert_eq!(m.position, Position::new(100.0, 0.0));
        assert!(m.destination.is_none());
    }

    #[test]
    fn arrival_starts_a_pause() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = pedestrian(vec![]);
        m.position = Position::new(95.0, 0.0);
        m.step(10.0, 10.0, &[], &world(), &mut rng);
        assert_eq!(m.position, Position::new(100.0, 0.0));
        assert!(m.destination.is_none());
        assert!(m.pause_until >= 10.0 + 5.0 / 1.5 && m.pause_until <= 10.0 + 5.0 / 1.5 + 120.0);
    }

    #[test]
    fn single_point_group_with_certainty() {
        let pois = vec![PoiGroup { name: "only".into(), points: vec![Position::new(12.0, 34.0)] }];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            assert_eq!(next_destination(&[(0, 1.0)], &pois, &world(), &mut rng), Position::new(12.0, 34.0));
        }
    }

    #[test]
    fn positions_stay_in_world() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = world();
        let mut m = pedestrian(vec![]);
        m.speed_range = (2.78, 13.9);
        m.pause_range = (0.0, 5.0);
        let mut now = 0.0;
        for _ in 0..20_000 {
            m.step(now, 1.0, &[], &w, &mut rng);
            now += 1.0;
            assert!(w.contains(&m.position), "{:?}", m.position);
        }
    }
}
