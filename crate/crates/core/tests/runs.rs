use std::path::Path;

use oppnet_core::engine::Simulation;
use oppnet_core::mobility::Rect;
use oppnet_core::scenario::PoiScenario;
use oppnet_core::{run, run_with_timeseries, MessageId, ScenarioConfig, StrategyKind};

/// Ten nodes on a 600 x 450 m plane for one hour, dense enough that every
/// strategy moves messages.
fn small_world(strategy: StrategyKind) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::preset(PoiScenario::Pois2, strategy);
    cfg.world_width = 600.0;
    cfg.world_height = 450.0;
    cfg.sim_time = 3600.0;
    cfg.total_nodes = Some(10);
    let areas = [
        Rect::new(20.0, 120.0, 120.0, 330.0),
        Rect::new(220.0, 150.0, 370.0, 300.0),
        Rect::new(170.0, 90.0, 430.0, 360.0),
        Rect::new(410.0, 30.0, 580.0, 420.0),
    ];
    for (p, area) in cfg.pois.iter_mut().zip(areas) {
        p.area = area;
    }
    for g in &mut cfg.groups {
        g.count = match g.name.as_str() {
            "trams" => 0,
            _ => 2,
        };
    }
    cfg.traffic.interval_mean = 600.0;
    cfg
}

fn buffers(sim: &Simulation) -> Vec<Vec<MessageId>> {
    sim.nodes().iter().map(|n| n.buffer.summary_vector()).collect()
}

#[test]
fn integrated_without_context_matches_epidemic() {
    let mut epi = small_world(StrategyKind::Epidemic);
    epi.routing.seen_window = 0.0;
    let mut int = small_world(StrategyKind::Integrated);
    int.routing.learning = false;
    int.routing.threshold = 0.0;
    int.routing.wait_time = 0.0;
    int.routing.max_copies = None;
    for seed in 1..=3 {
        let mut a = Simulation::from_config(&epi, seed).unwrap();
        let mut b = Simulation::from_config(&int, seed).unwrap();
        let ra = a.run().unwrap();
        let rb = b.run().unwrap();
        assert!(ra.delivered > 0);
        assert_eq!(ra, rb);
        assert_eq!(buffers(&a), buffers(&b));
        assert_eq!(a.deliveries(), b.deliveries());
    }
}

#[test]
fn integrated_without_fallback_matches_thresholded_prophet() {
    let mut pro = small_world(StrategyKind::Prophet);
    pro.routing.prophet_threshold = 0.1;
    let mut int = small_world(StrategyKind::Integrated);
    int.routing.threshold = 0.1;
    int.routing.wait_time = f64::INFINITY;
    int.routing.max_copies = None;
    for seed in 1..=3 {
        let mut a = Simulation::from_config(&pro, seed).unwrap();
        let mut b = Simulation::from_config(&int, seed).unwrap();
        let ra = a.run().unwrap();
        assert!(ra.started > 0);
        assert_eq!(ra, b.run().unwrap());
        assert_eq!(buffers(&a), buffers(&b));
    }
}

#[test]
fn same_seed_same_report() {
    for strategy in StrategyKind::ALL {
        let cfg = small_world(strategy);
        assert_eq!(run(&cfg, 9).unwrap(), run(&cfg, 9).unwrap());
    }
}

#[test]
fn different_seeds_differ() {
    let cfg = small_world(StrategyKind::Epidemic);
    assert_ne!(run(&cfg, 1).unwrap(), run(&cfg, 2).unwrap());
}

#[test]
fn routing_does_not_change_movement() {
    let positions = |s: StrategyKind| {
        let mut sim = Simulation::from_config(&small_world(s), 4).unwrap();
        sim.run().unwrap();
        sim.nodes().iter().map(|n| n.movement.as_ref().unwrap().position).collect::<Vec<_>>()
    };
    let epi = positions(StrategyKind::Epidemic);
    assert_eq!(epi, positions(StrategyKind::Prophet));
    assert_eq!(epi, positions(StrategyKind::Integrated));
}

#[test]
fn reports_are_consistent() {
    for strategy in StrategyKind::ALL {
        for seed in 1..=3 {
            let r = run(&small_world(strategy), seed).unwrap();
            assert_eq!(r.started, r.relayed + r.aborted + r.in_flight);
            assert!(r.delivered <= r.created);
            assert!((0.0..=1.0).contains(&r.delivery_prob));
            assert!((0.0..=1.0).contains(&r.delay_prob));
            assert_eq!(r.sim_time, 3600.0);
            if r.delivered > 0 {
                assert!(r.hopcount_avg >= 1.0);
            }
        }
    }
}

#[test]
fn timeseries_is_cumulative() {
    let mut cfg = small_world(StrategyKind::Epidemic);
    cfg.sample_interval = 600.0;
    let (report, rows) = run_with_timeseries(&cfg, 2).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.windows(2).all(|w| w[0].time < w[1].time && w[0].created <= w[1].created && w[0].delivered <= w[1].delivered));
    let last = rows.last().unwrap();
    assert_eq!(last.time, 3600.0);
    assert_eq!((last.created, last.delivered), (report.created, report.delivered));
}

#[test]
fn shipped_scenarios_match_presets() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for (file, scenario) in [("pois1.conf", PoiScenario::Pois1), ("pois2.conf", PoiScenario::Pois2), ("nopois.conf", PoiScenario::NoPois)] {
        let cfg = ScenarioConfig::load(dir.join(file)).unwrap();
        assert_eq!(cfg, ScenarioConfig::preset(scenario, StrategyKind::Integrated), "{file}");
    }
}

#[test]
fn pois2_file_sets_preferred_probability() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let cfg = ScenarioConfig::load(dir.join("pois2.conf")).unwrap();
    let shoppers = cfg.groups.iter().find(|g| g.name == "shoppers").unwrap();
    assert!(shoppers.poi.contains(&("shops".to_string(), 0.4)));
}
