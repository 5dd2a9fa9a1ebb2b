use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use oppnet_cli::{compare, emit_report, emit_timeseries, parse_scenario, CliError, Format, NamedReport};
use oppnet_core::mobility::Rect;
use oppnet_core::scenario::PoiScenario;
use oppnet_core::{run_with_timeseries, ConfigError, ScenarioConfig, StrategyKind};
use tempfile::TempDir;

fn small_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::preset(PoiScenario::Pois2, StrategyKind::Epidemic);
    cfg.world_width = 600.0;
    cfg.world_height = 450.0;
    cfg.sim_time = 1800.0;
    cfg.sample_interval = 600.0;
    cfg.total_nodes = None;
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
        g.count = 2;
    }
    cfg.traffic.interval_mean = 300.0;
    cfg
}

fn write_config(dir: &TempDir, name: &str, cfg: &ScenarioConfig) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, cfg.to_conf_string()).unwrap();
    path
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn missing_file_is_reported() {
    let err = parse_scenario("/nonexistent/x.conf").unwrap_err();
    assert!(matches!(err, CliError::Config { source: ConfigError::Io { .. }, .. }));
}

#[test]
fn empty_file_lists_required_keys() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("empty.conf");
    fs::write(&path, "").unwrap();
    let err = parse_scenario(&path).unwrap_err().to_string();
    assert!(err.contains("routing.strategy"), "{err}");
    assert!(err.contains("group.<name>.count"), "{err}");
}

#[test]
fn bad_probability_names_key_and_line() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.conf");
    fs::write(&path, "routing.strategy=epidemic\ngroup.w.count=3\ngroup.w.poi.shops=1.3\npoi.shops.count=2\npoi.shops.area=0,0,10,10\n")
        .unwrap();
    let err = parse_scenario(&path).unwrap_err();
    let CliError::Config { source, .. } = &err else { panic!("{err}") };
    assert_eq!(source.key(), Some("group.w.poi.shops"));
    assert!(err.to_string().contains("line 3"), "{err}");
}

#[test]
fn shipped_scenarios_parse() {
    for name in ["pois1.conf", "pois2.conf", "nopois.conf"] {
        let cfg = parse_scenario(scenarios_dir().join(name)).unwrap();
        assert_eq!(cfg.node_count(), 100, "{name}");
    }
}

#[test]
fn two_strategies_three_seeds() {
    let cfgs = vec![("small".to_string(), small_config())];
    let result = compare(&cfgs, &[StrategyKind::Epidemic, StrategyKind::Prophet], &[1, 2, 3]).unwrap();
    assert_eq!(result.runs.len(), 6);
    let averaged = result.averaged();
    assert_eq!(averaged.len(), 2);
    assert_eq!(averaged[0].name, "small/epidemic");
    assert_eq!(result.all_reports().len(), 8);
    let seeds: Vec<u64> = result.runs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, vec![1, 2, 3, 1, 2, 3]);
}

#[test]
fn five_column_comparison_has_report_rows() {
    let mut nopois = small_config();
    for g in &mut nopois.groups {
        for (_, p) in &mut g.poi {
            *p = 0.0;
        }
    }
    let cfgs = vec![("pois".to_string(), small_config()), ("nopois".to_string(), nopois)];
    let result = compare(&cfgs, &StrategyKind::ALL, &[1]).unwrap();
    // epidemic behaves the same without context, so the table keeps five columns
    let columns: Vec<NamedReport> = result.averaged().into_iter().filter(|r| r.name != "nopois/epidemic").collect();
    assert_eq!(columns.len(), 5);
    let table = oppnet_cli::render(&columns, Format::Table).unwrap();
    assert_eq!(table.lines().count(), 11);
    for label in ["sim_time", "created", "delivery_prob", "buffertime_avg"] {
        assert!(table.contains(label));
    }
}

#[test]
fn comparison_is_reproducible() {
    let cfgs = vec![("small".to_string(), small_config())];
    let render = || {
        let r = compare(&cfgs, &StrategyKind::ALL, &[4, 5]).unwrap();
        oppnet_cli::render(&r.all_reports(), Format::Json).unwrap()
    };
    assert_eq!(render(), render());
}

#[test]
fn reports_and_timeseries_are_written() {
    let dir = TempDir::new().unwrap();
    let (report, rows) = run_with_timeseries(&small_config(), 1).unwrap();
    let out = dir.path().join("r.json");
    let named = vec![NamedReport { name: "small/epidemic".into(), report }];
    emit_report(&named, Format::Json, Some(&out)).unwrap();
    let back: Vec<NamedReport> = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(back, named);

    let ts = dir.path().join("ts.csv");
    emit_timeseries(&rows, &ts).unwrap();
    let text = fs::read_to_string(&ts).unwrap();
    assert!(text.starts_with("time,created,delivered,delivery_prob,delay_prob,latency_avg\n"));
    assert_eq!(text.lines().count(), 1 + 3);
}

#[test]
fn unwritable_path_is_an_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("missing/dir/r.csv");
    let err = emit_report(&[], Format::Csv, Some(&out)).unwrap_err();
    assert!(matches!(err, CliError::Write { .. }));
}

fn oppnet(args: &[&str], seed_env: Option<&str>) -> std::process::Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_oppnet"));
    cmd.args(args).env_remove("OPPNET_SEED");
    if let Some(s) = seed_env {
        cmd.env("OPPNET_SEED", s);
    }
    cmd.output().unwrap()
}

#[test]
fn binary_run_and_seed_override() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "small.conf", &small_config());
    let cfg = cfg.to_str().unwrap();
    let json = |args: &[&str], env| {
        let out = oppnet(args, env);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let base = ["run", cfg, "--format", "json"];
    let seed7 = json(&[&base[..], &["--seed", "7"]].concat(), None);
    assert_eq!(json(&base, Some("7")), seed7);
    assert_ne!(json(&base, Some("8")), seed7);
    // an explicit flag beats the environment
    assert_eq!(json(&[&base[..], &["--seed", "7"]].concat(), Some("8")), seed7);

    let prophet = json(&[&base[..], &["--strategy", "prophet"]].concat(), None);
    assert!(prophet.contains("small/prophet"));
}

#[test]
fn binary_compare_writes_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "small.conf", &small_config());
    let out_path = dir.path().join("cmp.csv");
    let out = oppnet(
        &[
            "compare",
            "--configs",
            cfg.to_str().unwrap(),
            "--strategies",
            "epidemic,integrated",
            "--seeds",
            "1,2",
            "--format",
            "csv",
            "--out",
            out_path.to_str().unwrap(),
        ],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_path).unwrap();
    let names: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, vec!["small/epidemic", "small/integrated"]);
}

#[test]
fn binary_rejects_unknown_strategy_and_bad_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "small.conf", &small_config());
    let out = oppnet(&["run", cfg.to_str().unwrap(), "--strategy", "flooding"], None);
    assert!(!out.status.success());

    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "routing.strategy=epidemic\nwrold.width=5\n").unwrap();
    let out = oppnet(&["run", bad.to_str().unwrap()], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("wrold.width"));
}
