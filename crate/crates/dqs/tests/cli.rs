use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use dqs::commands;
use dqs::config::{self, ScenarioFile};
use dqs::output::fmt_float;
use dqs_core::metrology::{n_max_estimate, DepolarizedGhzModel};
use dqs_core::netsim::NetworkScenario;
use proptest::prelude::*;

fn dqs(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dqs")).args(args).output().unwrap()
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn shipped_scenarios_match_presets() {
    for i in 1..=3u8 {
        let file = ScenarioFile::load(&scenarios_dir().join(format!("scenario{i}.toml"))).unwrap();
        let mut loaded = file.to_scenario().unwrap();
        let preset = NetworkScenario::preset(i).unwrap();
        assert!((loaded.classical_comm_time_s - preset.classical_comm_time_s).abs() < 1e-15);
        loaded.classical_comm_time_s = preset.classical_comm_time_s;
        assert_eq!(loaded, preset);
    }
}

#[test]
fn scenario_files_round_trip() {
    for i in 1..=3 {
        let file = config::preset(i).unwrap();
        let back: ScenarioFile = toml::from_str(&file.to_toml()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_scenario().unwrap(), NetworkScenario::preset(i).unwrap());
    }
}

#[test]
fn missing_keys_fall_back_to_defaults() {
    let file: ScenarioFile = toml::from_str("name = \"x\"\n[memory]\nefficiency = 0.2\n").unwrap();
    let s = file.to_scenario().unwrap();
    let mut want = NetworkScenario::base("x");
    want.memory_efficiency = 0.2;
    assert_eq!(s, want);

    let longer: ScenarioFile = toml::from_str("[link]\nlength_km = 20.0\n").unwrap();
    assert!((longer.to_scenario().unwrap().classical_comm_time_s - 1.1e-3).abs() < 1e-15);

    let ideal: ScenarioFile = toml::from_str("[memory]\ncoherence_time_s = inf\n").unwrap();
    assert!(ideal.to_scenario().unwrap().memory.coherence_time().is_infinite());

    assert!(toml::from_str::<ScenarioFile>("[memory]\ncoherence_time = 1.0\n").is_err());
    let bad: ScenarioFile = toml::from_str("[link]\nbsm_success = 0.7\n").unwrap();
    assert!(bad.to_scenario().is_err());
}

#[test]
fn overrides_address_nested_keys() {
    let base = config::preset(2).unwrap();
    let s = base.with_override("memory.efficiency", "0.3").unwrap();
    assert_eq!(s.memory.efficiency, 0.3);
    let s = base.with_override("topology.hops_per_arm", "2").unwrap();
    assert_eq!(s.to_scenario().unwrap().hops_per_arm, 2);
    let s = base.with_override("protocol.assembly_method", "\"teleportation\"").unwrap();
    assert_eq!(s.protocol.assembly_method, config::Assembly::Teleportation);
    assert!(base.with_override("nowhere.efficiency", "0.3").is_err());
    assert!(base.with_override("memory.efficiency", "\"high\"").is_err());
}

#[test]
fn simulate_is_byte_stable() {
    let root = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = root.path().join(name);
        let o = dqs(&[
            "simulate", "--preset", "3", "--trials", "20", "--seed", seed, "--log-trials", "3",
            "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b, c) = (run("a", "5"), run("b", "5"), run("c", "6"));
    for file in ["results.csv", "trials.csv", "logs/trial_0000.tsv", "logs/trial_0002.tsv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    assert!(!a.join("logs/trial_0003.tsv").exists());
    assert_ne!(fs::read(a.join("trials.csv")).unwrap(), fs::read(c.join("trials.csv")).unwrap());

    let rows = read_csv(&a.join("results.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "scenario3");
    assert_eq!(&rows[0][5..7], ["5", "20"]);
    let log = fs::read_to_string(a.join("logs/trial_0000.tsv")).unwrap();
    assert!(log.starts_with("time_s\tevent\tlink\toutcome\n"));
    assert!(log.lines().skip(1).all(|l| l.split('\t').count() == 4));
}

#[test]
fn failures_leave_no_output() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("bad.toml");
    fs::write(&config, "[operations]\ngate_fidelity = 1.5\n").unwrap();
    let out = root.path().join("out");
    let o = dqs(&["simulate", "--config", config.to_str().unwrap(), "--trials", "3", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!out.exists());

    let o = dqs(&[
        "sweep", "--preset", "1", "--param", "memory.efficiency", "--values", "0.2,2.0",
        "--trials", "2", "--seed", "1", "--out", out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(!out.exists());

    let o = dqs(&["simulate", "--preset", "1", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn sweep_writes_one_row_per_value() {
    let root = tempfile::tempdir().unwrap();
    let mut base = config::preset(3).unwrap();
    base.protocol.distribution_window_s = 0.05;
    let values = ["0.1".to_string(), "0.5".to_string()];
    let (results, files) = commands::sweep(root.path(), &base, "memory.efficiency", &values, 10, 3).unwrap();
    assert_eq!(results.len(), 2);
    let rows = read_csv(&files[0]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][..3], ["memory.efficiency", "0.5", "scenario3"]);
}

#[test]
fn threshold_table() {
    let root = tempfile::tempdir().unwrap();
    let files = commands::thresholds(root.path(), 2..=10, 1..=4).unwrap();
    let rows = read_csv(&files[0]);
    assert_eq!(rows.len(), 9 * 4);
    let row = |d: &str, n: &str| rows.iter().find(|r| r[0] == d && r[1] == n).unwrap();
    assert!((num(&row("3", "1")[2]) - 0.50963).abs() <= 1e-4);
    for (d, want) in (2..=7).zip([0.730, 0.714, 0.711, 0.716, 0.726, 0.738]) {
        assert!((num(&row(&d.to_string(), "1")[5]) - want).abs() <= 1e-3);
    }
    for r in &rows {
        assert!(num(&r[2]) > num(&r[8]), "{r:?}");
        assert_eq!(r[7], "0.5");
    }
}

#[test]
fn advantage_curves() {
    let root = tempfile::tempdir().unwrap();
    let files = commands::analyze(root.path(), 3, 20_000).unwrap();
    let curves = read_csv(&files[0]);
    let crossings = read_csv(&files[1]);
    let hit = crossings.iter().find(|r| r[0] == "0.9" && r[1] == "0.99").unwrap();
    let estimate = n_max_estimate(3, 0.9, 0.99).unwrap().n_max;
    assert!((num(&hit[3]) - estimate).abs() <= 5.0);
    assert!((num(&hit[4]) - 98.8).abs() < 0.05);

    let eta = |f: &str, k: &str, n: &str| {
        num(&curves.iter().find(|r| r[0] == f && r[1] == k && r[3] == n).unwrap()[4])
    };
    for k in ["0.9999", "0.999", "0.99"] {
        for n in ["1", "10", "100", "1000"] {
            assert!(eta("0.8", k, n) < eta("0.9", k, n) && eta("0.9", k, n) < eta("0.99", k, n));
        }
    }
    for f in [0.8, 0.9, 0.99] {
        let perfect = DepolarizedGhzModel::noiseless(f, 3, 1).unwrap().eta();
        for k in ["0.9999", "0.999", "0.99"] {
            assert_eq!(eta(&fmt_float(f), k, "1"), num(&fmt_float(perfect)));
        }
    }
}

proptest! {
    #[test]
    fn printed_floats_keep_twelve_digits(x in prop::num::f64::NORMAL) {
        let back: f64 = fmt_float(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-11 * x.abs(), "{x} -> {}", fmt_float(x));
    }
}
