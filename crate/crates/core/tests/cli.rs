use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lvasym::pricing::price_call_closed;
use lvasym::Model;

fn lvasym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lvasym"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_model(dir: &Path, json: &str) -> String {
    let path = dir.join("model.json");
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

const BSM_R0: &str = r#"{"kind":"bsm","sigma":0.3,"r":0.0}"#;
const BSM_R01: &str = r#"{"kind":"bsm","sigma":0.3,"r":0.1}"#;

#[test]
fn price_at_spot() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), BSM_R0);
    let out = lvasym(&[
        "price", "--model-file", &model, "--order", "1", "--t", "0.1", "--payoff", "call", "--strike", "15",
        "--spot", "15",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let printed: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    let expect = price_call_closed(1, &Model::bsm(0.3, 0.0).unwrap(), 0.1, 15.0, 15.0).unwrap();
    assert_eq!(printed, expect);
}

#[test]
fn order_three_is_a_usage_error() {
    let out = lvasym(&[
        "price", "--model", BSM_R0, "--order", "3", "--t", "0.1", "--strike", "15", "--spot", "15",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("order must be 1 or 2"));
}

#[test]
fn missing_inputs_are_usage_errors() {
    let no_spot = lvasym(&["price", "--model", BSM_R0, "--t", "0.1", "--strike", "15"]);
    assert_eq!(no_spot.status.code(), Some(2));
    let no_model = lvasym(&["price", "--t", "0.1", "--strike", "15", "--spot", "15"]);
    assert_eq!(no_model.status.code(), Some(2));
    let no_strike = lvasym(&["price", "--model", BSM_R0, "--t", "0.1", "--spot", "15"]);
    assert_eq!(no_strike.status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_one() {
    let bad_model = lvasym(&[
        "price", "--model", r#"{"kind":"bsm","sigma":-0.3,"r":0.0}"#, "--t", "0.1", "--strike", "15", "--spot",
        "15",
    ]);
    assert_eq!(bad_model.status.code(), Some(1));
    let coarse = lvasym(&[
        "bootstrap", "--model", r#"{"kind":"bsm","sigma":0.05,"r":0.0}"#, "--t", "0.01", "--steps", "2",
        "--xmax", "40", "--dx", "0.5", "--strike", "20",
    ]);
    assert_eq!(coarse.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&coarse.stderr).contains("grid too coarse"));
}

#[test]
fn compare_reproduces_positive_rate_errors() {
    let out = lvasym(&[
        "compare", "--model", BSM_R01, "--oracle", "bs-exact", "--method", "order1", "--grid", "12:18:1",
        "--times", "0.01,0.05,0.1,0.2,0.5", "--strike", "15",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,approx,oracle,abs_error"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 35);
    let reference = [
        (0.01, 18.0, 3.0, 1.0),
        (0.05, 15.0, 0.1, 0.2),
        (0.1, 17.0, 15.9, 0.2),
        (0.2, 12.0, 9.3, 0.2),
        (0.5, 18.0, 116.8, 5.0),
    ];
    for (t, x, err, tol) in reference {
        let row = rows.iter().find(|r| r[0] == t && r[1] == x).unwrap();
        assert!((1e3 * row[4] - err).abs() <= tol, "t={t} x={x}: {}", 1e3 * row[4]);
        assert_eq!(row[4], (row[2] - row[3]).abs());
    }
}

#[test]
fn saved_config_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), r#"{"kind":"cev","sigma":0.3,"alpha":0.6667,"r":0.1}"#);
    let first = dir.path().join("first.csv");
    let second = dir.path().join("second.csv");
    let config = dir.path().join("run.json");
    let out = lvasym(&[
        "price", "--model-file", &model, "--order", "2", "--t", "0.3", "--strike", "20", "--grid", "15:25:0.5",
        "--out", first.to_str().unwrap(), "--save-config", config.to_str().unwrap(), "--seed", "42",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let replay = lvasym(&["run", "--config", config.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(replay.status.code(), Some(0), "{}", String::from_utf8_lossy(&replay.stderr));
    let a = fs::read(&first).unwrap();
    assert_eq!(a, fs::read(&second).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("x,price\n"));
    assert_eq!(text.lines().count(), 22);

    // a second save of the replayed configuration is byte-identical too
    let cfg_text = fs::read_to_string(&config).unwrap();
    let cfg = lvasym::cli::RunConfig::from_json(&cfg_text).unwrap();
    assert_eq!(cfg.to_json().unwrap(), cfg_text);

    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn kernel_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = lvasym(&[
        "kernel", "--model", BSM_R01, "--order", "2", "--t", "0.1", "--x", "15", "--grid", "14:16:0.5",
    ]);
    assert_eq!(csv.status.code(), Some(0));
    let text = String::from_utf8(csv.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,y,t,order,value");
    assert_eq!(lines.len(), 6);
    let cells: Vec<&str> = lines[3].split(',').collect();
    assert_eq!(cells[3], "2");
    // 17 significant digits: one leading digit plus 16 decimals
    assert_eq!(cells[4].split('e').next().unwrap().len(), 18);

    let json_path = dir.path().join("k.json");
    let json = lvasym(&[
        "kernel", "--model", BSM_R01, "--order", "0", "--t", "0.1", "--x", "15", "--grid", "14:16:0.5",
        "--out", json_path.to_str().unwrap(),
    ]);
    assert_eq!(json.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 5);
    assert_eq!(rows[2]["y"], 15.0);
}

#[test]
fn bootstrap_and_greeks_outputs() {
    let boot = lvasym(&[
        "bootstrap", "--model", r#"{"kind":"bsm","sigma":0.5,"r":0.1}"#, "--t", "0.5", "--steps", "10", "--xmax",
        "200", "--dx", "0.1", "--strike", "20", "--compare-oracle", "bs-exact",
    ]);
    assert_eq!(boot.status.code(), Some(0), "{}", String::from_utf8_lossy(&boot.stderr));
    let text = String::from_utf8(boot.stdout).unwrap();
    assert!(text.starts_with("x,value,oracle,abs_error\n"));
    assert_eq!(text.lines().count(), 2001);
    let worst = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .filter(|r| r[0] <= 40.0)
        .map(|r| r[3])
        .fold(0.0, f64::max);
    assert!(worst < 1e-2, "{worst}");

    let greeks = lvasym(&[
        "greeks", "--model", r#"{"kind":"bsm","sigma":0.5,"r":0.1}"#, "--t", "0.5", "--strike", "20", "--grid",
        "18:22:0.5",
    ]);
    assert_eq!(greeks.status.code(), Some(0));
    let text = String::from_utf8(greeks.stdout).unwrap();
    assert!(text.starts_with("x,delta,gamma\n"));
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn output_is_deterministic() {
    let args = [
        "compare", "--model", r#"{"kind":"cev","sigma":0.3,"alpha":0.6667,"r":0.1}"#, "--oracle", "cn",
        "--method", "order2", "--grid", "18:22:1", "--times", "0.1", "--strike", "20", "--xmax", "60", "--dx",
        "0.05",
    ];
    let a = lvasym(&args);
    let b = lvasym(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}
