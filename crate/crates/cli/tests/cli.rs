use std::path::Path;
use std::process::{Command, Output};

const BOUNDS: &str = r#"
seed = 3
output = "bounds.json"

[bounds]
n = 500
R = 2000

[bounds.design]
kind = "rademacher"
p = 10

[bounds.params]
b = 1.0
B_n = 1.0
"#;

const RHO: &str = r#"
seed = 5
output = "rho.json"

[estimate_rho]
n = 20
R = 2000

[estimate_rho.design]
kind = "rademacher"
p = 5

[estimate_rho.family]
kind = "rectangles"
K = 10
"#;

fn hdclt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdclt"))
        .current_dir(dir)
        .env_remove("HDCLT_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn with_config(text: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), text).unwrap();
    dir
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bounds_writes_report_with_config_echo() {
    let dir = with_config(BOUNDS);
    let out = hdclt(dir.path(), &["bounds", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = read_json(&dir.path().join("bounds.json"));
    assert_eq!(v["config"]["seed"], 3);
    assert_eq!(v["config"]["command"], "bounds");
    assert_eq!(v["result"]["provenance"], "population");
    assert_eq!(v["result"]["p"], 10);
}

#[test]
fn alpha_outside_admissible_range_exits_2() {
    let dir = with_config(RHO);
    let out = hdclt(
        dir.path(),
        &["estimate-rho", "--config", "run.toml", "--set", "estimate_rho.params.b=1.0", "--set", "estimate_rho.params.B_n=1.0", "--set", "estimate_rho.params.alpha=0.5"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("alpha"), "{}", stderr(&out));
    assert!(!dir.path().join("rho.json").exists());
}

#[test]
fn unknown_command_exits_2_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = hdclt(dir.path(), &["frobnicate", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = with_config(&RHO.replace("seed = 5", ""));
    let out = hdclt(dir.path(), &["estimate-rho", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("seed"));
}

#[test]
fn missing_field_names_the_block_and_key() {
    let dir = with_config(&RHO.replace("R = 2000", ""));
    let out = hdclt(dir.path(), &["estimate-rho", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("estimate_rho") && err.contains("R"), "{err}");
}

#[test]
fn malformed_toml_exits_2() {
    let dir = with_config("seed = = 3\n");
    let out = hdclt(dir.path(), &["bounds", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_files_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = hdclt(dir.path(), &["bounds", "--config", "absent.toml"]);
    assert_eq!(out.status.code(), Some(4));
    let dir = with_config(&BOUNDS.replace("[bounds.design]\nkind = \"rademacher\"\np = 10\n", "").replace("n = 500\n", "dataset = \"absent.bin\"\n"));
    let out = hdclt(dir.path(), &["bounds", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn indefinite_sigma_exits_3() {
    let dir = with_config(&RHO.replace("p = 5", "p = 3"));
    std::fs::write(dir.path().join("sigma.json"), r#"{"p": 3, "data": [1, 2, 0, 2, 1, 0, 0, 0, 1]}"#).unwrap();
    let out = hdclt(
        dir.path(),
        &["estimate-rho", "--config", "run.toml", "--set", "estimate_rho.sigma.source=file", "--set", "estimate_rho.sigma.path=sigma.json"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn overrides_reach_the_echoed_config() {
    let dir = with_config(RHO);
    let out = hdclt(dir.path(), &["estimate-rho", "--config", "run.toml", "--set", "estimate_rho.R=1500", "--set", "output=other.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = read_json(&dir.path().join("other.json"));
    assert_eq!(v["config"]["estimate_rho"]["R"], 1500);
    assert_eq!(v["result"]["rho"]["R"], 1500);
}

#[test]
fn csv_output_has_table_and_json_sidecar() {
    let dir = with_config(&RHO.replace("rho.json", "rho.csv"));
    let out = hdclt(dir.path(), &["estimate-rho", "--config", "run.toml", "--set", "format=csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("rho.csv")).unwrap();
    assert!(csv.starts_with("label,p_x,p_y,diff,se_diff\n"));
    assert_eq!(csv.lines().count(), 11);
    let v = read_json(&dir.path().join("rho.csv.json"));
    assert_eq!(v["config"]["format"], "csv");
}

#[test]
fn simulated_dataset_feeds_bootstrap() {
    let dir = with_config(
        r#"
seed = 9
output = "sim.json"

[simulate]
n = 300
out = "data.csv"

[simulate.design]
kind = "log_concave"
base = "gaussian"
p = 4

[bootstrap]
dataset = "data.csv"
mode = "MB"
R = 1000
sigma = { source = "empirical" }
family = { kind = "rectangles", K = 5 }
"#,
    );
    let out = hdclt(dir.path(), &["simulate", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
    assert!(csv.starts_with("x1,x2,x3,x4\n"));
    let sim = read_json(&dir.path().join("sim.json"));
    assert_eq!(sim["result"]["n"], 300);
    let out = hdclt(dir.path(), &["bootstrap", "--config", "run.toml", "--set", "output=boot.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = read_json(&dir.path().join("boot.json"));
    assert!(v["result"]["MB"]["sup_diff"].is_number());
    assert!(v["result"].get("EB").is_none());
}

#[test]
fn declared_command_must_match() {
    let dir = with_config(&format!("command = \"nazarov\"\n{BOUNDS}"));
    let out = hdclt(dir.path(), &["bounds", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_workers_is_rejected() {
    let dir = with_config(BOUNDS);
    let out = hdclt(dir.path(), &["bounds", "--config", "run.toml", "--workers", "0"]);
    assert_eq!(out.status.code(), Some(2));
}
