use std::path::Path;
use std::process::{Command, Output};

fn mastlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mastlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sample_prints_newick_lines() {
    let o = mastlab(&["sample", "-n", "6", "--count", "3", "--seed", "4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| l.ends_with(';')));
    assert_eq!(text, stdout(&mastlab(&["sample", "-n", "6", "--count", "3", "--seed", "4"])));
    assert_eq!(mastlab(&["sample", "-n", "1"]).status.code(), Some(1));
}

#[test]
fn mast_of_two_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.nwk"), dir.path().join("b.nwk"));
    std::fs::write(&a, "((1,2),(3,4));\n").unwrap();
    std::fs::write(&b, "((1,3),(2,4));\n").unwrap();
    let o = mastlab(&["mast", "--tree-a", path_str(&a), "--tree-b", path_str(&b)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["size"], 3);
    assert_eq!(v["witness"].as_array().unwrap().len(), 3);
    std::fs::write(&b, "((1,3),(2,4)").unwrap();
    assert_eq!(mastlab(&["mast", "--tree-a", path_str(&a), "--tree-b", path_str(&b)]).status.code(), Some(1));
}

#[test]
fn cascade_jsonl_and_budget_exit_code() {
    let o = mastlab(&["cascade", "--depth", "2", "--seed", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 13);
    let total: f64 = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["word"].as_str().unwrap().len() == 2)
        .map(|v| v["mass"].as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
    let o = mastlab(&["cascade", "--depth", "20"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn couple_writes_matrix_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, meta) = (dir.path().join("d.csv"), dir.path().join("m.json"));
    let o = mastlab(&["couple", "-n", "4", "--grid", "256", "--out", path_str(&csv), "--meta", path_str(&meta)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,x3,x4"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[i], 0.0);
        for (j, &x) in row.iter().enumerate() {
            assert_eq!(x, rows[j][i]);
        }
    }
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&meta).unwrap()).unwrap();
    assert_eq!(m["weights"].as_array().unwrap().len(), 5);
    assert_eq!(mastlab(&["couple", "-n", "4", "--grid", "100"]).status.code(), Some(1));
}

#[test]
fn audit_report() {
    let o = mastlab(&["audit", "--depth", "6", "--rule", "identity"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["martingale"].as_array().unwrap().iter().all(|m| m.as_f64() == Some(1.0)));
    assert_eq!(v["flags"].as_array().unwrap().len(), 6);
    let o = mastlab(&["audit", "--depth", "6", "--rule", "perturbed", "--seed", "3"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["path"].as_str().unwrap().len(), 6);
    assert_eq!(mastlab(&["audit", "--alpha", "0.05", "--delta", "0.1", "--depth", "15"]).status.code(), Some(2));
}

#[test]
fn constants_table() {
    let o = mastlab(&["constants"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("eps_mast") && text.contains("10^-338"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn experiment_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    let out = dir.path().join("rows.csv");
    std::fs::write(
        &cfg,
        r#"{"schema": 1, "kind": "mast-scaling", "seed": 5, "n_grid": [16, 32], "replicates": 4, "bootstrap": 20}"#,
    )
    .unwrap();
    let o = mastlab(&["experiment", "--config", path_str(&cfg), "--format", "csv", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("experiment,statistic,params,value"));
    assert!(text.contains("exponent"));

    let o = mastlab(&["experiment", "--config", path_str(&cfg), "--seed", "6"]);
    let first: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert_eq!(first["seed"], 6);

    std::fs::write(&cfg, r#"{"schema": 1, "kind": "mast-scaling", "seed": 5, "n_grid": [16, 4096]}"#).unwrap();
    assert_eq!(mastlab(&["experiment", "--config", path_str(&cfg)]).status.code(), Some(2));
    std::fs::write(&cfg, r#"{"schema": 1, "kind": "mast-scaling", "seed": 5, "typo": 1}"#).unwrap();
    assert_eq!(mastlab(&["experiment", "--config", path_str(&cfg)]).status.code(), Some(1));
    assert_eq!(mastlab(&["experiment"]).status.code(), Some(1));
}

#[test]
fn config_output_path_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    let out = dir.path().join("from_config.jsonl");
    let text = format!(
        r#"{{"schema": 1, "kind": "cascade-stats", "seed": 2, "k_grid": [2], "replicates": 10, "output": {}}}"#,
        serde_json::Value::String(path_str(&out).to_string())
    );
    std::fs::write(&cfg, text).unwrap();
    let o = mastlab(&["experiment", "--config", path_str(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).is_empty());
    let rows = std::fs::read_to_string(&out).unwrap();
    assert!(rows.lines().count() >= 4);
}
