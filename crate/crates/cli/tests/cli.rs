use std::path::Path;
use std::process::Command;

use infoselect_cli::{cli_main, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_infoselect"))
}

fn small_rare_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    let cfg = r#"{
        "scenario": {"kind": "rare", "rho": 10.0, "unlabeled_common": 300,
                     "blobs": {"test_per_class": 50}},
        "method": "FLQMI",
        "rounds": 2,
        "budget": 20,
        "model": {"epochs": 80}
    }"#;
    std::fs::write(&path, cfg).unwrap();
    path
}

fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("infoselect").chain(list.iter().copied()).map(String::from).collect()
}

#[test]
fn verify_passes_on_a_fresh_checkout() {
    assert_eq!(cli_main(args(&["verify", "--quick"])), EXIT_OK);
}

#[test]
fn run_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_rare_config(dir.path());
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let status = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        assert!(out.join("summary.json").exists());
        outputs.push(std::fs::read(out.join("records.jsonl")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert_eq!(text.lines().count(), 2);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("rare_selected").is_some());
        assert!(v.get("seconds").is_none());
    }
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_rare_config(dir.path());
    let out = dir.path().join("o");
    let code = cli_main(args(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--function",
        "random",
        "--budget",
        "7",
        "--rounds",
        "1",
        "--timing",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code, EXIT_OK);
    let line = std::fs::read_to_string(out.join("records.jsonl")).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(v["selected"].as_array().unwrap().len(), 7);
    assert!(v["objective"].is_null());
    assert!(v["seconds"].is_number());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(cli_main(args(&["run", "--config", bad.to_str().unwrap()])), EXIT_CONFIG);
    assert_eq!(cli_main(args(&["run", "--function", "NOPE"])), EXIT_CONFIG);
    assert_eq!(cli_main(args(&["run", "--budget", "1000000"])), EXIT_CONFIG);
    assert_eq!(cli_main(args(&["run", "--optimizer", "fastest"])), EXIT_CONFIG);
    assert_eq!(cli_main(args(&["run", "--scenario", "ood", "--rho", "3"])), EXIT_CONFIG);
    assert_eq!(cli_main(args(&["frobnicate"])), EXIT_CONFIG);
    assert_eq!(cli_main(args(&["sweep", "--seeds", "1"])), EXIT_CONFIG);
}

#[test]
fn singular_query_kernel_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let roles = dir.path().join("roles.csv");
    let mut d = String::from("id,label,f0,f1\n");
    let mut r = String::from("id,role\n");
    for i in 0..30 {
        let label = i % 2;
        let (x, y) = if i >= 26 { (1.0, 0.5) } else { (i as f64 * 0.37 % 3.0 - 1.5, label as f64 * 2.0 - 1.0 + i as f64 * 0.01) };
        d += &format!("p{i},{label},{x},{y}\n");
        let role = match i {
            0..=9 => "labeled",
            10..=21 => "unlabeled",
            22..=25 => "validation",
            _ => "rare_query",
        };
        r += &format!("p{i},{role}\n");
    }
    std::fs::write(&data, d).unwrap();
    std::fs::write(&roles, r).unwrap();
    let cfg = dir.path().join("cfg.json");
    let text = format!(
        r#"{{"scenario": {{"kind": "csv", "dataset": {:?}, "roles": {:?}}},
            "method": "LOGDETMI", "rounds": 1, "budget": 2,
            "sources": {{"query": "rare_set", "conditioning": "none"}},
            "function": {{"epsilon": 0.0}}}}"#,
        data, roles
    );
    std::fs::write(&cfg, text).unwrap();
    assert_eq!(cli_main(args(&["run", "--config", cfg.to_str().unwrap()])), EXIT_NUMERICAL);
}

#[test]
fn sweep_favors_flqmi_on_rare_classes() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(small_rare_config(dir.path())).unwrap();
    let sweep = dir.path().join("sweep.json");
    std::fs::write(
        &sweep,
        format!(r#"{{"base": {base}, "methods": ["random", "FLQMI"], "seeds": [0, 1, 2]}}"#),
    )
    .unwrap();
    let out = dir.path().join("out");
    let code = cli_main(args(&["sweep", "--config", sweep.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    assert_eq!(code, EXIT_OK);
    let csv = std::fs::read_to_string(out.join("penalty.csv")).unwrap();
    let rows: Vec<Vec<String>> = csv.lines().map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows[0], vec!["", "RANDOM", "FLQMI"]);
    let row_sum = |r: &Vec<String>| -> f64 { r[1..].iter().map(|v| v.parse::<f64>().unwrap()).sum() };
    assert_eq!(rows[1][0], "RANDOM");
    assert!(row_sum(&rows[2]) >= row_sum(&rows[1]), "{csv}");
    assert!(out.join("FLQMI_seed2.jsonl").exists());
}

#[test]
fn bench_prints_a_table() {
    let out = bin()
        .args(["bench", "--n", "500", "--budget", "10", "--partitions", "1,2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().starts_with("FLQMI"));
}

#[test]
fn kernel_dump_and_load_give_the_same_selection() {
    let dir = tempfile::tempdir().unwrap();
    let k = dir.path().join("k.simk");
    let first = bin()
        .args(["select", "--function", "LOGDET", "--budget", "6", "--n", "40", "--dump-kernel"])
        .arg(&k)
        .output()
        .unwrap();
    assert!(first.status.success());
    let bytes = std::fs::read(&k).unwrap();
    assert_eq!(&bytes[..4], b"SIMK");
    assert_eq!(bytes.len(), 16 + 40 * 40 * 8);
    let second = bin()
        .args(["select", "--function", "LOGDET", "--budget", "6", "--load-kernel"])
        .arg(&k)
        .output()
        .unwrap();
    assert!(second.status.success());
    let chosen = |o: &[u8]| serde_json::from_slice::<serde_json::Value>(o).unwrap()["chosen"].clone();
    assert_eq!(chosen(&first.stdout), chosen(&second.stdout));
}
