use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sigma-forest"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "k2.txt", "2 1\n1 2 1.0\n");
    write(dir.path(), "zero.txt", "2 1\n1 2 0.0\n");
    write(dir.path(), "rung.txt", "2 1\n1 2 1.0\n");
    dir
}

#[test]
fn verify_passes_on_bundled_corpus() {
    let dir = setup();
    let out = run(dir.path(), &["verify", "--max-vertices", "4", "--out", "v"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("v/oracle_report.json")).unwrap()).unwrap();
    assert_eq!(report["all_pass"], true);
    let records = report["records"].as_array().unwrap();
    assert!(!records.iter().any(|r| r["instance"].as_str().unwrap().starts_with("ladder")));
    for key in ["identity", "instance", "lhs", "rhs", "rel_gap", "pass"] {
        assert!(records[0].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn max_vertices_selects_bundled_graphs() {
    let dir = setup();
    let out = run(dir.path(), &["verify", "--max-vertices", "7", "--out", "v"]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("v/oracle_report.json")).unwrap();
    for name in ["path2/", "path3/", "cycle4/", "complete4/", "ladder2x3/"] {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn zero_weight_is_a_config_error() {
    let dir = setup();
    let out = run(dir.path(), &["verify", "--graph", "zero.txt", "--out", "v"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(
        dir.path(),
        &["ladder-decay", "--ladder-base", "rung.txt", "--ladder-L", "0,2", "--beta-horizontal", "0", "--out", "l"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = setup();
    for args in [
        vec!["sample", "--out", "s"],
        vec!["sample", "--graph", "missing.txt"],
        vec!["sample", "--graph", "k2.txt", "--eps", "0.1,0.2"],
        vec!["compare-pinning", "--graph", "k2.txt"],
        vec!["compare-pinning", "--graph", "k2.txt", "--pair", "1,3"],
        vec!["independence", "--graph", "k2.txt", "--pi", "1"],
        vec!["sample", "--graph", "k2.txt", "--bogus"],
    ] {
        let out = run(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn flags_override_config_file_and_header_echoes_config() {
    let dir = setup();
    write(dir.path(), "run.conf", "# small run\ngraph = k2.txt\neps = 0.5\nsamples = 300\nseed = 9\nout = s\n");
    let out = run(dir.path(), &["sample", "--config", "run.conf", "--samples", "400"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("s/samples.jsonl")).unwrap();
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    let config: Vec<&str> = header["header"]["config"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(config.contains(&"samples = 400"));
    assert!(config.contains(&"seed = 9"));
    assert_eq!(header["header"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(lines.count(), 400);
}

#[test]
fn header_echo_reruns_to_the_same_output() {
    let dir = setup();
    let args = ["compare-pinning", "--graph", "k2.txt", "--pair", "1,2", "--eps", "0.2,0.1", "--samples", "500", "--seed", "3"];
    let out = run(dir.path(), &[&args[..], &["--out", "a"]].concat());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("a/compare_pinning_1_2.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("# sigma-forest "));
    let conf: String = csv
        .lines()
        .skip(1)
        .filter_map(|l| l.strip_prefix("# "))
        .map(|l| format!("{l}\n"))
        .collect();
    write(dir.path(), "echo.conf", &conf);
    let out = run(dir.path(), &["compare-pinning", "--config", "echo.conf", "--out", "b"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(csv, fs::read_to_string(dir.path().join("b/compare_pinning_1_2.csv")).unwrap());
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(
        header,
        "epsilon,eps_green_mean,eps_green_se,singlepin_x_mean,singlepin_x_se,singlepin_y_mean,singlepin_y_se,\
         one_root_mean,one_root_se,multi_root_mean,multi_root_se,ess_min"
    );
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let dir = setup();
    let args = ["ladder-decay", "--ladder-base", "rung.txt", "--ladder-L", "0,3", "--eps", "0.2", "--samples", "800"];
    assert_eq!(run(dir.path(), &[&args[..], &["--out", "p"]].concat()).status.code(), Some(0));
    assert_eq!(run(dir.path(), &[&args[..], &["--out", "q", "--sequential"]].concat()).status.code(), Some(0));
    let body = |p: &str| {
        fs::read_to_string(dir.path().join(p))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(body("p/ladder_decay.csv"), body("q/ladder_decay.csv"));
}
