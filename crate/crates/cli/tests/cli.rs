use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mlmc-sr"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn synthetic(extra: &str) -> String {
    format!(
        r#"{{"model": {{"name": "synthetic-normal", "params": {{"b": 0.1}}}},
            "y": 0.8, "gamma": 0.5, "q": 2, "N": 10, "k": 1,
            "epsilons": [0.1, 0.05], "runs": 4, "seed": 3{extra}}}"#
    )
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    let prefix = format!("{key} = ");
    text.lines()
        .find_map(|l| l.strip_prefix(prefix.as_str()))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
}

#[test]
fn models_list_names_every_model() {
    let o = run(&["models", "list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["synthetic-normal", "elliptic-flux-1d", "constant"] {
        assert!(text.contains(name));
    }
}

#[test]
fn rates_prints_unit_constant_costs() {
    let o = run(&["rates", "--q", "2,3", "--epsilon", "0.1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("2,1.000000e4,1.000000e3,"));
    assert!(text.contains("3,1.000000e5,1.000000e4,1.000000e3"));
}

#[test]
fn estimate_far_from_threshold_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"model": {"name": "constant", "params": {"value": -4}},
            "y": 0.8, "gamma": 0.5, "q": 1, "N": 10, "k": 1,
            "epsilons": [0.05], "runs": 1, "seed": 0}"#,
    );
    let o = run(&["estimate", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(value(&text, "estimate_raw"), "1");
    assert_eq!(value(&text, "final_L"), "2");
    assert_eq!(value(&text, "converged"), "true");
}

#[test]
fn estimate_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &synthetic(""));
    let base = stdout(&run(&["estimate", "--config", &cfg]));
    assert_eq!(value(&base, "method"), "mlmc-sr");
    assert_eq!(value(&base, "seed"), "3");

    let reseeded = stdout(&run(&["estimate", "--config", &cfg, "--seed", "9"]));
    assert_eq!(value(&reseeded, "seed"), "9");
    assert_ne!(value(&reseeded, "estimate_raw"), value(&base, "estimate_raw"));

    let skipped = stdout(&run(&["estimate", "--config", &cfg, "--skip-redundant"]));
    let cost = |t: &str| value(t, "total_cost").parse::<f64>().unwrap();
    assert!(cost(&skipped) < cost(&base));

    let mc = stdout(&run(&["estimate", "--config", &cfg, "--method", "mc", "--epsilon", "0.1"]));
    assert_eq!(value(&mc, "method"), "mc");
    assert_eq!(value(&mc, "epsilon"), "0.1");
}

#[test]
fn experiment_writes_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &synthetic(""));
    let out = dir.path().join("out");
    let o = run(&["experiment", "--config", &cfg, "--output-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["runs.csv", "summary.csv", "histogram_eps0.csv", "histogram_eps1.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count(), 8);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &synthetic(""));
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = run(&[
            "--threads",
            threads,
            "experiment",
            "--config",
            &cfg,
            "--output-dir",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        files.push(fs::read(out.join("runs.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        synthetic(r#", "sed": 1"#),
        synthetic("").replace("[0.1, 0.05]", "[]"),
        "not json".to_string(),
        synthetic("").replace("synthetic-normal", "unknown-model"),
    ];
    for body in cases {
        let cfg = write_config(dir.path(), &body);
        let o = run(&["estimate", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(2), "{body}");
    }
    let missing = dir.path().join("absent.json");
    assert_eq!(run(&["estimate", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    let cfg = write_config(dir.path(), &synthetic(""));
    assert_eq!(run(&["experiment", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(run(&["estimate"]).status.code(), Some(2));
}

#[test]
fn level_cap_exits_3_and_keeps_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &synthetic(r#", "l_max": 2"#).replace("[0.1, 0.05]", "[0.002]").replace("\"runs\": 4", "\"runs\": 2"),
    );
    let o = run(&["estimate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(value(&stdout(&o), "converged"), "false");

    let out = dir.path().join("out");
    let o = run(&["experiment", "--config", &cfg, "--output-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(out.join("runs.csv").is_file());
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &synthetic(""));
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let target = blocker.join("sub");
    let o = run(&["experiment", "--config", &cfg, "--output-dir", target.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(run(&["rates", "--summary", target.to_str().unwrap()]).status.code(), Some(4));
}
