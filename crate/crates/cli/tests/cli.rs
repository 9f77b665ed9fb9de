use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const MODEL: &str = r#"L = 6
beta = 0.3

[[terms]]
ops = "ZZ"
J = -1.0

[[terms]]
ops = "X"
J = -1.05
"#;

fn cclab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cclab")).args(args).current_dir(dir).env_remove("CCLAB_WORKERS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("model.toml"), MODEL).unwrap();
    dir
}

#[test]
fn enumerate_prints_partitions_and_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = cclab(&["enumerate", "--kind", "nc", "--n", "4"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().last(), Some("count 14"));
    assert!(!text.contains("{1,3}{2,4}"));
    let out = cclab(&["enumerate", "--kind", "all", "--n", "4"], dir.path());
    assert!(stdout(&out).contains("{1,3}{2,4}"));
    assert_eq!(stdout(&out).lines().last(), Some("count 15"));
}

#[test]
fn cumulants_from_a_moments_file() {
    let dir = tempfile::tempdir().unwrap();
    // a single variable listed four times with moments (0, 1, 0, 2)
    let mut text = String::from("# one variable, four copies\n");
    for mask in 1u32..16 {
        let idx: Vec<String> = (0..4).filter(|b| mask >> b & 1 == 1).map(|b| (b + 1).to_string()).collect();
        let m = [0.0, 1.0, 0.0, 2.0][idx.len() - 1];
        text.push_str(&format!("{}: {m},0\n", idx.join(",")));
    }
    fs::write(dir.path().join("m.txt"), text).unwrap();
    let classical = stdout(&cclab(&["cumulants", "--kind", "classical", "--moments", "m.txt", "--k", "4"], dir.path()));
    let free = stdout(&cclab(&["cumulants", "--kind", "free", "--moments", "m.txt", "--k", "4"], dir.path()));
    let last = |s: &str| s.lines().find(|l| l.starts_with("1,2,3,4:")).unwrap().to_string();
    let value = |s: String| -> f64 { s.split(':').nth(1).unwrap().split(',').next().unwrap().trim().parse().unwrap() };
    assert!((value(last(&classical)) + 1.0).abs() < 1e-12, "{classical}");
    assert!(value(last(&free)).abs() < 1e-12, "{free}");

    fs::write(dir.path().join("bad.txt"), "0: 1,0\n1: x,0\n").unwrap();
    let out = cclab(&["cumulants", "--kind", "free", "--moments", "bad.txt", "--k", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("1-based"), "{}", stderr(&out));

    fs::write(dir.path().join("short.txt"), "1: 0,0\n1,2: 1,0\n").unwrap();
    let out = cclab(&["cumulants", "--kind", "classical", "--moments", "short.txt", "--k", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no moment given for `2`"), "{}", stderr(&out));
}

#[test]
fn simulate_checks_invariants() {
    let dir = workspace();
    let out = cclab(&["simulate", "--model", "model.toml", "--check", "invariants"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("PASS dim=64"), "{}", stdout(&out));
}

#[test]
fn experiment_writes_csv_and_json() {
    let dir = workspace();
    let out = cclab(
        &["cluster-scan", "--model", "model.toml", "--obs", "Z@0,Z@0", "--out", "res", "--json", "--workers", "1"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("REPORT n=2 classical"), "{}", stdout(&out));
    let csv = fs::read_to_string(dir.path().join("res/cluster-scan.csv")).unwrap();
    assert!(csv.starts_with("z,re,im,abs\n# config_sha256="));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("res/cluster-scan.json")).unwrap()).unwrap();
    assert_eq!(json["experiment"], "cluster-scan");

    // the same run twice gives the same bytes
    let again = cclab(&["cluster-scan", "--model", "model.toml", "--obs", "Z@0,Z@0", "--out", "again.csv"], dir.path());
    assert!(again.status.success());
    assert_eq!(csv, fs::read_to_string(dir.path().join("again.csv")).unwrap());
}

#[test]
fn flags_override_the_configuration_file() {
    let dir = workspace();
    fs::write(
        dir.path().join("run.toml"),
        "experiment = \"cluster-scan\"\nmodel = \"model.toml\"\nobservables = [\"Z@0\", \"Z@0\", \"X@0\"]\nkind = \"classical\"\n",
    )
    .unwrap();
    let out = cclab(&["cluster-scan", "--config", "run.toml", "--kind", "free", "--out", "o.csv"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("n=3 free"), "{}", stdout(&out));
}

#[test]
fn input_errors_exit_with_two_and_write_nothing() {
    let dir = workspace();
    fs::write(dir.path().join("broken.toml"), "L = \"twelve\"\n").unwrap();
    let out = cclab(&["cluster-scan", "--model", "broken.toml", "--obs", "Z@0,Z@0", "--out", "res"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`L` must be an integer"), "{}", stderr(&out));
    assert!(!dir.path().join("res").exists());

    let out = cclab(&["cluster-scan", "--model", "model.toml", "--obs", "Z@0,Z@0"], dir.path());
    assert!(out.status.success());
    let bad_env = Command::new(env!("CARGO_BIN_EXE_cclab"))
        .args(["cluster-scan", "--model", "model.toml", "--obs", "Z@0,Z@0", "--out", "w.csv"])
        .current_dir(dir.path())
        .env("CCLAB_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(bad_env.status.code(), Some(2));
    assert!(!dir.path().join("w.csv").exists());
}
