use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn poclab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poclab"))
        .args(args)
        .current_dir(dir)
        .env_remove("POCLAB_THREADS")
        .output()
        .expect("failed to launch poclab")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = poclab(dir, args);
    assert!(
        out.status.success(),
        "poclab {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    stdout(&out)
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn stavskaya_criteria_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["criteria", "--model", "stavskaya", "--p", "0.4"]);
    assert!(text.contains("Dobrushin: uniqueness (Γ=0.8)"), "{text}");
    assert!(text.contains("sup p_x: 0.4"), "{text}");
    assert!(text.contains("DP at p_c+=0.5 (lower bound): uniqueness"), "{text}");
    assert!(dir.path().join("poclab-criteria.manifest.json").exists());
}

#[test]
fn criteria_json_report() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["criteria", "--model", "ising", "--beta", "0.2", "--field", "-0.5", "--out", "r.json"],
    );
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    let text = report.to_string();
    assert!(text.contains("uniqueness"), "{text}");
    assert!(dir.path().join("r.json.manifest.json").exists());
}

#[test]
fn closed_percolation_never_crosses() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(
        dir.path(),
        &["percolate", "--space", "z2", "--q", "0", "--depth", "16", "--replicas", "200"],
    );
    assert!(text.contains("q=0): 0 ("), "{text}");
    let text = ok(
        dir.path(),
        &["percolate", "--space", "chain", "--q", "1", "--depth", "16", "--replicas", "50"],
    );
    assert!(text.contains("q=1): 1 ("), "{text}");
}

#[test]
fn critical_value_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(
        dir.path(),
        &["percolate", "--estimate-pc", "--depth", "16", "--replicas", "300", "--out", "curve.csv"],
    );
    assert!(text.contains("published Monte Carlo value for comparison: 0.64450"), "{text}");
    let line = text.lines().find(|l| l.starts_with("p_c+ bracket")).unwrap();
    let nums: Vec<f64> = line
        .split(['[', ',', ']'])
        .filter_map(|s| s.trim().parse().ok())
        .collect();
    assert_eq!(nums.len(), 2);
    assert!(0.5 <= nums[0] && nums[0] <= nums[1] && nums[1] <= 0.8, "{line}");
    let rows = csv::Reader::from_path(dir.path().join("curve.csv")).unwrap().records().count();
    assert!(rows > 0);
}

#[test]
fn equal_boundaries_never_disagree() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(
        dir.path(),
        &[
            "disagree", "--model", "ising", "--beta", "0.4", "--size", "8", "--boundaries", "plus,plus",
            "--replicas", "50",
        ],
    );
    assert!(text.contains("disagreement: none"), "{text}");
}

#[test]
fn extinct_stavskaya_renders_white() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "simulate", "--model", "stavskaya", "--p", "0", "--width", "10", "--height", "6", "--out", "s.pgm",
            "--stats", "s.csv",
        ],
    );
    let bytes = std::fs::read(dir.path().join("s.pgm")).unwrap();
    let header = b"P5\n10 6\n255\n";
    assert!(bytes.starts_with(header));
    let pixels = &bytes[header.len()..];
    assert_eq!(pixels.len(), 60);
    assert!(pixels.iter().all(|&b| b == 255));

    let mut reader = csv::Reader::from_path(dir.path().join("s.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["site_x", "site_y", "mean", "stderr"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 60);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn runs_are_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--model", "ising", "--beta", "0.3", "--width", "12", "--height", "12", "--replicas", "4",
        "--seed", "99", "--out", "a.ppm", "--stats", "a.csv",
    ];
    let first = ok(dir.path(), &args);
    let image = std::fs::read(dir.path().join("a.ppm")).unwrap();
    let stats = std::fs::read(dir.path().join("a.csv")).unwrap();
    let second = ok(dir.path(), &args);
    assert_eq!(first, second);
    assert_eq!(image, std::fs::read(dir.path().join("a.ppm")).unwrap());
    assert_eq!(stats, std::fs::read(dir.path().join("a.csv")).unwrap());

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("a.ppm.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 99);
    assert_eq!(manifest["outputs"].as_object().unwrap().len(), 2);
    assert_eq!(manifest["config"]["command"], "simulate");

    let text = ok(dir.path(), &["replay", "a.ppm.manifest.json"]);
    assert!(text.contains("replay identical"), "{text}");

    std::fs::write(dir.path().join("tampered.json"), {
        let mut m = manifest.clone();
        m["stdout_sha256"] = serde_json::Value::String("0".repeat(64));
        serde_json::to_vec(&m).unwrap()
    })
    .unwrap();
    let out = poclab(dir.path(), &["replay", "tampered.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("standard output differs"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "percolate", "--space", "tree", "--q", "0.7", "--depth", "10", "--replicas", "300", "--out", "c.csv",
    ];
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_poclab"))
            .args(args)
            .current_dir(dir.path())
            .env("POCLAB_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        let text = stdout(&out);
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with("manifest")).collect();
        (body.join("\n"), std::fs::read(dir.path().join("c.csv")).unwrap())
    };
    assert_eq!(run("1"), run("3"));
    let out = Command::new(env!("CARGO_BIN_EXE_poclab"))
        .args(args)
        .current_dir(dir.path())
        .env("POCLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn phase_scan_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "phase-scan", "--model", "ising", "--beta-range", "0.5:2:2", "--field-range", "0:0.05:2", "--pc",
            "0.6", "--out", "p.csv",
        ],
    );
    let mut reader = csv::Reader::from_path(dir.path().join("p.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let row = |beta: f64, h: f64| {
        rows.iter()
            .find(|r| r[col("beta")].parse::<f64>().unwrap() == beta && r[col("h")].parse::<f64>().unwrap() == h)
            .unwrap()
    };
    let cool = row(0.5, 0.0);
    assert!((cool[col("gamma")].parse::<f64>().unwrap() - 1f64.tanh()).abs() < 1e-12);
    assert_eq!(&cool[col("dobrushin_ok")], "true");
    let cold = row(2.0, 0.05);
    assert_eq!(&cold[col("dobrushin_ok")], "false");
    assert_eq!(&cold[col("dp_ok_half")], "false");
}

#[test]
fn example_inputs_load() {
    let dir = tempfile::tempdir().unwrap();
    let kernel = data("diamond_kernel.json");
    let text = ok(
        dir.path(),
        &["simulate", "--model", "file", "--path", kernel.to_str().unwrap(), "--replicas", "20"],
    );
    assert!(text.contains("box: 4 sites"), "{text}");
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("poclab-simulate.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 1);

    let line = data("line_with_bypasses.json");
    let text = ok(dir.path(), &["criteria", "--model", "file", "--path", line.to_str().unwrap()]);
    assert!(text.contains("Dobrushin: uniqueness (Γ=0.8)"), "{text}");

    let pca = data("noisy_majority_pca.json");
    let text = ok(
        dir.path(),
        &["disagree", "--model", "pca", "--spec", pca.to_str().unwrap(), "--replicas", "20"],
    );
    assert!(text.contains("path property violations: 0"), "{text}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| poclab(dir.path(), args).status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["teleport"]), Some(2));
    assert_eq!(code(&["criteria", "--model", "ising"]), Some(2));
    assert_eq!(code(&["criteria", "--model", "ising", "--beta", "-1"]), Some(2));
    assert_eq!(code(&["percolate", "--q", "0.5", "--estimate-pc"]), Some(2));
    assert_eq!(code(&["criteria", "--model", "file", "--path", "missing.json"]), Some(1));
    std::fs::write(dir.path().join("bad.json"), r#"{"colors":[0,1],"sites":[1],"table":{}}"#).unwrap();
    let out = poclab(dir.path(), &["criteria", "--model", "file", "--path", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("table.1"));
}
