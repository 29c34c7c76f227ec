use std::path::{Path, PathBuf};
use std::process::Command;

use adapense::cli::{CSV_HEADER, EXIT_CONFIG, EXIT_DATA};
use serde_json::Value;

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("adapense-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        TempDir(dir)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn run<I, S>(args: I) -> (i32, String)
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = Command::new(env!("CARGO_BIN_EXE_adapense")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_BUDGET: [&str; 8] = ["--replications", "1", "--n-lambda", "6", "--alphas", "0.75", "--zetas", "1"];

#[test]
fn exit_codes() {
    let dir = TempDir::new("codes");
    let out = dir.path("out.json");

    let (code, err) = run(["fit", "--data", "/nonexistent/data.csv", "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_DATA, "{err}");
    assert!(err.contains("/nonexistent/data.csv"), "{err}");

    let (code, _) = run(["no-such-command"]);
    assert_eq!(code, EXIT_CONFIG);

    let response_only = dir.path("y.csv");
    std::fs::write(&response_only, "y\n1\n2\n3\n").unwrap();
    let (code, err) = run(["fit", "--data", response_only.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_DATA, "{err}");

    let missing = dir.path("na.csv");
    std::fs::write(&missing, "y,x\n1,2\n3,NA\n").unwrap();
    let (code, err) = run(["fit", "--data", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("line 3"), "{err}");

    let data = dir.path("data.csv");
    let (code, _) = run(["simulate", "--n", "30", "--p", "4", "--out", data.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (code, err) = run([
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--delta",
        "0.9",
    ]);
    assert_eq!(code, EXIT_CONFIG, "{err}");
    assert!(!out.exists());
}

#[test]
fn simulate_fit_evaluate_pipeline() {
    let dir = TempDir::new("pipeline");
    let (train, test) = (dir.path("train.csv"), dir.path("test.csv"));
    let s = |p: &Path| p.to_str().unwrap().to_string();
    for (path, n, seed) in [(&train, "80", "3"), (&test, "400", "4")] {
        let (code, err) = run(["simulate", "--n", n, "--p", "8", "--seed", seed, "--out", &s(path)]);
        assert_eq!(code, 0, "{err}");
    }
    let truth = dir.path("train.truth.json");
    let truth_json = read_json(&truth);
    let beta = truth_json["beta"].as_array().unwrap().clone();
    assert_eq!(beta.len(), 8);

    let report = dir.path("fit.json");
    let mut args = vec!["fit".to_string(), "--data".into(), s(&train), "--out".into(), s(&report)];
    args.extend(SMALL_BUDGET.iter().map(|a| a.to_string()));
    let (code, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    let fit = read_json(&report);
    assert_eq!(fit["beta"].as_array().unwrap().len(), 8);
    assert!(fit["scale"].as_f64().unwrap() > 0.0);

    let eval = dir.path("eval.json");
    let (code, err) = run([
        "evaluate",
        "--report",
        &s(&report),
        "--truth",
        &s(&truth),
        "--test",
        &s(&test),
        "--out",
        &s(&eval),
    ]);
    assert_eq!(code, 0, "{err}");
    let e = read_json(&eval);
    assert!(e["mcc"].as_f64().unwrap().abs() <= 1.0);
    assert!(e["tau_ratio"].as_f64().unwrap() > 0.0);
    assert!(e["tau_ratio"].as_f64().unwrap() < 2.0);

    // The true coefficients select perfectly; the zero model selects nothing.
    let oracle = dir.path("oracle.json");
    std::fs::write(&oracle, serde_json::json!({"intercept": 0.0, "beta": beta}).to_string()).unwrap();
    let zero = dir.path("zero.json");
    std::fs::write(&zero, serde_json::json!({"intercept": 0.0, "beta": vec![0.0; 8]}).to_string()).unwrap();
    for (model, check) in [
        (&oracle, Box::new(|e: &Value| assert_eq!(e["mcc"].as_f64(), Some(1.0))) as Box<dyn Fn(&Value)>),
        (
            &zero,
            Box::new(|e: &Value| {
                assert_eq!(e["sensitivity"].as_f64(), Some(0.0));
                assert_eq!(e["specificity"].as_f64(), Some(1.0));
            }),
        ),
    ] {
        let (code, err) = run([
            "evaluate",
            "--report",
            &s(model),
            "--truth",
            &s(&truth),
            "--test",
            &s(&test),
            "--reference",
            &s(&report),
            "--out",
            &s(&eval),
        ]);
        assert_eq!(code, 0, "{err}");
        let e = read_json(&eval);
        check(&e);
        assert!(e["rpp"].as_f64().is_some());
    }

    let short = dir.path("short.json");
    std::fs::write(&short, serde_json::json!({"intercept": 0.0, "beta": [1.0]}).to_string()).unwrap();
    let (code, _) = run([
        "evaluate",
        "--report",
        &s(&short),
        "--truth",
        &s(&truth),
        "--test",
        &s(&test),
        "--out",
        &s(&eval),
    ]);
    assert_eq!(code, EXIT_DATA);
}

#[test]
fn path_commands() {
    let dir = TempDir::new("path");
    let data = dir.path("data.csv");
    let out = dir.path("path.json");
    let (code, _) = run(["simulate", "--n", "50", "--p", "4", "--out", data.to_str().unwrap()]);
    assert_eq!(code, 0);
    for method in ["pense", "ls-en"] {
        let (code, err) = run([
            "path",
            "--data",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--method",
            method,
            "--n-lambda",
            "7",
        ]);
        assert_eq!(code, 0, "{err}");
        let report = read_json(&out);
        assert_eq!(report["lambdas"].as_array().unwrap().len(), 7);
        assert_eq!(report["points"].as_array().unwrap().len(), 7);
    }
}

#[test]
fn reproduce_writes_long_csv() {
    let dir = TempDir::new("reproduce");
    let out = dir.path("study.csv");
    let mut args = vec![
        "reproduce",
        "--figure",
        "good-leverage",
        "--seeds",
        "1",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend(SMALL_BUDGET);
    let (code, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    for row in &rows {
        assert_eq!(row.len(), 7);
        assert!(row[0] == "adapense" || row[0] == "pense");
        assert_eq!(row[3], "leverage=10");
        let v: f64 = row[6].parse().unwrap();
        assert!((-1.0..=1.0).contains(&v));
    }
    let config = read_json(&dir.path("study.config.json"));
    assert_eq!(config["figure"], "good-leverage");
    assert_eq!(config["cv"]["replications"], 1);
}
