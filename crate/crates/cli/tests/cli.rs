use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_krr-sketch"));
    for (k, _) in std::env::vars() {
        if k.starts_with("KRR_SKETCH_") {
            c.env_remove(k);
        }
    }
    c
}

fn call(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A labeled synthetic dataset written by the binary itself.
fn dataset(dir: &TempDir, n: usize) -> (PathBuf, PathBuf) {
    let data = dir.path().join("data.csv");
    let truth = dir.path().join("truth.txt");
    let n = n.to_string();
    let out = call(&[
        "generate",
        "--n",
        &n,
        "--seed",
        "5",
        "--output",
        s(&data),
        "--truth",
        s(&truth),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (data, truth)
}

fn run(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--input", s(data), "--header", "--output", s(out)];
    args.extend_from_slice(extra);
    call(&args)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_versioned_checkpoints_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = dataset(&dir, 200);
    let out = dir.path().join("out");
    let res = run(
        &data,
        &out,
        &[
            "--algorithm",
            "ink-estimate",
            "--kernel",
            "gaussian",
            "--bandwidth",
            "1.0",
            "--gamma",
            "1.0",
            "--epsilon",
            "0.5",
            "--budget",
            "200",
            "--seed",
            "7",
            "--checkpoint-every",
            "50",
        ],
    );
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let v = json(&out.join("checkpoints.json"));
    assert_eq!(v["spec_version"], "1");
    assert_eq!(v["config_echo"]["algorithm"], "ink-estimate");
    assert_eq!(v["config_echo"]["budget"], 200);
    let cps = v["checkpoints"].as_array().unwrap();
    assert_eq!(
        cps.iter()
            .map(|c| c["t"].as_u64().unwrap())
            .collect::<Vec<_>>(),
        [50, 100, 150, 200]
    );
    for c in cps {
        let t = c["t"].as_u64().unwrap();
        let idx = c["dictionary_indices"].as_array().unwrap();
        assert_eq!(c["Q_t"].as_u64().unwrap() as usize, idx.len());
        assert_eq!(c["weights"].as_array().unwrap().len(), idx.len());
        assert!(idx.iter().all(|i| (1..=t).contains(&i.as_u64().unwrap())));
        assert!(c["deff_tilde"].as_f64().unwrap() > 0.0);
    }
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next().unwrap(), "t,Q_t,deff_tilde");
    assert_eq!(lines.count(), 4);
    assert!(json(&out.join("timing.json"))["total_secs"]
        .as_f64()
        .is_some());
}

#[test]
fn batch_exact_has_single_final_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = dataset(&dir, 200);
    let out = dir.path().join("b");
    let res = run(&data, &out, &["--algorithm", "batch-exact", "--m", "150"]);
    assert_eq!(code(&res), 0);
    let v = json(&out.join("checkpoints.json"));
    let cps = v["checkpoints"].as_array().unwrap();
    assert_eq!(cps.len(), 1);
    assert_eq!(cps[0]["t"], 200);
    let draws: u64 = cps[0]["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_u64().unwrap())
        .sum();
    assert_eq!(draws, 150);
}

#[test]
fn same_seed_gives_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = dataset(&dir, 150);
    let flags = [
        "--budget",
        "300",
        "--seed",
        "11",
        "--checkpoint-every",
        "30",
        "--verify",
    ];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let ra = run(&data, &a, &flags);
    let rb = run(&data, &b, &flags);
    assert_eq!(code(&ra), code(&rb));
    for f in [
        "checkpoints.json",
        "metrics.csv",
        "verify.csv",
        "conditions.json",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let c = dir.path().join("c");
    run(
        &data,
        &c,
        &[
            "--budget",
            "300",
            "--seed",
            "12",
            "--checkpoint-every",
            "30",
        ],
    );
    assert_ne!(
        fs::read(a.join("checkpoints.json")).unwrap(),
        fs::read(c.join("checkpoints.json")).unwrap()
    );
}

#[test]
fn verify_passes_after_full_selection_run() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = dataset(&dir, 100);
    let out = dir.path().join("full");
    assert_eq!(
        code(&run(
            &data,
            &out,
            &["--budget", "100000", "--checkpoint-every", "25"]
        )),
        0
    );
    let res = call(&["verify", "--run", s(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stdout));
    let report = json(&out.join("conditions.json"));
    assert_eq!(report["all_hold"], true);
    assert_eq!(report["reports"].as_array().unwrap().len(), 4);
}

#[test]
fn verify_fails_after_budget_one_run() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = dataset(&dir, 100);
    let out = dir.path().join("one");
    assert_eq!(code(&run(&data, &out, &["--budget", "1"])), 0);
    let res = call(&["verify", "--run", s(&out)]);
    assert_eq!(code(&res), 3);
    assert_eq!(json(&out.join("conditions.json"))["all_hold"], false);
    assert!(String::from_utf8_lossy(&res.stdout).contains("fails"));
}

#[test]
fn verify_is_reproducible_and_reports_risk() {
    let dir = tempfile::tempdir().unwrap();
    let (data, truth) = dataset(&dir, 120);
    let out = dir.path().join("r");
    assert_eq!(code(&run(&data, &out, &["--algorithm", "batch-exact"])), 0);
    let v1 = dir.path().join("v1");
    let v2 = dir.path().join("v2");
    for v in [&v1, &v2] {
        let res = call(&[
            "verify",
            "--run",
            s(&out),
            "--truth",
            s(&truth),
            "--noise-std",
            "0.1",
            "--output",
            s(v),
        ]);
        assert!(matches!(code(&res), 0 | 3));
    }
    let a = fs::read_to_string(v1.join("verify.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(v2.join("verify.csv")).unwrap());
    assert!(a
        .lines()
        .next()
        .unwrap()
        .ends_with("risk_exact,risk_approx,risk_ratio_bound"));
}

#[test]
fn invariant_violation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = dataset(&dir, 120);
    let out = dir.path().join("x");
    let res = run(
        &data,
        &out,
        &["--scope", "full", "--budget", "2", "--seed", "0"],
    );
    assert_eq!(code(&res), 2, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("invariant"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = dataset(&dir, 20);
    let out = dir.path().join("o");
    assert_eq!(
        code(&run(&data, &out, &["--budget", "5", "--kernel", "cosine"])),
        1
    );
    assert_eq!(
        code(&run(&data, &out, &["--budget", "5", "--epsilon", "1.5"])),
        1
    );
    assert_eq!(code(&run(&data, &out, &[])), 1);
    assert_eq!(
        code(&call(&[
            "run",
            "--budget",
            "5",
            "--input",
            "/nonexistent.csv",
            "--output",
            s(&out)
        ])),
        1
    );
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x,y\n1,2\n3,4\n5,oops\n").unwrap();
    let res = run(&bad, &out, &["--budget", "5"]);
    assert_eq!(code(&res), 1);
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 4"));
}

#[test]
fn precedence_is_flags_env_file_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = dataset(&dir, 30);
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "gamma = 3.0\nmu = 4.0\nepsilon = 0.25\nbudget = 40\n").unwrap();
    let out = dir.path().join("p");
    let res = bin()
        .args([
            "run",
            "--config",
            s(&cfg),
            "--input",
            s(&data),
            "--header",
            "--output",
            s(&out),
            "--epsilon",
            "0.3",
        ])
        .env("KRR_SKETCH_MU", "5.0")
        .env("KRR_SKETCH_EPSILON", "0.4")
        .output()
        .unwrap();
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let echo = &json(&out.join("checkpoints.json"))["config_echo"];
    assert_eq!(echo["gamma"], 3.0);
    assert_eq!(echo["mu"], 5.0);
    assert_eq!(echo["epsilon"], 0.3);
    assert_eq!(echo["delta"], 0.1);
    assert_eq!(echo["budget"], 40);
}

#[test]
fn suggest_budget_prints_theory_values() {
    let res = call(&[
        "suggest-budget",
        "--deff",
        "12",
        "--epsilon",
        "0.5",
        "--delta",
        "0.1",
        "--n",
        "1000",
    ]);
    assert_eq!(code(&res), 0);
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("q_bar = 384531"), "{text}");
    assert!(text.contains("batch_m = 885"), "{text}");
    let res = call(&[
        "suggest-budget",
        "--deff",
        "12",
        "--n",
        "1000",
        "--exact-oracle",
    ]);
    assert!(String::from_utf8(res.stdout)
        .unwrap()
        .contains("q_bar = 14242"));
}

#[test]
fn sweep_writes_one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = dataset(&dir, 80);
    let out = dir.path().join("sw");
    let args = [
        "sweep",
        "--input",
        s(&data),
        "--header",
        "--output",
        s(&out),
        "--budget",
        "500",
        "--seeds",
        "6",
        "--seed",
        "3",
        "--verify",
    ];
    assert_eq!(code(&call(&args)), 0);
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for (k, r) in rows.iter().enumerate() {
        assert!(r.starts_with(&format!("{},ok,", 3 + k)), "{r}");
    }
    let again = dir.path().join("sw2");
    let mut args2 = args.to_vec();
    args2[5] = s(&again);
    assert_eq!(code(&call(&args2)), 0);
    assert_eq!(text, fs::read_to_string(again.join("sweep.csv")).unwrap());
}

#[test]
fn libsvm_input_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.svm");
    let body: String = (0..40)
        .map(|i| {
            format!(
                "{} 1:{} 3:{}\n",
                i % 2,
                (i as f64 * 0.3).sin(),
                (i as f64 * 0.7).cos()
            )
        })
        .collect();
    fs::write(&data, body).unwrap();
    let out = dir.path().join("l");
    let res = call(&[
        "run",
        "--input",
        s(&data),
        "--output",
        s(&out),
        "--budget",
        "1000",
        "--verify",
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(
        json(&out.join("checkpoints.json"))["config_echo"]["input"]["format"],
        "libsvm"
    );
}

#[test]
fn verify_refuses_beyond_desk_scale() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("big.csv");
    let body: String = (0..5001)
        .map(|i| format!("{},{}\n", i as f64 * 1e-3, 0.0))
        .collect();
    fs::write(&data, body).unwrap();
    let run_dir = dir.path().join("big");
    fs::create_dir(&run_dir).unwrap();
    let file = serde_json::json!({
        "spec_version": "1",
        "config_echo": {
            "algorithm": "ink-estimate",
            "kernel": {"family": "gaussian", "bandwidth": 1.0},
            "gamma": 1.0, "mu": 1.0, "epsilon": 0.5, "delta": 0.1,
            "budget": 10, "seed": 0, "checkpoint_every": 0, "scope": "dictionary",
            "safety_factor": 1.0, "verify": false,
            "input": {"path": s(&data), "format": "csv", "header": false, "label_column": "last"}
        },
        "checkpoints": [{"t": 5001, "Q_t": 1, "deff_tilde": 1.0, "dictionary_indices": [1], "weights": [1]}]
    });
    fs::write(run_dir.join("checkpoints.json"), file.to_string()).unwrap();
    let res = call(&["verify", "--run", s(&run_dir)]);
    assert_eq!(code(&res), 1);
    assert!(String::from_utf8_lossy(&res.stderr).contains("desk-scale"));
}
