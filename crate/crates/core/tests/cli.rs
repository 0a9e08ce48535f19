#![cfg(feature = "cli")]

use std::path::Path;
use std::process::{Command, Output};

use robust_fps::cli::Report;
use robust_fps::model::{self, PopulationFrame};
use robust_fps::risk;

const BIN: &str = env!("CARGO_BIN_EXE_robust-fps");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("ROBUST_FPS_SEED")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p.to_str().unwrap().to_string()
}

const FIVE_UNIT: &str = "unit_id,x,y\nA,1,0\nB,1,0\nC,1,3\nD,1,\nE,1,NA\n";

const SIM_CONFIG: &str = r#"{
  "frame_template": [
    {"unit_id": "1", "a": 1.0, "sigma2": 1.0, "sampled": true},
    {"unit_id": "2", "a": 2.0, "sigma2": 2.0, "sampled": true},
    {"unit_id": "3", "a": 1.5, "sigma2": 1.5, "sampled": true},
    {"unit_id": "4", "a": 1.0, "sigma2": 1.0, "sampled": false}
  ],
  "theta_true": 2.0,
  "contamination": {"type": "shift", "units": ["1"], "delta": 10.0},
  "c_grid": [0.0, 1.0, 8.0],
  "reps": 3000,
  "seed": 7
}"#;

#[test]
fn estimate_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(dir.path(), "f.csv", FIVE_UNIT);
    let out_path = dir.path().join("r.json");
    let out = run(&[
        "estimate", "--frame", &frame, "--model", "royall", "--c", "1", "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let text = std::fs::read_to_string(&out_path).unwrap();
    let report: Report = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", text);
    assert_eq!((report.n, report.population_size), (3, 5));

    // recompute from the embedded frame
    let frame: PopulationFrame = report.frame().unwrap();
    assert_eq!(report.classical, model::classical_estimate(&frame).unwrap());
    let robust = report.robust.as_ref().unwrap();
    assert!((robust.ybar_p_r - 0.891_134).abs() < 1e-6);
    let risk_report = report.risk.unwrap();
    assert_eq!(risk_report, risk::mse_theorem2(&frame, 1.0).unwrap());
    assert_eq!(report.diagnostics.len(), 3);
    assert!(report.diagnostics.iter().all(|d| d.flagged.is_some()));
}

#[test]
fn estimate_key_order_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(dir.path(), "f.csv", FIVE_UNIT);
    let out_path = dir.path().join("r.json");
    let out = run(&[
        "estimate", "--frame", &frame, "--model", "ratio", "--sigma", "2", "--max-excess", "0.001",
        "--out", out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&out_path).unwrap();
    let keys = ["\"model\"", "\"n\"", "\"N\"", "\"classical\"", "\"robust\"", "\"risk\"", "\"lambda\"", "\"diagnostics\"", "\"units\""];
    let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");
    assert!(text.contains("\"sigma\": 2.0"));
}

#[test]
fn estimate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(dir.path(), "f.csv", FIVE_UNIT);
    let out_path = dir.path().join("r.json");
    let out_s = out_path.to_str().unwrap();
    let base = ["estimate", "--frame", frame.as_str(), "--model", "royall", "--out", out_s];

    let with = |extra: &[&str]| {
        let mut args: Vec<&str> = base.to_vec();
        args.extend_from_slice(extra);
        code(&run(&args))
    };
    assert_eq!(with(&[]), 4);
    assert_eq!(with(&["--c", "1", "--max-excess", "0.01"]), 4);
    assert_eq!(with(&["--c", "-1"]), 3);
    assert_eq!(with(&["--c", "x"]), 2);
    assert_eq!(with(&["--c", "1", "--lambda", "-1.5"]), 0);

    let bad = write(dir.path(), "bad.csv", "unit_id,x,y\nA,1,0\nB,zz,1\nC,1,\n");
    let out = run(&["estimate", "--frame", &bad, "--model", "royall", "--c", "1", "--out", out_s]);
    assert_eq!(code(&out), 2);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("row 3") && msg.contains("`x`"), "{msg}");

    let neg = write(dir.path(), "neg.csv", "unit_id,x,y\nA,1,0\nB,-1,1\nC,1,\n");
    assert_eq!(code(&run(&["estimate", "--frame", &neg, "--model", "royall", "--c", "1", "--out", out_s])), 3);

    let ht = write(dir.path(), "ht.csv", "unit_id,pi,y\nA,0.5,1\nB,0.5,2\nC,0.5,\n");
    assert_eq!(code(&run(&["estimate", "--frame", &ht, "--model", "ht", "--c", "1", "--out", out_s])), 3);
}

#[test]
fn calibrate_prints_twelve_digits() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(dir.path(), "f.csv", FIVE_UNIT);
    let out = run(&["calibrate", "--frame", &frame, "--model", "royall", "--max-excess", "0.0053574957"]);
    assert_eq!(code(&out), 0);
    let printed = String::from_utf8(out.stdout).unwrap();
    let c: f64 = printed.trim().parse().unwrap();
    assert!((c - 1.0).abs() < 1e-8, "{printed}");
    let digits = printed.trim().trim_start_matches("0.").trim_start_matches('0').replace('.', "");
    assert!(digits.len() <= 12, "{printed}");

    assert_eq!(code(&run(&["calibrate", "--frame", &frame, "--model", "royall", "--max-excess", "0"])), 3);
    assert_eq!(code(&run(&["calibrate", "--frame", &frame, "--model", "royall", "--max-excess", "-1"])), 3);
    assert_eq!(code(&run(&["calibrate", "--frame", &frame, "--model", "royall", "--max-excess", "abc"])), 2);
}

#[test]
fn diagnose_flags_with_c() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(dir.path(), "f.csv", FIVE_UNIT);
    let out = run(&["diagnose", "--frame", &frame, "--model", "royall", "--c", "1.3"]);
    assert_eq!(code(&out), 0);
    let report: Report = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.lambda, -0.5);
    let flagged: Vec<&str> = report
        .diagnostics
        .iter()
        .filter(|d| d.flagged == Some(true))
        .map(|d| d.record.unit_id.as_str())
        .collect();
    // r = (-1.2247, -1.2247, 2.4495)
    assert_eq!(flagged, ["C"]);

    let out = run(&["diagnose", "--frame", &frame, "--model", "royall"]);
    let report: Report = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report.diagnostics.iter().all(|d| d.flagged.is_none()));
}

#[test]
fn divergence_command() {
    let out = run(&["divergence", "--mu1", "0", "--cov1", "1", "--mu2", "0", "--cov2", "2", "--lambda", "0"]);
    assert_eq!(code(&out), 0);
    let d: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    let kl = 0.5 * (0.5 - 1.0 + 2f64.ln());
    assert!((d - kl).abs() < 1e-15);

    let dir = tempfile::tempdir().unwrap();
    let cov = write(dir.path(), "cov.txt", "2, 0.5\n0.5, 1\n");
    let out = run(&[
        "divergence", "--mu1", "0,0", "--cov1", &format!("@{cov}"), "--mu2", "1,-1", "--cov2", "1,0;0,1",
        "--lambda", "-0.5", "--symmetrized",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(&["divergence", "--mu1", "0,0", "--cov1", "1,2;2,1", "--mu2", "0,0", "--cov2", "1,0;0,1", "--lambda", "0.5"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("cov1"));
    let out = run(&["divergence", "--mu1", "0", "--cov1", "1", "--mu2", "0", "--cov2", "-2", "--lambda", "0.5"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("cov2"));
}

#[test]
fn simulate_outputs_and_seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SIM_CONFIG);
    let prefix = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    let out = run(&["simulate", "--config", &cfg, "--out-prefix", &prefix("a")]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(prefix("a") + ".json").unwrap()).unwrap();
    assert_eq!(json["seed"], 7);
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
    let csv = std::fs::read_to_string(prefix("a") + ".csv").unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("c,emp_mse_theta,"));

    let env = Command::new(BIN)
        .args(["simulate", "--config", &cfg, "--out-prefix", &prefix("env")])
        .env("ROBUST_FPS_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(code(&env), 0);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(prefix("env") + ".json").unwrap()).unwrap();
    assert_eq!(json["seed"], 99);

    let flag = Command::new(BIN)
        .args(["simulate", "--config", &cfg, "--out-prefix", &prefix("flag"), "--seed", "5"])
        .env("ROBUST_FPS_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(code(&flag), 0);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(prefix("flag") + ".json").unwrap()).unwrap();
    assert_eq!(json["seed"], 5);
}

#[test]
fn simulate_thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SIM_CONFIG);
    let mut seen = Vec::new();
    for t in ["1", "3", "16"] {
        let p = dir.path().join(format!("t{t}")).to_str().unwrap().to_string();
        assert_eq!(code(&run(&["simulate", "--config", &cfg, "--out-prefix", &p, "--threads", t])), 0);
        seen.push((std::fs::read(p.clone() + ".json").unwrap(), std::fs::read(p + ".csv").unwrap()));
    }
    assert!(seen.iter().all(|s| *s == seen[0]));
}

#[test]
fn simulate_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x").to_str().unwrap().to_string();

    let bad_type = write(dir.path(), "t.json", &SIM_CONFIG.replace("\"a\": 2.0", "\"a\": \"two\""));
    let out = run(&["simulate", "--config", &bad_type, "--out-prefix", &p]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/frame_template/1/a"));

    let unknown = write(dir.path(), "u.json", &SIM_CONFIG.replace("\"seed\": 7", "\"seed\": 7, \"extra\": 1"));
    assert_eq!(code(&run(&["simulate", "--config", &unknown, "--out-prefix", &p])), 2);

    let one_rep = write(dir.path(), "r.json", &SIM_CONFIG.replace("\"reps\": 3000", "\"reps\": 1"));
    let out = run(&["simulate", "--config", &one_rep, "--out-prefix", &p]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/reps"));

    let neg_c = write(dir.path(), "c.json", &SIM_CONFIG.replace("[0.0, 1.0, 8.0]", "[0.0, -1.0]"));
    let out = run(&["simulate", "--config", &neg_c, "--out-prefix", &p]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/c_grid/1"));

    let out = Command::new(BIN)
        .args(["simulate", "--config", &one_rep.replace("r.json", "t.json"), "--out-prefix", &p])
        .env("ROBUST_FPS_SEED", "nope")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}
