use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const DEMO: &str = r#"{
  "channel": { "F": 1.0, "Fcal": -6.0, "d": 0.1, "mu": 2e-7, "nu": 1.0, "Mcal": 1.0, "rho": 0.5 },
  "wave": { "kappa": 2, "m_tilde": 1, "A": 2.0 },
  "bathymetry": { "kind": "builtin", "nu": 1.0, "modes": [ { "l": 1, "a": [0.5, 0.0] } ] },
  "run": {
    "j_max": 2,
    "mu_sweep": [0.02, 0.01, 0.005],
    "trace": { "t_end": 5.0, "step": 0.01, "probe_duration": 20.0, "probe_step": 0.01 }
  }
}"#;

fn bathyflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bathyflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    (dir, cfg, out)
}

fn run(cmd: &str, cfg: &Path, out: &Path) -> Output {
    bathyflow(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn demo_pipeline() {
    let (_d, cfg, out) = setup(DEMO);
    for cmd in ["solve", "verify", "nf", "trace", "report"] {
        let o = run(cmd, &cfg, &out);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let conv = read_json(out.join("convergence.json"));
    assert!(conv["ratios"].as_array().unwrap().iter().all(|r| r.as_f64().unwrap() < 1.0));
    let verify = read_json(out.join("verify.json"));
    assert_eq!(verify["pass"], true);
    let scaling = verify["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "residual_scaling")
        .unwrap();
    assert!((scaling["value"].as_f64().unwrap() - 3.0).abs() < 0.3);
    let nf = read_json(out.join("nf.json"));
    let s = nf["sigma"].as_f64().unwrap() * nf["lambda_ell"].as_f64().unwrap();
    assert!((nf["omega"].as_f64().unwrap() - s).abs() < 1e-12);
    let trace = read_json(out.join("trace.json"));
    assert!(trace["probe"]["saturation_ratio"].as_f64().is_some());
    assert!(out.join("probe_section.csv").exists());
    assert!(out.join("summary.txt").exists());
}

#[test]
fn flat_bottom_has_empty_corrections() {
    let flat = DEMO.replace(
        r#"{ "kind": "builtin", "nu": 1.0, "modes": [ { "l": 1, "a": [0.5, 0.0] } ] }"#,
        r#"{ "kind": "flat" }"#,
    );
    let (_d, cfg, out) = setup(&flat);
    assert_eq!(code(&run("solve", &cfg, &out)), 0);
    let conv = read_json(out.join("convergence.json"));
    let eps = conv["eps"].as_array().unwrap();
    assert!(eps[1..].iter().all(|e| e.as_f64().unwrap() == 0.0));
    assert_eq!(code(&run("verify", &cfg, &out)), 0);
}

#[test]
fn threshold_violation_writes_nothing() {
    let (_d, cfg, out) = setup(&DEMO.replace("2e-7", "0.02"));
    let o = run("solve", &cfg, &out);
    assert_eq!(code(&o), 3);
    assert!(!out.join("layers.csv").exists());
}

#[test]
fn tampered_layers_fail_symmetry() {
    let (_d, cfg, out) = setup(DEMO);
    assert_eq!(code(&run("solve", &cfg, &out)), 0);
    let path = out.join("layers.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // flip the sign of re_b in the first layer-1 row with a nonzero value
    let k = lines
        .iter()
        .position(|l| l.starts_with("1,") && !l.split(',').nth(4).unwrap().starts_with("0.0"))
        .unwrap();
    let mut fields: Vec<String> = lines[k].split(',').map(String::from).collect();
    fields[4] = match fields[4].strip_prefix('-') {
        Some(s) => s.to_string(),
        None => format!("-{}", fields[4]),
    };
    lines[k] = fields.join(",");
    fs::write(&path, lines.join("\n")).unwrap();
    assert_eq!(code(&run("verify", &cfg, &out)), 5);
    let verify = read_json(out.join("verify.json"));
    let sym = verify["checks"].as_array().unwrap().iter().find(|c| c["name"] == "symmetry").unwrap();
    assert_eq!(sym["pass"], false);
}

#[test]
fn zero_amplitude_normal_form_is_refused() {
    let (_d, cfg, out) = setup(&DEMO.replace(r#""A": 2.0"#, r#""A": 0.0"#));
    assert_eq!(code(&run("nf", &cfg, &out)), 3);
}

#[test]
fn divergent_hierarchy_exits_with_divergence() {
    let wild = DEMO
        .replace("2e-7", "0.09")
        .replace("[0.5, 0.0]", "[400.0, 0.0]")
        .replace(r#""j_max": 2,"#, r#""j_max": 6, "enforce_threshold": false,"#);
    let (_d, cfg, out) = setup(&wild);
    assert_eq!(code(&run("solve", &cfg, &out)), 4);
}

#[test]
fn identical_configs_give_identical_reports() {
    let (_d, cfg, out) = setup(DEMO);
    let other = out.with_file_name("again");
    assert_eq!(code(&run("solve", &cfg, &out)), 0);
    assert_eq!(code(&run("solve", &cfg, &other)), 0);
    for f in ["layers.csv", "convergence.json"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(other.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn exit_codes_for_bad_input() {
    let (_d, cfg, out) = setup("{ \"channel\": 1 }");
    assert_eq!(code(&run("solve", &cfg, &out)), 2);
    let missing = out.join("nope.json");
    assert_eq!(code(&run("solve", &missing, &out)), 1);
    let (_d, cfg, out) = setup(DEMO);
    assert_eq!(code(&run("verify", &cfg, &out)), 1);
    let o = bathyflow(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--mu-sweep",
        "0.1,abc",
    ]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&bathyflow(&["report", "--out", out.to_str().unwrap()])), 1);
}

#[test]
fn jobs_flag_does_not_change_results() {
    let (_d, cfg, out) = setup(DEMO);
    let one = out.with_file_name("one");
    assert_eq!(code(&run("solve", &cfg, &out)), 0);
    let o = bathyflow(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        one.to_str().unwrap(),
        "--jobs",
        "1",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(out.join("layers.csv")).unwrap(), fs::read(one.join("layers.csv")).unwrap());
}
