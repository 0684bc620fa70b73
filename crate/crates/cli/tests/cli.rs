use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mec-offload"))
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_exponential_trace(path: &Path, rows: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut s = String::from("t_ms,queue_up_bits,queue_down_bits,rate_up_bps,rate_down_bps,power_up_mw,power_down_mw\n");
    for i in 0..rows {
        let e = |rng: &mut ChaCha8Rng| -(1.0 - rng.random::<f64>()).ln();
        // rate 1e6 bit/s, so the uplink transfer time is Exp(1) seconds
        let up = e(&mut rng) * 1e6;
        let down = e(&mut rng) * 1e6;
        let pu = 1000.0 + 100.0 * e(&mut rng);
        let pd = 200.0 + 20.0 * e(&mut rng);
        s.push_str(&format!("{i},{up},{down},1000000,1000000,{pu},{pd}\n"));
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn testbed_defaults_are_emitted() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["fit", "--paper-defaults"], dir.path());
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["z_up_s"], 0.349);
    assert_eq!(v["z_down_s"], 0.107);
    assert_eq!(v["theta_up"], 4.81e-4);
    assert_eq!(v["theta_down"], 1.11e-5);
}

#[test]
fn fitted_quantile_is_close_to_analytic() {
    let dir = tempfile::tempdir().unwrap();
    write_exponential_trace(&dir.path().join("t.csv"), 300 * 100);
    let out = run(
        &["--out", "cfg.json", "fit", "--traces", "t.csv", "-k", "100", "--payload-bits", "0"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("cfg.json"));
    // block maxima of 100 unit exponentials are close to Gumbel(ln 100, 1)
    let exact = 100f64.ln() + 2.250367;
    for key in ["z_up_s", "z_down_s"] {
        let z = v[key].as_f64().unwrap();
        assert!((z - exact).abs() / exact < 0.05, "{key} {z} vs {exact}");
    }
    assert!(v["gev_j"]["mu"].is_number());
}

#[test]
fn oversized_block_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    write_exponential_trace(&dir.path().join("t.csv"), 50);
    let out = run(&["fit", "--traces", "t.csv", "-k", "100"], dir.path());
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn gen_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["a.json", "b.json"] {
        assert!(run(&["--seed", "7", "--out", f, "gen", "--nodes", "50"], dir.path()).status.success());
    }
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.json")).unwrap());
    assert!(run(&["--seed", "8", "--out", "c.json", "gen", "--nodes", "50"], dir.path()).status.success());
    assert_ne!(a, std::fs::read(dir.path().join("c.json")).unwrap());
}

#[test]
fn oracle_never_loses_to_solver() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for seed in ["1", "2", "3", "4", "5"] {
        let gen = run(&["--seed", seed, "--out", "g.json", "gen", "--nodes", "8", "--edge-prob", "0.5"], d);
        assert!(gen.status.success());
        assert!(run(&["--out", "s.json", "solve", "--dag", "g.json"], d).status.success());
        assert!(run(&["--out", "o.json", "oracle", "--dag", "g.json"], d).status.success());
        let (s, o) = (json(&d.join("s.json")), json(&d.join("o.json")));
        assert!(o["psi"].as_f64().unwrap() <= s["psi"].as_f64().unwrap());
        assert_eq!(o["assignments_enumerated"], 64);
        assert!(d.join("s.iterations.csv").exists());
    }
}

#[test]
fn solve_reports_policy_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["--config", &data("config.json"), "solve", "--dag", &data("smart_diagnosis.json"), "--policy", "cg"],
        dir.path(),
    );
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["policy"], "cg");
    assert_eq!(v["nodes"].as_array().unwrap().len(), 14);
    assert!(v["psi_lower"].as_f64().unwrap() <= v["psi_upper"].as_f64().unwrap());
    let seq = run(
        &["solve", "--dag", &data("smart_diagnosis.json"), "--policy", "sequential"],
        dir.path(),
    );
    assert!(!seq.status.success());
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cyclic.json"), r#"{"nodes":[{"id":1,"workload_cycles":1},{"id":2,"workload_cycles":1},{"id":3,"workload_cycles":1}],"edges":[{"from":1,"to":2,"bits":1},{"from":2,"to":3,"bits":1},{"from":3,"to":2,"bits":1}]}"#).unwrap();
    assert!(!run(&["solve", "--dag", "cyclic.json"], d).status.success());
    assert!(!run(&["solve", "--dag", "missing.json"], d).status.success());
    // the built-in defaults carry no transfer-time fits to sweep ε_m with
    assert!(!run(&["compare", "--dag", &data("smart_diagnosis.json")], d).status.success());
}
