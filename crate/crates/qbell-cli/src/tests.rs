use std::ffi::OsString;
use std::path::PathBuf;

use serde_json::Value;

use super::run;

struct Output {
    code: u8,
    stdout: Vec<u8>,
    stderr: Vec<u8>,
}

fn qbell(args: &[&str]) -> Output {
    let argv: Vec<OsString> = std::iter::once("qbell").chain(args.iter().copied()).map(OsString::from).collect();
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let code = run(&argv, &mut stdout, &mut stderr);
    Output { code, stdout, stderr }
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stderr));
    })
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qbell-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn exclude_pr2_analytic() {
    let out = qbell(&["exclude", "--pr", "2", "--method", "analytic"]);
    assert_eq!(out.code, 0);
    let r = report(&out);
    assert_eq!(r["excluded"], true);
    assert_eq!(r["value"], "1/40");
    assert_eq!(r["method"], "analytic");
    assert_eq!(r["mode"], "rational");
    assert!(r["analytic"]["certificate"]["entries"].is_array());
    assert!(r["inputs"]["sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn exclude_uniform_box_is_decided_not_excluded() {
    let path = scratch("uniform.json");
    let probs = vec!["1/4"; 16];
    let doc = serde_json::json!({
        "scenario": {"ma": 2, "mb": 2, "ka": 2, "kb": 2},
        "mode": "rational",
        "probs": probs,
    });
    std::fs::write(&path, doc.to_string()).unwrap();
    for method in ["analytic", "sdp", "both"] {
        let out = qbell(&["exclude", "--box", path.to_str().unwrap(), "--method", method]);
        assert_eq!(out.code, 0, "{method}");
        let r = report(&out);
        assert_eq!(r["excluded"], false);
        assert_eq!(r["local"], true);
    }
}

#[test]
fn exclude_k3_face_by_both_routes() {
    let path = scratch("face3.json");
    let w = ["2/5", "1/10", "1/10", "1/10", "1/10", "1/10", "1/10"];
    let doc = serde_json::json!({"k": 3, "neighbors": [0, 2, 4, 6, 8, 10], "weights": w});
    std::fs::write(&path, doc.to_string()).unwrap();
    let out = qbell(&["exclude", "--face", path.to_str().unwrap(), "--method", "both"]);
    assert_eq!(out.code, 0);
    let r = report(&out);
    assert_eq!(r["excluded"], true);
    assert_eq!(r["analytic"]["excluded"], true);
    assert!(r["analytic"]["template"].as_str().unwrap().ends_with("_k"));
    assert!(r["sdp"]["solver"]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn exclude_rejects_bad_input() {
    let out = qbell(&["exclude", "--box", "/nonexistent/box.json"]);
    assert_eq!(out.code, 1);
    let path = scratch("signaling.json");
    let mut probs = vec!["0"; 16];
    probs[0] = "1";
    probs[4] = "1";
    probs[8] = "1";
    probs[15] = "1";
    let doc = serde_json::json!({
        "scenario": {"ma": 2, "mb": 2, "ka": 2, "kb": 2},
        "mode": "rational",
        "probs": probs,
    });
    std::fs::write(&path, doc.to_string()).unwrap();
    assert_eq!(qbell(&["exclude", "--box", path.to_str().unwrap()]).code, 1);
    assert_eq!(qbell(&["exclude"]).code, 1);
}

#[test]
fn faces_sweep_rows_and_parameters() {
    let csv = scratch("sweep.csv");
    let args = ["faces-sweep", "--k", "2", "--dim", "1", "--grid", "3", "--seed", "7", "--out"];
    let out = qbell(&[&args[..], &[csv.to_str().unwrap()]].concat());
    assert_eq!(out.code, 0);
    let r = report(&out);
    assert_eq!(r["subsets"], 8);
    assert_eq!(r["rows"], 24);
    assert_eq!(r["excluded"], 24);
    let first = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(first.lines().count(), 25);
    assert!(first.starts_with("k,dim,neighbors,c_ns,weights,method,template,value,value_f64,excluded"));

    qbell(&[&args[..], &[csv.to_str().unwrap()]].concat());
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), first);

    assert_eq!(qbell(&["faces-sweep", "--k", "2", "--dim", "5"]).code, 1);
    assert_eq!(qbell(&["faces-sweep", "--k", "2", "--dim", "0"]).code, 1);
    assert_eq!(qbell(&["faces-sweep", "--k", "2", "--dim", "1", "--grid", "0"]).code, 1);
}

#[test]
fn selftest_canonical_and_perturbed() {
    let out = qbell(&["selftest", "--m", "2", "--canonical-chained"]);
    assert_eq!(out.code, 0);
    let r = report(&out);
    assert!(r["boundary_residual"].as_f64().unwrap().abs() < 1e-12);
    assert!((r["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(r["tlm"]["residual"].as_f64().unwrap().abs() < 1e-12);

    let r = report(&qbell(&["selftest", "--m", "5", "--canonical-chained"]));
    assert!(r["boundary_residual"].as_f64().unwrap().abs() < 1e-12);
    assert!(r["chain"]["gap"].as_f64().unwrap() > 0.0);

    let path = scratch("model.json");
    let doc = serde_json::json!({"m": 2, "thetaA": [0.0, 0.5], "thetaB": [1.0, 1.3]});
    std::fs::write(&path, doc.to_string()).unwrap();
    let out = qbell(&["selftest", "--model", path.to_str().unwrap()]);
    assert_eq!(out.code, 0);
    assert!(report(&out)["boundary_residual"].as_f64().unwrap().abs() > 0.1);

    assert_eq!(qbell(&["selftest", "--m", "2"]).code, 1);
}

#[test]
fn xorgame_examples() {
    let out = qbell(&["xorgame", "--k", "2", "--verify-hadamard", "--bias"]);
    assert_eq!(out.code, 0);
    let r = report(&out);
    assert_eq!(r["hadamard_diagonal"], true);
    assert_eq!(r["classical_bias"], 8);
    assert!((r["quantum_bias"].as_f64().unwrap() - 8.0).abs() < 1e-4);

    let r = report(&qbell(&["xorgame", "--k", "6", "--verify-hadamard"]));
    assert_eq!(r["hadamard_diagonal"], true);

    let r = report(&qbell(&["xorgame", "--k", "4", "--verify-blocks"]));
    assert_eq!(r["blocks"]["ok"], true);

    let csv = scratch("g8.csv");
    assert_eq!(qbell(&["xorgame", "--k", "3", "--csv", csv.to_str().unwrap()]).code, 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "1,0,0,-1,0,-1,-1,-1");

    assert_eq!(qbell(&["xorgame", "--k", "1"]).code, 1);
    assert_eq!(qbell(&["xorgame", "--k", "13"]).code, 1);
}

#[test]
fn usage_errors_exit_1() {
    let out = qbell(&["xorgame", "--k", "abc"]);
    assert_eq!(out.code, 1);
    assert!(!out.stderr.is_empty());
    assert_eq!(qbell(&["frobnicate"]).code, 1);
    let help = qbell(&["--help"]);
    assert_eq!(help.code, 0);
    assert!(String::from_utf8_lossy(&help.stdout).contains("exclude"));
}
