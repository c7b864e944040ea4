use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-snell"))
        .args(args)
        .env_remove("ROBUST_SNELL_CAP")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// Runs a command on a fixture and returns `(exit code, result JSON)`.
fn cmd(sub: &str, file: &str, extra: &[&str]) -> (i32, Value) {
    let path = fixture(file);
    let mut args = vec![sub, path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = run(&args);
    (out.status.code().unwrap(), json_of(&out))
}

fn close(v: &Value, want: f64, tol: f64) -> bool {
    (v.as_f64().unwrap() - want).abs() <= tol
}

#[test]
fn price_one_period() {
    let (code, r) = cmd("price", "one_period.json", &[]);
    assert_eq!(code, 0);
    assert_eq!(r["status"], "ok");
    assert!(close(&r["payload"]["value"], 1.0 / 3.0, 1e-12));
    assert!(r["timing_ms"].as_f64().unwrap() >= 0.0);
}

#[test]
fn saturated_price_matches_hedge() {
    let (_, p) = cmd("price", "binomial_put.json", &["--family", "saturate"]);
    let (_, h) = cmd("hedge", "binomial_put.json", &[]);
    let price = h["payload"]["price"].as_f64().unwrap();
    assert!(close(&p["payload"]["value"], price, 1e-8));
}

#[test]
fn missing_file_is_a_load_error() {
    let (code, r) = cmd("price", "does_not_exist.json", &[]);
    assert_eq!(code, 2);
    assert_eq!(r["status"], "error");
    assert_eq!(r["error"]["code"], "E_LOAD");
    assert!(r["error"]["message"]
        .as_str()
        .unwrap()
        .contains("does_not_exist.json"));
}

#[test]
fn wrong_kind_is_a_load_error() {
    let (code, r) = cmd("price", "counterexample.json", &[]);
    assert_eq!(code, 2);
    assert_eq!(r["error"]["code"], "E_LOAD");
    let (code, _) = cmd("characteristics", "one_period.json", &[]);
    assert_eq!(code, 2);
}

#[test]
fn hedge_one_period() {
    let (code, r) = cmd("hedge", "one_period.json", &[]);
    assert_eq!(code, 0);
    let p = &r["payload"];
    assert!(close(&p["price"], 1.0 / 3.0, 1e-12));
    assert!(close(&p["strategy"]["0"][0], 2.0 / 3.0, 1e-12));
    assert_eq!(p["certified"], true);
    assert_eq!(p["verified"], true);
}

#[test]
fn arbitrage_exits_4_with_node() {
    let (code, r) = cmd("hedge", "arbitrage.json", &[]);
    assert_eq!(code, 4);
    assert_eq!(r["error"]["code"], "E_ARBITRAGE");
    assert!(r["error"]["message"].as_str().unwrap().contains("root"));
}

#[test]
fn verify_only_strategy_files() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &good,
        json!({"y0": 1.0 / 3.0, "strategy": {"0": [2.0 / 3.0]}}).to_string(),
    )
    .unwrap();
    std::fs::write(
        &bad,
        json!({"y0": 0.3, "strategy": {"0": [2.0 / 3.0]}}).to_string(),
    )
    .unwrap();
    let (code, r) = cmd(
        "hedge",
        "one_period.json",
        &["--verify-only", good.to_str().unwrap()],
    );
    assert_eq!(code, 0);
    assert_eq!(r["payload"]["verified"], true);
    let (_, r) = cmd(
        "hedge",
        "one_period.json",
        &["--verify-only", bad.to_str().unwrap()],
    );
    assert_eq!(r["payload"]["verified"], false);
}

#[test]
fn duality_three_way_agreement() {
    let (code, r) = cmd(
        "duality",
        "binomial_put.json",
        &["--family", "saturate", "--brute-force"],
    );
    assert_eq!(code, 0);
    let p = &r["payload"];
    assert_eq!(p["certified"], true);
    let primal = p["primal"].as_f64().unwrap();
    assert!(close(&p["dual"], primal, 1e-8));
    assert!(close(&p["brute_force"], primal, 1e-8));
}

#[test]
fn duality_under_given_family_is_reported_not_certified() {
    // The given extremes are not martingale measures, so the dual side may exceed the primal.
    let (code, r) = cmd("duality", "binomial_put.json", &[]);
    assert_eq!(code, 0);
    assert_eq!(r["payload"]["certified"], false);
}

#[test]
fn brute_force_cap_from_env() {
    let path = fixture("binomial_put.json");
    let out = Command::new(env!("CARGO_BIN_EXE_robust-snell"))
        .args(["price", path.to_str().unwrap(), "--brute-force"])
        .env("ROBUST_SNELL_CAP", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json_of(&out)["error"]["code"], "E_CAP");
}

#[test]
fn penalize_table_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ladder.csv");
    let (code, r) = cmd(
        "penalize",
        "penalty_node.json",
        &["--n-list", "1,10,100,1000", "--out", csv.to_str().unwrap()],
    );
    assert_eq!(code, 0);
    let rows = r["payload"]["rows"].as_array().unwrap();
    let gaps: Vec<f64> = rows.iter().map(|r| r["gap"].as_f64().unwrap()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("n,m,ell,k,root_value,gap,residual\n"));
    assert_eq!(text.lines().count(), 5);

    let (_, r) = cmd("penalize", "penalty_node.json", &["--n-list", "9"]);
    assert_eq!(r["payload"]["rows"][0]["root_value"], json!(0.95));
}

#[test]
fn penalize_rejects_bad_selector_and_list() {
    let (code, _) = cmd("penalize", "binomial_put.json", &["--measure", "extreme:5"]);
    assert_eq!(code, 2);
    let (code, _) = cmd("penalize", "binomial_put.json", &["--n-list", "1,x"]);
    assert_eq!(code, 2);
    let (code, r) = cmd("penalize", "binomial_put.json", &["--measure", "center"]);
    assert_eq!(code, 0);
    assert_eq!(r["payload"]["measure"], "center");
}

#[test]
fn characteristics_fixtures() {
    let (code, r) = cmd("characteristics", "counterexample.json", &[]);
    assert_eq!(code, 0);
    assert_eq!(
        r["payload"]["overall"],
        json!({"dd_new": false, "dd_old": true})
    );
    let (_, r) = cmd("characteristics", "no_jumps.json", &[]);
    assert_eq!(
        r["payload"]["overall"],
        json!({"dd_new": true, "dd_old": true})
    );
}

#[test]
fn generator_specs_load_directly() {
    let (code, r) = cmd("price", "uv_put.json", &["--seed", "42"]);
    assert_eq!(code, 0);
    assert_eq!(r["payload"]["seed"], 42);
    let value = r["payload"]["value"].as_f64().unwrap();

    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let (code, _) = cmd(
        "generate",
        "uv_put.json",
        &["--out", model.to_str().unwrap()],
    );
    assert_eq!(code, 0);
    let out = run(&["price", model.to_str().unwrap()]);
    assert_eq!(json_of(&out)["payload"]["value"].as_f64().unwrap(), value);
}

#[test]
fn payloads_are_deterministic() {
    for (sub, file) in [
        ("price", "binomial_put.json"),
        ("hedge", "binomial_put.json"),
        ("characteristics", "counterexample.json"),
    ] {
        let (_, a) = cmd(sub, file, &[]);
        let (_, b) = cmd(sub, file, &[]);
        assert_eq!(
            serde_json::to_string(&a["payload"]).unwrap(),
            serde_json::to_string(&b["payload"]).unwrap()
        );
    }
}

#[test]
fn out_writes_result_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let (code, r) = cmd(
        "price",
        "one_period.json",
        &["--out", path.to_str().unwrap()],
    );
    assert_eq!(code, 0);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(written["payload"], r["payload"]);
}
