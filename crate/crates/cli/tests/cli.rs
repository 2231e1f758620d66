use std::path::Path;
use std::process::{Command, Output};

const SCENARIO: &str = r#"{"m": 6, "priors": [{"mu_deg": -20}, {"mu_deg": 25}],
    "true_thetas_fixed_deg": [-20, 25], "snr_db": 20, "N": 60, "M": 60}"#;

fn doamap(args: &[&str], dir: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_doamap")).args(args).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn rows(text: &[u8]) -> Vec<Vec<String>> {
    String::from_utf8_lossy(text).lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn generate_then_estimate_recovers_the_angles() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("scn.json"), SCENARIO).unwrap();
    std::fs::write(dir.path().join("priors.json"), r#"[{"mu_deg": -20}, {"mu_deg": 25}]"#).unwrap();
    doamap(&["generate", "--config", "scn.json", "--seed", "3", "--out", "data.csv"], dir.path());
    let data = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
    assert_eq!(data.lines().count(), 1 + 6 * 120);

    let out = doamap(
        &["estimate", "--data", "data.csv", "--priors", "priors.json", "--grid", "200", "--levels", "8", "--q-out", "q.csv"],
        dir.path(),
    );
    let table = rows(&out.stdout);
    assert_eq!(table[0], ["angle_index", "theta_deg"]);
    let mut est: Vec<f64> = table[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    est.sort_by(f64::total_cmp);
    assert!((est[0] + 20.0).abs() < 0.2 && (est[1] - 25.0).abs() < 0.2, "{est:?}");
    assert_eq!(rows(&std::fs::read(dir.path().join("q.csv")).unwrap()).len(), 1 + 36);
}

#[test]
fn crb_prints_one_row_per_source() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("scn.json"), SCENARIO).unwrap();
    let table = rows(&doamap(&["crb", "--config", "scn.json"], dir.path()).stdout);
    assert_eq!(table[0], ["angle_index", "theta_deg", "crb_deg", "acrb_deg"]);
    assert_eq!(table.len(), 3);
    for r in &table[1..] {
        let crb: f64 = r[2].parse().unwrap();
        let acrb: f64 = r[3].parse().unwrap();
        assert!(crb > 0.0 && acrb <= crb);
    }
}

#[test]
fn simulate_writes_results_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        r#"{{"scenario": {SCENARIO}, "sweep": {{"param": "snr_db", "values": [10, 20]}},
            "master_seed": 5, "estimator": {{"g": 100, "L": 4}}}}"#
    );
    std::fs::write(dir.path().join("exp.json"), config).unwrap();
    doamap(
        &["simulate", "--config", "exp.json", "--runs", "6", "--out", "res.csv", "--trace-out", "trace.csv"],
        dir.path(),
    );
    let res = rows(&std::fs::read(dir.path().join("res.csv")).unwrap());
    assert_eq!(res.len(), 3);
    assert_eq!(res[0][0], "sweep_value");
    assert_eq!(res[1][0], "10");
    let trace = rows(&std::fs::read(dir.path().join("trace.csv")).unwrap());
    assert_eq!(trace[0], ["iteration", "level", "abs_err_theta1_deg", "abs_err_theta2_deg", "cost"]);
    assert!(trace.len() > 4);
}

#[test]
fn bad_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"m": 4, "priors": []}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_doamap"))
        .args(["crb", "--config", "bad.json"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}
