use std::process::{Command, Output};

use serde_json::Value;

fn shelflab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shelflab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn default_nofeedback_table() {
    let o = shelflab(&["nofeedback-table"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        rows,
        [
            "n,expected,table_estimate,asymptotic_estimate,error",
            "10,2.70,2.77,2.77,",
            "21,3.88,3.91,3.92,",
            "33,4.82,4.85,4.85,",
            "52,6.00,6.02,6.02,",
        ]
    );
}

#[test]
fn bad_n_gives_error_row_and_failure() {
    let o = shelflab(&["nofeedback-table", "--ns", "2,1"]);
    assert!(!o.status.success());
    let text = stdout(&o);
    assert!(text.contains("\n2,1.00,"));
    assert!(text.contains("\n1,,,,n must lie in"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n=1"));
}

#[test]
fn feedback_table_is_reproducible() {
    let args = [
        "feedback-table",
        "--n",
        "20",
        "--shelves",
        "1,3",
        "--trials",
        "3000",
        "--seed",
        "11",
    ];
    let a = shelflab(&args);
    let b = shelflab(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with(&format!(
        "# shelflab {}\n# seed: 11\n",
        env!("CARGO_PKG_VERSION")
    )));
    assert!(text.contains(
        "# command: shelflab feedback-table --n 20 --shelves 1,3 --trials 3000 --seed 11\n"
    ));
    let c = shelflab(&[
        "feedback-table",
        "--n",
        "20",
        "--shelves",
        "1,3",
        "--trials",
        "3000",
        "--seed",
        "12",
    ]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn four_card_feedback_mean_json() {
    let o = shelflab(&[
        "feedback-table",
        "--n",
        "4",
        "--shelves",
        "1",
        "--trials",
        "100000",
        "--json",
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 7);
    let mean = v["rows"][0]["mean"].as_f64().unwrap();
    assert!((mean - 3.0).abs() < 0.05, "{mean}");
}

#[test]
fn verify_exit_codes() {
    let o = shelflab(&["verify", "--n-max", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("matrix.structure,proven,pass,1..=3,"));
    assert!(!shelflab(&["verify", "--n-max", "2"]).status.success());
}

#[test]
fn verify_reports_conjecture_sizes_without_failing() {
    let o = shelflab(&["verify", "--n-max", "30", "--json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let checks = v["report"]["checks"].as_array().unwrap();
    let appendix = checks
        .iter()
        .find(|c| c["id"] == "appendix.conjecture")
        .unwrap();
    assert_eq!(appendix["status"], "refuted");
    assert!(appendix["failures"].get("24").is_some());
    let ids: Vec<&str> = checks.iter().map(|c| c["id"].as_str().unwrap()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}

#[test]
fn matrix_to_file() {
    let path = std::env::temp_dir().join(format!("shelflab-matrix-{}.csv", std::process::id()));
    let o = shelflab(&["matrix", "--n", "4", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        rows,
        [
            "0.5,0,0,0.5",
            "0.25,0.25,0.25,0.25",
            "0.125,0.375,0.375,0.125",
            "0.125,0.375,0.375,0.125"
        ]
    );
}
