//! The guessing-reward tables.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use shelflab_core::feedback::{harmonic_estimate, harmonic_reliable};
use shelflab_core::nofeedback::{asymptotic_estimate, expected_reward_nofeedback, table_estimate};
use shelflab_core::simulate::{simulate_games, SimulationConfig, Strategy};

use crate::{Artifact, ExperimentConfig, MATRIX_LIMIT};

/// Upper bound on `n^2 * shelves * trials` for posterior simulations
/// (about ten minutes on one core).
pub const FEEDBACK_WORK_LIMIT: f64 = 4e11;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoFeedbackRow {
    pub n: usize,
    /// `E(n)` as an exact decimal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_exact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    /// The estimate with `2Φ(1) - 1` rounded to 0.68, as tabulated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptotic_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn nofeedback_row(n: usize) -> NoFeedbackRow {
    let mut row = NoFeedbackRow {
        n,
        expected_exact: None,
        expected: None,
        table_estimate: None,
        asymptotic_estimate: None,
        error: None,
    };
    if !(2..=MATRIX_LIMIT).contains(&n) {
        row.error = Some(format!("n must lie in 2..={MATRIX_LIMIT}"));
        return row;
    }
    match expected_reward_nofeedback(n) {
        Ok(e) => {
            row.expected_exact = Some(e.to_decimal_exact());
            row.expected = Some(e.to_f64());
            row.table_estimate = Some(table_estimate(n));
            row.asymptotic_estimate = Some(asymptotic_estimate(n));
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn opt2(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.2}")).unwrap_or_default()
}

pub fn run_nofeedback(cfg: &ExperimentConfig, ns: &[usize]) -> Artifact {
    let rows: Vec<NoFeedbackRow> = ns.par_iter().map(|&n| nofeedback_row(n)).collect();
    let errors: Vec<String> = rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("n={}: {e}", r.n)))
        .collect();
    let text = cfg.render(
        || {
            let mut s = String::from("n,expected,table_estimate,asymptotic_estimate,error\n");
            for r in &rows {
                writeln!(
                    s,
                    "{},{},{},{},{}",
                    r.n,
                    opt2(r.expected),
                    opt2(r.table_estimate),
                    opt2(r.asymptotic_estimate),
                    r.error.as_deref().unwrap_or("")
                )
                .unwrap();
            }
            s
        },
        || json!({ "rows": rows }),
    );
    Artifact {
        text,
        ok: errors.is_empty(),
        errors,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeedbackRow {
    pub n: usize,
    pub shelves: usize,
    pub harmonic_estimate: f64,
    /// Whether piles are large enough for the estimate to mean much.
    pub reliable: bool,
    pub strategy: String,
    /// The strategy is a heuristic rather than a proven optimum.
    pub heuristic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub trials: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn feedback_row(n: usize, shelves: usize, trials: u64, seed: u64) -> FeedbackRow {
    let strategy = Strategy::feedback_for(shelves.max(1));
    let mut row = FeedbackRow {
        n,
        shelves,
        harmonic_estimate: harmonic_estimate(n, shelves),
        reliable: harmonic_reliable(n, shelves),
        strategy: strategy.id(),
        heuristic: strategy != Strategy::OptimalFeedback,
        mean: None,
        stderr: None,
        trials,
        error: None,
    };
    let work = (n * n) as f64 * shelves as f64 * trials as f64;
    if shelves > 1 && work > FEEDBACK_WORK_LIMIT {
        row.error = Some(format!(
            "resource limit: n^2 * shelves * trials = {work:.3e} exceeds {FEEDBACK_WORK_LIMIT:.0e}"
        ));
        return row;
    }
    match simulate_games(&SimulationConfig::new(n, shelves, strategy, trials, seed)) {
        Ok(r) => {
            row.mean = Some(r.mean);
            row.stderr = Some(r.stderr);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

pub fn run_feedback(cfg: &ExperimentConfig, n: usize, shelves: &[usize], trials: u64) -> Artifact {
    // Each simulation is already parallel inside.
    let rows: Vec<FeedbackRow> = shelves
        .iter()
        .map(|&m| feedback_row(n, m, trials, cfg.seed))
        .collect();
    let errors: Vec<String> = rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("m={}: {e}", r.shelves)))
        .collect();
    let text = cfg.render(
        || {
            let mut s = String::from("n,m,harmonic_estimate,mean,stderr,strategy,reliable,error\n");
            for r in &rows {
                writeln!(
                    s,
                    "{},{},{:.2},{},{},{},{},{}",
                    r.n,
                    r.shelves,
                    r.harmonic_estimate,
                    opt2(r.mean),
                    r.stderr.map(|v| format!("{v:.4}")).unwrap_or_default(),
                    r.strategy,
                    r.reliable,
                    r.error.as_deref().unwrap_or("")
                )
                .unwrap();
            }
            s
        },
        || json!({ "rows": rows }),
    );
    Artifact {
        text,
        ok: errors.is_empty(),
        errors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_card_row() {
        let r = nofeedback_row(2);
        assert_eq!(r.expected, Some(1.0));
        assert!(r.error.is_none());
    }

    #[test]
    fn bad_rows_carry_errors() {
        assert!(nofeedback_row(1).error.is_some());
        assert!(nofeedback_row(MATRIX_LIMIT + 1).error.is_some());
    }

    #[test]
    fn huge_posterior_runs_are_refused() {
        let r = feedback_row(512, 256, 1_000_000, 1);
        assert!(r.error.unwrap().contains("resource limit"));
        assert!(r.mean.is_none());
    }

    #[test]
    fn four_card_feedback_mean() {
        let r = feedback_row(4, 1, 100_000, 7);
        let mean = r.mean.unwrap();
        assert!((mean - 3.0).abs() < 0.05, "{mean}");
    }
}
