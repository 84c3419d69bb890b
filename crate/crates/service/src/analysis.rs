//! Derived quantities shared across sessions, computed on demand and cached.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use shelflab_core::feedback::{
    expected_reward_feedback, harmonic_estimate, harmonic_reliable, Mode,
};
use shelflab_core::matrix::matrix_power;
use shelflab_core::nofeedback::{argmax_sets, column_maxima, StrategyTable};
use shelflab_core::simulate::{simulate_games, SimulationConfig, SimulationResult, Strategy};
use shelflab_core::{position_matrix, Dyadic, ExactMatrix};

use crate::error::{ApiError, ApiResult};

/// Largest deck for which a no-feedback table is built when the shelf count
/// is above one (the position matrix is then a matrix power).
pub const POWER_TABLE_LIMIT: usize = 100;

/// Games simulated for the percentile in a session summary.
pub const PERCENTILE_TRIALS: u64 = 4096;

/// Fixed seed for percentile simulations, so summaries are reproducible.
pub const PERCENTILE_SEED: u64 = 0x5eed;

// Posterior simulations cost about n^2 * shelves per game; above this the
// percentile is left out.
const PILE_WORK_LIMIT: usize = 52 * 52 * 40 * 4;

/// Exact no-feedback position marginals and their argmax sets.
pub struct NoFeedbackTable {
    pub matrix: ExactMatrix,
    pub table: StrategyTable,
    pub maxima: Vec<Dyadic>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Expectation {
    pub n: usize,
    pub shelves: usize,
    pub mode: Mode,
    pub value: f64,
    /// Exact value when one is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    pub source: &'static str,
    /// Set when the value is a conjectured estimate, not a theorem.
    pub heuristic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reliable: Option<bool>,
}

type SimCache = HashMap<(usize, usize, Mode), Option<Arc<SimulationResult>>>;

#[derive(Default)]
pub struct Analysis {
    tables: Mutex<HashMap<(usize, usize), Arc<NoFeedbackTable>>>,
    sims: Mutex<SimCache>,
}

impl Analysis {
    pub fn nofeedback_table(&self, n: usize, shelves: usize) -> ApiResult<Arc<NoFeedbackTable>> {
        if let Some(t) = self.tables.lock().unwrap().get(&(n, shelves)) {
            return Ok(t.clone());
        }
        if !shelves.is_power_of_two() {
            return Err(ApiError::bad_request(
                "unsupported",
                format!("no-feedback marginals need a power-of-two shelf count, got {shelves}"),
            ));
        }
        if shelves > 1 && n > POWER_TABLE_LIMIT {
            return Err(ApiError::bad_request(
                "unsupported",
                format!(
                    "no-feedback marginals for {shelves} shelves need n <= {POWER_TABLE_LIMIT}"
                ),
            ));
        }
        let one = position_matrix(n)?;
        let matrix = if shelves == 1 {
            one
        } else {
            matrix_power(&one, shelves.trailing_zeros() + 1)?
        };
        let table = argmax_sets(&matrix);
        let maxima = column_maxima(&matrix);
        let t = Arc::new(NoFeedbackTable {
            matrix,
            table,
            maxima,
        });
        self.tables.lock().unwrap().insert((n, shelves), t.clone());
        Ok(t)
    }

    pub fn expectation(&self, n: usize, shelves: usize, mode: Mode) -> ApiResult<Expectation> {
        let base = Expectation {
            n,
            shelves,
            mode,
            value: 0.0,
            exact: None,
            source: "",
            heuristic: false,
            reliable: None,
        };
        Ok(match (mode, shelves) {
            (Mode::CompleteFeedback, 1) => {
                let e = expected_reward_feedback(n)?;
                Expectation {
                    value: e.to_f64(),
                    exact: Some(e.to_decimal_exact()),
                    source: "3n/4",
                    ..base
                }
            }
            (Mode::CompleteFeedback, m) => Expectation {
                value: harmonic_estimate(n, m),
                source: "harmonic-estimate",
                heuristic: true,
                reliable: Some(harmonic_reliable(n, m)),
                ..base
            },
            (Mode::NoFeedback, m) => {
                let t = self.nofeedback_table(n, m)?;
                let e: Dyadic = t.maxima.iter().sum();
                Expectation {
                    value: e.to_f64(),
                    exact: Some(e.to_decimal_exact()),
                    source: "column-maxima",
                    ..base
                }
            }
        })
    }

    /// Simulated score distribution of the default strategy for a
    /// configuration, or `None` when that would be too slow.
    pub fn simulation(
        &self,
        n: usize,
        shelves: usize,
        mode: Mode,
    ) -> ApiResult<Option<Arc<SimulationResult>>> {
        if let Some(r) = self.sims.lock().unwrap().get(&(n, shelves, mode)) {
            return Ok(r.clone());
        }
        let strategy = match mode {
            Mode::CompleteFeedback if shelves == 1 => Some(Strategy::OptimalFeedback),
            Mode::CompleteFeedback if n * n * shelves <= PILE_WORK_LIMIT => {
                Some(Strategy::MonotonePile)
            }
            Mode::NoFeedback if self.nofeedback_table(n, shelves).is_ok() => {
                Some(Strategy::ArgmaxTable)
            }
            _ => None,
        };
        let result = match strategy {
            Some(s) => {
                let cfg = SimulationConfig::new(n, shelves, s, PERCENTILE_TRIALS, PERCENTILE_SEED);
                Some(Arc::new(simulate_games(&cfg)?))
            }
            None => None,
        };
        self.sims
            .lock()
            .unwrap()
            .insert((n, shelves, mode), result.clone());
        Ok(result)
    }
}
