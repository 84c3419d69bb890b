//! Reproducible experiments on shelf shuffles: position matrices, guessing
//! tables and verification sweeps, rendered as CSV or JSON.
//!
//! Output depends only on the command, its arguments and the seed, so two
//! runs of the same build produce identical bytes.

pub mod tables;
pub mod verify;

use std::fmt::Write as _;

use serde_json::{json, Value};
use shelflab_core::position_matrix;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SEED: u64 = 7;
/// Largest deck the `matrix` and `nofeedback-table` commands build.
pub const MATRIX_LIMIT: usize = 512;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Matrix {
        n: usize,
    },
    NoFeedbackTable {
        ns: Vec<usize>,
    },
    FeedbackTable {
        n: usize,
        shelves: Vec<usize>,
        trials: u64,
    },
    Verify {
        n_max: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    pub format: Format,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        ExperimentConfig {
            command,
            seed: DEFAULT_SEED,
            format: Format::Csv,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match &self.command {
            Command::Matrix { n } if !(1..=MATRIX_LIMIT).contains(n) => {
                Err(format!("--n must lie in 1..={MATRIX_LIMIT}"))
            }
            Command::NoFeedbackTable { ns } if ns.is_empty() => Err("--ns is empty".into()),
            Command::FeedbackTable { shelves, .. } if shelves.is_empty() => {
                Err("--shelves is empty".into())
            }
            Command::FeedbackTable { trials: 0, .. } => Err("--trials must be at least 1".into()),
            Command::FeedbackTable { n: 0, .. } => Err("--n must be at least 1".into()),
            Command::Verify { n_max } if *n_max < 3 => Err("--n-max must be at least 3".into()),
            _ => Ok(()),
        }
    }

    /// The invocation in canonical form, as recorded in output headers.
    pub fn command_line(&self) -> String {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut s = match &self.command {
            Command::Matrix { n } => format!("shelflab matrix --n {n}"),
            Command::NoFeedbackTable { ns } => {
                format!("shelflab nofeedback-table --ns {}", list(ns))
            }
            Command::FeedbackTable { n, shelves, trials } => format!(
                "shelflab feedback-table --n {n} --shelves {} --trials {trials}",
                list(shelves)
            ),
            Command::Verify { n_max } => format!("shelflab verify --n-max {n_max}"),
        };
        write!(s, " --seed {}", self.seed).unwrap();
        if self.format == Format::Json {
            s.push_str(" --json");
        }
        s
    }

    fn csv_header(&self) -> String {
        format!(
            "# shelflab {VERSION}\n# seed: {}\n# command: {}\n",
            self.seed,
            self.command_line()
        )
    }

    fn json_meta(&self) -> Value {
        json!({
            "tool": "shelflab",
            "version": VERSION,
            "seed": self.seed,
            "command": self.command_line(),
        })
    }

    /// Wraps CSV lines or JSON rows with the provenance header.
    fn render(
        &self,
        csv_body: impl FnOnce() -> String,
        json_body: impl FnOnce() -> Value,
    ) -> String {
        match self.format {
            Format::Csv => self.csv_header() + &csv_body(),
            Format::Json => {
                let mut v = self.json_meta();
                let body = json_body();
                if let (Value::Object(m), Value::Object(b)) = (&mut v, body) {
                    m.extend(b);
                }
                serde_json::to_string_pretty(&v).unwrap() + "\n"
            }
        }
    }
}

/// A command's output file plus what went wrong, if anything.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub text: String,
    pub ok: bool,
    /// One line per failure, for stderr.
    pub errors: Vec<String>,
}

pub fn run(cfg: &ExperimentConfig) -> Artifact {
    if let Err(e) = cfg.validate() {
        return Artifact {
            text: String::new(),
            ok: false,
            errors: vec![e],
        };
    }
    match &cfg.command {
        Command::Matrix { n } => run_matrix(cfg, *n),
        Command::NoFeedbackTable { ns } => tables::run_nofeedback(cfg, ns),
        Command::FeedbackTable { n, shelves, trials } => {
            tables::run_feedback(cfg, *n, shelves, *trials)
        }
        Command::Verify { n_max } => verify::run(cfg, &verify::VerifyOptions::new(*n_max)),
    }
}

fn run_matrix(cfg: &ExperimentConfig, n: usize) -> Artifact {
    match position_matrix(n) {
        Ok(m) => Artifact {
            text: cfg.render(|| m.to_csv(), || json!({ "matrix": m.to_json() })),
            ok: true,
            errors: Vec::new(),
        },
        Err(e) => Artifact {
            text: String::new(),
            ok: false,
            errors: vec![e.to_string()],
        },
    }
}
