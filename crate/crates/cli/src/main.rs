use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shelflab::{run, Command, ExperimentConfig, Format, DEFAULT_SEED};
use shelflab_service::ServiceConfig;

#[derive(Parser)]
#[command(name = "shelflab", version, about = "Shelf shuffle experiments")]
struct Cli {
    /// Seed for random streams, recorded in every output header.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Emit JSON instead of CSV.
    #[arg(long, global = true)]
    json: bool,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact one-shelf position matrix.
    Matrix {
        #[arg(long)]
        n: usize,
    },
    /// Expected correct guesses without feedback, with the asymptotic estimate.
    NofeedbackTable {
        #[arg(long, value_delimiter = ',', default_value = "10,21,33,52")]
        ns: Vec<usize>,
    },
    /// Simulated correct guesses with complete feedback per shelf count.
    FeedbackTable {
        #[arg(long, default_value_t = 52)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,10,20,40")]
        shelves: Vec<usize>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
    },
    /// Run the verification sweeps; exits non-zero if a proven check fails.
    Verify {
        #[arg(long, default_value_t = 52)]
        n_max: usize,
    },
    /// Start the HTTP game service.
    Serve {
        /// Defaults to SHELFLAB_PORT, then 8080.
        #[arg(long)]
        port: Option<u16>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Matrix { n } => Command::Matrix { n },
        Cmd::NofeedbackTable { ns } => Command::NoFeedbackTable { ns },
        Cmd::FeedbackTable { n, shelves, trials } => Command::FeedbackTable { n, shelves, trials },
        Cmd::Verify { n_max } => Command::Verify { n_max },
        Cmd::Serve { port } => return serve(port),
    };
    let cfg = ExperimentConfig {
        command,
        seed: cli.seed,
        format: if cli.json { Format::Json } else { Format::Csv },
    };
    let artifact = run(&cfg);
    if !artifact.text.is_empty() {
        let written = match &cli.out {
            Some(path) => std::fs::write(path, &artifact.text),
            None => {
                print!("{}", artifact.text);
                Ok(())
            }
        };
        if let Err(e) = written {
            eprintln!("error: cannot write output: {e}");
            return ExitCode::FAILURE;
        }
    }
    for e in &artifact.errors {
        eprintln!("error: {e}");
    }
    if artifact.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn serve(port: Option<u16>) -> ExitCode {
    tracing_subscriber::fmt::init();
    let mut cfg = match ServiceConfig::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Some(p) = port {
        cfg.port = p;
    }
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match rt.block_on(shelflab_service::serve(cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
