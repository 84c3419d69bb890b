//! Seeded Monte Carlo games.
//!
//! Trials run in blocks of [`BLOCK`]; block `b` draws from stream
//! `(seed, b)`. Blocks are independent, so the result is the same however
//! they are scheduled across threads.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feedback::{play_optimal, GameState, Mode, TieBreak};
use crate::matrix::{matrix_power, position_matrix};
use crate::nofeedback::argmax_sets;
use crate::pile::PilePosterior;
use crate::rng::RngStream;
use crate::shuffle::{fill_bits, sample_m_shelf, single_shelf_into, Permutation};

pub const BLOCK: u64 = 1024;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Card 1, then one above the last card until tau, then forced. One shelf.
    OptimalFeedback,
    /// Most probable next card under the m-shelf posterior.
    MonotonePile,
    /// Column argmax of the position matrix of the shuffle, without feedback.
    ArgmaxTable,
    /// Fixed guesses, without feedback.
    Table(Vec<usize>),
}

impl Strategy {
    pub fn id(&self) -> String {
        match self {
            Strategy::OptimalFeedback => "optimal-feedback".into(),
            Strategy::MonotonePile => "monotone-pile".into(),
            Strategy::ArgmaxTable => "argmax-table".into(),
            Strategy::Table(g) => {
                let cards: Vec<String> = g.iter().map(usize::to_string).collect();
                format!("table:{}", cards.join(","))
            }
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Strategy::OptimalFeedback | Strategy::MonotonePile => Mode::CompleteFeedback,
            Strategy::ArgmaxTable | Strategy::Table(_) => Mode::NoFeedback,
        }
    }

    /// The default complete-feedback strategy for a shelf count.
    pub fn feedback_for(shelves: usize) -> Strategy {
        if shelves == 1 {
            Strategy::OptimalFeedback
        } else {
            Strategy::MonotonePile
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal-feedback" => Ok(Strategy::OptimalFeedback),
            "monotone-pile" | "monotone-pile-heuristic" => Ok(Strategy::MonotonePile),
            "argmax-table" => Ok(Strategy::ArgmaxTable),
            _ => match s.strip_prefix("table:") {
                Some(list) => list
                    .split(',')
                    .map(|c| c.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map(Strategy::Table)
                    .map_err(|e| Error::input(format!("bad table {list:?}: {e}"))),
                None => Err(Error::input(format!("unknown strategy {s:?}"))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulationConfig {
    pub n: usize,
    pub shelves: usize,
    pub mode: Mode,
    pub strategy: Strategy,
    pub trials: u64,
    pub seed: u64,
    pub tie: TieBreak,
}

impl SimulationConfig {
    pub fn new(n: usize, shelves: usize, strategy: Strategy, trials: u64, seed: u64) -> Self {
        SimulationConfig {
            n,
            shelves,
            mode: strategy.mode(),
            strategy,
            trials,
            seed,
            tie: TieBreak::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationResult {
    pub n: usize,
    pub shelves: usize,
    pub mode: Mode,
    pub strategy: String,
    pub trials: u64,
    pub seed: u64,
    pub mean: f64,
    pub stderr: f64,
    /// `histogram[s]` counts games scoring `s`.
    pub histogram: Vec<u64>,
    /// Set for the m-shelf posterior heuristic, which is not proven optimal.
    pub experimental: bool,
}

impl SimulationResult {
    /// Percent of simulated games scoring below `score`, counting ties as half.
    pub fn percentile(&self, score: usize) -> f64 {
        let below: u64 = self.histogram.iter().take(score).sum();
        let tied = self.histogram.get(score).copied().unwrap_or(0);
        100.0 * (below as f64 + 0.5 * tied as f64) / self.trials as f64
    }
}

/// No-feedback guesses that maximize each position's marginal. Needs
/// `shelves` to be a power of two, where the position matrix is a power of
/// the one-shelf matrix.
pub fn argmax_guesses(n: usize, shelves: usize) -> Result<Vec<usize>> {
    if !shelves.is_power_of_two() {
        return Err(Error::input(format!(
            "argmax table needs a power-of-two shelf count, got {shelves}"
        )));
    }
    let power = shelves.trailing_zeros() + 1;
    let m = matrix_power(&position_matrix(n)?, power)?;
    Ok(argmax_sets(&m).chosen)
}

#[derive(Clone)]
enum Player {
    Optimal(GameState, TieBreak),
    Pile(PilePosterior),
    Fixed(Vec<usize>),
}

impl Player {
    fn play(&mut self, hidden: &Permutation) -> Result<usize> {
        match self {
            Player::Optimal(state, tie) => play_optimal(state, hidden, *tie),
            Player::Pile(post) => {
                post.reset();
                let mut score = 0;
                for &c in hidden.cards() {
                    let g = post.best().expect("cards remain");
                    score += usize::from(g == c);
                    post.observe_dealt(c);
                }
                Ok(score)
            }
            Player::Fixed(g) => Ok(g.iter().zip(hidden.cards()).filter(|(a, b)| a == b).count()),
        }
    }
}

fn validate(cfg: &SimulationConfig) -> Result<()> {
    if cfg.n == 0 {
        return Err(Error::input("deck must have at least one card"));
    }
    if cfg.shelves == 0 {
        return Err(Error::input("shelf count must be at least 1"));
    }
    if cfg.trials == 0 {
        return Err(Error::input("trials must be at least 1"));
    }
    if cfg.mode != cfg.strategy.mode() {
        return Err(Error::input(format!(
            "strategy {} does not play in {} mode",
            cfg.strategy, cfg.mode
        )));
    }
    match &cfg.strategy {
        Strategy::OptimalFeedback if cfg.shelves != 1 => Err(Error::input(
            "optimal-feedback covers one shelf; use monotone-pile for more",
        )),
        Strategy::Table(g) if g.len() != cfg.n || g.iter().any(|&c| c == 0 || c > cfg.n) => Err(
            Error::input(format!("table must list {} cards in 1..={}", cfg.n, cfg.n)),
        ),
        _ => Ok(()),
    }
}

fn make_player(cfg: &SimulationConfig) -> Result<Player> {
    Ok(match &cfg.strategy {
        Strategy::OptimalFeedback => {
            Player::Optimal(GameState::new(cfg.n, 1, Mode::CompleteFeedback)?, cfg.tie)
        }
        Strategy::MonotonePile => Player::Pile(PilePosterior::new(cfg.n, cfg.shelves)?),
        Strategy::ArgmaxTable => Player::Fixed(argmax_guesses(cfg.n, cfg.shelves)?),
        Strategy::Table(g) => Player::Fixed(g.clone()),
    })
}

/// Reusable sampler: one-shelf decks take the bit-packed fast path.
struct Dealer {
    n: usize,
    shelves: usize,
    bits: Vec<u64>,
    buf: Vec<usize>,
}

impl Dealer {
    fn new(n: usize, shelves: usize) -> Self {
        Dealer {
            n,
            shelves,
            bits: vec![0; n.div_ceil(64)],
            buf: Vec::with_capacity(n),
        }
    }

    fn deal(&mut self, rng: &mut RngStream) -> Result<Permutation> {
        if self.shelves == 1 {
            fill_bits(&mut self.bits, rng);
            single_shelf_into(self.n, &self.bits, &mut self.buf);
            Ok(Permutation::from_vec_unchecked(self.buf.clone()))
        } else {
            sample_m_shelf(self.n, self.shelves, rng)
        }
    }
}

fn blocks(trials: u64) -> impl IndexedParallelIterator<Item = (u64, u64)> {
    let count = trials.div_ceil(BLOCK) as usize;
    (0..count).into_par_iter().map(move |b| {
        let b = b as u64;
        (b, BLOCK.min(trials - b * BLOCK))
    })
}

fn merge(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    a
}

pub fn simulate_games(cfg: &SimulationConfig) -> Result<SimulationResult> {
    validate(cfg)?;
    let template = make_player(cfg)?;
    let n = cfg.n;
    let histogram = blocks(cfg.trials)
        .map(|(b, len)| -> Result<Vec<u64>> {
            let mut rng = RngStream::derive(cfg.seed, b);
            let mut player = template.clone();
            let mut dealer = Dealer::new(n, cfg.shelves);
            let mut hist = vec![0u64; n + 1];
            for _ in 0..len {
                let deck = dealer.deal(&mut rng)?;
                hist[player.play(&deck)?] += 1;
            }
            Ok(hist)
        })
        .try_reduce(|| vec![0u64; n + 1], |a, b| Ok(merge(a, b)))?;
    let (sum, sum_sq) = histogram
        .iter()
        .enumerate()
        .fold((0u128, 0u128), |(s, q), (score, &c)| {
            let score = score as u128;
            (s + score * c as u128, q + score * score * c as u128)
        });
    let t = cfg.trials as f64;
    let mean = sum as f64 / t;
    let stderr = if cfg.trials > 1 {
        let var = (sum_sq as f64 - sum as f64 * mean) / (t - 1.0);
        (var.max(0.0) / t).sqrt()
    } else {
        0.0
    };
    Ok(SimulationResult {
        n,
        shelves: cfg.shelves,
        mode: cfg.mode,
        strategy: cfg.strategy.id(),
        trials: cfg.trials,
        seed: cfg.seed,
        mean,
        stderr,
        histogram,
        experimental: cfg.strategy == Strategy::MonotonePile,
    })
}

/// Histogram of tau over one-shelf decks: `hist[k]` counts decks where
/// `n - 1` or `n` first shows at position `k`.
pub fn simulate_tau(n: usize, trials: u64, seed: u64) -> Result<Vec<u64>> {
    if n < 2 {
        return Err(Error::input("tau needs n >= 2"));
    }
    let hist = blocks(trials)
        .map(|(b, len)| {
            let mut rng = RngStream::derive(seed, b);
            let mut dealer = Dealer::new(n, 1);
            let mut hist = vec![0u64; n];
            for _ in 0..len {
                dealer.deal(&mut rng).expect("one-shelf deal");
                let k = dealer
                    .buf
                    .iter()
                    .position(|&c| c + 1 >= n)
                    .expect("n is in the deck");
                hist[k + 1] += 1;
            }
            hist
        })
        .reduce(|| vec![0u64; n], merge);
    Ok(hist)
}

/// Empirical position frequencies: `freq[i-1][j-1]` for card `i` at
/// position `j`.
pub fn position_frequencies(
    n: usize,
    shelves: usize,
    trials: u64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 || shelves == 0 || trials == 0 {
        return Err(Error::input("n, shelves and trials must be positive"));
    }
    let counts = blocks(trials)
        .map(|(b, len)| -> Result<Vec<u64>> {
            let mut rng = RngStream::derive(seed, b);
            let mut dealer = Dealer::new(n, shelves);
            let mut counts = vec![0u64; n * n];
            for _ in 0..len {
                let deck = dealer.deal(&mut rng)?;
                for (j, &c) in deck.cards().iter().enumerate() {
                    counts[(c - 1) * n + j] += 1;
                }
            }
            Ok(counts)
        })
        .try_reduce(|| vec![0u64; n * n], |a, b| Ok(merge(a, b)))?;
    Ok(counts
        .chunks(n)
        .map(|row| row.iter().map(|&c| c as f64 / trials as f64).collect())
        .collect())
}
