//! One guessing game: the hidden deck, the player's state and the rules for
//! what may be shown when.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use shelflab_core::feedback::{conditional_transition, GameState, Mode};
use shelflab_core::pile::PilePosterior;
use shelflab_core::shuffle::{sample_m_shelf, sample_single_shelf};
use shelflab_core::{Dyadic, Permutation, RngStream};

use crate::analysis::Analysis;
use crate::error::{ApiError, ApiResult};

pub const MIN_CARDS: usize = 2;
pub const MAX_CARDS: usize = 512;
pub const MAX_SHELVES: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub n: usize,
    #[serde(default = "one")]
    pub shelves: usize,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn one() -> usize {
    1
}

impl GameConfig {
    pub fn validate(&self) -> ApiResult<()> {
        if !(MIN_CARDS..=MAX_CARDS).contains(&self.n) {
            return Err(ApiError::bad_request(
                "invalid-config",
                format!("n must lie in {MIN_CARDS}..={MAX_CARDS}"),
            ));
        }
        if !(1..=MAX_SHELVES).contains(&self.shelves) {
            return Err(ApiError::bad_request(
                "invalid-config",
                format!("shelves must lie in 1..={MAX_SHELVES}"),
            ));
        }
        Ok(())
    }
}

/// A guessed position as shown to the player. `revealed` and `correct` stay
/// empty until the rules allow them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TranscriptEntry {
    pub position: usize,
    pub guess: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revealed: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    /// A hint was requested for this position before guessing.
    pub hinted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GuessOutcome {
    pub position: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revealed: Option<usize>,
    /// Running score. Withheld in no-feedback games until the end.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<usize>,
    pub finished: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_reveal: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hint {
    pub position: usize,
    pub best: Vec<usize>,
    /// Probability of each possible card at this position, keyed by card.
    pub probabilities: BTreeMap<usize, f64>,
    pub source: &'static str,
    pub heuristic: bool,
}

pub struct Session {
    id: String,
    config: GameConfig,
    seed: u64,
    hidden: Permutation,
    state: GameState,
    pile: Option<PilePosterior>,
    hinted: Vec<bool>,
    created: SystemTime,
    updated: SystemTime,
}

pub fn unix_millis(t: SystemTime) -> u64 {
    t.duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Session {
    pub fn new(id: String, config: GameConfig) -> ApiResult<Self> {
        config.validate()?;
        let seed = config.seed.unwrap_or_else(rand::random);
        let mut rng = RngStream::new(seed);
        let hidden = if config.shelves == 1 {
            sample_single_shelf(config.n, &mut rng)?
        } else {
            sample_m_shelf(config.n, config.shelves, &mut rng)?
        };
        let pile = (config.shelves > 1 && config.mode == Mode::CompleteFeedback)
            .then(|| PilePosterior::new(config.n, config.shelves))
            .transpose()?;
        let now = SystemTime::now();
        Ok(Session {
            id,
            config,
            seed,
            hidden,
            state: GameState::new(config.n, config.shelves, config.mode)?,
            pile,
            hinted: vec![false; config.n],
            created: now,
            updated: now,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> GameConfig {
        self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn created(&self) -> SystemTime {
        self.created
    }

    pub fn updated(&self) -> SystemTime {
        self.updated
    }

    pub fn is_finished(&self) -> bool {
        self.state.is_finished()
    }

    pub fn remaining(&self) -> usize {
        self.config.n - self.state.guesses().len()
    }

    /// The running score, if the player is allowed to know it.
    pub fn visible_score(&self) -> Option<usize> {
        (self.config.mode == Mode::CompleteFeedback || self.is_finished())
            .then(|| self.state.score())
    }

    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        let revealed = self.state.revealed();
        self.state
            .guesses()
            .iter()
            .enumerate()
            .map(|(i, &guess)| {
                let shown = revealed.get(i).copied();
                TranscriptEntry {
                    position: i + 1,
                    guess,
                    revealed: shown,
                    correct: shown.map(|c| c == guess),
                    hinted: self.hinted[i],
                }
            })
            .collect()
    }

    pub fn guess(&mut self, card: usize) -> ApiResult<GuessOutcome> {
        if self.is_finished() {
            return Err(ApiError::conflict("finished", "game is finished"));
        }
        let n = self.config.n;
        if card == 0 || card > n {
            return Err(ApiError::bad_request(
                "card-out-of-range",
                format!("card must lie in 1..={n}"),
            ));
        }
        let position = self.state.position();
        self.updated = SystemTime::now();
        let (correct, revealed) = match self.config.mode {
            Mode::CompleteFeedback => {
                if self.state.is_revealed(card) {
                    return Err(ApiError::bad_request(
                        "card-revealed",
                        format!("card {card} is already face up"),
                    ));
                }
                let actual = self.hidden.card_at(position);
                let correct = self.state.submit_feedback(card, actual)?;
                if let Some(pile) = &mut self.pile {
                    pile.observe(actual)?;
                }
                (Some(correct), Some(actual))
            }
            Mode::NoFeedback => {
                self.state.submit_blind(card)?;
                if self.state.is_finished() {
                    self.state.settle_blind(&self.hidden)?;
                }
                (None, None)
            }
        };
        let finished = self.is_finished();
        Ok(GuessOutcome {
            position,
            correct,
            revealed,
            score: self.visible_score(),
            finished,
            final_reveal: finished.then(|| self.hidden.cards().to_vec()),
        })
    }

    pub fn hint(&mut self, analysis: &Analysis) -> ApiResult<Hint> {
        if self.is_finished() {
            return Err(ApiError::conflict("finished", "game is finished"));
        }
        let position = self.state.position();
        let hint = match self.config.mode {
            Mode::NoFeedback => self.table_hint(analysis, position)?,
            Mode::CompleteFeedback => match &self.pile {
                Some(pile) => pile_hint(pile, position),
                None => self.one_shelf_hint(position)?,
            },
        };
        self.hinted[position - 1] = true;
        self.updated = SystemTime::now();
        Ok(hint)
    }

    fn table_hint(&self, analysis: &Analysis, position: usize) -> ApiResult<Hint> {
        let t = analysis.nofeedback_table(self.config.n, self.config.shelves)?;
        let probabilities = t
            .matrix
            .column(position)
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(i, p)| (i + 1, p.to_f64()))
            .collect();
        Ok(Hint {
            position,
            best: t.table.best_set(position).to_vec(),
            probabilities,
            source: "argmax-table",
            heuristic: false,
        })
    }

    fn one_shelf_hint(&self, position: usize) -> ApiResult<Hint> {
        let n = self.config.n;
        if self.state.tau_hit().is_some() {
            // Forced: the largest card still face down.
            let card = self
                .state
                .top_unseen()
                .ok_or_else(|| ApiError::internal("no card left to predict"))?;
            return Ok(Hint {
                position,
                best: vec![card],
                probabilities: BTreeMap::from([(card, 1.0)]),
                source: "k-sequence",
                heuristic: false,
            });
        }
        let k = self.state.revealed().last().copied().unwrap_or(0);
        let dist: Vec<(usize, Dyadic)> = if k == 0 {
            // Nothing revealed yet: card i is on top with probability
            // 2^-i, doubled for i = n.
            (1..=n)
                .map(|i| (i, Dyadic::new(1 + i64::from(i == n), i as u32)))
                .collect()
        } else {
            (k + 1..=n)
                .map(|i| Ok((i, conditional_transition(n, k, i)?)))
                .collect::<ApiResult<_>>()?
        };
        let top = dist
            .iter()
            .map(|(_, p)| p)
            .max()
            .cloned()
            .unwrap_or_default();
        Ok(Hint {
            position,
            best: dist
                .iter()
                .filter(|(_, p)| *p == top)
                .map(|&(i, _)| i)
                .collect(),
            probabilities: dist.iter().map(|(i, p)| (*i, p.to_f64())).collect(),
            source: "conditional-transition",
            heuristic: false,
        })
    }
}

fn pile_hint(pile: &PilePosterior, position: usize) -> Hint {
    Hint {
        position,
        best: pile.best_set(),
        probabilities: pile
            .distribution()
            .into_iter()
            .filter(|&(_, p)| p > 0.0)
            .collect(),
        source: "monotone-pile",
        heuristic: true,
    }
}
