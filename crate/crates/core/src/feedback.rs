//! Guessing with complete feedback: every guessed position is turned face
//! up before the next guess.
//!
//! For a one-shelf deck the revealed cards climb until card `n - 1` or `n`
//! shows up (the stopping time tau). After that the rest of the deck is
//! forced: `n` if it is still hidden, then the hidden cards below the last
//! pre-tau card in descending order.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::combin::pascal_row;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::shuffle::{for_each_outcome, Permutation, Shuffler};

/// Largest deck [`enumerated_feedback_reward`] will enumerate.
pub const FEEDBACK_ENUMERATION_LIMIT: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    NoFeedback,
    CompleteFeedback,
}

impl Mode {
    pub fn id(self) -> &'static str {
        match self {
            Mode::NoFeedback => "no-feedback",
            Mode::CompleteFeedback => "complete-feedback",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no-feedback" => Ok(Mode::NoFeedback),
            "complete-feedback" => Ok(Mode::CompleteFeedback),
            _ => Err(Error::input(format!("unknown mode {s:?}"))),
        }
    }
}

/// Which card to guess when the last revealed card is `n - 2` and both
/// `n - 1` and `n` succeed with probability 1/2.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    #[default]
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TauHit {
    /// 1-based position where `n - 1` or `n` first appeared.
    pub position: usize,
    pub card: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GameState {
    n: usize,
    shelves: usize,
    mode: Mode,
    guesses: Vec<usize>,
    /// Cards turned face up, in position order. Empty until the end in
    /// no-feedback mode.
    revealed: Vec<usize>,
    tau_hit: Option<TauHit>,
    score: usize,
    #[serde(skip)]
    seen: Vec<bool>,
    // Largest card not yet revealed, or 0.
    #[serde(skip)]
    top_unseen: usize,
}

impl GameState {
    pub fn new(n: usize, shelves: usize, mode: Mode) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("deck must have at least one card"));
        }
        if shelves == 0 {
            return Err(Error::input("shelf count must be at least 1"));
        }
        Ok(GameState {
            n,
            shelves,
            mode,
            guesses: Vec::with_capacity(n),
            revealed: Vec::with_capacity(n),
            tau_hit: None,
            score: 0,
            seen: vec![false; n + 1],
            top_unseen: n,
        })
    }

    pub fn reset(&mut self) {
        self.guesses.clear();
        self.revealed.clear();
        self.tau_hit = None;
        self.score = 0;
        self.seen.iter_mut().for_each(|s| *s = false);
        self.top_unseen = self.n;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shelves(&self) -> usize {
        self.shelves
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn guesses(&self) -> &[usize] {
        &self.guesses
    }

    pub fn revealed(&self) -> &[usize] {
        &self.revealed
    }

    pub fn tau_hit(&self) -> Option<TauHit> {
        self.tau_hit
    }

    pub fn score(&self) -> usize {
        self.score
    }

    /// 1-based position of the next guess.
    pub fn position(&self) -> usize {
        self.guesses.len() + 1
    }

    pub fn is_finished(&self) -> bool {
        self.guesses.len() == self.n
    }

    pub fn is_revealed(&self, card: usize) -> bool {
        self.seen.get(card).copied().unwrap_or(false)
    }

    /// Largest card not yet turned face up.
    pub fn top_unseen(&self) -> Option<usize> {
        (self.top_unseen > 0).then_some(self.top_unseen)
    }

    fn check_card(&self, card: usize) -> Result<()> {
        if card == 0 || card > self.n {
            return Err(Error::input(format!("card {card} outside 1..={}", self.n)));
        }
        Ok(())
    }

    fn check_open(&self) -> Result<()> {
        if self.is_finished() {
            return Err(Error::state("game is finished"));
        }
        Ok(())
    }

    /// Records `guess` for the current position and turns `actual` face up.
    /// Returns whether the guess was right.
    pub fn submit_feedback(&mut self, guess: usize, actual: usize) -> Result<bool> {
        if self.mode != Mode::CompleteFeedback {
            return Err(Error::state("feedback submitted to a no-feedback game"));
        }
        self.check_open()?;
        self.check_card(guess)?;
        self.check_card(actual)?;
        if self.seen[actual] {
            return Err(Error::state(format!("card {actual} already revealed")));
        }
        let position = self.position();
        self.guesses.push(guess);
        self.reveal(actual);
        if self.tau_hit.is_none() && actual + 1 >= self.n {
            self.tau_hit = Some(TauHit {
                position,
                card: actual,
            });
        }
        let correct = guess == actual;
        self.score += usize::from(correct);
        Ok(correct)
    }

    fn reveal(&mut self, card: usize) {
        self.seen[card] = true;
        self.revealed.push(card);
        while self.top_unseen > 0 && self.seen[self.top_unseen] {
            self.top_unseen -= 1;
        }
    }

    /// Records a guess without revealing anything.
    pub fn submit_blind(&mut self, guess: usize) -> Result<()> {
        if self.mode != Mode::NoFeedback {
            return Err(Error::state("blind guess submitted to a feedback game"));
        }
        self.check_open()?;
        self.check_card(guess)?;
        self.guesses.push(guess);
        Ok(())
    }

    /// Scores a finished no-feedback game against the hidden deck and
    /// reveals it.
    pub fn settle_blind(&mut self, hidden: &Permutation) -> Result<usize> {
        if self.mode != Mode::NoFeedback {
            return Err(Error::state("only no-feedback games are settled"));
        }
        if !self.is_finished() {
            return Err(Error::state("game is not finished"));
        }
        if hidden.n() != self.n {
            return Err(Error::input("hidden deck has the wrong size"));
        }
        if !self.revealed.is_empty() {
            return Ok(self.score);
        }
        self.score = self
            .guesses
            .iter()
            .zip(hidden.cards())
            .filter(|(g, c)| g == c)
            .count();
        for &c in hidden.cards() {
            self.reveal(c);
        }
        Ok(self.score)
    }
}

/// `P(r_{j+1} = i | r_j = k, tau > j) = (1{k < i <= n} + 1{i = n}) / 2^(i-k)`.
pub fn conditional_transition(n: usize, k: usize, i: usize) -> Result<Dyadic> {
    if k == 0 || i == 0 || i > n {
        return Err(Error::input(format!("cards must lie in 1..={n}")));
    }
    if k + 1 >= n {
        return Err(Error::state("after tau the next card is deterministic"));
    }
    if i <= k {
        return Ok(Dyadic::zero());
    }
    let num = 1 + i64::from(i == n);
    Ok(Dyadic::new(num, (i - k) as u32))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TauStat {
    pub n: usize,
    /// `pmf[k - 1] = P(tau = k)` for `k = 1..n-1`.
    pub pmf: Vec<Dyadic>,
}

impl TauStat {
    pub fn p(&self, k: usize) -> Dyadic {
        if k == 0 {
            return Dyadic::zero();
        }
        self.pmf.get(k - 1).cloned().unwrap_or_default()
    }

    pub fn mean(&self) -> Dyadic {
        self.pmf
            .iter()
            .enumerate()
            .map(|(i, p)| p * &Dyadic::from_int(i as i64 + 1))
            .sum()
    }
}

/// `tau - 1 ~ Binomial(n - 2, 1/2)`.
pub fn tau_pmf(n: usize) -> Result<TauStat> {
    if n < 2 {
        return Err(Error::input("tau needs n >= 2"));
    }
    let exp = (n - 2) as u32;
    let pmf = pascal_row(n as u64 - 2)
        .into_iter()
        .map(|c| Dyadic::new(BigInt::from(c), exp))
        .collect();
    Ok(TauStat { n, pmf })
}

/// The hidden cards below the last revealed card, descending.
pub fn k_sequence(revealed: &[usize], n: usize) -> Result<Vec<usize>> {
    if revealed.iter().any(|&c| c == 0 || c > n) {
        return Err(Error::input(format!("cards must lie in 1..={n}")));
    }
    if revealed.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::state("revealed cards are not increasing"));
    }
    let Some(&last) = revealed.last() else {
        return Ok(Vec::new());
    };
    let mut gaps = Vec::with_capacity(last);
    let mut it = revealed.iter().rev().peekable();
    for c in (1..=last).rev() {
        if it.peek() == Some(&&c) {
            it.next();
        } else {
            gaps.push(c);
        }
    }
    Ok(gaps)
}

/// The optimal one-shelf guess: card 1 first, then one above the last
/// revealed card until tau, then the largest hidden card.
pub fn next_guess(state: &GameState, tie: TieBreak) -> Result<usize> {
    if state.mode != Mode::CompleteFeedback {
        return Err(Error::state("next_guess needs complete feedback"));
    }
    if state.shelves != 1 {
        return Err(Error::state("next_guess covers one-shelf decks only"));
    }
    state.check_open()?;
    let Some(&last) = state.revealed.last() else {
        return Ok(1);
    };
    if state.tau_hit.is_some() {
        return Ok(state.top_unseen);
    }
    let n = state.n;
    Ok(if last + 2 == n && tie == TieBreak::Upper {
        n
    } else {
        last + 1
    })
}

/// Plays the optimal strategy against `hidden`, reusing `state`.
pub fn play_optimal(state: &mut GameState, hidden: &Permutation, tie: TieBreak) -> Result<usize> {
    state.reset();
    for &card in hidden.cards() {
        let g = next_guess(state, tie)?;
        state.submit_feedback(g, card)?;
    }
    Ok(state.score)
}

/// `3n / 4`.
pub fn expected_reward_feedback(n: usize) -> Result<Dyadic> {
    if n < 2 {
        return Err(Error::input("reward formula needs n >= 2"));
    }
    Ok(Dyadic::new(3 * n as i64, 2))
}

/// Mean optimal score over all `2^n` equally likely choice vectors.
pub fn enumerated_feedback_reward(n: usize, tie: TieBreak) -> Result<Dyadic> {
    if n > FEEDBACK_ENUMERATION_LIMIT {
        return Err(Error::Resource {
            what: "feedback enumeration",
            required: format!("2^{n} outcomes"),
            limit: format!("n <= {FEEDBACK_ENUMERATION_LIMIT}"),
        });
    }
    let mut state = GameState::new(n, 1, Mode::CompleteFeedback)?;
    let mut total: u64 = 0;
    let mut err = None;
    for_each_outcome(n, Shuffler::SingleShelf, |p| {
        match play_optimal(&mut state, p, tie) {
            Ok(s) => total += s as u64,
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(Dyadic::new(total as i64, n as u32))
}

/// `(n / 2m) H_{2m}`.
pub fn harmonic_estimate(n: usize, m: usize) -> f64 {
    let h: f64 = (1..=2 * m).map(|k| 1.0 / k as f64).sum();
    n as f64 / (2 * m) as f64 * h
}

/// Whether the average pile holds at least two cards, below which the
/// harmonic estimate is unreliable.
pub fn harmonic_reliable(n: usize, m: usize) -> bool {
    m > 0 && n >= 4 * m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shuffle::{apply_single_shelf, ChoiceVector};
    use std::collections::BTreeMap;

    fn outcomes(n: usize) -> Vec<Permutation> {
        (0..1u64 << n)
            .map(|i| apply_single_shelf(n, &ChoiceVector::from_index(n, i)).unwrap())
            .collect()
    }

    #[test]
    fn transition_values() {
        for n in 3..=12 {
            for k in 1..n - 1 {
                assert_eq!(
                    conditional_transition(n, k, k + 1).unwrap(),
                    Dyadic::pow2_inv(1)
                );
                let total: Dyadic = (1..=n)
                    .map(|i| conditional_transition(n, k, i).unwrap())
                    .sum();
                assert_eq!(total, Dyadic::one());
            }
        }
        assert_eq!(
            conditional_transition(6, 4, 5).unwrap(),
            Dyadic::pow2_inv(1)
        );
        assert_eq!(
            conditional_transition(6, 4, 6).unwrap(),
            Dyadic::pow2_inv(1)
        );
        assert!(matches!(
            conditional_transition(6, 5, 6),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn transition_matches_enumeration() {
        // Condition on the full revealed prefix, pre-tau.
        for n in 3..=10 {
            let mut table: BTreeMap<Vec<usize>, BTreeMap<usize, u64>> = BTreeMap::new();
            for p in outcomes(n) {
                let c = p.cards();
                for j in 1..n {
                    if c[..j].iter().any(|&x| x + 1 >= n) {
                        break;
                    }
                    *table
                        .entry(c[..j].to_vec())
                        .or_default()
                        .entry(c[j])
                        .or_default() += 1;
                }
            }
            for (prefix, next) in table {
                let k = *prefix.last().unwrap();
                let total: u64 = next.values().sum();
                for i in 1..=n {
                    let seen = Dyadic::from_int(*next.get(&i).unwrap_or(&0) as i64).to_rational()
                        / num_rational::BigRational::from_integer(total.into());
                    assert_eq!(seen, conditional_transition(n, k, i).unwrap().to_rational());
                }
            }
        }
    }

    #[test]
    fn tau_law() {
        assert_eq!(tau_pmf(2).unwrap().pmf, vec![Dyadic::one()]);
        assert_eq!(
            tau_pmf(4).unwrap().pmf,
            vec![
                Dyadic::pow2_inv(2),
                Dyadic::pow2_inv(1),
                Dyadic::pow2_inv(2)
            ]
        );
        for n in 2..=200 {
            let t = tau_pmf(n).unwrap();
            assert_eq!(t.pmf.iter().sum::<Dyadic>(), Dyadic::one());
            assert_eq!(t.mean(), Dyadic::new(n as i64, 1));
        }
        assert!(tau_pmf(1).is_err());
    }

    #[test]
    fn tau_law_by_enumeration() {
        for n in 2..=14 {
            let mut counts = vec![0i64; n];
            for_each_outcome(n, Shuffler::SingleShelf, |p| {
                let k = p.cards().iter().position(|&c| c + 1 >= n).unwrap() + 1;
                counts[k] += 1;
            });
            let t = tau_pmf(n).unwrap();
            for (k, &c) in counts.iter().enumerate().skip(1) {
                assert_eq!(Dyadic::new(c, n as u32), t.p(k), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn k_sequences() {
        assert_eq!(k_sequence(&[2, 4, 7], 10).unwrap(), vec![6, 5, 3, 1]);
        assert_eq!(k_sequence(&[1, 2, 3], 10).unwrap(), Vec::<usize>::new());
        assert_eq!(k_sequence(&[3], 10).unwrap(), vec![2, 1]);
        assert_eq!(k_sequence(&[], 10).unwrap(), Vec::<usize>::new());
        assert!(matches!(k_sequence(&[3, 2], 10), Err(Error::State(_))));
    }

    #[test]
    fn twenty_card_walkthrough() {
        let deck = [
            1, 2, 5, 10, 11, 19, 20, 18, 17, 16, 15, 14, 13, 12, 9, 8, 7, 6, 4, 3,
        ];
        let p = Permutation::new(deck.to_vec()).unwrap();
        let mut s = GameState::new(20, 1, Mode::CompleteFeedback).unwrap();
        play_optimal(&mut s, &p, TieBreak::Lower).unwrap();
        assert_eq!(&s.guesses()[..6], &[1, 2, 3, 6, 11, 12]);
        assert_eq!(
            &s.guesses()[6..],
            &[20, 18, 17, 16, 15, 14, 13, 12, 9, 8, 7, 6, 4, 3]
        );
        assert_eq!(
            s.tau_hit(),
            Some(TauHit {
                position: 6,
                card: 19
            })
        );
        assert_eq!(s.score(), 3 + 14);
    }

    #[test]
    fn reward_three_quarters_by_enumeration() {
        for n in 2..=14 {
            for tie in [TieBreak::Lower, TieBreak::Upper] {
                assert_eq!(
                    enumerated_feedback_reward(n, tie).unwrap(),
                    expected_reward_feedback(n).unwrap(),
                    "n={n}"
                );
            }
        }
        assert_eq!(expected_reward_feedback(52).unwrap(), Dyadic::from_int(39));
        assert_eq!(expected_reward_feedback(10).unwrap(), Dyadic::new(15, 1));
    }

    #[test]
    fn pre_tau_half_post_tau_certain() {
        for n in 3..=12 {
            let (mut pre_hits, mut pre_total, mut post_miss) = (0u64, 0u64, 0u64);
            let mut s = GameState::new(n, 1, Mode::CompleteFeedback).unwrap();
            for p in outcomes(n) {
                s.reset();
                for (j, &c) in p.cards().iter().enumerate() {
                    let g = next_guess(&s, TieBreak::Lower).unwrap();
                    let before_tau = s.tau_hit().is_none();
                    let ok = s.submit_feedback(g, c).unwrap();
                    if before_tau && j > 0 {
                        pre_total += 1;
                        pre_hits += u64::from(ok);
                    } else if !before_tau {
                        post_miss += u64::from(!ok);
                    }
                }
                let tau = s.tau_hit().unwrap().position;
                let tail = n - tau;
                assert!(s.score() >= tail);
            }
            assert_eq!(2 * pre_hits, pre_total, "n={n}");
            assert_eq!(post_miss, 0);
        }
    }

    #[test]
    fn stopped_process_shape() {
        for n in 2..=12 {
            for p in outcomes(n) {
                let c = p.cards();
                let pn = p.position_of(n);
                let pn1 = p.position_of(n - 1);
                assert_eq!(pn.abs_diff(pn1), 1);
                let tau = pn.min(pn1);
                assert!(c[..tau].windows(2).all(|w| w[0] < w[1]));
                assert!(c[pn - 1..].windows(2).all(|w| w[0] > w[1]));
            }
        }
    }

    #[test]
    fn guess_errors() {
        let mut s = GameState::new(3, 1, Mode::CompleteFeedback).unwrap();
        assert!(s.submit_feedback(1, 4).is_err());
        for c in [1, 2, 3] {
            s.submit_feedback(c, c).unwrap();
        }
        assert!(matches!(
            next_guess(&s, TieBreak::Lower),
            Err(Error::State(_))
        ));
        assert!(s.submit_feedback(1, 1).is_err());
        let mut b = GameState::new(3, 1, Mode::NoFeedback).unwrap();
        assert!(next_guess(&b, TieBreak::Lower).is_err());
        for g in [1, 1, 3] {
            b.submit_blind(g).unwrap();
        }
        assert_eq!(
            b.settle_blind(&Permutation::new(vec![1, 2, 3]).unwrap())
                .unwrap(),
            2
        );
        assert_eq!(b.revealed(), &[1, 2, 3]);
        assert!(GameState::new(3, 2, Mode::CompleteFeedback)
            .map(|s| next_guess(&s, TieBreak::Lower).is_err())
            .unwrap());
    }

    #[test]
    fn harmonic_values() {
        let got: Vec<String> = [1, 2, 4, 10, 20, 40]
            .iter()
            .map(|&m| format!("{:.2}", harmonic_estimate(52, m)))
            .collect();
        assert_eq!(got, ["39.00", "27.08", "17.67", "9.35", "5.56", "3.23"]);
        assert!(harmonic_reliable(52, 10));
        assert!(!harmonic_reliable(52, 20));
        assert!(!harmonic_reliable(52, 40));
    }

    #[test]
    fn mode_ids_round_trip() {
        for m in [Mode::NoFeedback, Mode::CompleteFeedback] {
            assert_eq!(m.id().parse::<Mode>().unwrap(), m);
            assert_eq!(serde_json::to_value(m).unwrap(), m.id());
        }
    }
}
