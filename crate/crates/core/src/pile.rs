//! Next-card posterior for an m-shelf deck under complete feedback.
//!
//! An m-shelf shuffle gives every card one of `L = 2m` equally likely
//! labels: shelf `s` top is label `2s - 1`, shelf `s` bottom is label `2s`.
//! The deck is the label classes in order, odd classes ascending and even
//! classes descending. So the probability of a revealed prefix is a sum over
//! the label `l` of its last card:
//!
//! ```text
//! dp[l] * (L - l + 1)^a * (L - l)^(u - a)
//! ```
//!
//! where `u` cards are still hidden and `a` of them could still join class
//! `l` (above the last card for odd `l`, below it for even `l`). `dp` counts
//! labelings of the prefix.
//!
//! Counts and weights are kept as plain floats scaled by powers of `L` when
//! `n ln L` is small enough that nothing underflows, and in log space
//! otherwise.

use crate::error::{Error, Result};

/// Relative tolerance under which two candidate probabilities tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

// Above this, L^-n may underflow and the posterior switches to log space.
const LINEAR_BUDGET: f64 = 600.0;

// Contributions this far below the largest term cannot move the argmax.
const NEGLIGIBLE: f64 = 1e-300;

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[derive(Clone, Debug)]
enum Repr {
    /// `dp[l] / L^j` after `j` reveals, `pw[k * (n + 1) + e] = (k / L)^e`
    /// and `rev[k * (n + 1) + e] = (k / L)^(n - e)`.
    Linear {
        dp: Vec<f64>,
        pw: Vec<f64>,
        rev: Vec<f64>,
    },
    /// `ln dp[l]`, and `ratio[f * (n + 1) + e] = (f / (f + 1))^e`.
    Log {
        dp: Vec<f64>,
        ratio: Vec<f64>,
        ln: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct PilePosterior {
    n: usize,
    labels: usize,
    seen: Vec<bool>,
    hidden: usize,
    last: usize,
    repr: Repr,
}

impl PilePosterior {
    pub fn new(n: usize, shelves: usize) -> Result<Self> {
        let linear = n as f64 * ((2 * shelves.max(1)) as f64).ln() <= LINEAR_BUDGET;
        Self::build(n, shelves, linear)
    }

    fn build(n: usize, shelves: usize, linear: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("deck must have at least one card"));
        }
        if shelves == 0 {
            return Err(Error::input("shelf count must be at least 1"));
        }
        let labels = 2 * shelves;
        let repr = if linear {
            let mut dp = vec![0.0; labels + 1];
            dp[0] = 1.0;
            let pw: Vec<f64> = (0..=labels)
                .flat_map(|k| {
                    let base = k as f64 / labels as f64;
                    (0..=n).map(move |e| base.powi(e as i32))
                })
                .collect();
            let rev = pw
                .chunks(n + 1)
                .flat_map(|row| row.iter().rev().copied())
                .collect();
            Repr::Linear { dp, pw, rev }
        } else {
            let mut dp = vec![f64::NEG_INFINITY; labels + 1];
            dp[0] = 0.0;
            let ratio = (0..labels)
                .flat_map(|f| {
                    let step = f as f64 / (f + 1) as f64;
                    (0..=n).map(move |e| {
                        let v = step.powi(e as i32);
                        if v < NEGLIGIBLE {
                            0.0
                        } else {
                            v
                        }
                    })
                })
                .collect();
            let ln = (0..=labels).map(|k| (k as f64).ln()).collect();
            Repr::Log { dp, ratio, ln }
        };
        Ok(PilePosterior {
            n,
            labels,
            seen: vec![false; n + 1],
            hidden: n,
            last: 0,
            repr,
        })
    }

    pub fn reset(&mut self) {
        self.seen.iter_mut().for_each(|s| *s = false);
        self.hidden = self.n;
        self.last = 0;
        match &mut self.repr {
            Repr::Linear { dp, .. } => {
                dp.iter_mut().for_each(|x| *x = 0.0);
                dp[0] = 1.0;
            }
            Repr::Log { dp, .. } => {
                dp.iter_mut().for_each(|x| *x = f64::NEG_INFINITY);
                dp[0] = 0.0;
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shelves(&self) -> usize {
        self.labels / 2
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn continues(&self, label: usize, card: usize) -> bool {
        if label % 2 == 1 {
            card > self.last
        } else {
            card < self.last
        }
    }

    // Exclusive prefix sums of dp over labels, in the representation's domain.
    fn prefix(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.labels + 1);
        match &self.repr {
            Repr::Linear { dp, .. } => {
                let mut acc = 0.0;
                for &x in dp {
                    s.push(acc);
                    acc += x;
                }
            }
            Repr::Log { dp, .. } => {
                let mut acc = f64::NEG_INFINITY;
                for &x in dp {
                    s.push(acc);
                    acc = log_add(acc, x);
                }
            }
        }
        s
    }

    /// Whether `card` has positive probability of coming next.
    fn possible(&self, card: usize, s: &[f64]) -> bool {
        let rank = (1..card).filter(|&c| !self.seen[c]).count();
        let u = self.hidden - 1;
        match &self.repr {
            Repr::Linear { dp, .. } => (1..=self.labels).any(|l| {
                let mass = s[l] + if self.continues(l, card) { dp[l] } else { 0.0 };
                let a = if l % 2 == 1 { u - rank } else { rank };
                mass > 0.0 && (l < self.labels || a == u)
            }),
            Repr::Log { .. } => self.log_score(card, rank, u, s) > f64::NEG_INFINITY,
        }
    }

    pub fn observe(&mut self, card: usize) -> Result<()> {
        if card == 0 || card > self.n {
            return Err(Error::input(format!("card {card} outside 1..={}", self.n)));
        }
        if self.seen[card] {
            return Err(Error::state(format!("card {card} already revealed")));
        }
        let s = self.prefix();
        if !self.possible(card, &s) {
            return Err(Error::state(format!("card {card} cannot come next")));
        }
        self.advance(card, &s);
        Ok(())
    }

    /// [`observe`](Self::observe) for a card known to be legal, as when
    /// replaying a dealt deck.
    pub(crate) fn observe_dealt(&mut self, card: usize) {
        let s = self.prefix();
        self.advance(card, &s);
    }

    fn advance(&mut self, card: usize, s: &[f64]) {
        // Odd labels continue above the last card, even labels below it.
        let (odd, even) = (card > self.last, card < self.last);
        let stays = |l: usize| if l % 2 == 1 { odd } else { even };
        match &mut self.repr {
            Repr::Linear { dp, .. } => {
                let scale = 1.0 / self.labels as f64;
                dp[0] = 0.0;
                for l in 1..=self.labels {
                    let stay = if stays(l) { dp[l] } else { 0.0 };
                    dp[l] = (stay + s[l]) * scale;
                }
            }
            Repr::Log { dp, .. } => {
                dp[0] = f64::NEG_INFINITY;
                for l in 1..=self.labels {
                    let stay = if stays(l) { dp[l] } else { f64::NEG_INFINITY };
                    dp[l] = log_add(stay, s[l]);
                }
            }
        }
        self.seen[card] = true;
        self.hidden -= 1;
        self.last = card;
    }

    /// Hidden cards in ascending order.
    pub fn hidden_cards(&self) -> Vec<usize> {
        (1..=self.n).filter(|&c| !self.seen[c]).collect()
    }

    /// Log-space score of `card`, of rank `rank` among the `u + 1` hidden
    /// cards, by direct log-sum-exp over labels.
    fn log_score(&self, card: usize, rank: usize, u: usize, s: &[f64]) -> f64 {
        let Repr::Log { dp, ln, .. } = &self.repr else {
            unreachable!("log score on a linear posterior")
        };
        let mut acc = f64::NEG_INFINITY;
        for l in 1..=self.labels {
            let stay = if self.continues(l, card) {
                dp[l]
            } else {
                f64::NEG_INFINITY
            };
            let mass = log_add(stay, s[l]);
            if mass == f64::NEG_INFINITY {
                continue;
            }
            let a = if l % 2 == 1 { u - rank } else { rank };
            let free = self.labels - l;
            if free == 0 && u > a {
                continue;
            }
            let w = a as f64 * ln[free + 1]
                + if u > a {
                    (u - a) as f64 * ln[free]
                } else {
                    0.0
                };
            acc = log_add(acc, mass + w);
        }
        acc
    }

    /// Per-card scores up to a common factor, ascending by card.
    ///
    /// Both paths tabulate `sum_l dp[l] w(l, a)` over `a` once per label
    /// parity, so each card costs O(1) after an O(L u) sweep.
    fn scores(&self, cards: &[usize]) -> Vec<f64> {
        let u = cards.len() - 1;
        let s = self.prefix();
        let big_l = self.labels;
        let stride = self.n + 1;
        // tables[parity][variant][i]; variant 1 includes dp[l] itself. The
        // index i is a for the linear path and u - a for the log path.
        let mut tables = [
            [vec![0.0f64; u + 1], vec![0.0f64; u + 1]],
            [vec![0.0f64; u + 1], vec![0.0f64; u + 1]],
        ];
        let reversed = match &self.repr {
            Repr::Linear { dp, pw, rev } => {
                for l in 1..=big_l {
                    let (w0, w1) = (s[l], s[l] + dp[l]);
                    if w1 == 0.0 {
                        continue;
                    }
                    let free = big_l - l;
                    let up = &pw[(free + 1) * stride..][..=u];
                    // down[a] = (free / L)^(u - a)
                    let down = &rev[free * stride + self.n - u..][..=u];
                    let [c0, c1] = &mut tables[l % 2];
                    for (((x0, x1), &p), &q) in c0.iter_mut().zip(c1.iter_mut()).zip(up).zip(down) {
                        let w = p * q;
                        *x0 += w0 * w;
                        *x1 += w1 * w;
                    }
                }
                false
            }
            Repr::Log { dp, ratio, ln } => {
                let top = |l: usize| u as f64 * ln[big_l - l + 1];
                let shift = (1..=big_l)
                    .map(|l| log_add(dp[l], s[l]) + top(l))
                    .fold(f64::NEG_INFINITY, f64::max);
                for l in 1..=big_l {
                    let w0 = (s[l] + top(l) - shift).exp();
                    let w1 = (log_add(dp[l], s[l]) + top(l) - shift).exp();
                    if w1 < NEGLIGIBLE {
                        continue;
                    }
                    let free = big_l - l;
                    let row = &ratio[free * stride..free * stride + u + 1];
                    let [c0, c1] = &mut tables[l % 2];
                    for ((x0, x1), &p) in c0.iter_mut().zip(c1.iter_mut()).zip(row) {
                        *x0 += w0 * p;
                        *x1 += w1 * p;
                    }
                }
                true
            }
        };
        let scores: Vec<f64> = cards
            .iter()
            .enumerate()
            .map(|(rank, &c)| {
                let odd = usize::from(self.continues(1, c));
                let even = usize::from(self.continues(2, c));
                let (ia, ib) = if reversed {
                    (rank, u - rank)
                } else {
                    (u - rank, rank)
                };
                tables[1][odd][ia] + tables[0][even][ib]
            })
            .collect();
        if scores.iter().any(|&x| x > 0.0) || matches!(self.repr, Repr::Linear { .. }) {
            return scores;
        }
        // Everything underflowed: fall back to per-card log-sum-exp.
        let logs: Vec<f64> = cards
            .iter()
            .enumerate()
            .map(|(rank, &c)| self.log_score(c, rank, u, &s))
            .collect();
        let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        logs.iter().map(|x| (x - hi).exp()).collect()
    }

    /// Probability of each hidden card being next, ascending by card.
    pub fn distribution(&self) -> Vec<(usize, f64)> {
        let cards = self.hidden_cards();
        if cards.is_empty() {
            return Vec::new();
        }
        let scores = self.scores(&cards);
        let total: f64 = scores.iter().sum();
        cards
            .into_iter()
            .zip(scores.into_iter().map(|x| x / total))
            .collect()
    }

    /// Cards within [`TIE_TOLERANCE`] of the most probable, ascending.
    pub fn best_set(&self) -> Vec<usize> {
        let d = self.distribution();
        let hi = d.iter().map(|&(_, p)| p).fold(0.0, f64::max);
        d.into_iter()
            .filter(|&(_, p)| p >= hi * (1.0 - TIE_TOLERANCE))
            .map(|(c, _)| c)
            .collect()
    }

    /// Most probable next card, smallest on ties.
    pub fn best(&self) -> Option<usize> {
        let cards = self.hidden_cards();
        if cards.is_empty() {
            return None;
        }
        let scores = self.scores(&cards);
        let hi = scores.iter().copied().fold(0.0, f64::max);
        let i = scores
            .iter()
            .position(|&x| x >= hi * (1.0 - TIE_TOLERANCE))?;
        Some(cards[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::conditional_transition;
    use crate::rng::RngStream;
    use crate::shuffle::{enumerate_distribution, sample_m_shelf, Shuffler};
    use num_traits::ToPrimitive;
    use std::collections::BTreeMap;

    /// Exact next-card law for every reachable prefix, by enumeration.
    fn exact_laws(n: usize, m: usize) -> BTreeMap<Vec<usize>, BTreeMap<usize, f64>> {
        let d = enumerate_distribution(n, Shuffler::MShelf(m)).unwrap();
        let mut mass: BTreeMap<Vec<usize>, BTreeMap<usize, num_rational::BigRational>> =
            BTreeMap::new();
        for (p, w) in d.iter() {
            let c = p.cards();
            for j in 0..n {
                *mass
                    .entry(c[..j].to_vec())
                    .or_default()
                    .entry(c[j])
                    .or_default() += w;
            }
        }
        mass.into_iter()
            .map(|(k, v)| {
                let total: num_rational::BigRational = v.values().sum();
                (
                    k,
                    v.into_iter()
                        .map(|(c, w)| (c, (w / &total).to_f64().unwrap()))
                        .collect(),
                )
            })
            .collect()
    }

    impl PilePosterior {
        fn distribution_direct(&self) -> Vec<(usize, f64)> {
            let cards = self.hidden_cards();
            let s = self.prefix();
            let u = cards.len() - 1;
            let logs: Vec<f64> = cards
                .iter()
                .enumerate()
                .map(|(rank, &c)| self.log_score(c, rank, u, &s))
                .collect();
            let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lin: Vec<f64> = logs.iter().map(|x| (x - hi).exp()).collect();
            let total: f64 = lin.iter().sum();
            cards
                .into_iter()
                .zip(lin.into_iter().map(|x| x / total))
                .collect()
        }
    }

    fn check_against_enumeration(n: usize, m: usize) {
        for (prefix, law) in exact_laws(n, m) {
            for linear in [true, false] {
                let mut post = PilePosterior::build(n, m, linear).unwrap();
                for &c in &prefix {
                    post.observe(c).unwrap();
                }
                for (c, p) in post.distribution() {
                    let want = law.get(&c).copied().unwrap_or(0.0);
                    assert!(
                        (p - want).abs() < 1e-12,
                        "n={n} m={m} prefix={prefix:?} card={c}: {p} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn matches_enumeration() {
        check_against_enumeration(5, 2);
        check_against_enumeration(4, 3);
        check_against_enumeration(6, 1);
        check_against_enumeration(3, 4);
    }

    #[test]
    fn one_shelf_is_the_transition_law() {
        let n = 9;
        let mut post = PilePosterior::new(n, 1).unwrap();
        for &k in &[1, 3, 4, 6] {
            post.observe(k).unwrap();
            for (i, p) in post.distribution() {
                let want = conditional_transition(n, k, i).unwrap().to_f64();
                assert!((p - want).abs() < 1e-12);
            }
        }
        post.observe(7).unwrap();
        assert_eq!(post.best_set(), vec![8, 9]);
        assert_eq!(post.best(), Some(8));
    }

    #[test]
    fn linear_agrees_with_log_space() {
        let mut rng = RngStream::new(11);
        for (n, m) in [(52, 2), (52, 10), (52, 40), (120, 3)] {
            let deck = sample_m_shelf(n, m, &mut rng).unwrap();
            let mut lin = PilePosterior::build(n, m, true).unwrap();
            let mut log = PilePosterior::build(n, m, false).unwrap();
            for (j, &c) in deck.cards().iter().enumerate() {
                if j % 5 == 0 && lin.hidden() > 1 {
                    let a = lin.distribution();
                    let b = log.distribution();
                    for ((c1, p1), (c2, p2)) in a.iter().zip(&b) {
                        assert_eq!(c1, c2);
                        assert!((p1 - p2).abs() < 1e-9, "n={n} m={m} j={j}");
                    }
                }
                lin.observe(c).unwrap();
                log.observe(c).unwrap();
            }
        }
    }

    #[test]
    fn tabulated_agrees_with_direct() {
        let mut rng = RngStream::new(11);
        for (n, m) in [(52, 40), (200, 3), (512, 64)] {
            let deck = sample_m_shelf(n, m, &mut rng).unwrap();
            let mut post = PilePosterior::build(n, m, false).unwrap();
            for (j, &c) in deck.cards().iter().enumerate() {
                if j % 7 == 0 && post.hidden() > 1 {
                    let fast = post.distribution();
                    let slow = post.distribution_direct();
                    for ((c1, p1), (c2, p2)) in fast.iter().zip(&slow) {
                        assert_eq!(c1, c2);
                        assert!((p1 - p2).abs() < 1e-9, "n={n} m={m} j={j}");
                    }
                }
                post.observe(c).unwrap();
            }
        }
    }

    #[test]
    fn rejects_impossible_cards() {
        for linear in [true, false] {
            let mut post = PilePosterior::build(5, 1, linear).unwrap();
            post.observe(2).unwrap();
            post.observe(3).unwrap();
            // A one-shelf deck cannot drop back to 1 before 4 or 5 appears.
            assert!(post.observe(1).is_err());
            assert!(post.observe(3).is_err());
            assert!(post.observe(9).is_err());
        }
    }

    #[test]
    fn representation_choice() {
        assert!(matches!(
            PilePosterior::new(52, 40).unwrap().repr,
            Repr::Linear { .. }
        ));
        assert!(matches!(
            PilePosterior::new(512, 64).unwrap().repr,
            Repr::Log { .. }
        ));
    }
}
