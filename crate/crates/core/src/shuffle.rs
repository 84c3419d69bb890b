//! Permutations and the shelf-shuffle model.
//!
//! Decks are written top to bottom: `arrangement[0]` is the card in position 1.
//! Shuffles start from the identity deck `1..=n` and draw cards from the
//! bottom, so card `n` is placed first and card `1` last.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Largest outcome space [`enumerate_distribution`] will walk.
pub const ENUMERATION_LIMIT: u64 = 1 << 24;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(arrangement: Vec<usize>) -> Result<Self> {
        let n = arrangement.len();
        if n == 0 {
            return Err(Error::input("permutation must have at least one card"));
        }
        let mut seen = vec![false; n + 1];
        for &c in &arrangement {
            if c == 0 || c > n {
                return Err(Error::input(format!("card {c} outside 1..={n}")));
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(Error::input(format!("card {c} appears twice")));
            }
        }
        Ok(Permutation(arrangement))
    }

    /// Caller guarantees `arrangement` is a bijection on `1..=len`.
    pub(crate) fn from_vec_unchecked(arrangement: Vec<usize>) -> Self {
        debug_assert!(Permutation::new(arrangement.clone()).is_ok());
        Permutation(arrangement)
    }

    pub fn identity(n: usize) -> Self {
        Permutation((1..=n).collect())
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn cards(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    /// Card in 1-based `position`.
    pub fn card_at(&self, position: usize) -> usize {
        self.0[position - 1]
    }

    /// 1-based position of `card`.
    pub fn position_of(&self, card: usize) -> usize {
        self.0
            .iter()
            .position(|&c| c == card)
            .map(|p| p + 1)
            .unwrap()
    }

    /// The deck obtained by applying the shuffle `next` to this deck.
    ///
    /// `next` is read as a rearrangement of positions: position `p` of the
    /// result receives whatever sat at position `next[p]`.
    pub fn then(&self, next: &Permutation) -> Permutation {
        assert_eq!(self.n(), next.n(), "deck sizes differ");
        Permutation(next.0.iter().map(|&src| self.0[src - 1]).collect())
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Top,
    Bottom,
}

/// One placement bit per drawn card; `bits[0]` places card `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChoiceVector {
    bits: Vec<Placement>,
}

impl ChoiceVector {
    pub fn new(bits: Vec<Placement>) -> Self {
        ChoiceVector { bits }
    }

    /// Bit `i` of `index` set means the `i`-th drawn card goes to the bottom.
    pub fn from_index(n: usize, index: u64) -> Self {
        ChoiceVector {
            bits: (0..n)
                .map(|i| {
                    if (index >> i) & 1 == 1 {
                        Placement::Bottom
                    } else {
                        Placement::Top
                    }
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[Placement] {
        &self.bits
    }
}

/// Shelf (1-based) and placement per drawn card.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MShelfChoiceVector {
    m: usize,
    picks: Vec<(usize, Placement)>,
}

impl MShelfChoiceVector {
    pub fn new(m: usize, picks: Vec<(usize, Placement)>) -> Result<Self> {
        if m == 0 {
            return Err(Error::input("shelf count must be at least 1"));
        }
        if let Some(&(s, _)) = picks.iter().find(|(s, _)| *s == 0 || *s > m) {
            return Err(Error::input(format!("shelf {s} outside 1..={m}")));
        }
        Ok(MShelfChoiceVector { m, picks })
    }

    pub fn shelves(&self) -> usize {
        self.m
    }

    pub fn picks(&self) -> &[(usize, Placement)] {
        &self.picks
    }
}

pub fn apply_single_shelf(n: usize, choices: &ChoiceVector) -> Result<Permutation> {
    if choices.len() != n {
        return Err(Error::input(format!(
            "choice vector has {} bits, deck has {n} cards",
            choices.len()
        )));
    }
    if n == 0 {
        return Err(Error::input("deck must have at least one card"));
    }
    let mut pile = VecDeque::with_capacity(n);
    for (step, &bit) in choices.bits().iter().enumerate() {
        place(&mut pile, n - step, bit);
    }
    Ok(Permutation::from_vec_unchecked(pile.into()))
}

/// Hot-path variant of [`apply_single_shelf`]: bit `i` of `bits` is the
/// placement of the `i`-th drawn card, and the deck is written into `out`.
pub(crate) fn single_shelf_into(n: usize, bits: &[u64], out: &mut Vec<usize>) {
    // Top-placed cards sit above card n in ascending order, bottom-placed
    // cards below it in descending order. Walk cards 1..n-1 and fill both
    // ends inward.
    out.clear();
    out.resize(n, 0);
    let mut top = 0usize;
    let mut bottom = n;
    for step in (1..n).rev() {
        let card = n - step;
        let bottom_bit = (bits[step / 64] >> (step % 64)) & 1 == 1;
        if !bottom_bit {
            out[top] = card;
            top += 1;
        } else {
            bottom -= 1;
            out[bottom] = card;
        }
    }
    debug_assert_eq!(top + 1, bottom);
    out[top] = n;
}

fn place(pile: &mut VecDeque<usize>, card: usize, bit: Placement) {
    match bit {
        Placement::Top => pile.push_front(card),
        Placement::Bottom => pile.push_back(card),
    }
}

pub fn apply_m_shelf(n: usize, choices: &MShelfChoiceVector) -> Result<Permutation> {
    if choices.picks.len() != n {
        return Err(Error::input(format!(
            "choice vector has {} picks, deck has {n} cards",
            choices.picks.len()
        )));
    }
    if n == 0 {
        return Err(Error::input("deck must have at least one card"));
    }
    let mut shelves: Vec<VecDeque<usize>> = vec![VecDeque::new(); choices.m];
    for (step, &(shelf, bit)) in choices.picks.iter().enumerate() {
        place(&mut shelves[shelf - 1], n - step, bit);
    }
    Ok(Permutation::from_vec_unchecked(
        shelves.into_iter().flatten().collect(),
    ))
}

pub fn sample_single_shelf(n: usize, rng: &mut RngStream) -> Result<Permutation> {
    if n == 0 {
        return Err(Error::input("deck must have at least one card"));
    }
    let mut bits = vec![0u64; n.div_ceil(64)];
    fill_bits(&mut bits, rng);
    let mut out = Vec::with_capacity(n);
    single_shelf_into(n, &bits, &mut out);
    Ok(Permutation::from_vec_unchecked(out))
}

pub(crate) fn fill_bits(bits: &mut [u64], rng: &mut RngStream) {
    use rand::RngCore;
    for w in bits.iter_mut() {
        *w = rng.next_u64();
    }
}

pub fn sample_m_shelf(n: usize, m: usize, rng: &mut RngStream) -> Result<Permutation> {
    if n == 0 {
        return Err(Error::input("deck must have at least one card"));
    }
    if m == 0 {
        return Err(Error::input("shelf count must be at least 1"));
    }
    let picks = (0..n)
        .map(|_| {
            let x = rng.below(2 * m as u64) as usize;
            let bit = if x.is_multiple_of(2) {
                Placement::Top
            } else {
                Placement::Bottom
            };
            (x / 2 + 1, bit)
        })
        .collect();
    apply_m_shelf(n, &MShelfChoiceVector { m, picks })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shuffler {
    SingleShelf,
    MShelf(usize),
}

impl Shuffler {
    /// Choices per card: placement bit times shelf.
    pub fn branching(self) -> u64 {
        match self {
            Shuffler::SingleShelf => 2,
            Shuffler::MShelf(m) => 2 * m as u64,
        }
    }
}

/// Exact probability law on the permutations of `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermDistribution {
    n: usize,
    weights: BTreeMap<Permutation, BigRational>,
}

impl PermDistribution {
    /// Builds a distribution, dropping zero weights. Weights must be
    /// non-negative and sum to exactly one.
    pub fn new(
        n: usize,
        weights: impl IntoIterator<Item = (Permutation, BigRational)>,
    ) -> Result<Self> {
        let mut map: BTreeMap<Permutation, BigRational> = BTreeMap::new();
        for (p, w) in weights {
            if p.n() != n {
                return Err(Error::input(format!(
                    "permutation of {} cards in a distribution over {n}",
                    p.n()
                )));
            }
            if w < BigRational::zero() {
                return Err(Error::input("negative weight"));
            }
            if w.is_zero() {
                continue;
            }
            *map.entry(p).or_insert_with(BigRational::zero) += w;
        }
        let total: BigRational = map.values().sum();
        if !total.is_one() {
            return Err(Error::input(format!("weights sum to {total}, not 1")));
        }
        Ok(PermDistribution { n, weights: map })
    }

    pub fn point_mass(p: Permutation) -> Self {
        let n = p.n();
        let mut weights = BTreeMap::new();
        weights.insert(p, BigRational::one());
        PermDistribution { n, weights }
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 || n > 8 {
            return Err(Error::Resource {
                what: "uniform distribution",
                required: format!("{n}! permutations"),
                limit: "n in 1..=8".into(),
            });
        }
        let all = all_permutations(n);
        let w = BigRational::new(BigInt::one(), BigInt::from(all.len()));
        Ok(PermDistribution {
            n,
            weights: all.into_iter().map(|p| (p, w.clone())).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, p: &Permutation) -> BigRational {
        self.weights
            .get(p)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn support_size(&self) -> usize {
        self.weights.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Permutation, &BigRational)> {
        self.weights.iter()
    }

    pub fn total(&self) -> BigRational {
        self.weights.values().sum()
    }

    /// `m[i-1][j-1]` = probability that card `i` lands in position `j`.
    pub fn marginals(&self) -> Vec<Vec<BigRational>> {
        let n = self.n;
        let mut m = vec![vec![BigRational::zero(); n]; n];
        for (p, w) in &self.weights {
            for (pos, &card) in p.cards().iter().enumerate() {
                m[card - 1][pos] += w;
            }
        }
        m
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .weights
            .iter()
            .map(|(p, w)| {
                serde_json::json!({
                    "perm": p.cards(),
                    "num": w.numer().to_string(),
                    "den_pow2_or_den": w.denom().to_string(),
                })
            })
            .collect();
        serde_json::Value::Array(rows)
    }

    pub fn from_json(n: usize, value: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            perm: Permutation,
            num: String,
            den_pow2_or_den: String,
        }
        let rows: Vec<Row> = serde_json::from_value(value.clone())
            .map_err(|e| Error::input(format!("malformed distribution: {e}")))?;
        let parse = |s: &str| {
            s.parse::<BigInt>()
                .map_err(|e| Error::input(format!("bad integer {s:?}: {e}")))
        };
        let mut out = Vec::with_capacity(rows.len());
        for r in rows {
            let den = parse(&r.den_pow2_or_den)?;
            if den.is_zero() {
                return Err(Error::input("zero denominator"));
            }
            out.push((r.perm, BigRational::new(parse(&r.num)?, den)));
        }
        PermDistribution::new(n, out)
    }
}

/// Lexicographic list of all permutations of `1..=n`.
pub fn all_permutations(n: usize) -> Vec<Permutation> {
    let mut cur: Vec<usize> = (1..=n).collect();
    let mut out = vec![Permutation(cur.clone())];
    while let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) {
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(Permutation(cur.clone()));
    }
    out
}

fn outcome_count(n: usize, shuffler: Shuffler) -> Option<u64> {
    shuffler.branching().checked_pow(n as u32)
}

pub fn enumerate_distribution(n: usize, shuffler: Shuffler) -> Result<PermDistribution> {
    if n == 0 {
        return Err(Error::input("deck must have at least one card"));
    }
    if let Shuffler::MShelf(0) = shuffler {
        return Err(Error::input("shelf count must be at least 1"));
    }
    let total = match outcome_count(n, shuffler) {
        Some(t) if t <= ENUMERATION_LIMIT => t,
        other => {
            return Err(Error::Resource {
                what: "enumeration",
                required: match other {
                    Some(t) => format!("{t} outcomes"),
                    None => format!("{}^{n} outcomes", shuffler.branching()),
                },
                limit: ENUMERATION_LIMIT.to_string(),
            })
        }
    };
    let mut counts: HashMap<Permutation, u64> = HashMap::new();
    for_each_outcome(n, shuffler, |p| *counts.entry(p.clone()).or_insert(0) += 1);
    let den = BigInt::from(total);
    let weights: BTreeMap<_, _> = counts
        .into_iter()
        .map(|(p, c)| (p, BigRational::new(BigInt::from(c), den.clone())))
        .collect();
    Ok(PermDistribution { n, weights })
}

/// Calls `f` once per equally likely choice vector. Unguarded: callers check
/// the outcome count.
pub(crate) fn for_each_outcome(n: usize, shuffler: Shuffler, mut f: impl FnMut(&Permutation)) {
    match shuffler {
        Shuffler::SingleShelf => {
            let mut out = Vec::with_capacity(n);
            for idx in 0..(1u64 << n) {
                single_shelf_into(n, &[idx], &mut out);
                f(&Permutation(out.clone()));
            }
        }
        Shuffler::MShelf(m) => {
            let b = 2 * m as u64;
            let total = b.pow(n as u32);
            let mut picks = vec![(1usize, Placement::Top); n];
            for idx in 0..total {
                let mut x = idx;
                for pick in picks.iter_mut() {
                    let d = (x % b) as usize;
                    x /= b;
                    let bit = if d.is_multiple_of(2) {
                        Placement::Top
                    } else {
                        Placement::Bottom
                    };
                    *pick = (d / 2 + 1, bit);
                }
                let p = apply_m_shelf(
                    n,
                    &MShelfChoiceVector {
                        m,
                        picks: picks.clone(),
                    },
                )
                .expect("well-formed picks");
                f(&p);
            }
        }
    }
}

/// Law of "shuffle by `p`, then shuffle the result by `q`".
pub fn convolve(p: &PermDistribution, q: &PermDistribution) -> Result<PermDistribution> {
    if p.n != q.n {
        return Err(Error::input(format!(
            "cannot convolve distributions over {} and {} cards",
            p.n, q.n
        )));
    }
    let mut out: HashMap<Permutation, BigRational> = HashMap::new();
    for (a, wa) in &p.weights {
        for (b, wb) in &q.weights {
            *out.entry(a.then(b)).or_insert_with(BigRational::zero) += wa * wb;
        }
    }
    Ok(PermDistribution {
        n: p.n,
        weights: out.into_iter().collect(),
    })
}

/// Deterministic Monge shuffle: cards are taken from the top of `deck`; the
/// first starts the new pile, the second goes under it, the third on top, and
/// so on alternating bottom/top.
pub fn monge_shuffle(deck: &Permutation) -> Permutation {
    let mut pile = VecDeque::with_capacity(deck.n());
    for (i, &card) in deck.cards().iter().enumerate() {
        if i % 2 == 1 {
            pile.push_back(card);
        } else {
            pile.push_front(card);
        }
    }
    Permutation(pile.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn perm(v: &[usize]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn rejects_bad_permutations() {
        assert!(Permutation::new(vec![]).is_err());
        assert!(Permutation::new(vec![1, 1]).is_err());
        assert!(Permutation::new(vec![0, 1]).is_err());
        assert!(Permutation::new(vec![1, 3]).is_err());
        assert!(serde_json::from_str::<Permutation>("[2,1,3]").is_ok());
        assert!(serde_json::from_str::<Permutation>("[2,2]").is_err());
    }

    #[test]
    fn single_shelf_fixed_choices() {
        use Placement::*;
        let all_top = apply_single_shelf(3, &ChoiceVector::new(vec![Top, Top, Top])).unwrap();
        assert_eq!(all_top, perm(&[1, 2, 3]));
        let tbb = apply_single_shelf(3, &ChoiceVector::new(vec![Top, Bottom, Bottom])).unwrap();
        assert_eq!(tbb, perm(&[3, 2, 1]));
        assert!(apply_single_shelf(3, &ChoiceVector::new(vec![Top])).is_err());
    }

    #[test]
    fn first_bit_has_no_effect() {
        for idx in 0..(1u64 << 6) {
            let a = apply_single_shelf(6, &ChoiceVector::from_index(6, idx)).unwrap();
            let b = apply_single_shelf(6, &ChoiceVector::from_index(6, idx ^ 1)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fast_path_matches_reference() {
        let mut out = Vec::new();
        for n in 1..=9 {
            for idx in 0..(1u64 << n) {
                single_shelf_into(n, &[idx], &mut out);
                let slow = apply_single_shelf(n, &ChoiceVector::from_index(n, idx)).unwrap();
                assert_eq!(out.as_slice(), slow.cards(), "n={n} idx={idx}");
            }
        }
    }

    #[test]
    fn card_three_in_position_two_at_n4() {
        let hits = (0..16u64)
            .filter(|&idx| {
                apply_single_shelf(4, &ChoiceVector::from_index(4, idx))
                    .unwrap()
                    .card_at(2)
                    == 3
            })
            .count();
        assert_eq!(q(hits as i64, 16), q(3, 8));
    }

    #[test]
    fn enumerate_small_decks() {
        let d2 = enumerate_distribution(2, Shuffler::SingleShelf).unwrap();
        assert_eq!(d2.weight(&perm(&[1, 2])), q(1, 2));
        assert_eq!(d2.weight(&perm(&[2, 1])), q(1, 2));
        let d3 = enumerate_distribution(3, Shuffler::SingleShelf).unwrap();
        assert_eq!(d3.marginals()[1][1], q(1, 2));
        assert!(d3.total().is_one());
    }

    #[test]
    fn enumeration_guard() {
        let err = enumerate_distribution(25, Shuffler::SingleShelf).unwrap_err();
        assert!(err.to_string().contains("33554432"), "{err}");
        let err = enumerate_distribution(52, Shuffler::MShelf(10)).unwrap_err();
        assert!(matches!(err, Error::Resource { .. }));
        assert!(enumerate_distribution(3, Shuffler::MShelf(0)).is_err());
    }

    #[test]
    fn convolution_identities() {
        let p = enumerate_distribution(4, Shuffler::SingleShelf).unwrap();
        let id = PermDistribution::point_mass(Permutation::identity(4));
        assert_eq!(convolve(&p, &id).unwrap(), p);
        assert_eq!(convolve(&id, &p).unwrap(), p);
        let u = PermDistribution::uniform(4).unwrap();
        assert_eq!(convolve(&u, &p).unwrap(), u);
        assert_eq!(convolve(&p, &u).unwrap(), u);
        let p3 = enumerate_distribution(3, Shuffler::SingleShelf).unwrap();
        assert!(convolve(&p, &p3).is_err());
    }

    #[test]
    fn two_shelves_equal_two_single_shelf_passes() {
        let p = enumerate_distribution(5, Shuffler::SingleShelf).unwrap();
        let pp = convolve(&p, &p).unwrap();
        let two = enumerate_distribution(5, Shuffler::MShelf(2)).unwrap();
        assert_eq!(pp, two);
    }

    #[test]
    fn one_shelf_m_model_matches_single_shelf() {
        let a = enumerate_distribution(5, Shuffler::SingleShelf).unwrap();
        let b = enumerate_distribution(5, Shuffler::MShelf(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monge_fixtures() {
        assert_eq!(monge_shuffle(&perm(&[1])), perm(&[1]));
        assert_eq!(monge_shuffle(&perm(&[1, 2])), perm(&[1, 2]));
        let once = monge_shuffle(&Permutation::identity(4));
        assert_eq!(once, perm(&[3, 1, 2, 4]));
        assert_eq!(monge_shuffle(&once), perm(&[2, 3, 1, 4]));
    }

    #[test]
    fn monge_is_a_single_shelf_outcome() {
        // Monge = the choice vector Top, Bottom, Top, ... read from the other
        // end of the deck, so it always lies in the support of the random shuffle.
        for n in 1..=10 {
            let d = monge_shuffle(&Permutation::identity(n));
            let reversed: Vec<usize> = (1..=n).rev().collect();
            let via_bottom = Permutation::new(reversed).unwrap();
            let expected = (0..(1u64 << n))
                .map(|i| apply_single_shelf(n, &ChoiceVector::from_index(n, i)).unwrap())
                .any(|p| via_bottom.then(&p) == d);
            assert!(expected, "n={n}");
        }
    }

    #[test]
    fn distribution_json_round_trip() {
        let d = enumerate_distribution(4, Shuffler::MShelf(2)).unwrap();
        let v = d.to_json();
        assert!(v[0]["num"].as_str().is_some());
        assert_eq!(PermDistribution::from_json(4, &v).unwrap(), d);
        let bad = serde_json::json!([{"perm": [1, 2], "num": "1", "den_pow2_or_den": "2"}]);
        assert!(PermDistribution::from_json(2, &bad).is_err());
    }

    #[test]
    fn all_permutations_counts() {
        assert_eq!(all_permutations(1).len(), 1);
        assert_eq!(all_permutations(4).len(), 24);
        assert_eq!(all_permutations(5).len(), 120);
    }

    #[test]
    fn sampler_determinism_and_edge_cases() {
        assert!(sample_single_shelf(0, &mut RngStream::new(1)).is_err());
        assert!(sample_m_shelf(3, 0, &mut RngStream::new(1)).is_err());
        assert_eq!(
            sample_single_shelf(1, &mut RngStream::new(1)).unwrap(),
            perm(&[1])
        );
        let mut a = RngStream::new(9);
        let mut b = RngStream::new(9);
        for _ in 0..50 {
            assert_eq!(
                sample_single_shelf(70, &mut a).unwrap(),
                sample_single_shelf(70, &mut b).unwrap()
            );
            assert_eq!(
                sample_m_shelf(52, 10, &mut a).unwrap(),
                sample_m_shelf(52, 10, &mut b).unwrap()
            );
        }
    }

    proptest! {
        #[test]
        fn outputs_are_permutations_with_top_block(n in 2usize..=12, idx in any::<u64>()) {
            let idx = idx & ((1u64 << n) - 1);
            let p = apply_single_shelf(n, &ChoiceVector::from_index(n, idx)).unwrap();
            prop_assert!(Permutation::new(p.cards().to_vec()).is_ok());
            let a = p.position_of(n) as i64;
            let b = p.position_of(n - 1) as i64;
            prop_assert_eq!((a - b).abs(), 1);
        }

        #[test]
        fn m_shelf_outputs_are_permutations(n in 1usize..60, m in 1usize..12, seed in any::<u64>()) {
            let p = sample_m_shelf(n, m, &mut RngStream::new(seed)).unwrap();
            prop_assert!(Permutation::new(p.cards().to_vec()).is_ok());
        }
    }
}
