//! Guessing without feedback: the best card for each position is a column
//! argmax of the position matrix.

use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::combin::binomial;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::matrix::{position_matrix, ExactMatrix};

/// Largest deck for which [`asymptotic_breakdown`] also checks its split
/// against the exact column maxima.
pub const SPLIT_CHECK_LIMIT: usize = 400;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyTable {
    pub n: usize,
    /// `best_sets[j - 1]` holds the best cards for position `j`, ascending.
    pub best_sets: Vec<Vec<usize>>,
    /// Smallest card of each best set.
    pub chosen: Vec<usize>,
}

impl StrategyTable {
    fn from_sets(n: usize, best_sets: Vec<Vec<usize>>) -> Self {
        let chosen = best_sets.iter().map(|s| s[0]).collect();
        StrategyTable {
            n,
            best_sets,
            chosen,
        }
    }

    pub fn best_set(&self, position: usize) -> &[usize] {
        &self.best_sets[position - 1]
    }

    /// First position (1-based) where the two tables disagree.
    pub fn first_mismatch(&self, other: &StrategyTable) -> Option<usize> {
        if self.n != other.n {
            return Some(1);
        }
        self.best_sets
            .iter()
            .zip(&other.best_sets)
            .position(|(a, b)| a != b)
            .map(|j| j + 1)
    }

    /// Whether `guesses` picks a best card at every position.
    pub fn accepts(&self, guesses: &[usize]) -> bool {
        guesses.len() == self.n
            && guesses
                .iter()
                .zip(&self.best_sets)
                .all(|(g, s)| s.contains(g))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("table serializes")
    }
}

/// Column maxima of `m`, position 1 first.
pub fn column_maxima(m: &ExactMatrix) -> Vec<Dyadic> {
    (1..=m.n())
        .map(|j| m.column(j).max().cloned().unwrap_or_default())
        .collect()
}

pub fn argmax_sets(m: &ExactMatrix) -> StrategyTable {
    let n = m.n();
    let maxima = column_maxima(m);
    let sets = (1..=n)
        .map(|j| {
            (1..=n)
                .filter(|&i| m.entry(i, j) == &maxima[j - 1])
                .collect()
        })
        .collect();
    StrategyTable::from_sets(n, sets)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AppendixFamily {
    /// Odd `n = (2m)^2 + 1`.
    OddSquare,
    Odd,
    /// Even `n = (2m+1)^2 + 1`.
    EvenSquare,
    Even,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AppendixCase {
    pub family: AppendixFamily,
    pub m: usize,
    pub alpha: usize,
}

pub fn alpha(n: usize) -> usize {
    match n % 3 {
        0 | 1 => n / 3,
        _ => n / 3 + 1,
    }
}

pub fn appendix_case(n: usize) -> Result<AppendixCase> {
    if n < 3 {
        return Err(Error::input("strategy tables start at n = 3"));
    }
    // Largest m with (2m + offset)^2 + 1 <= n, by exact integer search.
    let offset = n.is_multiple_of(2);
    let side = |m: usize| 2 * m + usize::from(offset);
    let mut m = 0;
    while side(m + 1).pow(2) < n {
        m += 1;
    }
    let on_square = side(m).pow(2) + 1 == n;
    let family = match (offset, on_square) {
        (false, true) => AppendixFamily::OddSquare,
        (false, false) => AppendixFamily::Odd,
        (true, true) => AppendixFamily::EvenSquare,
        (true, false) => AppendixFamily::Even,
    };
    Ok(AppendixCase {
        family,
        m,
        alpha: alpha(n),
    })
}

/// The piecewise table for the first half of the deck, mirrored onto the
/// second half. Where row ranges overlap the later row wins, and position 1
/// is `{1}`.
pub fn conjectured_table(n: usize) -> Result<StrategyTable> {
    let case = appendix_case(n)?;
    let half = n.div_ceil(2);
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); half + 1];
    let mut fill = |lo: usize, hi: usize, f: &dyn Fn(usize) -> Vec<usize>| {
        (lo.max(1)..=hi.min(half)).for_each(|j| sets[j] = f(j));
    };
    fill(1, case.alpha, &|j| vec![2 * j - 2, 2 * j - 1]);
    let block = half.saturating_sub(case.m);
    fill(case.alpha + 1, block.saturating_sub(1), &|j| {
        vec![2 * j - 1]
    });
    match case.family {
        AppendixFamily::OddSquare | AppendixFamily::EvenSquare => {
            fill(block, block, &|_| vec![n - 3, n - 2, n - 1, n]);
            fill(block + 1, half, &|_| vec![n - 1, n]);
        }
        AppendixFamily::Odd | AppendixFamily::Even => fill(block, half, &|_| vec![n - 1, n]),
    }
    sets[1] = vec![1];
    let first_half: Vec<Vec<usize>> = sets
        .into_iter()
        .skip(1)
        .map(|s| s.into_iter().filter(|&c| c >= 1).collect())
        .collect();
    let full = (1..=n)
        .map(|j| first_half[j.min(n + 1 - j) - 1].clone())
        .collect();
    Ok(StrategyTable::from_sets(n, full))
}

/// Positions whose best sets are settled by proof: 1, 2, the middle, and
/// their mirrors.
pub fn proven_positions(n: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for j in [1, 2, n.div_ceil(2), n / 2 + 1] {
        if (1..=n).contains(&j) {
            out.insert(j);
            out.insert(n + 1 - j);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TableComparison {
    pub n: usize,
    pub matches: bool,
    pub first_mismatch: Option<usize>,
    pub proven_positions_match: bool,
}

pub fn compare_with_argmax(n: usize) -> Result<TableComparison> {
    compare_with_matrix(&position_matrix(n)?)
}

/// [`compare_with_argmax`] against a given position matrix.
pub fn compare_with_matrix(m: &ExactMatrix) -> Result<TableComparison> {
    let n = m.n();
    let conj = conjectured_table(n)?;
    let exact = argmax_sets(m);
    let first_mismatch = conj.first_mismatch(&exact);
    let proven_positions_match = proven_positions(n)
        .into_iter()
        .all(|j| conj.best_set(j) == exact.best_set(j));
    Ok(TableComparison {
        n,
        matches: first_mismatch.is_none(),
        first_mismatch,
        proven_positions_match,
    })
}

/// `E(n)`: the sum of the column maxima.
pub fn expected_reward_nofeedback(n: usize) -> Result<Dyadic> {
    Ok(column_maxima(&position_matrix(n)?).iter().sum())
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// `2 Phi(1) - 1`.
pub fn s3_limit() -> f64 {
    2.0 * normal_cdf(1.0) - 1.0
}

fn leading_term(n: usize) -> f64 {
    let n = n as f64;
    (2.0 / std::f64::consts::PI).sqrt() * (n - n.sqrt()).sqrt()
}

/// `sqrt(2/pi) sqrt(n - sqrt(n)) + 2 Phi(1) - 1`.
pub fn asymptotic_estimate(n: usize) -> f64 {
    leading_term(n) + s3_limit()
}

/// The estimate with the constant rounded to `0.68`, as printed in the
/// published comparison table.
pub fn table_estimate(n: usize) -> f64 {
    leading_term(n) + 0.68
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticBreakdown {
    pub n: usize,
    pub m_cut: usize,
    pub s1: Dyadic,
    pub s1_closed: Dyadic,
    pub s2: Dyadic,
    pub s3: Dyadic,
    /// Leading term plus `2 Phi(1) - 1`.
    pub estimate: f64,
    /// `e^-2 (2 pi)^-1/2 sqrt(n - sqrt(n))`.
    pub s2_bound: f64,
    /// Whether `s1 + s2 + 2 s3` equals `E(n)`. Only computed up to
    /// [`SPLIT_CHECK_LIMIT`].
    pub split_exact: Option<bool>,
}

/// Smallest `m >= 0` with `(2m + 2)^2 >= n - 1`, i.e. `ceil(sqrt(n-1)/2 - 1)`.
pub fn m_cut(n: usize) -> usize {
    let mut m: usize = 0;
    while (2 * m + 2).pow(2) < n.saturating_sub(1) {
        m += 1;
    }
    m
}

fn dyadic(num: BigUint, exp: usize) -> Dyadic {
    Dyadic::new(BigInt::from(num), exp as u32)
}

/// Splits `E(n)` into the near-diagonal sum `s1`, its far-binomial
/// correction `s2`, and the central block `s3`.
pub fn asymptotic_breakdown(n: usize) -> Result<AsymptoticBreakdown> {
    if !n.is_multiple_of(2) {
        return Err(Error::input("breakdown needs an even deck"));
    }
    if n < 12 {
        return Err(Error::input("breakdown needs n >= 12"));
    }
    let m = m_cut(n);
    let last = n / 2 - m - 1;

    // s1 = 2 sum_{j<=last} C(2j-2, j-1) / 2^(2j-1), folded Horner-style over
    // the common denominator 2^(2 last - 1).
    let mut c = BigUint::from(1u32);
    let mut acc = BigUint::zero();
    for j in 1..=last {
        acc = (acc << 2) + &c;
        c = c * (2 * (2 * j - 1)) / j;
    }
    let s1 = dyadic(acc, 2 * last - 2);

    let k = n - 2 * m - 4;
    let s1_closed = dyadic(
        binomial(k as u64, (n / 2 - m - 2) as u64) * (n - 2 * m - 3),
        k,
    );

    // s2 = 2 sum C(2j-2, n-j) / 2^(2j-1); terms vanish until 3j >= n + 2.
    let first = (n + 2).div_ceil(3).max(1);
    let mut acc = BigUint::zero();
    if first <= last {
        let (mut a, mut b) = (2 * first - 2, n - first);
        let mut c = binomial(a as u64, b as u64);
        for j in first..=last {
            acc = (acc << 2) + &c;
            if j < last {
                // C(a+2, b-1) = C(a, b) (a+1)(a+2) b / ((a-b+1)(a-b+2)(a-b+3))
                c = c * ((a + 1) * (a + 2)) * b / ((a - b + 1) * (a - b + 2) * (a - b + 3));
                a += 2;
                b -= 1;
            }
        }
    }
    let s2 = if first <= last {
        dyadic(acc, 2 * last - 2)
    } else {
        Dyadic::zero()
    };

    let mut acc = BigUint::zero();
    for j in n / 2 - m..=n / 2 {
        acc += binomial(n as u64 - 1, j as u64 - 1) + binomial(n as u64 - 1, (n - j) as u64);
    }
    let s3 = dyadic(acc, n);

    let split_exact = if n <= SPLIT_CHECK_LIMIT {
        let e = expected_reward_nofeedback(n)?;
        Some(&(&s1 + &s2) + &(&s3 + &s3) == e)
    } else {
        None
    };
    let nf = n as f64;
    Ok(AsymptoticBreakdown {
        n,
        m_cut: m,
        s1,
        s1_closed,
        s2,
        s3,
        estimate: asymptotic_estimate(n),
        s2_bound: (-2f64).exp() / (2.0 * std::f64::consts::PI).sqrt() * (nf - nf.sqrt()).sqrt(),
        split_exact,
    })
}

/// Maximum over `i` of `C(i-1, j-1) / 2^i`, with the cards attaining it.
pub fn binomial_weight_argmax(j: usize) -> Result<(Dyadic, Vec<usize>)> {
    match j {
        0 => Err(Error::input("position must be at least 1")),
        1 => Ok((Dyadic::pow2_inv(1), vec![1])),
        _ => {
            let value = dyadic(binomial(2 * j as u64 - 2, j as u64 - 1), 2 * j - 1);
            Ok((value, vec![2 * j - 2, 2 * j - 1]))
        }
    }
}

/// Rounded to two decimals as in the published tables.
pub fn two_decimals(x: f64) -> String {
    format!("{x:.2}")
}

/// `E(n)` as `f64`, for reports.
pub fn expected_reward_f64(n: usize) -> Result<f64> {
    Ok(expected_reward_nofeedback(n)?.to_f64())
}
