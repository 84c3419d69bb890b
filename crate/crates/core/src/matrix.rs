//! The one-shelf position matrix and the exact checks run against it.
//!
//! `entry(i, j)` is the probability that card `i` ends in position `j` after a
//! single one-shelf shuffle:
//!
//! ```text
//! p(i, j) = (C(i-1, j-1) + C(i-1, n-j)) / 2^i
//! ```
//!
//! Everything here is exact. Floating point appears only in
//! [`sep_asymptote`] and in rendering.

use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::combin::pascal_row;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::shuffle::{all_permutations, PermDistribution};

/// Largest matrix [`spectrum_report`] will eliminate.
pub const SPECTRUM_LIMIT: usize = 64;
/// Largest deck [`separation_distance`] will scan (8! permutations).
pub const SEPARATION_LIMIT: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactMatrix {
    n: usize,
    entries: Vec<Dyadic>,
}

impl ExactMatrix {
    pub fn from_rows(rows: Vec<Vec<Dyadic>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::input("matrix must be at least 1x1"));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::input("matrix must be square"));
        }
        Ok(ExactMatrix {
            n,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![Dyadic::zero(); n * n];
        for i in 0..n {
            entries[i * n + i] = Dyadic::one();
        }
        ExactMatrix { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry for card `i`, position `j` (both 1-based).
    pub fn entry(&self, i: usize, j: usize) -> &Dyadic {
        &self.entries[(i - 1) * self.n + (j - 1)]
    }

    pub fn set_entry(&mut self, i: usize, j: usize, value: Dyadic) {
        self.entries[(i - 1) * self.n + (j - 1)] = value;
    }

    /// Row of card `i` (1-based).
    pub fn row(&self, i: usize) -> &[Dyadic] {
        &self.entries[(i - 1) * self.n..i * self.n]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = &Dyadic> + '_ {
        (1..=self.n).map(move |i| self.entry(i, j))
    }

    pub fn mul(&self, rhs: &ExactMatrix) -> Result<ExactMatrix> {
        if self.n != rhs.n {
            return Err(Error::input("matrix dimensions differ"));
        }
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for i in 1..=n {
            let row = self.row(i);
            for j in 1..=n {
                entries.push(
                    row.iter()
                        .enumerate()
                        .filter(|(_, a)| !a.is_zero())
                        .map(|(k, a)| a * rhs.entry(k + 1, j))
                        .sum(),
                );
            }
        }
        Ok(ExactMatrix { n, entries })
    }

    pub fn mul_vec(&self, v: &ExactVector) -> Result<ExactVector> {
        if v.len() != self.n {
            return Err(Error::input("vector length differs from matrix size"));
        }
        Ok(ExactVector::new(
            (1..=self.n)
                .map(|i| {
                    self.row(i)
                        .iter()
                        .zip(v.entries())
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect(),
        ))
    }

    /// Row vector times matrix.
    pub fn left_mul_vec(&self, v: &ExactVector) -> Result<ExactVector> {
        if v.len() != self.n {
            return Err(Error::input("vector length differs from matrix size"));
        }
        Ok(ExactVector::new(
            (1..=self.n)
                .map(|j| {
                    v.entries()
                        .iter()
                        .zip(self.column(j))
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect(),
        ))
    }

    pub fn to_rational_rows(&self) -> Vec<Vec<BigRational>> {
        (1..=self.n)
            .map(|i| self.row(i).iter().map(Dyadic::to_rational).collect())
            .collect()
    }

    /// `{n, entries: [[{num, pow2}]]}` with numerators as decimal strings.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = (1..=self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .map(|d| serde_json::json!({"num": d.numerator().to_string(), "pow2": d.exponent()}))
                    .collect()
            })
            .collect();
        serde_json::json!({"n": self.n, "entries": rows})
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Cell {
            num: String,
            pow2: u32,
        }
        #[derive(serde::Deserialize)]
        struct Doc {
            n: usize,
            entries: Vec<Vec<Cell>>,
        }
        let doc: Doc = serde_json::from_value(value.clone())
            .map_err(|e| Error::input(format!("malformed matrix: {e}")))?;
        let rows = doc
            .entries
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|c| {
                        c.num
                            .parse::<BigInt>()
                            .map(|v| Dyadic::new(v, c.pow2))
                            .map_err(|e| Error::input(format!("bad numerator: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let m = ExactMatrix::from_rows(rows)?;
        if m.n != doc.n {
            return Err(Error::input("declared n does not match entries"));
        }
        Ok(m)
    }

    /// One line per row, entries as decimals with 20 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 1..=self.n {
            let line: Vec<String> = self.row(i).iter().map(|d| d.to_significant(20)).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactVector {
    entries: Vec<Dyadic>,
}

impl ExactVector {
    pub fn new(entries: Vec<Dyadic>) -> Self {
        ExactVector { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Dyadic] {
        &self.entries
    }

    pub fn scale(&self, c: &Dyadic) -> ExactVector {
        ExactVector::new(self.entries.iter().map(|x| x * c).collect())
    }
}

pub fn position_matrix(n: usize) -> Result<ExactMatrix> {
    if n == 0 {
        return Err(Error::input("deck must have at least one card"));
    }
    let mut entries = Vec::with_capacity(n * n);
    for i in 1..=n {
        let pascal = pascal_row(i as u64 - 1);
        let c = |k: usize| -> BigUint { pascal.get(k).cloned().unwrap_or_default() };
        for j in 1..=n {
            let num = c(j - 1) + c(n - j);
            entries.push(Dyadic::new(BigInt::from(num), i as u32));
        }
    }
    Ok(ExactMatrix { n, entries })
}

pub fn matrix_power(m: &ExactMatrix, power: u32) -> Result<ExactMatrix> {
    if power == 0 {
        return Err(Error::input("power must be at least 1"));
    }
    let mut result: Option<ExactMatrix> = None;
    let mut base = m.clone();
    let mut e = power;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => r.mul(&base)?,
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = base.mul(&base)?;
    }
    Ok(result.unwrap())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StochasticReport {
    pub rows_ok: bool,
    pub cols_ok: bool,
    pub symmetry_ok: bool,
    pub zero_pattern_ok: bool,
    pub last_two_rows_equal: bool,
}

impl StochasticReport {
    pub fn all_ok(&self) -> bool {
        self.rows_ok
            && self.cols_ok
            && self.symmetry_ok
            && self.zero_pattern_ok
            && self.last_two_rows_equal
    }
}

pub fn stochastic_report(m: &ExactMatrix) -> StochasticReport {
    let n = m.n;
    let one = Dyadic::one();
    let rows_ok = (1..=n).all(|i| m.row(i).iter().sum::<Dyadic>() == one);
    let cols_ok = (1..=n).all(|j| m.column(j).sum::<Dyadic>() == one);
    let symmetry_ok = (1..=n).all(|i| (1..=n).all(|j| m.entry(i, j) == m.entry(i, n + 1 - j)));
    let zero_pattern_ok = (1..=n).all(|i| {
        (1..=n).all(|j| {
            let structural_zero = i < j && j + i <= n;
            m.entry(i, j).is_zero() == structural_zero
        })
    });
    let last_two_rows_equal = n < 2 || m.row(n - 1) == m.row(n);
    StochasticReport {
        rows_ok,
        cols_ok,
        symmetry_ok,
        zero_pattern_ok,
        last_two_rows_equal,
    }
}

/// Candidate eigenvector for eigenvalue 1/4:
/// `v_k = n^2 - 3nk + 3k(k+1)/2 - 1`.
pub fn quarter_eigenvector(n: usize) -> Result<ExactVector> {
    if n < 3 {
        return Err(Error::input("quarter eigenvector is defined for n >= 3"));
    }
    let n = n as i64;
    Ok(ExactVector::new(
        (1..=n)
            .map(|k| Dyadic::from_int(n * n - 3 * n * k + 3 * k * (k + 1) / 2 - 1))
            .collect(),
    ))
}

/// `dim ker(M - lambda I)`, by fraction-free elimination over the integers.
pub fn nullspace_dimension(m: &ExactMatrix, lambda: &BigRational) -> usize {
    let n = m.n;
    let lam_num = lambda.numer();
    let lam_den = lambda.denom().abs();
    let rows: Vec<Vec<BigInt>> = (1..=n)
        .map(|i| {
            let row = m.row(i);
            let emax = row.iter().map(Dyadic::exponent).max().unwrap_or(0);
            let scale: BigInt = (BigInt::one() << emax as usize).lcm(&lam_den);
            let mut out: Vec<BigInt> = row
                .iter()
                .map(|d| (&scale >> d.exponent() as usize) * d.numerator())
                .collect();
            out[i - 1] -= &scale / &lam_den * lam_num;
            out
        })
        .collect();
    n - integer_rank(rows)
}

/// Bareiss elimination; every intermediate division is exact.
fn integer_rank(mut a: Vec<Vec<BigInt>>) -> usize {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    for r in a.iter_mut() {
        let g = r.iter().fold(BigInt::zero(), |g, x| g.gcd(x));
        if !g.is_zero() && !g.is_one() {
            r.iter_mut().for_each(|x| *x /= &g);
        }
    }
    let mut rank = 0;
    let mut prev = BigInt::one();
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows)
            .filter(|&r| !a[r][col].is_zero())
            .min_by_key(|&r| a[r][col].bits())
        else {
            continue;
        };
        a.swap(rank, p);
        let (head, tail) = a.split_at_mut(rank + 1);
        let pivot_row = &head[rank];
        let pivot = &pivot_row[col];
        for row in tail.iter_mut() {
            let factor = std::mem::take(&mut row[col]);
            for c in col + 1..cols {
                let v = pivot * &row[c] - &factor * &pivot_row[c];
                debug_assert!((&v % &prev).is_zero());
                row[c] = v / &prev;
            }
        }
        prev = pivot.clone();
        rank += 1;
    }
    rank
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SpectrumFinding {
    /// Probed eigenvalue, rendered as `a/b`.
    pub lambda: String,
    pub dimension: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub findings: Vec<SpectrumFinding>,
    pub rank: usize,
    pub total_dimension: usize,
    /// Geometric multiplicities over the probes account for all of `n`.
    pub dimensions_sum_to_n: bool,
}

impl SpectrumReport {
    pub fn dimension_at(&self, lambda: &str) -> Option<usize> {
        self.findings
            .iter()
            .find(|f| f.lambda == lambda)
            .map(|f| f.dimension)
    }
}

/// The eigenvalue probes used by [`spectrum_report`]: `4^-i` for
/// `i = 0..=ceil((n-1)/2)`, then 0.
pub fn spectrum_probes(n: usize) -> Vec<BigRational> {
    let top = n.saturating_sub(1).div_ceil(2);
    let mut probes: Vec<BigRational> = (0..=top)
        .map(|i| BigRational::new(BigInt::one(), BigInt::one() << (2 * i)))
        .collect();
    probes.push(BigRational::zero());
    probes
}

pub fn spectrum_report(n: usize) -> Result<SpectrumReport> {
    if n > SPECTRUM_LIMIT {
        return Err(Error::Resource {
            what: "spectrum report",
            required: format!("{n}x{n} elimination"),
            limit: format!("n <= {SPECTRUM_LIMIT}"),
        });
    }
    let m = position_matrix(n)?;
    let findings: Vec<SpectrumFinding> = spectrum_probes(n)
        .iter()
        .map(|lam| SpectrumFinding {
            lambda: lam.to_string(),
            dimension: nullspace_dimension(&m, lam),
        })
        .collect();
    let kernel = findings.last().map_or(0, |f| f.dimension);
    let total_dimension = findings.iter().map(|f| f.dimension).sum();
    Ok(SpectrumReport {
        n,
        rank: n - kernel,
        total_dimension,
        dimensions_sum_to_n: total_dimension == n,
        findings,
    })
}

/// `max over permutations w of 1 - n! P(w)`.
pub fn separation_distance(d: &PermDistribution) -> Result<BigRational> {
    let n = d.n();
    if n > SEPARATION_LIMIT {
        return Err(Error::Resource {
            what: "separation distance",
            required: format!("{n}! permutations"),
            limit: format!("n <= {SEPARATION_LIMIT}"),
        });
    }
    let factorial: BigInt = (1..=n as u64).product::<u64>().into();
    if d.support_size() < all_permutations(n).len() {
        return Ok(BigRational::one());
    }
    let min = d.iter().map(|(_, w)| w).min().cloned().unwrap();
    Ok(BigRational::one() - min * BigRational::from_integer(factorial))
}

/// `1 - exp(-1 / (6 * 4^d))`, the large-deck separation after
/// `d + 1.5 log2 n` one-shelf shuffles.
pub fn sep_asymptote(d: f64) -> f64 {
    let x = 1.0 / (6.0 * 4f64.powf(d));
    -(-x).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shuffle::{convolve, enumerate_distribution, Shuffler};

    fn d(n: i64, e: u32) -> Dyadic {
        Dyadic::new(n, e)
    }

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn small_matrices() {
        assert_eq!(position_matrix(1).unwrap().entry(1, 1), &Dyadic::one());
        let m3 = position_matrix(3).unwrap();
        let expected = [
            [d(1, 1), d(0, 0), d(1, 1)],
            [d(1, 2), d(1, 1), d(1, 2)],
            [d(1, 2), d(1, 1), d(1, 2)],
        ];
        for i in 1..=3 {
            assert_eq!(m3.row(i), &expected[i - 1]);
        }
        let m4 = position_matrix(4).unwrap();
        for (i, j) in [(3, 2), (4, 2), (3, 3), (4, 3)] {
            assert_eq!(m4.entry(i, j), &d(3, 3));
        }
        assert!(position_matrix(0).is_err());
    }

    #[test]
    fn corner_entries_are_half() {
        for n in 2..=30 {
            let m = position_matrix(n).unwrap();
            assert_eq!(m.entry(1, 1), &d(1, 1));
            assert_eq!(m.entry(1, n), &d(1, 1));
        }
    }

    #[test]
    fn report_flags() {
        assert!(stochastic_report(&position_matrix(7).unwrap()).all_ok());
        let mut bad = position_matrix(7).unwrap();
        bad.set_entry(3, 2, bad.entry(3, 2) + &d(1, 10));
        let r = stochastic_report(&bad);
        assert!(!r.rows_ok);
        assert!(!r.cols_ok);
        assert!(stochastic_report(&position_matrix(2).unwrap()).last_two_rows_equal);
    }

    #[test]
    fn marginals_match_enumeration() {
        for n in 1..=8 {
            let m = position_matrix(n).unwrap();
            let e = enumerate_distribution(n, Shuffler::SingleShelf).unwrap();
            assert_eq!(m.to_rational_rows(), e.marginals(), "n={n}");
        }
    }

    #[test]
    fn power_one_is_identity_map() {
        let m = position_matrix(6).unwrap();
        assert_eq!(matrix_power(&m, 1).unwrap(), m);
        assert!(matrix_power(&m, 0).is_err());
        assert_eq!(
            matrix_power(&m, 3).unwrap(),
            m.mul(&m).unwrap().mul(&m).unwrap()
        );
    }

    #[test]
    fn square_is_two_shelf_marginals() {
        let m2 = matrix_power(&position_matrix(5).unwrap(), 2).unwrap();
        let e = enumerate_distribution(5, Shuffler::MShelf(2)).unwrap();
        assert_eq!(m2.to_rational_rows(), e.marginals());
    }

    #[test]
    fn powers_approach_uniform() {
        let m = position_matrix(6).unwrap();
        let sixth = d(1, 0).to_rational() / BigRational::from_integer(6.into());
        let mut prev: Option<BigRational> = None;
        for p in 1..=8 {
            let mp = matrix_power(&m, p).unwrap();
            let dev = mp
                .to_rational_rows()
                .into_iter()
                .flatten()
                .map(|x| (x - &sixth).abs())
                .max()
                .unwrap();
            if let Some(prev) = &prev {
                assert!(&dev < prev, "p={p}");
            }
            prev = Some(dev);
        }
    }

    #[test]
    fn quarter_eigenvector_small() {
        let v = quarter_eigenvector(3).unwrap();
        assert_eq!(v.entries(), &[d(2, 0), d(-1, 0), d(-1, 0)]);
        assert!(quarter_eigenvector(2).is_err());
        for n in 3..=12 {
            let m = position_matrix(n).unwrap();
            let v = quarter_eigenvector(n).unwrap();
            assert_eq!(m.mul_vec(&v).unwrap(), v.scale(&d(1, 2)), "n={n}");
        }
    }

    #[test]
    fn uniform_is_left_fixed() {
        for n in 1..=20 {
            let m = position_matrix(n).unwrap();
            // n * (1/n, ..., 1/n) = all ones, which stays dyadic.
            let ones = ExactVector::new(vec![Dyadic::one(); n]);
            assert_eq!(m.left_mul_vec(&ones).unwrap(), ones);
        }
    }

    #[test]
    fn nullspace_known_cases() {
        let one = BigRational::one();
        let zero = BigRational::zero();
        assert_eq!(nullspace_dimension(&position_matrix(6).unwrap(), &zero), 3);
        assert_eq!(nullspace_dimension(&position_matrix(7).unwrap(), &zero), 3);
        for n in 2..=12 {
            assert_eq!(
                nullspace_dimension(&position_matrix(n).unwrap(), &one),
                1,
                "n={n}"
            );
        }
        assert_eq!(nullspace_dimension(&ExactMatrix::identity(4), &one), 4);
        assert_eq!(nullspace_dimension(&ExactMatrix::identity(4), &q(1, 3)), 0);
    }

    #[test]
    fn spectrum_small() {
        let r4 = spectrum_report(4).unwrap();
        assert_eq!(r4.rank, 2);
        assert_eq!(r4.dimension_at("0"), Some(2));
        let r1 = spectrum_report(1).unwrap();
        assert_eq!(r1.dimension_at("1"), Some(1));
        assert!(r1.dimensions_sum_to_n);
        let r5 = spectrum_report(5).unwrap();
        for lam in ["1", "1/4", "1/16"] {
            assert!(r5.dimension_at(lam).unwrap() >= 1, "{lam}");
        }
        assert!(spectrum_report(65).is_err());
    }

    #[test]
    fn separation_edge_cases() {
        let u = PermDistribution::uniform(4).unwrap();
        assert_eq!(separation_distance(&u).unwrap(), BigRational::zero());
        let p = enumerate_distribution(4, Shuffler::SingleShelf).unwrap();
        assert_eq!(separation_distance(&p).unwrap(), BigRational::one());
        let mut cur = p.clone();
        let mut prev = separation_distance(&cur).unwrap();
        for _ in 2..=6 {
            cur = convolve(&cur, &p).unwrap();
            let s = separation_distance(&cur).unwrap();
            assert!(s <= prev);
            prev = s;
        }
        assert!(prev < BigRational::one());
    }

    #[test]
    fn asymptote_values() {
        assert!((sep_asymptote(0.0) - (1.0 - (-1.0f64 / 6.0).exp())).abs() < 1e-15);
        assert!((sep_asymptote(0.0) - 0.1535).abs() < 5e-5);
        assert!(sep_asymptote(200.0) < 1e-100);
        assert_eq!(sep_asymptote(-200.0), 1.0);
    }

    #[test]
    fn json_and_csv() {
        let m = position_matrix(3).unwrap();
        let j = m.to_json();
        assert_eq!(j["n"], 3);
        assert_eq!(
            j["entries"][1][1],
            serde_json::json!({"num": "1", "pow2": 1})
        );
        assert_eq!(ExactMatrix::from_json(&j).unwrap(), m);
        assert_eq!(m.to_csv(), "0.5,0,0.5\n0.25,0.5,0.25\n0.25,0.5,0.25\n");
    }
}
