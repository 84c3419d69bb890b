//! Exact rationals with power-of-two denominators.
//!
//! Every one-shelf probability is of the form `a / 2^k`, so this type carries
//! the whole exact pipeline: matrix entries, rewards and stopping-time laws.
//! Values are kept canonical (odd numerator, or zero with exponent 0), which
//! makes derived `Eq`/`Hash` agree with numeric equality.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: BigInt,
    exp: u32,
}

impl Dyadic {
    /// `num / 2^exp`, canonicalized.
    pub fn new(num: impl Into<BigInt>, exp: u32) -> Self {
        let mut d = Dyadic {
            num: num.into(),
            exp,
        };
        d.normalize();
        d
    }

    pub fn zero() -> Self {
        Dyadic {
            num: BigInt::zero(),
            exp: 0,
        }
    }

    pub fn one() -> Self {
        Dyadic {
            num: BigInt::one(),
            exp: 0,
        }
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic::new(v, 0)
    }

    /// `1 / 2^k`
    pub fn pow2_inv(k: u32) -> Self {
        Dyadic {
            num: BigInt::one(),
            exp: k,
        }
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().unwrap_or(0);
        let shift = tz.min(self.exp as u64) as u32;
        if shift > 0 {
            self.num >>= shift as usize;
            self.exp -= shift;
        }
    }

    pub fn numerator(&self) -> &BigInt {
        &self.num
    }

    /// Power of two in the (reduced) denominator.
    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn denominator(&self) -> BigUint {
        BigUint::one() << self.exp as usize
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.num.is_negative()
    }

    /// Divides by `2^k`.
    pub fn shr(&self, k: u32) -> Self {
        Dyadic::new(self.num.clone(), self.exp + k)
    }

    /// Multiplies by `2^k`.
    pub fn shl(&self, k: u32) -> Self {
        if k >= self.exp {
            Dyadic::new(&self.num << (k - self.exp) as usize, 0)
        } else {
            Dyadic::new(self.num.clone(), self.exp - k)
        }
    }

    pub fn abs(&self) -> Self {
        Dyadic {
            num: self.num.abs(),
            exp: self.exp,
        }
    }

    /// Numerator scaled to denominator `2^target`. Panics if `target` is
    /// smaller than the current exponent.
    pub fn scaled_numerator(&self, target: u32) -> BigInt {
        assert!(target >= self.exp, "target exponent too small");
        &self.num << (target - self.exp) as usize
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.num.clone(), BigInt::from(self.denominator()))
    }

    /// `None` when the reduced denominator is not a power of two.
    pub fn from_rational(r: &BigRational) -> Option<Self> {
        let den = r.denom();
        if den.sign() != Sign::Plus {
            return None;
        }
        let tz = den.trailing_zeros().unwrap_or(0);
        if (den >> tz as usize) != BigInt::one() {
            return None;
        }
        Some(Dyadic::new(r.numer().clone(), tz as u32))
    }

    pub fn to_f64(&self) -> f64 {
        if self.num.is_zero() {
            return 0.0;
        }
        let bits = self.num.bits();
        let (mant, mut scale) = if bits > 62 {
            let drop = bits - 62;
            ((&self.num >> drop as usize).to_i64().unwrap(), drop as i64)
        } else {
            (self.num.to_i64().unwrap(), 0)
        };
        scale -= self.exp as i64;
        let mut v = mant as f64;
        while scale < -1000 {
            v *= 2f64.powi(-1000);
            scale += 1000;
        }
        while scale > 1000 {
            v *= 2f64.powi(1000);
            scale -= 1000;
        }
        v * 2f64.powi(scale as i32)
    }

    /// Exact decimal expansion (always finite for a dyadic value).
    pub fn to_decimal_exact(&self) -> String {
        let (int_digits, frac_digits) = self.decimal_parts();
        let sign = if self.num.is_negative() { "-" } else { "" };
        if frac_digits.is_empty() {
            format!("{sign}{int_digits}")
        } else {
            format!("{sign}{int_digits}.{frac_digits}")
        }
    }

    /// Integer part and fractional digits (no trailing zeros) of |self|.
    fn decimal_parts(&self) -> (String, String) {
        let scaled = self.num.abs().to_biguint().unwrap() * BigUint::from(5u32).pow(self.exp);
        let digits = scaled.to_string();
        let e = self.exp as usize;
        let (int_part, frac_part) = if digits.len() > e {
            let (a, b) = digits.split_at(digits.len() - e);
            (a.to_string(), b.to_string())
        } else {
            (
                "0".to_string(),
                format!("{}{}", "0".repeat(e - digits.len()), digits),
            )
        };
        (int_part, frac_part.trim_end_matches('0').to_string())
    }

    /// Rounds half away from zero to `decimals` places.
    pub fn to_fixed(&self, decimals: usize) -> String {
        let abs = self.abs();
        let scale = BigInt::from(10u32).pow(decimals as u32);
        // floor(|x| * 10^d + 1/2)
        let shifted = &abs.num * &scale * 2 + (BigInt::one() << abs.exp as usize);
        let rounded: BigInt = shifted >> (abs.exp as usize + 1);
        let mut s = rounded.to_string();
        if decimals > 0 {
            if s.len() <= decimals {
                s = format!("{}{}", "0".repeat(decimals + 1 - s.len()), s);
            }
            s.insert(s.len() - decimals, '.');
        }
        if self.num.is_negative() && rounded.sign() != Sign::NoSign {
            s.insert(0, '-');
        }
        s
    }

    /// Rounds half away from zero to `sig` significant digits, plain notation.
    pub fn to_significant(&self, sig: usize) -> String {
        assert!(sig > 0);
        if self.is_zero() {
            return "0".to_string();
        }
        let (int_part, frac_part) = self.decimal_parts();
        let all: String = format!("{int_part}{frac_part}");
        let point = int_part.len();
        let lead = all.bytes().position(|b| b != b'0').unwrap();
        let keep_end = lead + sig;
        let mut digits: Vec<u8> = all.bytes().map(|b| b - b'0').collect();
        if keep_end < digits.len() {
            let round_up = digits[keep_end] >= 5;
            digits.truncate(keep_end);
            if round_up {
                let mut i = keep_end;
                loop {
                    if i == 0 {
                        digits.insert(0, 1);
                        break;
                    }
                    i -= 1;
                    if digits[i] == 9 {
                        digits[i] = 0;
                    } else {
                        digits[i] += 1;
                        break;
                    }
                }
            }
        }
        let carried = digits.len() > keep_end.min(all.len());
        let point = if carried { point + 1 } else { point };
        while digits.len() < point {
            digits.push(0);
        }
        let mut s: String = digits[..point].iter().map(|d| (d + b'0') as char).collect();
        if s.is_empty() {
            s.push('0');
        }
        let frac: String = digits[point..].iter().map(|d| (d + b'0') as char).collect();
        let frac = frac.trim_end_matches('0');
        if !frac.is_empty() {
            s.push('.');
            s.push_str(frac);
        }
        let s = s.trim_start_matches('0');
        let s = if s.is_empty() || s.starts_with('.') {
            format!("0{s}")
        } else {
            s.to_string()
        };
        if self.num.is_negative() {
            format!("-{s}")
        } else {
            s
        }
    }
}

/// Serialized as `{"num": "<decimal>", "pow2": <exponent>}`.
impl serde::Serialize for Dyadic {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Dyadic", 2)?;
        st.serialize_field("num", &self.num.to_string())?;
        st.serialize_field("pow2", &self.exp)?;
        st.end()
    }
}

impl Default for Dyadic {
    fn default() -> Self {
        Dyadic::zero()
    }
}

impl From<i64> for Dyadic {
    fn from(v: i64) -> Self {
        Dyadic::from_int(v)
    }
}

impl From<BigInt> for Dyadic {
    fn from(v: BigInt) -> Self {
        Dyadic::new(v, 0)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.denominator())
        }
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exp.max(other.exp);
        self.scaled_numerator(e).cmp(&other.scaled_numerator(e))
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add<&Dyadic> for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let e = self.exp.max(rhs.exp);
        Dyadic::new(self.scaled_numerator(e) + rhs.scaled_numerator(e), e)
    }
}

impl Sub<&Dyadic> for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        let e = self.exp.max(rhs.exp);
        Dyadic::new(self.scaled_numerator(e) - rhs.scaled_numerator(e), e)
    }
}

impl Mul<&Dyadic> for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(&self.num * &rhs.num, self.exp + rhs.exp)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Dyadic> for Dyadic {
            type Output = Dyadic;
            fn $m(self, rhs: Dyadic) -> Dyadic {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Dyadic> for Dyadic {
            type Output = Dyadic;
            fn $m(self, rhs: &Dyadic) -> Dyadic {
                (&self).$m(rhs)
            }
        }
        impl $tr<Dyadic> for &Dyadic {
            type Output = Dyadic;
            fn $m(self, rhs: Dyadic) -> Dyadic {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic {
            num: -self.num,
            exp: self.exp,
        }
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        -(self.clone())
    }
}

impl Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
        sum_dyadics(iter)
    }
}

impl<'a> Sum<&'a Dyadic> for Dyadic {
    fn sum<I: Iterator<Item = &'a Dyadic>>(iter: I) -> Dyadic {
        sum_dyadics(iter.cloned())
    }
}

// Accumulates on a common exponent and reduces once at the end.
fn sum_dyadics<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
    let mut acc = BigInt::zero();
    let mut exp = 0u32;
    for d in iter {
        if d.exp > exp {
            acc <<= (d.exp - exp) as usize;
            exp = d.exp;
        }
        acc += d.scaled_numerator(exp);
    }
    Dyadic::new(acc, exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(n: i64, e: u32) -> Dyadic {
        Dyadic::new(n, e)
    }

    #[test]
    fn canonical_form() {
        assert_eq!(d(6, 3), d(3, 2));
        assert_eq!(d(0, 9).exponent(), 0);
        assert_eq!(d(8, 2), Dyadic::from_int(2));
        assert_eq!(d(3, 3).to_string(), "3/8");
    }

    #[test]
    fn arithmetic() {
        assert_eq!(d(1, 1) + d(1, 2), d(3, 2));
        assert_eq!(d(1, 1) - d(1, 1), Dyadic::zero());
        assert_eq!(d(3, 2) * d(1, 1), d(3, 3));
        assert!(d(3, 3) < d(1, 1));
        assert!(d(-1, 4) < Dyadic::zero());
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(d(3, 3).to_decimal_exact(), "0.375");
        assert_eq!(d(345, 7).to_fixed(2), "2.70");
        assert_eq!(d(1, 1).to_fixed(0), "1");
        assert_eq!(Dyadic::from_int(6).to_fixed(2), "6.00");
        assert_eq!(d(-3, 3).to_fixed(2), "-0.38");
        assert_eq!(d(1, 10).to_significant(3), "0.000977");
        assert_eq!(d(1, 3).to_significant(20), "0.125");
        assert_eq!(d(999, 10).to_significant(2), "0.98");
        assert_eq!(d(1023, 10).to_significant(2), "1");
        assert_eq!(Dyadic::from_int(1234).to_significant(2), "1200");
    }

    #[test]
    fn f64_conversion_handles_huge_exponents() {
        let tiny = Dyadic::pow2_inv(1500);
        assert_eq!(tiny.to_f64(), 0.0);
        let x = Dyadic::new(BigInt::one() << 1200usize, 1201);
        assert_eq!(x.to_f64(), 0.5);
    }

    proptest! {
        #[test]
        fn matches_rational_arithmetic(a in -10_000i64..10_000, ea in 0u32..20,
                                       b in -10_000i64..10_000, eb in 0u32..20) {
            let x = d(a, ea);
            let y = d(b, eb);
            prop_assert_eq!((&x + &y).to_rational(), x.to_rational() + y.to_rational());
            prop_assert_eq!((&x * &y).to_rational(), x.to_rational() * y.to_rational());
            prop_assert_eq!(x.cmp(&y), x.to_rational().cmp(&y.to_rational()));
            prop_assert_eq!(Dyadic::from_rational(&x.to_rational()), Some(x.clone()));
            prop_assert!((x.to_f64() - a as f64 / 2f64.powi(ea as i32)).abs() < 1e-12);
        }
    }
}
