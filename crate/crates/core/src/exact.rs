//! Exact rational scalar underlying every quantity in the crate.
//!
//! All expenditures, prices, quantities, utility levels, and multipliers are
//! [`Money`] values: arbitrary-precision rationals parsed exactly from
//! finite-decimal (or `n/d` fraction) literals. Comparisons are exact; no
//! tolerance is ever applied. This is what makes weak-vs-strict
//! revealed-preference edges, and hence every GARP/GAPP verdict, decidable.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Exact rational scalar (currency units, prices, or quantities).
///
/// Constructed from integer pairs or parsed from decimal strings; arithmetic
/// and ordering are exact. Values with a terminating decimal expansion
/// display as decimals, everything else as `numerator/denominator`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(BigRational);

impl Money {
    pub fn zero() -> Self {
        Money(BigRational::zero())
    }

    pub fn one() -> Self {
        Money(BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        Money(BigRational::from_integer(BigInt::from(n)))
    }

    /// `numer/denom` as an exact rational. Panics if `denom == 0`.
    pub fn ratio(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Money(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    #[cfg(test)]
    pub(crate) fn from_big(r: BigRational) -> Self {
        Money(r)
    }

    /// Parses a decimal literal (`-12`, `3.25`, `1e-3`) or a fraction
    /// (`7/2`). Decimal inputs are represented exactly.
    pub fn parse(text: &str) -> Result<Self, Error> {
        parse_exact(text).ok_or_else(|| Error::Schema {
            message: format!("invalid exact-number literal `{text}`"),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn abs(&self) -> Self {
        Money(self.0.abs())
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Money(self.0.recip())
    }

    /// Nonnegative integer power by repeated squaring.
    pub fn pow(&self, mut exp: u64) -> Self {
        let mut base = self.0.clone();
        let mut acc = BigRational::one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= &base;
            }
            exp >>= 1;
            if exp > 0 {
                base = &base * &base;
            }
        }
        Money(acc)
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Approximate `f64` value; used only for diagnostics, never for
    /// comparisons.
    pub fn to_f64_lossy(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Exact decimal string when the denominator is of the form 2^a·5^b,
    /// otherwise `None`.
    fn decimal_expansion(&self) -> Option<String> {
        let numer = self.0.numer();
        let denom = self.0.denom();
        let (two, five, ten) = (BigInt::from(2), BigInt::from(5), BigInt::from(10));
        let mut d = denom.clone();
        let mut twos = 0u32;
        let mut fives = 0u32;
        while (&d % &two).is_zero() {
            d /= &two;
            twos += 1;
        }
        while (&d % &five).is_zero() {
            d /= &five;
            fives += 1;
        }
        if !d.is_one() {
            return None;
        }
        // Scale to denominator 10^shift.
        let shift = twos.max(fives);
        let mut scaled = numer.clone();
        for _ in 0..(shift - twos) {
            scaled *= &two;
        }
        for _ in 0..(shift - fives) {
            scaled *= &five;
        }
        let neg = scaled.is_negative();
        let digits = scaled.abs().to_string();
        let mut out = String::new();
        if neg {
            out.push('-');
        }
        let shift = shift as usize;
        if shift == 0 {
            out.push_str(&digits);
        } else if digits.len() > shift {
            out.push_str(&digits[..digits.len() - shift]);
            out.push('.');
            out.push_str(&digits[digits.len() - shift..]);
        } else {
            out.push_str("0.");
            for _ in 0..(shift - digits.len()) {
                out.push('0');
            }
            out.push_str(&digits);
        }
        let _ = ten;
        Some(out)
    }
}

fn parse_exact(text: &str) -> Option<Money> {
    let s = text.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let numer = parse_decimal(n)?;
        let denom = parse_decimal(d)?;
        if denom.is_zero() {
            return None;
        }
        return Some(Money(numer.0 / denom.0));
    }
    parse_decimal(s)
}

/// `[+-]? digits [. digits] [(e|E) [+-]? digits]`, at least one digit.
fn parse_decimal(text: &str) -> Option<Money> {
    let s = text.trim();
    let (sign, rest) = match s.strip_prefix('-') {
        Some(r) => (-1i32, r),
        None => (1i32, s.strip_prefix('+').unwrap_or(s)),
    };
    let (mantissa, exponent) = match rest.split_once(['e', 'E']) {
        Some((m, e)) => (m, Some(e)),
        None => (rest, None),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::new(digits.parse::<BigInt>().ok()?, BigInt::one());
    let ten = BigRational::from_integer(BigInt::from(10));
    for _ in 0..frac_part.len() {
        value /= &ten;
    }
    if let Some(exp) = exponent {
        let exp: i32 = exp.parse().ok()?;
        if exp >= 0 {
            for _ in 0..exp {
                value *= &ten;
            }
        } else {
            for _ in 0..(-exp) {
                value /= &ten;
            }
        }
    }
    if sign < 0 {
        value = -value;
    }
    Some(Money(value))
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.decimal_expansion() {
            Some(dec) => f.write_str(&dec),
            None => write!(f, "{}/{}", self.0.numer(), self.0.denom()),
        }
    }
}

impl fmt::Debug for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Money({self})")
    }
}

impl FromStr for Money {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Money::parse(s)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for Money {
            type Output = Money;
            fn $method(self, rhs: Money) -> Money {
                Money(self.0 $op rhs.0)
            }
        }
        impl $trait for &Money {
            type Output = Money;
            fn $method(self, rhs: &Money) -> Money {
                Money(&self.0 $op &rhs.0)
            }
        }
        impl $trait<&Money> for Money {
            type Output = Money;
            fn $method(self, rhs: &Money) -> Money {
                Money(self.0 $op &rhs.0)
            }
        }
        impl $trait<Money> for &Money {
            type Output = Money;
            fn $method(self, rhs: Money) -> Money {
                Money(&self.0 $op rhs.0)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);
binop!(Div, div, /);

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Neg for &Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-&self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.fold(Money::zero(), |acc, x| acc + x)
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct MoneyVisitor;

        impl de::Visitor<'_> for MoneyVisitor {
            type Value = Money;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a decimal string, fraction string, or integer")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Money, E> {
                Money::parse(v).map_err(|e| E::custom(e.to_string()))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Money, E> {
                Ok(Money::from_int(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Money, E> {
                Ok(Money(BigRational::from_integer(BigInt::from(v))))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Money, E> {
                Err(E::custom(format!(
                    "refusing binary float {v}; pass a decimal string for exactness"
                )))
            }
        }

        deserializer.deserialize_any(MoneyVisitor)
    }
}

/// Exact inner product `Σ_k a_k·b_k`.
pub fn dot(a: &[Money], b: &[Money]) -> Money {
    assert_eq!(a.len(), b.len(), "dot: length mismatch");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decimal_parsing_is_exact() {
        let a = Money::parse("0.1").unwrap();
        let b = Money::parse("0.2").unwrap();
        let c = Money::parse("0.3").unwrap();
        assert_eq!(a + b, c);
        assert_eq!(Money::parse("3.25").unwrap(), Money::ratio(13, 4));
        assert_eq!(Money::parse("1e-3").unwrap(), Money::ratio(1, 1000));
        assert_eq!(Money::parse("-2.5E2").unwrap(), Money::from_int(-250));
        assert_eq!(Money::parse("7/2").unwrap(), Money::ratio(7, 2));
        assert_eq!(Money::parse(".5").unwrap(), Money::ratio(1, 2));
    }

    #[test]
    fn rejects_malformed_literals() {
        for bad in ["", "abc", "1.2.3", "1/0", "0x10", "--3", "1e", "NaN"] {
            assert!(Money::parse(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn display_uses_decimal_when_terminating() {
        assert_eq!(Money::ratio(13, 4).to_string(), "3.25");
        assert_eq!(Money::ratio(-1, 8).to_string(), "-0.125");
        assert_eq!(Money::ratio(1, 3).to_string(), "1/3");
        assert_eq!(Money::from_int(42).to_string(), "42");
        assert_eq!(Money::zero().to_string(), "0");
    }

    #[test]
    fn integer_powers() {
        let half = Money::ratio(1, 2);
        assert_eq!(half.pow(0), Money::one());
        assert_eq!(half.pow(10), Money::ratio(1, 1024));
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(n in -10_000i64..10_000, d in 1i64..10_000) {
            let m = Money::ratio(n, d);
            let back = Money::parse(&m.to_string()).unwrap();
            prop_assert_eq!(m, back);
        }

        #[test]
        fn arithmetic_matches_i128(a in -1000i64..1000, b in -1000i64..1000, c in 1i64..1000) {
            let x = Money::ratio(a, c);
            let y = Money::ratio(b, c);
            prop_assert_eq!(&x + &y, Money::ratio(a + b, c));
            prop_assert_eq!(&x * &y, Money::from_big(BigRational::new(
                BigInt::from(a as i128 * b as i128),
                BigInt::from(c as i128 * c as i128),
            )));
        }
    }
}
