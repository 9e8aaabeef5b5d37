//! Exact rational money.
//!
//! All valuations, payments, and redistribution credits are exact rationals.
//! Redistribution splits a pool by the recipient count, so denominators grow
//! without bound over a run; big-integer rationals avoid silent overflow.
//! Decimal rendering happens only at the reporting boundary.

use alloc::string::String;
use alloc::string::ToString;
use core::fmt;
use core::iter::Sum;
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Exact rational amount of money or value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Money(BigRational);

impl Money {
    pub fn zero() -> Self {
        Money(BigRational::zero())
    }

    pub fn from_int(n: i64) -> Self {
        Money(BigRational::from_integer(BigInt::from(n)))
    }

    /// Builds `numer/denom`. Panics on a zero denominator.
    pub fn from_ratio(numer: i64, denom: i64) -> Self {
        Money(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    /// Exact division by a positive count, for equal splits.
    pub fn div_count(&self, count: usize) -> Self {
        assert!(count > 0, "division by zero count");
        Money(&self.0 / BigInt::from(count))
    }

    /// Lossy conversion for reporting.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Canonical exact rendering `numer/denom` (denominator always present),
    /// used by trace and audit formats. Reduced form, denominator positive.
    pub fn exact(&self) -> String {
        let mut s = self.0.numer().to_string();
        s.push('/');
        s.push_str(&self.0.denom().to_string());
        s
    }

    /// Parses the output of [`Money::exact`]; also accepts a bare integer.
    pub fn parse(s: &str) -> Option<Self> {
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n, d),
            None => (s, "1"),
        };
        let numer: BigInt = n.parse().ok()?;
        let denom: BigInt = d.parse().ok()?;
        if denom.is_zero() {
            return None;
        }
        Some(Money(BigRational::new(numer, denom)))
    }
}

impl fmt::Display for Money {
    /// Decimal approximation for human-facing reports; exact form for files.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.to_f64())
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Money> for Money {
    type Output = Money;
    fn add(self, rhs: &'a Money) -> Money {
        Money(self.0 + &rhs.0)
    }
}

impl AddAssign<&Money> for Money {
    fn add_assign(&mut self, rhs: &Money) {
        self.0 += &rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl<'a> Sub<&'a Money> for Money {
    type Output = Money;
    fn sub(self, rhs: &'a Money) -> Money {
        Money(self.0 - &rhs.0)
    }
}

impl SubAssign<&Money> for Money {
    fn sub_assign(&mut self, rhs: &Money) {
        self.0 -= &rhs.0;
    }
}

impl Mul<i64> for Money {
    type Output = Money;
    fn mul(self, rhs: i64) -> Money {
        Money(self.0 * BigInt::from(rhs))
    }
}

impl Div<i64> for Money {
    type Output = Money;
    fn div(self, rhs: i64) -> Money {
        assert!(rhs != 0);
        Money(self.0 / BigInt::from(rhs))
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.fold(Money::zero(), |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_round_trip() {
        let m = Money::from_ratio(13, 200);
        assert_eq!(m.exact(), "13/200");
        assert_eq!(Money::parse("13/200").unwrap(), m);
        assert_eq!(Money::parse("-3").unwrap(), Money::from_int(-3));
        assert!(Money::parse("1/0").is_none());
        assert!(Money::parse("x").is_none());
    }

    #[test]
    fn split_is_exact() {
        let pool = Money::from_ratio(1, 5);
        let share = pool.div_count(3);
        assert_eq!(share.exact(), "1/15");
        let back: Money = (0..3).map(|_| share.clone()).sum();
        assert_eq!(back, pool);
    }

    #[test]
    fn ordering_and_signs() {
        assert!(Money::from_ratio(1, 50) < Money::from_ratio(13, 200));
        assert!(Money::from_int(-1).is_negative());
        assert!(Money::zero().is_zero());
        let d = Money::from_int(2) - Money::from_int(5);
        assert_eq!(d, Money::from_int(-3));
    }
}
