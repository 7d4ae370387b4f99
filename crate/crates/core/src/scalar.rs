//! Number backends.
//!
//! Every analytic routine in this crate is generic over [`Scalar`], which is
//! implemented for `f64` and for exact big rationals ([`Rational`]). Float
//! inputs are compared through the thresholds in [`Tolerances`]; rationals are
//! always compared exactly and ignore those thresholds.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Exact rational number with arbitrary-precision numerator and denominator.
pub type Rational = BigRational;

/// Arithmetic backend used by the loss, gradient and classification code.
pub trait Scalar:
    num_traits::Num + Signed + Clone + PartialOrd + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// `true` for exact backends. Tolerances are ignored when set.
    const EXACT: bool;

    fn from_int(n: i64) -> Self;

    /// `p / q`. Panics if `q == 0`.
    fn ratio(p: i64, q: i64) -> Self;

    fn to_f64(&self) -> f64;

    /// Converts a finite double. Exact backends return its exact binary value.
    fn from_f64(x: f64) -> Option<Self>;

    /// Square root. Exact backends return `None` unless the value is a
    /// perfect square of a rational.
    fn sqrt(&self) -> Option<Self>;

    /// Zero test against `eps * max(1, scale)`; exact backends test `== 0`.
    fn is_negligible(&self, scale: f64, eps: f64) -> bool;

    /// Sum of a sequence. The float backend uses Neumaier compensation.
    fn sum_all<I: IntoIterator<Item = Self>>(values: I) -> Self {
        values.into_iter().fold(Self::zero(), |acc, v| acc + v)
    }

    fn half() -> Self {
        Self::ratio(1, 2)
    }

    fn two() -> Self {
        Self::from_int(2)
    }

    /// Sign as -1, 0 or 1 with the same zero test as [`Scalar::is_negligible`].
    fn sign_tol(&self, scale: f64, eps: f64) -> i8 {
        if self.is_negligible(scale, eps) {
            0
        } else if self.is_positive() {
            1
        } else {
            -1
        }
    }

    fn approx_eq(&self, other: &Self, scale: f64, eps: f64) -> bool {
        (self.clone() - other.clone()).is_negligible(scale, eps)
    }

    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if a <= b {
            a
        } else {
            b
        }
    }

    /// Integer power.
    fn powi(&self, k: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = acc * self.clone();
        }
        acc
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_int(n: i64) -> Self {
        n as f64
    }

    fn ratio(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        p as f64 / q as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn sqrt(&self) -> Option<Self> {
        (*self >= 0.0).then(|| f64::sqrt(*self))
    }

    fn is_negligible(&self, scale: f64, eps: f64) -> bool {
        self.abs() <= eps * scale.abs().max(1.0)
    }

    fn sum_all<I: IntoIterator<Item = Self>>(values: I) -> Self {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for v in values {
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }

    fn powi(&self, k: u32) -> Self {
        f64::powi(*self, k as i32)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn ratio(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            // Fall back to a scaled quotient when numerator or denominator overflow f64.
            let shift = self.numer().bits().max(self.denom().bits()).saturating_sub(1000);
            let n = (self.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (self.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }

    fn from_f64(x: f64) -> Option<Self> {
        if x.is_finite() {
            <BigRational as FromPrimitive>::from_f64(x)
        } else {
            None
        }
    }

    fn sqrt(&self) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        let n = self.numer().sqrt();
        let d = self.denom().sqrt();
        (&n * &n == *self.numer() && &d * &d == *self.denom()).then(|| BigRational::new(n, d))
    }

    fn is_negligible(&self, _scale: f64, _eps: f64) -> bool {
        self.is_zero()
    }
}

/// Parses a decimal (`"-0.125"`, `"1e-3"`) or fraction (`"2/3"`) literal exactly.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((p, q)) = text.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}0").parse().ok()?;
    let digits = digits / BigInt::from(10);
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        value = -value;
    }
    Some(value)
}

/// Formats a rational as `"p/q"`, or `"p"` for integers.
pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// `true` when `value` has no fractional part. Used by parity checks on counts.
pub fn is_integer(value: &Rational) -> bool {
    value.denom().is_one()
}

/// Comparison thresholds applied to float inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative threshold for algebraic predicates such as `w_j = 0`.
    pub structural: f64,
    /// Relative distance (in units of `t1 - t0`) below which breakpoints merge.
    pub knot: f64,
    /// Threshold on the sup-norm of the generalized gradient.
    pub grad: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { structural: 1e-11, knot: 1e-12, grad: 1e-9 }
    }
}

impl Tolerances {
    /// Looser thresholds for iterates produced by the descent simulator.
    pub fn relaxed() -> Self {
        Self { structural: 1e-5, knot: 1e-9, grad: 1e-6 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_and_fractions() {
        assert_eq!(parse_rational("0.1").unwrap(), Rational::ratio(1, 10));
        assert_eq!(parse_rational("-2/6").unwrap(), Rational::ratio(-1, 3));
        assert_eq!(parse_rational("1.5e2").unwrap(), Rational::from_int(150));
        assert_eq!(parse_rational("2.5E-1").unwrap(), Rational::ratio(1, 4));
        assert_eq!(parse_rational("3").unwrap(), Rational::from_int(3));
        assert!(parse_rational("1/0").is_none());
        assert!(parse_rational("abc").is_none());
        assert!(parse_rational("").is_none());
    }

    #[test]
    fn exact_sqrt_only_for_squares() {
        assert_eq!(Scalar::sqrt(&Rational::ratio(9, 16)).unwrap(), Rational::ratio(3, 4));
        assert!(Scalar::sqrt(&Rational::ratio(1, 2)).is_none());
        assert!(Scalar::sqrt(&Rational::ratio(-1, 4)).is_none());
        assert_eq!(Scalar::sqrt(&0.25f64).unwrap(), 0.5);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let values = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(<f64 as Scalar>::sum_all(values), 2.0);
    }

    #[test]
    fn negligible_is_exact_for_rationals() {
        assert!(!Rational::ratio(1, 1_000_000_000).is_negligible(1.0, 1.0));
        assert!(1e-13f64.is_negligible(1.0, 1e-11));
        assert!(!1e-9f64.is_negligible(1.0, 1e-11));
    }

    #[test]
    fn formats_fractions() {
        assert_eq!(format_rational(&Rational::ratio(1, 972)), "1/972");
        assert_eq!(format_rational(&Rational::from_int(-4)), "-4");
    }
}
