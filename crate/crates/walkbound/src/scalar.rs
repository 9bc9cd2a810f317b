//! Scalar modes.
//!
//! Every computation in the crate is generic over a [`Scalar`]. Two modes
//! ship: exact [`BigRational`] (the default) and [`BigFloat`], a binary
//! floating point number with a fixed, configurable mantissa width.
//!
//! Convolution powers store per-atom *masses* rather than scalars. In
//! rational mode the mass of an atom of `μ*ⁿ` is the integer `μ*ⁿ(x)·Dⁿ`,
//! where `D` is the common denominator of the weights of `μ`, so the inner
//! loop is integer multiply-add with no gcd reductions.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScalarError {
    #[error("weight denominator {0} too large for the integer convolution kernel")]
    DenominatorTooLarge(BigUint),
    #[error("decimal precision must be at least 1 digit")]
    ZeroPrecision,
}

/// Which scalar mode produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Rational,
    Float { digits: u32 },
}

impl std::str::FromStr for Mode {
    type Err = String;

    /// `rational` or `float:<digits>`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "rational" => Ok(Mode::Rational),
            t => t
                .strip_prefix("float:")
                .and_then(|d| d.parse::<u32>().ok())
                .filter(|&d| d > 0)
                .map(|digits| Mode::Float { digits })
                .ok_or_else(|| format!("expected rational or float:<digits>, got {s:?}")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Rational => f.write_str("rational"),
            Mode::Float { digits } => write!(f, "float:{digits}"),
        }
    }
}

/// Arithmetic used by walks, kernels and harmonic checks.
pub trait Scalar: Clone + fmt::Debug + PartialEq + PartialOrd + Send + Sync + 'static {
    /// Construction context (precision for floats, nothing for rationals).
    type Context: Clone + fmt::Debug + PartialEq + Send + Sync;
    /// Per-atom storage inside a convolution power.
    type Mass: Clone + fmt::Debug + PartialEq + Send + Sync;
    /// Per-step weight applied to a mass.
    type Weight: Clone + fmt::Debug + Send + Sync;

    /// True when arithmetic is exact.
    const EXACT: bool;

    fn mode(ctx: &Self::Context) -> Mode;

    fn lift(ctx: &Self::Context, q: &BigRational) -> Self;
    fn zero_with(ctx: &Self::Context) -> Self;
    fn one_with(ctx: &Self::Context) -> Self {
        Self::lift(ctx, &<BigRational as One>::one())
    }

    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;
    fn times(&self, other: &Self) -> Self;
    /// `None` when `other` is zero.
    fn divide(&self, other: &Self) -> Option<Self>;

    fn is_zero_value(&self) -> bool;
    fn is_positive_value(&self) -> bool;
    fn abs_value(&self) -> Self;
    fn as_f64(&self) -> f64;
    /// Natural logarithm of a positive value, accurate far below `f64` range.
    fn ln(&self) -> f64;
    /// Text form for reports: `p/q` for rationals, scientific decimal for floats.
    fn render(&self) -> String;

    fn pow_with(&self, ctx: &Self::Context, mut exp: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one_with(ctx);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.times(&base);
            }
            exp >>= 1;
            if exp > 0 {
                base = base.times(&base);
            }
        }
        acc
    }

    /// `self / other` as `f64`, computed before rounding so that two tiny
    /// values still give an accurate ratio.
    fn ratio_f64(&self, other: &Self) -> Option<f64> {
        self.divide(other).map(|q| q.as_f64())
    }

    /// Splits step weights into integer-like weights and the common scale
    /// that converts masses back into probabilities.
    fn step_weights(
        ctx: &Self::Context,
        weights: &[BigRational],
    ) -> Result<(Vec<Self::Weight>, Self), ScalarError>;
    fn mass_zero() -> Self::Mass;
    fn mass_unit(ctx: &Self::Context) -> Self::Mass;
    /// `acc += mass · weight`.
    fn accumulate(acc: &mut Self::Mass, mass: &Self::Mass, weight: &Self::Weight);
    /// `acc += a · b`, for convolving two powers with each other.
    fn accumulate_product(acc: &mut Self::Mass, a: &Self::Mass, b: &Self::Mass);
    fn mass_is_zero(mass: &Self::Mass) -> bool;
    fn from_mass(mass: &Self::Mass, scale: &Self) -> Self;
    /// Exact rational view of a mass, when the mode has one.
    fn mass_to_rational(mass: &Self::Mass, scale: &Self) -> Option<BigRational>;
    /// Inverse of [`Scalar::mass_to_rational`]; `None` if the value is not representable.
    fn mass_from_rational(q: &BigRational, scale: &Self) -> Option<Self::Mass>;
}

impl Scalar for BigRational {
    type Context = ();
    type Mass = Count;
    type Weight = u64;

    const EXACT: bool = true;

    fn mode(_: &()) -> Mode {
        Mode::Rational
    }

    fn lift(_: &(), q: &BigRational) -> Self {
        q.clone()
    }
    fn zero_with(_: &()) -> Self {
        <BigRational as Zero>::zero()
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn divide(&self, other: &Self) -> Option<Self> {
        (!Zero::is_zero(other)).then(|| self / other)
    }
    fn is_zero_value(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_positive_value(&self) -> bool {
        Signed::is_positive(self)
    }
    fn abs_value(&self) -> Self {
        Signed::abs(self)
    }
    fn as_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn ln(&self) -> f64 {
        big_ln(self.numer().magnitude()) - big_ln(self.denom().magnitude())
    }
    fn render(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }
    fn ratio_f64(&self, other: &Self) -> Option<f64> {
        if Zero::is_zero(other) {
            return None;
        }
        // Skips the gcd: only the quotient's leading bits matter.
        Some(fraction_to_f64(
            &(self.numer() * other.denom()),
            &(self.denom() * other.numer()),
        ))
    }

    fn step_weights(_: &(), weights: &[BigRational]) -> Result<(Vec<u64>, Self), ScalarError> {
        let denom = weights
            .iter()
            .fold(BigInt::one(), |acc, w| acc.lcm(w.denom()));
        let ints = weights
            .iter()
            .map(|w| {
                let scaled = w * BigRational::from(denom.clone());
                scaled
                    .to_integer()
                    .to_u64()
                    .ok_or_else(|| ScalarError::DenominatorTooLarge(denom.magnitude().clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((ints, BigRational::new(One::one(), denom)))
    }
    fn mass_zero() -> Count {
        Count::zero()
    }
    fn mass_unit(_: &()) -> Count {
        Count::Small(1)
    }
    fn accumulate(acc: &mut Count, mass: &Count, weight: &u64) {
        acc.add_mul_u64(mass, *weight);
    }
    fn accumulate_product(acc: &mut Count, a: &Count, b: &Count) {
        acc.add_mul(a, b);
    }
    fn mass_is_zero(mass: &Count) -> bool {
        mass.is_zero()
    }
    fn from_mass(mass: &Count, scale: &Self) -> Self {
        BigRational::from(BigInt::from(mass.to_biguint())) * scale
    }
    fn mass_to_rational(mass: &Count, scale: &Self) -> Option<BigRational> {
        Some(Self::from_mass(mass, scale))
    }
    fn mass_from_rational(q: &BigRational, scale: &Self) -> Option<Count> {
        let m = q / scale;
        if !m.is_integer() || m.is_negative() {
            return None;
        }
        m.to_integer().to_biguint().map(Count::from_biguint)
    }
}

/// Non-negative integer that stays in a `u128` until it overflows.
///
/// Invariant: `Big` only holds values above `u128::MAX`, so the derived
/// equality is value equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Count {
    Small(u128),
    Big(BigUint),
}

impl Count {
    pub fn zero() -> Self {
        Count::Small(0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Count::Small(0))
    }

    pub fn from_biguint(value: BigUint) -> Self {
        match value.to_u128() {
            Some(v) => Count::Small(v),
            None => Count::Big(value),
        }
    }

    pub fn to_biguint(&self) -> BigUint {
        match self {
            Count::Small(v) => BigUint::from(*v),
            Count::Big(v) => v.clone(),
        }
    }

    /// `self += other · weight`.
    pub fn add_mul_u64(&mut self, other: &Count, weight: u64) {
        if weight == 0 || other.is_zero() {
            return;
        }
        if let (Count::Small(acc), Count::Small(m)) = (&mut *self, other) {
            if let Some(sum) = m.checked_mul(u128::from(weight)).and_then(|p| acc.checked_add(p)) {
                *acc = sum;
                return;
            }
        }
        let sum = self.to_biguint() + other.to_biguint() * weight;
        *self = Count::from_biguint(sum);
    }

    /// `self += a · b`.
    pub fn add_mul(&mut self, a: &Count, b: &Count) {
        if a.is_zero() || b.is_zero() {
            return;
        }
        if let (Count::Small(acc), Count::Small(x), Count::Small(y)) = (&mut *self, a, b) {
            if let Some(sum) = x.checked_mul(*y).and_then(|p| acc.checked_add(p)) {
                *acc = sum;
                return;
            }
        }
        let sum = self.to_biguint() + a.to_biguint() * b.to_biguint();
        *self = Count::from_biguint(sum);
    }

    pub fn add(&mut self, other: &Count) {
        self.add_mul_u64(other, 1);
    }
}

/// Exact conversion of a rational to the nearest-below `f64` (53 significant bits).
pub fn rational_to_f64(q: &BigRational) -> f64 {
    fraction_to_f64(q.numer(), q.denom())
}

/// `num / den` as `f64` without reducing the fraction first.
pub fn fraction_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    if num.is_zero() || den.is_zero() {
        return 0.0;
    }
    let negative = (num.sign() == Sign::Minus) != (den.sign() == Sign::Minus);
    let num = num.magnitude();
    let den = den.magnitude();
    let shift = 64i64 + den.bits() as i64 - num.bits() as i64;
    let quotient = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        num / (den << (-shift) as u64)
    };
    let value = ldexp(biguint_to_f64(&quotient), -shift);
    if negative {
        -value
    } else {
        value
    }
}

fn biguint_to_f64(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return x.to_u64().map(|v| v as f64).unwrap_or(0.0);
    }
    let top = (x >> (bits - 64)).to_u64().unwrap_or(0) as f64;
    ldexp(top, bits as i64 - 64)
}

fn ldexp(mut value: f64, mut exp: i64) -> f64 {
    while exp > 1000 {
        value *= 2f64.powi(1000);
        exp -= 1000;
    }
    while exp < -1000 {
        value *= 2f64.powi(-1000);
        exp += 1000;
    }
    value * 2f64.powi(exp as i32)
}

/// `ln(x)` for a positive big integer.
pub fn big_ln(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().unwrap_or(0) as f64).ln();
    }
    let top = (x >> (bits - 64)).to_u64().unwrap_or(0) as f64;
    top.ln() + (bits - 64) as f64 * std::f64::consts::LN_2
}

/// Mantissa width of a [`BigFloat`], in bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Precision(pub u32);

impl Precision {
    /// Enough bits to carry `digits` significant decimal digits, plus guard bits.
    pub fn from_digits(digits: u32) -> Result<Self, ScalarError> {
        if digits == 0 {
            return Err(ScalarError::ZeroPrecision);
        }
        Ok(Precision((f64::from(digits) * std::f64::consts::LOG2_10).ceil() as u32 + 8))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Decimal digits this precision carries.
    pub fn digits(self) -> u32 {
        ((f64::from(self.0.saturating_sub(8))) / std::f64::consts::LOG2_10).floor() as u32
    }
}

/// Binary floating point number `mantissa · 2^exponent` with a mantissa of at
/// most `precision` bits, rounded half-to-even after every operation.
///
/// Operations on two values of different precision round to the larger one.
#[derive(Clone, Debug)]
pub struct BigFloat {
    mantissa: BigInt,
    exponent: i64,
    precision: u32,
}

impl BigFloat {
    pub fn zero(precision: Precision) -> Self {
        BigFloat {
            mantissa: BigInt::zero(),
            exponent: 0,
            precision: precision.0,
        }
    }

    pub fn from_rational(q: &BigRational, precision: Precision) -> Self {
        let num = BigFloat::from_int(q.numer().clone(), precision);
        let den = BigFloat::from_int(q.denom().clone(), precision);
        num.div(&den).unwrap_or_else(|| BigFloat::zero(precision))
    }

    pub fn from_int(value: BigInt, precision: Precision) -> Self {
        BigFloat::normalized(value, 0, precision.0, false)
    }

    pub fn precision(&self) -> Precision {
        Precision(self.precision)
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    fn normalized(mantissa: BigInt, exponent: i64, precision: u32, sticky: bool) -> Self {
        if mantissa.is_zero() {
            return BigFloat {
                mantissa,
                exponent: 0,
                precision,
            };
        }
        let bits = mantissa.bits();
        if bits <= u64::from(precision) {
            return BigFloat {
                mantissa,
                exponent,
                precision,
            };
        }
        let drop = bits - u64::from(precision);
        let sign = mantissa.sign();
        let mag = mantissa.magnitude();
        let mut kept: BigUint = mag >> drop;
        let rest = mag - (&kept << drop);
        let half = BigUint::one() << (drop - 1);
        let round_up = match rest.cmp(&half) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => sticky || kept.is_odd(),
        };
        if round_up {
            kept += 1u32;
        }
        let mut exponent = exponent + drop as i64;
        if kept.bits() > u64::from(precision) {
            kept >>= 1;
            exponent += 1;
        }
        BigFloat {
            mantissa: BigInt::from_biguint(sign, kept),
            exponent,
            precision,
        }
    }

    fn top_bit(&self) -> i64 {
        self.exponent + self.mantissa.bits() as i64
    }

    pub fn add(&self, other: &Self) -> Self {
        let precision = self.precision.max(other.precision);
        if self.is_zero() {
            return BigFloat::normalized(other.mantissa.clone(), other.exponent, precision, false);
        }
        if other.is_zero() {
            return BigFloat::normalized(self.mantissa.clone(), self.exponent, precision, false);
        }
        let (big, small) = if self.top_bit() >= other.top_bit() {
            (self, other)
        } else {
            (other, self)
        };
        if small.top_bit() < big.top_bit() - i64::from(precision) - 2 {
            // Below half an ulp of the result: only its sign matters for rounding,
            // and a half-ulp tie is impossible at this distance.
            return BigFloat::normalized(big.mantissa.clone(), big.exponent, precision, false);
        }
        let exponent = big.exponent.min(small.exponent);
        let a = &big.mantissa << (big.exponent - exponent) as u64;
        let b = &small.mantissa << (small.exponent - exponent) as u64;
        BigFloat::normalized(a + b, exponent, precision, false)
    }

    pub fn neg(&self) -> Self {
        BigFloat {
            mantissa: -self.mantissa.clone(),
            exponent: self.exponent,
            precision: self.precision,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let precision = self.precision.max(other.precision);
        BigFloat::normalized(
            &self.mantissa * &other.mantissa,
            self.exponent + other.exponent,
            precision,
            false,
        )
    }

    pub fn div(&self, other: &Self) -> Option<Self> {
        if other.is_zero() {
            return None;
        }
        let precision = self.precision.max(other.precision);
        if self.is_zero() {
            return Some(BigFloat::zero(Precision(precision)));
        }
        let shift = (i64::from(precision) + 2 + other.mantissa.bits() as i64
            - self.mantissa.bits() as i64)
            .max(0) as u64;
        let num = &self.mantissa << shift;
        let (q, r) = num.div_rem(&other.mantissa);
        Some(BigFloat::normalized(
            q,
            self.exponent - other.exponent - shift as i64,
            precision,
            !r.is_zero(),
        ))
    }

    /// Square root of a non-negative value; `None` for negative input.
    pub fn sqrt(&self) -> Option<Self> {
        if self.mantissa.is_negative() {
            return None;
        }
        if self.is_zero() {
            return Some(self.clone());
        }
        let mut exponent = self.exponent;
        let mut mag = self.mantissa.magnitude().clone();
        let extra = 2 * u64::from(self.precision) + 4;
        mag <<= extra;
        exponent -= extra as i64;
        if exponent % 2 != 0 {
            mag <<= 1u32;
            exponent -= 1;
        }
        let root = mag.sqrt();
        let exact = &root * &root == mag;
        Some(BigFloat::normalized(
            BigInt::from(root),
            exponent / 2,
            self.precision,
            !exact,
        ))
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let v = ldexp(biguint_to_f64(self.mantissa.magnitude()), self.exponent);
        if self.mantissa.is_negative() {
            -v
        } else {
            v
        }
    }

    pub fn ln(&self) -> f64 {
        big_ln(self.mantissa.magnitude()) + self.exponent as f64 * std::f64::consts::LN_2
    }

    pub fn abs(&self) -> Self {
        BigFloat {
            mantissa: self.mantissa.abs(),
            exponent: self.exponent,
            precision: self.precision,
        }
    }

    /// Scientific decimal with `digits` significant digits, e.g. `3.3333e-1`.
    pub fn to_decimal(&self, digits: u32) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let digits = digits.max(1);
        let estimate = (self.ln() / std::f64::consts::LN_10).floor() as i64;
        for decimal_exp in [estimate, estimate + 1, estimate - 1] {
            let scale = i64::from(digits) - 1 - decimal_exp;
            let scaled = self.scaled_decimal_integer(scale);
            let len = scaled.magnitude().to_string().len() as u32;
            if len == digits {
                return format_scientific(&scaled, decimal_exp);
            }
            if len == digits + 1 && decimal_exp == estimate + 1 {
                continue;
            }
        }
        let scale = i64::from(digits) - 1 - estimate;
        format_scientific(&self.scaled_decimal_integer(scale), estimate)
    }

    /// `round(self · 10^scale)` as an integer.
    fn scaled_decimal_integer(&self, scale: i64) -> BigInt {
        let ten = BigInt::from(10u32);
        let mut num = self.mantissa.clone();
        let mut den = BigInt::one();
        if scale >= 0 {
            num *= num_traits::pow(ten, scale as usize);
        } else {
            den *= num_traits::pow(ten, (-scale) as usize);
        }
        if self.exponent >= 0 {
            num <<= self.exponent as u64;
        } else {
            den <<= (-self.exponent) as u64;
        }
        BigRational::new(num, den).round().to_integer()
    }
}

fn format_scientific(value: &BigInt, decimal_exp: i64) -> String {
    let text = value.magnitude().to_string();
    let sign = if value.is_negative() { "-" } else { "" };
    let (head, tail) = text.split_at(1);
    if tail.is_empty() {
        format!("{sign}{head}e{decimal_exp}")
    } else {
        format!("{sign}{head}.{tail}e{decimal_exp}")
    }
}

impl PartialEq for BigFloat {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for BigFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let diff = self.sub(other);
        Some(match diff.mantissa.sign() {
            Sign::Minus => Ordering::Less,
            Sign::NoSign => Ordering::Equal,
            Sign::Plus => Ordering::Greater,
        })
    }
}

impl fmt::Display for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal(self.precision().digits().max(1)))
    }
}

impl Scalar for BigFloat {
    type Context = Precision;
    type Mass = BigFloat;
    type Weight = BigFloat;

    const EXACT: bool = false;

    fn mode(ctx: &Precision) -> Mode {
        Mode::Float { digits: ctx.digits() }
    }

    fn lift(ctx: &Precision, q: &BigRational) -> Self {
        BigFloat::from_rational(q, *ctx)
    }
    fn zero_with(ctx: &Precision) -> Self {
        BigFloat::zero(*ctx)
    }
    fn plus(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn minus(&self, other: &Self) -> Self {
        self.sub(other)
    }
    fn times(&self, other: &Self) -> Self {
        self.mul(other)
    }
    fn divide(&self, other: &Self) -> Option<Self> {
        self.div(other)
    }
    fn is_zero_value(&self) -> bool {
        BigFloat::is_zero(self)
    }
    fn is_positive_value(&self) -> bool {
        self.mantissa.is_positive()
    }
    fn abs_value(&self) -> Self {
        BigFloat::abs(self)
    }
    fn as_f64(&self) -> f64 {
        BigFloat::to_f64(self)
    }
    fn ln(&self) -> f64 {
        BigFloat::ln(self)
    }
    fn render(&self) -> String {
        self.to_string()
    }

    fn step_weights(
        ctx: &Precision,
        weights: &[BigRational],
    ) -> Result<(Vec<BigFloat>, Self), ScalarError> {
        let ws = weights
            .iter()
            .map(|w| BigFloat::from_rational(w, *ctx))
            .collect();
        Ok((ws, BigFloat::from_int(BigInt::one(), *ctx)))
    }
    fn mass_zero() -> BigFloat {
        BigFloat::zero(Precision(1))
    }
    fn mass_unit(ctx: &Precision) -> BigFloat {
        BigFloat::from_int(BigInt::one(), *ctx)
    }
    fn accumulate(acc: &mut BigFloat, mass: &BigFloat, weight: &BigFloat) {
        *acc = acc.add(&mass.mul(weight));
    }
    fn accumulate_product(acc: &mut BigFloat, a: &BigFloat, b: &BigFloat) {
        *acc = acc.add(&a.mul(b));
    }
    fn mass_is_zero(mass: &BigFloat) -> bool {
        mass.is_zero()
    }
    fn from_mass(mass: &BigFloat, scale: &Self) -> Self {
        mass.mul(scale)
    }
    fn mass_to_rational(_: &BigFloat, _: &Self) -> Option<BigRational> {
        None
    }
    fn mass_from_rational(_: &BigRational, _: &Self) -> Option<BigFloat> {
        None
    }
}

/// Parses `p/q` or an integer. Decimal notation is rejected.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if text.contains('.') || text.contains('e') || text.contains('E') {
        return None;
    }
    match text.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            (!q.is_zero()).then(|| BigRational::new(p, q))
        }
        None => text.parse::<BigInt>().ok().map(BigRational::from),
    }
}

/// Shorthand for `p/q` in tests and examples.
pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bf(p: i64, q: i64, bits: u32) -> BigFloat {
        BigFloat::from_rational(&ratio(p, q), Precision(bits))
    }

    #[test]
    fn rational_to_f64_handles_tiny_values() {
        let tiny = BigRational::new(BigInt::one(), BigInt::from(2u32).pow(1100u32));
        assert_eq!(rational_to_f64(&tiny), 0.0);
        let q = ratio(1, 3);
        assert!((rational_to_f64(&q) - 1.0 / 3.0).abs() < 1e-16);
        let ln = Scalar::ln(&tiny);
        assert!((ln + 1100.0 * std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn bigfloat_third_times_three() {
        let third = bf(1, 3, 200);
        let three = bf(3, 1, 200);
        let one = third.mul(&three);
        let err = one.sub(&bf(1, 1, 200)).abs();
        assert!(err.ln() < -190.0 * std::f64::consts::LN_2);
    }

    #[test]
    fn bigfloat_sqrt_two() {
        let two = bf(2, 1, 120);
        let root = two.sqrt().unwrap();
        assert!((root.to_f64() - std::f64::consts::SQRT_2).abs() < 1e-15);
        let back = root.mul(&root).sub(&two).abs();
        assert!(back.ln() < -110.0 * std::f64::consts::LN_2);
        assert_eq!(bf(9, 4, 64).sqrt().unwrap(), bf(3, 2, 64));
    }

    #[test]
    fn bigfloat_ordering_and_decimal() {
        assert!(bf(1, 3, 80) < bf(1, 2, 80));
        assert!(bf(-1, 3, 80) < BigFloat::zero(Precision(80)));
        assert_eq!(bf(1, 8, 64).to_decimal(3), "1.25e-1");
        assert_eq!(bf(-1000, 1, 64).to_decimal(2), "-1.0e3");
        assert_eq!(bf(1, 3, 120).to_decimal(5), "3.3333e-1");
        assert_eq!(bf(2, 3, 120).to_decimal(3), "6.67e-1");
    }

    #[test]
    fn bigfloat_add_far_apart_keeps_larger() {
        let big = bf(1, 1, 64);
        let tiny = BigFloat::from_rational(
            &BigRational::new(BigInt::one(), BigInt::from(2u32).pow(200u32)),
            Precision(64),
        );
        assert_eq!(big.add(&tiny), big);
    }

    #[test]
    fn precision_from_digits() {
        let p = Precision::from_digits(50).unwrap();
        assert!(p.bits() >= 166);
        assert!(p.digits() >= 50);
        assert!(Precision::from_digits(0).is_err());
    }

    #[test]
    fn step_weights_use_common_denominator() {
        let (ws, scale) =
            <BigRational as Scalar>::step_weights(&(), &[ratio(1, 2), ratio(1, 4), ratio(1, 4)])
                .unwrap();
        assert_eq!(ws, vec![2, 1, 1]);
        assert_eq!(scale, ratio(1, 4));
        let m = Count::Small(3);
        assert_eq!(BigRational::from_mass(&m, &scale), ratio(3, 4));
        assert_eq!(
            BigRational::mass_from_rational(&ratio(3, 4), &scale),
            Some(Count::Small(3))
        );
        assert_eq!(BigRational::mass_from_rational(&ratio(1, 8), &scale), None);
    }

    #[test]
    fn count_promotes_on_overflow() {
        let mut c = Count::Small(u128::MAX - 1);
        c.add_mul_u64(&Count::Small(1), 3);
        assert_eq!(c.to_biguint(), BigUint::from(u128::MAX) + 2u32);
        assert!(matches!(c, Count::Big(_)));
        let mut p = Count::zero();
        p.add_mul(&Count::Small(1 << 100), &Count::Small(1 << 100));
        assert_eq!(p.to_biguint(), BigUint::one() << 200u32);
        assert_eq!(Count::from_biguint(BigUint::from(7u32)), Count::Small(7));
    }

    #[test]
    fn parse_rejects_decimals() {
        assert_eq!(parse_rational("1/2"), Some(ratio(1, 2)));
        assert_eq!(parse_rational(" 3 "), Some(ratio(3, 1)));
        assert_eq!(parse_rational("0.5"), None);
        assert_eq!(parse_rational("1/0"), None);
    }
}
