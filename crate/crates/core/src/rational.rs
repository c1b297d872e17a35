//! Exact rational numbers used for magnitudes, unit factors and day offsets.

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

pub type Rational = Ratio<i128>;

/// Maximum number of fractional digits accepted when parsing decimals.
const MAX_FRACTION_DIGITS: usize = 18;

pub fn int(n: i128) -> Rational {
    Rational::from_integer(n)
}

/// Parses `12`, `-0.25`, `8.2` or `41/5` exactly.
pub fn parse(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: i128 = num.trim().parse().ok()?;
        let d: i128 = den.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    parse_decimal(s)
}

pub fn parse_decimal(s: &str) -> Option<Rational> {
    let (neg, body) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (whole, frac) = match body.split_once('.') {
        Some((w, f)) => (w, f),
        None => (body, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if frac.len() > MAX_FRACTION_DIGITS {
        return None;
    }
    let mut numer: i128 = 0;
    for b in whole.bytes().chain(frac.bytes()) {
        numer = numer.checked_mul(10)?.checked_add(i128::from(b - b'0'))?;
    }
    let denom = 10i128.checked_pow(frac.len() as u32)?;
    let r = Rational::new(numer, denom);
    Some(if neg { -r } else { r })
}

/// Renders a terminating decimal exactly (`41/5` → `8.2`), otherwise `n/d`.
pub fn to_decimal_string(r: &Rational) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    let mut den = *r.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    if den != 1 {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let digits = twos.max(fives);
    let Some(scale) = 10i128.checked_pow(digits) else {
        return format!("{}/{}", r.numer(), r.denom());
    };
    let Some(scaled) = r.numer().checked_mul(scale / r.denom()) else {
        return format!("{}/{}", r.numer(), r.denom());
    };
    let sign = if scaled < 0 { "-" } else { "" };
    let abs = scaled.unsigned_abs();
    let scale = scale as u128;
    format!(
        "{sign}{}.{:0width$}",
        abs / scale,
        abs % scale,
        width = digits as usize
    )
}

pub fn to_f64(r: &Rational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let (n, d) = (r.numer().to_f64().unwrap_or(f64::NAN), r.denom().to_f64().unwrap_or(f64::NAN));
    n / d
}

/// Best rational approximation of a finite float, through its shortest
/// decimal representation.
pub fn from_f64(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let s = format!("{x}");
    parse_decimal(&s)
}

/// Serde adapter storing rationals as decimal strings (`"8.2"`, `"1/3"`).
pub mod serde_str {
    use super::*;
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_decimal_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        d.deserialize_any(RationalVisitor)
    }

    struct RationalVisitor;

    impl Visitor<'_> for RationalVisitor {
        type Value = Rational;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a rational as a decimal string, fraction string or number")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
            parse(v).ok_or_else(|| E::custom(format!("invalid rational `{v}`")))
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
            Ok(int(i128::from(v)))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
            Ok(int(i128::from(v)))
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
            from_f64(v).ok_or_else(|| E::custom("non-finite number"))
        }
    }
}
