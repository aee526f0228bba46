//! Exact rational arithmetic helpers.
//!
//! All capacities, demands, and profits are `BigRational` end to end, so
//! every inequality in the library (feasibility, weak feasibility, the
//! `(2/k)`/`(4/k)` weight bounds) is decided exactly rather than with
//! floating-point tolerances.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::str::FromStr;

pub type Rat = BigRational;

/// Shorthand for small rational constants.
pub fn rat(num: i64, den: i64) -> Rat {
    assert!(den != 0, "zero denominator");
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(num: i64) -> Rat {
    Rat::from_integer(BigInt::from(num))
}

/// Parses `"p/q"`, `"p"`, or a plain decimal string like `"2.5"` / `"-0.125e1"`.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty rational literal".into());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = BigInt::from_str(num.trim()).map_err(|e| format!("bad numerator {num:?}: {e}"))?;
        let d =
            BigInt::from_str(den.trim()).map_err(|e| format!("bad denominator {den:?}: {e}"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(Rat::new(n, d));
    }
    parse_decimal(s)
}

/// Parses a decimal literal (optional fraction and exponent) into an exact rational.
fn parse_decimal(s: &str) -> Result<Rat, String> {
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => {
            let exp: i64 = e.parse().map_err(|_| format!("bad exponent in {s:?}"))?;
            (m, exp)
        }
        None => (s, 0),
    };
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(format!("no digits in {s:?}"));
    }
    let mut num = BigInt::zero();
    for c in int_part.chars().chain(frac_part.chars()) {
        let d = c.to_digit(10).ok_or_else(|| format!("bad digit {c:?} in {s:?}"))?;
        num = num * 10 + d;
    }
    let mut value = Rat::from_integer(num * sign);
    let shift = exp - frac_part.len() as i64;
    let ten = rat_int(10);
    if shift > 0 {
        for _ in 0..shift {
            value *= &ten;
        }
    } else {
        for _ in 0..(-shift) {
            value /= &ten;
        }
    }
    Ok(value)
}

/// Canonical display form: integers as `p`, everything else as `p/q`.
pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn is_positive(r: &Rat) -> bool {
    r.is_positive()
}

/// Floor of a non-negative rational as u64, saturating on overflow.
pub fn floor_u64(r: &Rat) -> u64 {
    let f = r.floor();
    let i = f.numer();
    if i.is_negative() {
        return 0;
    }
    use num_traits::ToPrimitive;
    i.to_u64().unwrap_or(u64::MAX)
}

/// Ceiling of a positive rational as u64, saturating on overflow.
pub fn ceil_u64(r: &Rat) -> u64 {
    let c = r.ceil();
    let i = c.numer();
    if i.is_negative() {
        return 0;
    }
    use num_traits::ToPrimitive;
    i.to_u64().unwrap_or(u64::MAX)
}

/// Serde adapter: rationals as JSON numbers when integral (and in range),
/// `"p/q"` strings otherwise. Deserialization accepts numbers, decimal
/// strings, and `"p/q"`.
pub mod rat_serde {
    use super::*;
    use serde::de::Error as DeError;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, ser: S) -> Result<S::Ok, S::Error> {
        use num_traits::ToPrimitive;
        if r.denom().is_one() {
            if let Some(i) = r.numer().to_i64() {
                return ser.serialize_i64(i);
            }
        }
        ser.serialize_str(&rat_to_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Rat, D::Error> {
        let v = serde_json::Value::deserialize(de)?;
        from_value(&v).map_err(D::Error::custom)
    }

    pub fn from_value(v: &serde_json::Value) -> Result<Rat, String> {
        match v {
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(rat_int(i))
                } else if let Some(u) = n.as_u64() {
                    Ok(Rat::from_integer(BigInt::from(u)))
                } else {
                    // Shortest round-trip decimal form of the f64 is exact
                    // for inputs like 2.5 or 0.1-as-written.
                    parse_rat(&n.to_string())
                }
            }
            serde_json::Value::String(s) => parse_rat(s),
            other => Err(format!("expected number or rational string, got {other}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rat("3/4").unwrap(), rat(3, 4));
        assert_eq!(parse_rat("-7/2").unwrap(), rat(-7, 2));
        assert_eq!(parse_rat("5").unwrap(), rat_int(5));
        assert_eq!(parse_rat("2.5").unwrap(), rat(5, 2));
        assert_eq!(parse_rat("0.1").unwrap(), rat(1, 10));
        assert_eq!(parse_rat("-0.125e1").unwrap(), rat(-5, 4));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("abc").is_err());
    }

    #[test]
    fn display_round_trips() {
        for r in [rat(3, 4), rat_int(-2), rat(22, 7)] {
            assert_eq!(parse_rat(&rat_to_string(&r)).unwrap(), r);
        }
    }

    #[test]
    fn floors_and_ceils() {
        assert_eq!(floor_u64(&rat(37, 2)), 18);
        assert_eq!(ceil_u64(&rat(1, 2)), 1);
        assert_eq!(ceil_u64(&rat_int(2)), 2);
    }
}
