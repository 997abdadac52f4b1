//! Exact rational arithmetic helpers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rat = BigRational;

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rint(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // fall back for huge numerator/denominator pairs
        let digits = 30usize;
        let scale = BigInt::from(10u32).pow(digits as u32);
        let scaled = (r.numer() * &scale) / r.denom();
        scaled.to_f64().unwrap_or(f64::NAN) / 1e30
    })
}

/// Integer power with negative exponents allowed.
pub fn rpow(base: &Rat, exp: i64) -> Rat {
    if exp >= 0 {
        base.pow(exp as i32)
    } else {
        base.pow((-exp) as i32).recip()
    }
}

/// Parses "3", "-1/12000", "0.05", "2.5e-3" into an exact rational.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let n: BigInt = a.trim().parse().ok()?;
        let d: BigInt = b.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rat::new(n, d));
    }
    let (mantissa, exp10) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i64>().ok()?),
        None => (s, 0),
    };
    let negative = mantissa.starts_with('-');
    let unsigned = mantissa.trim_start_matches(['-', '+']);
    let (int_part, frac_part) = match unsigned.split_once('.') {
        Some((i, f)) => (i, f),
        None => (unsigned, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let mut value = Rat::from_integer(n);
    let shift = exp10 - frac_part.len() as i64;
    let ten = rint(10);
    value *= rpow(&ten, shift);
    if negative {
        value = -value;
    }
    Some(value)
}

/// Exact f64 -> rational conversion (every finite f64 is a dyadic rational).
pub fn from_f64(x: f64) -> Option<Rat> {
    Rat::from_float(x)
}

pub fn is_zero(r: &Rat) -> bool {
    r.is_zero()
}

pub fn abs(r: &Rat) -> Rat {
    r.abs()
}

pub fn one() -> Rat {
    Rat::one()
}

pub fn zero() -> Rat {
    Rat::zero()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimal_forms() {
        assert_eq!(parse_rat("0.05").unwrap(), rat(1, 20));
        assert_eq!(parse_rat("-1/12000").unwrap(), rat(-1, 12000));
        assert_eq!(parse_rat("2.5e-3").unwrap(), rat(1, 400));
        assert_eq!(parse_rat("14e-2").unwrap(), rat(7, 50));
        assert_eq!(parse_rat("3").unwrap(), rint(3));
        assert!(parse_rat("1/0").is_none());
    }

    #[test]
    fn power_handles_negatives() {
        assert_eq!(rpow(&rat(1, 2), -2), rint(4));
        assert_eq!(rpow(&rat(3, 1), 0), one());
    }
}
