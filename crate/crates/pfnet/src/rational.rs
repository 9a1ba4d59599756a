//! Exact rational helpers shared by every analysis.
//!
//! All quantitative results of the crate are exact `BigRational`s; floating
//! point only appears in explicitly approximate outputs and in simulation.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational number used throughout the crate.
pub type Q = BigRational;

/// Builds `n/d`. Panics if `d == 0`.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Builds the integer `n` as a rational.
pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// `base^e` for an integer (possibly negative) exponent.
///
/// Panics when `base` is zero and `e < 0`.
pub fn pow_i(base: &Q, e: i64) -> Q {
    if e == 0 {
        return Q::one();
    }
    let mut result = Q::one();
    let mut b = if e > 0 {
        base.clone()
    } else {
        assert!(!base.is_zero(), "zero raised to a negative power");
        base.recip()
    };
    let mut k = e.unsigned_abs();
    while k > 0 {
        if k & 1 == 1 {
            result *= &b;
        }
        k >>= 1;
        if k > 0 {
            b = &b * &b;
        }
    }
    result
}

/// Parses `"<int>"` or `"<int>/<int>"`. Decimal points and exponents are
/// rejected so that every accepted literal is exact.
pub fn parse_rational(s: &str) -> Result<Q, String> {
    let parse_int = |t: &str| -> Result<BigInt, String> {
        let digits = t.strip_prefix(['-', '+']).unwrap_or(t);
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(format!("`{s}` is not an exact rational literal (expected <int> or <int>/<int>)"));
        }
        t.parse::<BigInt>().map_err(|e| e.to_string())
    };
    match s.split_once('/') {
        None => Ok(Q::from_integer(parse_int(s)?)),
        Some((n, d)) => {
            let n = parse_int(n)?;
            let d = parse_int(d)?;
            if d.is_zero() {
                return Err(format!("`{s}` has a zero denominator"));
            }
            Ok(Q::new(n, d))
        }
    }
}

/// Canonical textual form: `n` for integers, `n/d` otherwise.
pub fn format_rational(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Lossy conversion used only for approximate outputs and simulation input.
pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Very large or very small magnitudes: go through the decimal form.
        to_decimal(x, 17).parse().unwrap_or(f64::NAN)
    })
}

/// Decimal rendering with `sig` significant digits (round half away from
/// zero), computed exactly from the rational value.
pub fn to_decimal(x: &Q, sig: usize) -> String {
    assert!(sig >= 1);
    if x.is_zero() {
        return "0".to_string();
    }
    let neg = x.is_negative();
    let a = x.abs();
    let ten = BigInt::from(10);
    // Find e with 10^e <= a < 10^(e+1).
    let mut e: i64 = a.numer().to_string().len() as i64 - a.denom().to_string().len() as i64;
    let pow10 = |k: i64| -> Q {
        if k >= 0 {
            Q::from_integer(num_traits::pow(ten.clone(), k as usize))
        } else {
            Q::new(BigInt::one(), num_traits::pow(ten.clone(), (-k) as usize))
        }
    };
    while pow10(e) > a {
        e -= 1;
    }
    while pow10(e + 1) <= a {
        e += 1;
    }
    // Scale so that the integer part has exactly `sig` digits.
    let shift = sig as i64 - 1 - e;
    let scaled = &a * pow10(shift);
    let (qt, rem) = scaled.numer().div_rem(scaled.denom());
    let mut digits = if BigInt::from(2) * rem >= *scaled.denom() { qt + 1 } else { qt };
    let mut shift = shift;
    if digits.to_string().len() > sig {
        digits /= 10;
        shift -= 1;
    }
    let ds = digits.to_string();
    let body = if shift <= 0 {
        let mut s = ds;
        s.push_str(&"0".repeat((-shift) as usize));
        s
    } else {
        let shift = shift as usize;
        let (int_part, frac_part) = if ds.len() > shift {
            (ds[..ds.len() - shift].to_string(), ds[ds.len() - shift..].to_string())
        } else {
            ("0".to_string(), format!("{}{}", "0".repeat(shift - ds.len()), ds))
        };
        let frac_part = frac_part.trim_end_matches('0');
        if frac_part.is_empty() {
            int_part
        } else {
            format!("{int_part}.{frac_part}")
        }
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

/// Least common multiple of the denominators of `xs` (1 for an empty slice).
pub fn lcm_denominators<'a>(xs: impl IntoIterator<Item = &'a Q>) -> BigInt {
    xs.into_iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

/// `base^(num/den)` is not rational in general; this splits an exponent
/// `num/den` into `(floor, remainder)` with `0 <= remainder < den`.
pub fn split_exponent(num: i64, den: i64) -> (i64, i64) {
    assert!(den > 0);
    (num.div_euclid(den), num.rem_euclid(den))
}
