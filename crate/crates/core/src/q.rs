//! Exact rationals for homogeneities and regularities.

use num_rational::Rational64;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};

pub type Q = Rational64;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(n)
}

/// Renders a rational as `p` or `p/q`.
pub fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses `p`, `p/q` or a decimal such as `-1.5`.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Spec(format!("invalid rational `{s}`"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let int_part: i64 = if int.is_empty() || int == "-" || int == "+" {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) || frac.len() > 15 {
            return Err(bad());
        }
        let den = 10i64.pow(frac.len() as u32);
        let f: i64 = frac.parse().map_err(|_| bad())?;
        let mag = Q::from_integer(int_part.abs()) + Q::new(f, den);
        return Ok(if neg { -mag } else { mag });
    }
    s.parse::<i64>().map(Q::from_integer).map_err(|_| bad())
}

/// Parses a linear expression in named small parameters, e.g.
/// `-3/2-kappa` or `1/2 - 2*kappa`, substituting the supplied values.
pub fn parse_linear(s: &str, params: &[(&str, Q)]) -> Result<Q> {
    let bad = |m: &str| Error::Spec(format!("invalid expression `{s}`: {m}"));
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(bad("empty"));
    }
    let mut terms = Vec::new();
    let mut start = 0;
    let bytes = compact.as_bytes();
    for i in 1..bytes.len() {
        // a sign not preceded by '/' or '*' starts a new term
        if (bytes[i] == b'+' || bytes[i] == b'-') && bytes[i - 1] != b'/' && bytes[i - 1] != b'*' {
            terms.push(&compact[start..i]);
            start = i;
        }
    }
    terms.push(&compact[start..]);

    let mut total = Q::zero();
    for term in terms {
        let (sign, body) = match term.as_bytes()[0] {
            b'-' => (-1, &term[1..]),
            b'+' => (1, &term[1..]),
            _ => (1, term),
        };
        if body.is_empty() {
            return Err(bad("dangling sign"));
        }
        let mut value = None;
        for (name, v) in params {
            if let Some(coef) = body.strip_suffix(name) {
                let coef = coef.strip_suffix('*').unwrap_or(coef);
                let c = if coef.is_empty() { Q::from_integer(1) } else { parse_q(coef)? };
                value = Some(c * *v);
                break;
            }
        }
        let v = match value {
            Some(v) => v,
            None => parse_q(body).map_err(|_| bad(&format!("unknown term `{body}`")))?,
        };
        total += if sign < 0 { -v } else { v };
    }
    Ok(total)
}

pub fn to_f64(x: &Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

pub fn is_negative(x: &Q) -> bool {
    x.is_negative()
}
