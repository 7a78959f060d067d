//! Scalars that remember an exact rational value when one is known.
//!
//! Input decimals such as `0.2` are read as the rational `1/5`, and strings
//! such as `"5/33"` are accepted directly. Irrational inputs (results of
//! `sqrt`, angles on the circle) carry only the float.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn q_to_f64(x: &Q) -> f64 {
    // numerator/denominator can exceed f64 range individually
    match (x.numer().to_f64(), x.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            let shift = x.numer().bits().max(x.denom().bits()) as i64 - 900;
            let s = shift.max(0) as usize;
            let n = (x.numer() >> s).to_f64().unwrap_or(0.0);
            let d = (x.denom() >> s).to_f64().unwrap_or(1.0);
            n / d
        }
    }
}

/// Parse a decimal literal (`-1.25e-3`) or a ratio (`5/33`) exactly.
pub fn parse_exact(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let n = parse_exact(a)?;
        let d = parse_exact(b)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: String = format!("{int}{frac}");
    let mut n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    if neg {
        n = -n;
    }
    let e = exp - frac.len() as i64;
    if e.unsigned_abs() > 4000 {
        return None;
    }
    let ten = BigInt::from(10);
    let p = num_traits::pow(ten, e.unsigned_abs() as usize);
    Some(if e >= 0 { Q::from_integer(n * p) } else { Q::new(n, p) })
}

#[derive(Clone, Debug)]
pub struct Num {
    v: f64,
    q: Option<Q>,
}

impl PartialEq for Num {
    fn eq(&self, other: &Self) -> bool {
        match (&self.q, &other.q) {
            (Some(a), Some(b)) => a == b,
            _ => self.v == other.v,
        }
    }
}

impl Num {
    pub fn exact(x: Q) -> Num {
        Num { v: q_to_f64(&x), q: Some(x) }
    }

    pub fn ratio(n: i64, d: i64) -> Num {
        Num::exact(q(n, d))
    }

    /// Float with its shortest decimal expansion taken as exact.
    pub fn from_f64(v: f64) -> Num {
        let q = if v.is_finite() { parse_exact(&format!("{v:e}")) } else { None };
        Num { v, q }
    }

    /// Float known to be irrational or inexact.
    pub fn float(v: f64) -> Num {
        Num { v, q: None }
    }

    pub fn zero() -> Num {
        Num::exact(Q::zero())
    }

    pub fn one() -> Num {
        Num::exact(Q::one())
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn q(&self) -> Option<&Q> {
        self.q.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        match &self.q {
            Some(x) => x.is_zero(),
            None => self.v == 0.0,
        }
    }

    pub fn is_negative(&self) -> bool {
        match &self.q {
            Some(x) => x.is_negative(),
            None => self.v < 0.0,
        }
    }

    fn lift(a: &Num, b: &Num, fq: impl Fn(&Q, &Q) -> Q, ff: impl Fn(f64, f64) -> f64) -> Num {
        match (&a.q, &b.q) {
            (Some(x), Some(y)) => Num::exact(fq(x, y)),
            _ => Num::float(ff(a.v, b.v)),
        }
    }

    pub fn add(&self, o: &Num) -> Num {
        Num::lift(self, o, |x, y| x + y, |x, y| x + y)
    }

    pub fn sub(&self, o: &Num) -> Num {
        Num::lift(self, o, |x, y| x - y, |x, y| x - y)
    }

    pub fn mul(&self, o: &Num) -> Num {
        Num::lift(self, o, |x, y| x * y, |x, y| x * y)
    }

    /// Quotient; the caller guarantees `o` is nonzero.
    pub fn div(&self, o: &Num) -> Num {
        Num::lift(self, o, |x, y| x / y, |x, y| x / y)
    }

    pub fn neg(&self) -> Num {
        Num { v: -self.v, q: self.q.as_ref().map(|x| -x) }
    }

    pub fn recip(&self) -> Num {
        Num { v: 1.0 / self.v, q: self.q.as_ref().map(|x| x.recip()) }
    }
}

impl From<f64> for Num {
    fn from(v: f64) -> Num {
        Num::from_f64(v)
    }
}

impl From<i64> for Num {
    fn from(v: i64) -> Num {
        Num::exact(Q::from_integer(BigInt::from(v)))
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.q {
            Some(x) if !x.is_integer() && parse_exact(&format!("{:e}", self.v)).as_ref() != Some(x) => {
                write!(f, "{}/{}", x.numer(), x.denom())
            }
            _ => write!(f, "{}", self.v),
        }
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match &self.q {
            Some(x) if parse_exact(&format!("{:e}", self.v)).as_ref() != Some(x) => {
                s.serialize_str(&format!("{}/{}", x.numer(), x.denom()))
            }
            _ => s.serialize_f64(self.v),
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Num, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a \"p/q\" string")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num::from_f64(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num::from(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num::exact(Q::from_integer(BigInt::from(v))))
            }
            fn visit_str<E: de::Error>(self, s: &str) -> Result<Num, E> {
                parse_exact(s)
                    .map(Num::exact)
                    .ok_or_else(|| E::custom(format!("bad number {s:?}")))
            }
        }
        d.deserialize_any(V)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse_exact("0.2").unwrap(), q(1, 5));
        assert_eq!(parse_exact("-1.25e-1").unwrap(), q(-1, 8));
        assert_eq!(parse_exact("5/33").unwrap(), q(5, 33));
        assert_eq!(Num::from_f64(0.1).q().unwrap(), &q(1, 10));
        assert!(parse_exact("abc").is_none());
    }

    #[test]
    fn json_round_trip() {
        let a: Num = serde_json::from_str("\"44/65\"").unwrap();
        assert_eq!(a.q().unwrap(), &q(44, 65));
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "\"44/65\"");
        let b: Num = serde_json::from_str("0.3").unwrap();
        assert_eq!(serde_json::to_string(&b).unwrap(), "0.3");
        assert_eq!(b.q().unwrap(), &q(3, 10));
    }

    #[test]
    fn huge_rationals_convert() {
        let big = Q::new(BigInt::from(10).pow(400) * 3, BigInt::from(10).pow(400));
        assert!((q_to_f64(&big) - 3.0).abs() < 1e-15);
    }
}
