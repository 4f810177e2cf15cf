//! Exact rationals for bootstrap thresholds such as `r − (k − j)·m` with
//! `m = εd/24`.

use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Div, Mul, Sub};
use core::str::FromStr;

use crate::Error;

/// A reduced fraction with positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ratio {
    num: i128,
    den: i128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0, "zero denominator");
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Ratio { num: s * num / g, den: s * den / g }
    }

    pub fn integer(n: i64) -> Self {
        Ratio { num: n as i128, den: 1 }
    }

    pub fn numer(&self) -> i128 {
        self.num
    }

    pub fn denom(&self) -> i128 {
        self.den
    }

    pub fn floor(&self) -> i128 {
        self.num.div_euclid(self.den)
    }

    pub fn ceil(&self) -> i128 {
        -(-self.num).div_euclid(self.den)
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Exact value of a finite double.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        let mut den: i128 = 1;
        let mut v = x;
        while libm::trunc(v) != v {
            v *= 2.0;
            den = den.checked_mul(2)?;
        }
        if v.abs() > 1e36 {
            return None;
        }
        Some(Ratio::new(v as i128, den))
    }

    pub fn is_negative(&self) -> bool {
        self.num < 0
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Ratio {
    type Err = Error;

    /// Accepts integers, decimals (`0.35`, `-1.5e-2` is not supported) and
    /// fractions (`7/24`).
    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::InvalidParameter(alloc::format!("not an exact number: {s:?}"));
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: i128 = n.trim().parse().map_err(|_| bad())?;
            let d: i128 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(Ratio::new(n, d));
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) || frac.len() > 30 {
            return Err(bad());
        }
        let mut num: i128 = 0;
        for c in int.chars().chain(frac.chars()) {
            num = num.checked_mul(10).and_then(|v| v.checked_add((c as u8 - b'0') as i128)).ok_or_else(bad)?;
        }
        let den = 10i128.pow(frac.len() as u32);
        Ok(Ratio::new(if neg { -num } else { num }, den))
    }
}

impl Add for Ratio {
    type Output = Ratio;
    fn add(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }
}

impl Sub for Ratio {
    type Output = Ratio;
    fn sub(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.den - o.num * self.den, self.den * o.den)
    }
}

impl Mul for Ratio {
    type Output = Ratio;
    fn mul(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.num, self.den * o.den)
    }
}

impl Div for Ratio {
    type Output = Ratio;
    fn div(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.den, self.den * o.num)
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl From<i64> for Ratio {
    fn from(n: i64) -> Self {
        Ratio::integer(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parsing() {
        assert_eq!("0.3".parse::<Ratio>().unwrap(), Ratio::new(3, 10));
        assert_eq!("7/24".parse::<Ratio>().unwrap(), Ratio::new(7, 24));
        assert_eq!("-2".parse::<Ratio>().unwrap(), Ratio::integer(-2));
        assert_eq!(".5".parse::<Ratio>().unwrap(), Ratio::new(1, 2));
        assert!("1e-3".parse::<Ratio>().is_err());
        assert!("1/0".parse::<Ratio>().is_err());
        assert!("".parse::<Ratio>().is_err());
    }

    #[test]
    fn rounding() {
        assert_eq!(Ratio::new(7, 2).ceil(), 4);
        assert_eq!(Ratio::new(7, 2).floor(), 3);
        assert_eq!(Ratio::new(-7, 2).ceil(), -3);
        assert_eq!(Ratio::new(-7, 2).floor(), -4);
        assert_eq!(Ratio::integer(3).ceil(), 3);
    }

    #[test]
    fn arithmetic_and_order() {
        let eps = Ratio::new(3, 10);
        let m = eps * Ratio::integer(4) / Ratio::integer(24);
        assert_eq!(m, Ratio::new(1, 20));
        assert!(Ratio::integer(4) - Ratio::integer(8) * m > Ratio::integer(3));
        assert_eq!(Ratio::from_f64(0.375).unwrap(), Ratio::new(3, 8));
        assert_eq!(Ratio::new(2, -4), Ratio::new(-1, 2));
    }
}
