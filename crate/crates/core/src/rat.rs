//! Small arbitrary-precision helpers shared across modules.

use crate::{Error, Rat, Result};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_big(num: BigUint, den: BigUint) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// `p`-adic valuation of a positive integer.
pub fn valuation(n: &BigUint, p: u64) -> u64 {
    assert!(!n.is_zero(), "valuation of zero is infinite");
    let p = BigUint::from(p);
    let mut n = n.clone();
    let mut v = 0u64;
    while (&n % &p).is_zero() {
        n /= &p;
        v += 1;
    }
    v
}

pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d.checked_mul(d).map(|dd| dd <= n).unwrap_or(false) {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

pub fn factorize_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut push = |p: u64, e: u32| {
        if e > 0 {
            out.push((p, e));
        }
    };
    let mut e = 0;
    while n.is_multiple_of(2) {
        n /= 2;
        e += 1;
    }
    push(2, e);
    let mut d = 3u64;
    while d.checked_mul(d).map(|dd| dd <= n).unwrap_or(false) {
        let mut e = 0;
        while n.is_multiple_of(d) {
            n /= d;
            e += 1;
        }
        push(d, e);
        d += 2;
    }
    if n > 1 {
        push(n, 1);
    }
    out
}

/// Fractional part of a nonnegative rational, as a rational in `[0,1)`.
pub fn frac_part(r: &Rat) -> Rat {
    debug_assert!(!r.is_negative());
    r - r.floor()
}

/// Parse an exact rational written as `"a/b"` or `"a"`.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let num: BigInt = num
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad rational `{s}`")))?;
    let den: BigInt = den
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad rational `{s}`")))?;
    if den.is_zero() {
        return Err(Error::Parse(format!("zero denominator in `{s}`")));
    }
    Ok(Rat::new(num, den))
}

/// Render a rational as `"a/b"` (or `"a"` when the denominator is 1).
pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valuation_basics() {
        assert_eq!(valuation(&BigUint::from(24u32), 2), 3);
        assert_eq!(valuation(&BigUint::from(24u32), 3), 1);
        assert_eq!(valuation(&BigUint::from(24u32), 5), 0);
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_rat("3/4").unwrap(), rat(3, 4));
        assert_eq!(parse_rat("5").unwrap(), rat(5, 1));
        assert_eq!(fmt_rat(&rat(6, 8)), "3/4");
        assert_eq!(fmt_rat(&rat(5, 1)), "5");
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
    }

    #[test]
    fn small_primes() {
        let primes: Vec<u64> = (0..30).filter(|&n| is_prime_u64(n)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert_eq!(factorize_u64(360), vec![(2, 3), (3, 2), (5, 1)]);
    }
}
