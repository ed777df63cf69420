//! Arithmetic over `Z_n`: moduli, congruences, and CRT coefficients.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest modulus accepted. Factorisation is plain trial division.
pub const MAX_MODULUS: u32 = 1_000_000;

/// `n = p^k` with `p` prime and `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrimePower {
    pub p: u32,
    pub k: u32,
}

/// The carrier size of a ring `Z_n`, `n >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Modulus {
    n: u32,
    prime_power: Option<PrimePower>,
}

impl Modulus {
    pub fn new(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidModulus(n as u64));
        }
        if n > MAX_MODULUS {
            return Err(Error::ModulusTooLarge { n: n as u64, limit: MAX_MODULUS as u64 });
        }
        let factors = factorize(n);
        let prime_power = match factors.as_slice() {
            [(p, k)] => Some(PrimePower { p: *p, k: *k }),
            _ => None,
        };
        Ok(Modulus { n, prime_power })
    }

    /// `Z_{p^k}`; fails unless `p` is prime and `k >= 1`.
    pub fn prime_power(p: u32, k: u32) -> Result<Self> {
        if k == 0 || !is_prime(p) {
            return Err(Error::NotPrimePower(p));
        }
        let n = (p as u64).checked_pow(k).filter(|&n| n <= MAX_MODULUS as u64).ok_or(
            Error::ModulusTooLarge { n: u64::MAX, limit: MAX_MODULUS as u64 },
        )?;
        Modulus::new(n as u32)
    }

    #[inline]
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn decomposition(&self) -> Option<PrimePower> {
        self.prime_power
    }

    pub fn require_prime_power(&self) -> Result<PrimePower> {
        self.prime_power.ok_or(Error::NotPrimePower(self.n))
    }

    /// Prime factorisation as `(p, k)` pairs with increasing `p`.
    pub fn factors(&self) -> Vec<(u32, u32)> {
        factorize(self.n)
    }

    /// All positive divisors of `n`, increasing.
    pub fn divisors(&self) -> Vec<u32> {
        let mut small = Vec::new();
        let mut large = Vec::new();
        let mut d = 1u32;
        while (d as u64) * (d as u64) <= self.n as u64 {
            if self.n.is_multiple_of(d) {
                small.push(d);
                if d != self.n / d {
                    large.push(self.n / d);
                }
            }
            d += 1;
        }
        small.extend(large.into_iter().rev());
        small
    }

    /// Canonical representative of `x` in `{0..n-1}`.
    #[inline]
    pub fn reduce(&self, x: i64) -> u32 {
        x.rem_euclid(self.n as i64) as u32
    }

    pub fn check_element(&self, x: u64) -> Result<u32> {
        if x < self.n as u64 {
            Ok(x as u32)
        } else {
            Err(Error::ElementOutOfRange { value: x, modulus: self.n })
        }
    }

    pub fn pow(&self, base: u32, exp: u32) -> u32 {
        let n = self.n as u64;
        let mut acc = 1 % n;
        let mut b = base as u64 % n;
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * b % n;
            }
            b = b * b % n;
            e >>= 1;
        }
        acc as u32
    }

    pub fn inverse(&self, x: u32) -> Option<u32> {
        mod_inverse(x as u64, self.n as u64).map(|v| v as u32)
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z_{}", self.n)
    }
}

impl Serialize for Modulus {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        serializer.serialize_u32(self.n)
    }
}

impl<'de> Deserialize<'de> for Modulus {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let n = u32::deserialize(deserializer)?;
        Modulus::new(n).map_err(serde::de::Error::custom)
    }
}

/// Congruence modulo a divisor `d` of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Congruence {
    modulus: Modulus,
    d: u32,
}

impl Congruence {
    pub fn new(modulus: Modulus, d: u32) -> Result<Self> {
        if d == 0 || !modulus.n().is_multiple_of(d) {
            return Err(Error::NotADivisor { d, n: modulus.n() });
        }
        Ok(Congruence { modulus, d })
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn divisor(&self) -> u32 {
        self.d
    }

    #[inline]
    pub fn related(&self, x: u32, y: u32) -> bool {
        x % self.d == y % self.d
    }

    /// The blocks of the induced partition of `{0..n-1}`, each of size `n/d`.
    pub fn blocks(&self) -> Vec<Vec<u32>> {
        (0..self.d)
            .map(|r| (r..self.modulus.n()).step_by(self.d as usize).collect())
            .collect()
    }
}

/// Idempotents splitting `Z_{mn}` into `Z_m x Z_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrtPair {
    pub m: u32,
    pub n: u32,
    /// `a = 1 (mod m)`, `a = 0 (mod n)`.
    pub a: u32,
    /// `b = 0 (mod m)`, `b = 1 (mod n)`.
    pub b: u32,
}

impl CrtPair {
    pub fn product(&self) -> u32 {
        self.m * self.n
    }

    /// The element of `Z_{mn}` with residues `(x mod m, y mod n)`.
    pub fn lift(&self, x: u32, y: u32) -> u32 {
        let mn = self.product() as u64;
        ((self.a as u64 * x as u64 + self.b as u64 * y as u64) % mn) as u32
    }
}

/// Solves the two CRT systems for coprime `m, n >= 1`.
pub fn crt_pair(m: u32, n: u32) -> Result<CrtPair> {
    if m == 0 || n == 0 || gcd(m as u64, n as u64) != 1 {
        return Err(Error::NotCoprime { m: m as u64, n: n as u64 });
    }
    let mn = m as u64 * n as u64;
    if mn > MAX_MODULUS as u64 {
        return Err(Error::ModulusTooLarge { n: mn, limit: MAX_MODULUS as u64 });
    }
    // m == 1 makes the first system vacuous: a = 0, b = 1.
    let a = if m == 1 { 0 } else { n as u64 * mod_inverse(n as u64 % m as u64, m as u64).unwrap() % mn };
    let b = if n == 1 { 0 } else { m as u64 * mod_inverse(m as u64 % n as u64, n as u64).unwrap() % mn };
    Ok(CrtPair { m, n, a: a as u32, b: b as u32 })
}

/// Product of all units of `Z_{p^k}`, reduced mod `p^k`.
pub fn units_product(modulus: Modulus) -> Result<u32> {
    let pp = modulus.require_prime_power()?;
    let n = modulus.n() as u64;
    let mut acc = 1u64;
    for c in 0..n {
        if c % pp.p as u64 != 0 {
            acc = acc * c % n;
        }
    }
    Ok(acc as u32)
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Returns `(g, s, t)` with `s*a + t*b = g = gcd(a, b)`.
pub fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i64, 0i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

pub fn mod_inverse(x: u64, n: u64) -> Option<u64> {
    if n == 1 {
        return Some(0);
    }
    let (g, s, _) = ext_gcd((x % n) as i64, n as i64);
    (g == 1).then(|| s.rem_euclid(n as i64) as u64)
}

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= p as u64 {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn factorize(mut n: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= n as u64 {
        if n.is_multiple_of(d) {
            let mut k = 0;
            while n.is_multiple_of(d) {
                n /= d;
                k += 1;
            }
            out.push((d, k));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn divisors_small() {
        assert_eq!(Modulus::new(12).unwrap().divisors(), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(Modulus::new(8).unwrap().divisors(), vec![1, 2, 4, 8]);
        assert_eq!(Modulus::new(2).unwrap().divisors(), vec![1, 2]);
    }

    #[test]
    fn modulus_rejects_degenerate() {
        assert_eq!(Modulus::new(1), Err(Error::InvalidModulus(1)));
        assert_eq!(Modulus::new(0), Err(Error::InvalidModulus(0)));
        assert!(Modulus::prime_power(4, 2).is_err());
        assert_eq!(Modulus::prime_power(3, 3).unwrap().n(), 27);
        assert_eq!(Modulus::new(12).unwrap().decomposition(), None);
        assert_eq!(Modulus::new(9).unwrap().decomposition(), Some(PrimePower { p: 3, k: 2 }));
    }

    /// Scan-based oracle for the two CRT systems.
    fn scan_crt(m: u32, n: u32) -> (u32, u32) {
        let mn = m * n;
        let a = (0..mn).find(|z| z % m == 1 % m && z % n == 0).unwrap();
        let b = (0..mn).find(|z| z % m == 0 && z % n == 1 % n).unwrap();
        (a, b)
    }

    #[test]
    fn crt_pair_examples() {
        let c = crt_pair(4, 3).unwrap();
        assert_eq!((c.a, c.b), (9, 4));
        assert_eq!((c.a, c.b), scan_crt(4, 3));
        let c = crt_pair(1, 5).unwrap();
        assert_eq!((c.a, c.b), (0, 1));
        let c = crt_pair(3, 2).unwrap();
        assert_eq!((c.a, c.b), (4, 3));
        assert_eq!(crt_pair(4, 6), Err(Error::NotCoprime { m: 4, n: 6 }));
    }

    #[test]
    fn crt_pair_matches_scan() {
        for m in 1..20 {
            for n in 1..20 {
                if gcd(m as u64, n as u64) != 1 {
                    continue;
                }
                let c = crt_pair(m, n).unwrap();
                assert_eq!((c.a, c.b), scan_crt(m, n), "m={m} n={n}");
                let mn = m * n;
                assert_eq!((c.a + c.b) % mn, 1 % mn);
                for x in 0..mn {
                    assert_eq!((c.a as u64 * x as u64 + c.b as u64 * x as u64) % mn as u64, x as u64);
                }
            }
        }
    }

    #[test]
    fn units_product_examples() {
        assert_eq!(units_product(Modulus::new(9).unwrap()), Ok(8));
        assert_eq!(units_product(Modulus::new(4).unwrap()), Ok(3));
        assert_eq!(units_product(Modulus::new(8).unwrap()), Ok(1));
        assert_eq!(units_product(Modulus::new(12).unwrap()), Err(Error::NotPrimePower(12)));
    }

    #[test]
    fn units_product_is_constant_on_multiples_of_p() {
        for (p, k) in [(2, 2), (2, 3), (2, 4), (3, 2), (3, 3), (5, 2), (7, 2)] {
            let m = Modulus::prime_power(p, k).unwrap();
            let alpha = units_product(m).unwrap();
            assert!(m.inverse(alpha).is_some());
            let n = m.n() as i64;
            for x in (0..n).step_by(p as usize) {
                let mut acc = 1i64;
                for c in 0..n {
                    if c % p as i64 != 0 {
                        acc = (acc * (x - c)).rem_euclid(n);
                    }
                }
                assert_eq!(acc as u32, alpha, "p={p} k={k} x={x}");
            }
        }
    }

    #[test]
    fn congruence_blocks() {
        let m = Modulus::new(12).unwrap();
        let c = Congruence::new(m, 4).unwrap();
        let blocks = c.blocks();
        assert_eq!(blocks.len(), 4);
        assert!(blocks.iter().all(|b| b.len() == 3));
        assert_eq!(blocks[1], vec![1, 5, 9]);
        assert_eq!(Congruence::new(m, 5), Err(Error::NotADivisor { d: 5, n: 12 }));
    }

    #[test]
    fn ext_gcd_identity() {
        for a in 0..40i64 {
            for b in 0..40i64 {
                let (g, s, t) = ext_gcd(a, b);
                assert_eq!(s * a + t * b, g);
                assert_eq!(g as u64, gcd(a as u64, b as u64));
            }
        }
    }
}
