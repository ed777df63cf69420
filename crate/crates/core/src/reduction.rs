//! Moving operations between `Z_{p^k}` and `Z_{p^(k-1)}`, and between
//! `Z_{mn}` and `Z_m x Z_n`.
//!
//! `M` is the ideal of multiples of `p` in `Z_{p^k}`; `l -> lp` identifies
//! `Z_{p^(k-1)}` with `M`. The star map sends `h` on the small ring to the
//! operation that is `p h(x/p)` on `M^n` and zero elsewhere.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::closure::{ClosureCache, CloneSpec};
use crate::error::{Error, Result};
use crate::finop::{odometer_step, table_len, OpTable};
use crate::zmod::{crt_pair, is_prime, units_product, Modulus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReductionContext {
    p: u32,
    k: u32,
    big: Modulus,
    small: Modulus,
}

impl ReductionContext {
    pub fn new(p: u32, k: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrimePower(p));
        }
        if k < 2 {
            return Err(Error::Infeasible(alloc::format!("k = {k}; need k >= 2")));
        }
        let big = Modulus::prime_power(p, k)?;
        let small = Modulus::prime_power(p, k - 1)?;
        Ok(ReductionContext { p, k, big, small })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn big(&self) -> Modulus {
        self.big
    }

    pub fn small(&self) -> Modulus {
        self.small
    }

    pub fn in_m(&self, x: u32) -> bool {
        x.is_multiple_of(self.p)
    }

    /// `{0, p, ..., (p^(k-1) - 1) p}`.
    pub fn m_set(&self) -> Vec<u32> {
        (0..self.small.n()).map(|l| l * self.p).collect()
    }

    /// `{0, ..., p - 1}`.
    pub fn transversal(&self) -> Vec<u32> {
        (0..self.p).collect()
    }

    /// `prod_{c not in M} (x - c)` for each `x` in `M`, in the order of
    /// [`Self::m_set`].
    pub fn alpha_values(&self) -> Vec<u32> {
        let n = self.big.n() as u64;
        self.m_set()
            .into_iter()
            .map(|x| {
                let mut acc = 1u64;
                for c in 0..n {
                    if c % self.p as u64 != 0 {
                        acc = acc * ((x as u64 + n - c) % n) % n;
                    }
                }
                acc as u32
            })
            .collect()
    }

    /// The common value of [`Self::alpha_values`], which equals the product
    /// of all units.
    pub fn alpha(&self) -> u32 {
        units_product(self.big).expect("prime power")
    }

    /// `alpha^(-n) prod_i prod_{c not in M} (x_i - c)`, without checking it.
    pub fn g_closed_form(&self, arity: u32) -> Result<OpTable> {
        let n = self.big.n() as u64;
        let inv = self.big.inverse(self.alpha()).expect("alpha is a unit") as u64;
        let scale = (0..arity).fold(1u64, |acc, _| acc * inv % n);
        let per_coord: Vec<u64> = (0..n)
            .map(|x| {
                let mut acc = 1u64;
                for c in 0..n {
                    if c % self.p as u64 != 0 {
                        acc = acc * ((x + n - c) % n) % n;
                    }
                }
                acc
            })
            .collect();
        OpTable::from_fn(self.big, arity, |x| {
            let prod = x.iter().fold(scale, |acc, &xi| acc * per_coord[xi as usize] % n);
            prod as i64
        })
    }

    /// Indicator of `M^n` by its definition.
    pub fn m_indicator(&self, arity: u32) -> Result<OpTable> {
        OpTable::from_fn(self.big, arity, |x| x.iter().all(|&xi| self.in_m(xi)) as i64)
    }

    /// The closed form, checked entrywise against the indicator of `M^n`.
    pub fn build_g(&self, arity: u32) -> Result<OpTable> {
        let g = self.g_closed_form(arity)?;
        let ind = self.m_indicator(arity)?;
        if let Some(index) = g.values().iter().zip(ind.values()).position(|(a, b)| a != b) {
            return Err(Error::IndicatorMismatch { index });
        }
        Ok(g)
    }

    /// Checks `f(x) = sum_{c in L^n} f(x) G(x - c)` at every `x`.
    pub fn verify_decomposition(&self, f: &OpTable) -> Result<bool> {
        self.check_big(f)?;
        let g = self.build_g(f.arity())?;
        let n = self.big.n();
        let arity = f.arity() as usize;
        let mut xs = vec![0u32; arity];
        let mut cs = vec![0u32; arity];
        for x in 0..f.len() {
            let fx = f.values()[x] as u64;
            let mut sum = 0u64;
            cs.iter_mut().for_each(|c| *c = 0);
            loop {
                let idx = xs.iter().zip(&cs).fold(0usize, |acc, (&xi, &ci)| acc * n as usize + ((xi + n - ci) % n) as usize);
                sum = (sum + fx * g.values()[idx] as u64) % n as u64;
                if !advance(&mut cs, self.p) {
                    break;
                }
            }
            if sum != fx {
                return Ok(false);
            }
            odometer_step(&mut xs, n);
        }
        Ok(true)
    }

    /// `h` with `h(l) = f(lp) / p`; `f` must preserve `M`.
    pub fn restrict_to_small(&self, f: &OpTable) -> Result<OpTable> {
        self.check_big(f)?;
        if !f.preserves_m()? {
            return Err(Error::DoesNotPreserveM);
        }
        let n = self.big.n() as usize;
        let p = self.p;
        OpTable::from_fn(self.small, f.arity(), |l| {
            let idx = l.iter().fold(0usize, |acc, &li| acc * n + (li * p) as usize);
            (f.values()[idx] as u32 / p) as i64
        })
    }

    /// `p h(x/p)` on `M^n`, zero elsewhere.
    pub fn star(&self, h: &OpTable) -> Result<OpTable> {
        if h.modulus() != self.small {
            return Err(Error::ModulusMismatch { expected: self.small.n(), found: h.modulus().n() });
        }
        let small = self.small.n() as usize;
        let p = self.p;
        OpTable::from_fn(self.big, h.arity(), |x| {
            if x.iter().any(|&xi| xi % p != 0) {
                return 0;
            }
            let idx = x.iter().fold(0usize, |acc, &xi| acc * small + (xi / p) as usize);
            (h.values()[idx] as u32 * p) as i64
        })
    }

    /// `(is_compatible(h), h* restricted to M preserves congruences mod
    /// p^2, ..., p^(k-1))`. The two agree for every `h`.
    pub fn star_compatibility_check(&self, h: &OpTable) -> Result<(bool, bool)> {
        let f = self.star(h)?;
        let n = self.big.n();
        let arity = h.arity() as usize;
        let mut m_side = true;
        'levels: for j in 2..self.k {
            let d = self.p.pow(j);
            let mut xs = vec![0u32; arity];
            for x in 0..f.len() {
                if xs.iter().all(|&xi| self.in_m(xi)) {
                    let rep = xs.iter().fold(0usize, |acc, &xi| acc * n as usize + (xi % d) as usize);
                    if f.values()[x] as u32 % d != f.values()[rep] as u32 % d {
                        m_side = false;
                        break 'levels;
                    }
                }
                odometer_step(&mut xs, n);
            }
        }
        Ok((h.is_compatible(), m_side))
    }

    /// Whether `f` is compatible and, for every shift `a`, the restriction
    /// of `f(x + a) - f(a)` to `M` lies in the clone of `k_spec`.
    pub fn in_ck(&self, f: &OpTable, k_spec: &CloneSpec, cache: &mut ClosureCache) -> Result<bool> {
        self.check_big(f)?;
        if k_spec.modulus() != self.small {
            return Err(Error::ModulusMismatch { expected: self.small.n(), found: k_spec.modulus().n() });
        }
        if !f.is_compatible() {
            return Ok(false);
        }
        let mut seen: BTreeSet<Vec<u8>> = BTreeSet::new();
        for centred in self.centred_restrictions(f)? {
            if !seen.insert(centred.values().to_vec()) {
                continue;
            }
            if !cache.member(k_spec, &centred)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `restrict(f(x + a) - f(a))` for every `a`, in index order of `a`.
    /// `f` must be compatible.
    pub fn centred_restrictions(&self, f: &OpTable) -> Result<Vec<OpTable>> {
        let n = self.big.n();
        let mut out = Vec::with_capacity(f.len());
        let mut a = vec![0u32; f.arity() as usize];
        for idx in 0..f.len() {
            let shifted = f.shift(&a)?;
            let fa = OpTable::constant(self.big, f.arity(), f.values()[idx] as u32)?;
            out.push(self.restrict_to_small(&shifted.pointwise_sub(&fa)?)?);
            odometer_step(&mut a, n);
        }
        Ok(out)
    }

    fn check_big(&self, f: &OpTable) -> Result<()> {
        if f.modulus() != self.big {
            return Err(Error::ModulusMismatch { expected: self.big.n(), found: f.modulus().n() });
        }
        Ok(())
    }
}

/// Mixed-radix increment over `{0..base-1}^len`; false after wrapping.
fn advance(digits: &mut [u32], base: u32) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Components of a compatible `f` on `Z_{mn}`: `f_m(x) = f(a x) mod m` and
/// `f_n(y) = f(b y) mod n`.
pub fn split_coprime(f: &OpTable, m: u32, n: u32) -> Result<(OpTable, OpTable)> {
    let crt = crt_pair(m, n)?;
    if f.modulus().n() != crt.product() {
        return Err(Error::ModulusMismatch { expected: crt.product(), found: f.modulus().n() });
    }
    if !f.is_compatible() {
        return Err(Error::NotCompatible);
    }
    let mn = crt.product() as usize;
    let component = |q: u32, e: u32| -> Result<OpTable> {
        let modulus = Modulus::new(q)?;
        OpTable::from_fn(modulus, f.arity(), |x| {
            let idx = x.iter().fold(0usize, |acc, &xi| acc * mn + (xi as u64 * e as u64 % mn as u64) as usize);
            (f.values()[idx] as u32 % q) as i64
        })
    };
    Ok((component(m, crt.a)?, component(n, crt.b)?))
}

/// `a g(z mod m) + b h(z mod n)` on `Z_{mn}`.
pub fn combine_crt(g: &OpTable, h: &OpTable) -> Result<OpTable> {
    let (m, n) = (g.modulus().n(), h.modulus().n());
    let crt = crt_pair(m, n)?;
    if g.arity() != h.arity() {
        return Err(Error::ArityMismatch { expected: g.arity(), found: h.arity() });
    }
    let big = Modulus::new(crt.product())?;
    table_len(big, g.arity())?;
    let arity = g.arity();
    OpTable::from_fn(big, arity, |z| {
        let gi = z.iter().fold(0usize, |acc, &zi| acc * m as usize + (zi % m) as usize);
        let hi = z.iter().fold(0usize, |acc, &zi| acc * n as usize + (zi % n) as usize);
        crt.lift(g.values()[gi] as u32, h.values()[hi] as u32) as i64
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::{member, ClosureOptions};

    fn z(n: u32) -> Modulus {
        Modulus::new(n).unwrap()
    }

    fn t(n: u32, arity: u32, f: impl FnMut(&[u32]) -> i64) -> OpTable {
        OpTable::from_fn(z(n), arity, f).unwrap()
    }

    #[test]
    fn g_examples() {
        let c = ReductionContext::new(2, 2).unwrap();
        assert_eq!(c.build_g(1).unwrap().values(), &[1, 0, 1, 0]);
        assert_eq!(c.alpha(), 3);
        let closed = t(4, 1, |x| 3 * (x[0] as i64 - 1) * (x[0] as i64 - 3));
        assert_eq!(closed.values(), &[1, 0, 1, 0]);
        let c9 = ReductionContext::new(3, 2).unwrap();
        let g = c9.build_g(2).unwrap();
        for x in 0..9 {
            for y in 0..9 {
                assert_eq!(g.evaluate(&[x, y]).unwrap(), (x % 3 == 0 && y % 3 == 0) as u32);
            }
        }
    }

    #[test]
    fn alpha_is_constant_on_m() {
        for (p, k, want) in [(2, 2, 3), (2, 3, 1), (3, 2, 8)] {
            let c = ReductionContext::new(p, k).unwrap();
            assert!(c.alpha_values().iter().all(|&a| a == want), "p={p} k={k}");
            assert_eq!(c.alpha(), want);
        }
    }

    #[test]
    fn decomposition_examples() {
        let c = ReductionContext::new(2, 2).unwrap();
        assert!(c.verify_decomposition(&OpTable::constant(z(4), 2, 0).unwrap()).unwrap());
        assert!(c.verify_decomposition(&OpTable::ring_mul(z(4))).unwrap());
    }

    #[test]
    fn restrict_examples() {
        let c = ReductionContext::new(2, 3).unwrap();
        assert_eq!(c.restrict_to_small(&OpTable::ring_add(z(8))).unwrap(), OpTable::ring_add(z(4)));
        let two_xy = t(4, 2, |x| 2 * x[0] as i64 * x[1] as i64);
        assert_eq!(c.restrict_to_small(&OpTable::ring_mul(z(8))).unwrap(), two_xy);
        assert_eq!(
            c.restrict_to_small(&OpTable::constant(z(8), 1, 2).unwrap()).unwrap(),
            OpTable::constant(z(4), 1, 1).unwrap()
        );
        assert!(matches!(
            c.restrict_to_small(&OpTable::constant(z(8), 1, 1).unwrap()),
            Err(Error::DoesNotPreserveM)
        ));
    }

    #[test]
    fn star_examples() {
        let c = ReductionContext::new(2, 3).unwrap();
        let succ = t(4, 1, |x| x[0] as i64 + 1);
        assert_eq!(c.star(&succ).unwrap().values(), &[2, 0, 4, 0, 6, 0, 0, 0]);
        let zero = OpTable::constant(z(4), 2, 0).unwrap();
        assert_eq!(c.star(&zero).unwrap(), OpTable::constant(z(8), 2, 0).unwrap());
        assert_eq!(c.restrict_to_small(&c.star(&succ).unwrap()).unwrap(), succ);
    }

    #[test]
    fn star_compatibility_examples() {
        let c = ReductionContext::new(2, 3).unwrap();
        assert_eq!(c.star_compatibility_check(&OpTable::projection(z(4), 2, 1).unwrap()).unwrap(), (true, true));
        let halve = OpTable::new(z(4), 1, vec![0, 0, 1, 1]).unwrap();
        assert_eq!(c.star_compatibility_check(&halve).unwrap(), (false, false));
    }

    #[test]
    fn ck_examples() {
        let c = ReductionContext::new(2, 3).unwrap();
        let z4 = z(4);
        let e2 = CloneSpec::new(z4, "E2")
            .with_constants(true)
            .with_generator("add", OpTable::ring_add(z4))
            .unwrap()
            .with_generator("2xy", t(4, 2, |x| 2 * x[0] as i64 * x[1] as i64))
            .unwrap();
        let mut cache = ClosureCache::new(ClosureOptions::default());
        assert!(c.in_ck(&OpTable::ring_mul(z(8)), &e2, &mut cache).unwrap());
        assert!(c.in_ck(&OpTable::constant(z(8), 2, 5).unwrap(), &e2, &mut cache).unwrap());
        let halve = OpTable::new(z4, 1, vec![0, 0, 1, 1]).unwrap();
        assert!(!halve.is_compatible());
        assert!(!c.in_ck(&c.star(&halve).unwrap(), &e2, &mut cache).unwrap());
        // xy on the small side is outside E2, so its star lift is outside C(E2).
        assert!(!member(&e2, &OpTable::ring_mul(z4), &ClosureOptions::default()).unwrap());
        assert!(!c.in_ck(&c.star(&OpTable::ring_mul(z4)).unwrap(), &e2, &mut cache).unwrap());
    }

    #[test]
    fn crt_examples() {
        let (a, b) = split_coprime(&OpTable::ring_add(z(12)), 4, 3).unwrap();
        assert_eq!((a, b), (OpTable::ring_add(z(4)), OpTable::ring_add(z(3))));
        let (a, b) = split_coprime(&OpTable::ring_mul(z(12)), 4, 3).unwrap();
        assert_eq!((a, b), (OpTable::ring_mul(z(4)), OpTable::ring_mul(z(3))));
        let id = |n| OpTable::projection(z(n), 1, 1).unwrap();
        assert_eq!(combine_crt(&id(4), &id(3)).unwrap(), id(12));
        let nine = combine_crt(&OpTable::constant(z(4), 1, 1).unwrap(), &OpTable::constant(z(3), 1, 0).unwrap()).unwrap();
        assert_eq!(nine, OpTable::constant(z(12), 1, 9).unwrap());
        assert_eq!(combine_crt(&OpTable::ring_add(z(4)), &OpTable::ring_add(z(3))).unwrap(), OpTable::ring_add(z(12)));
        assert!(matches!(split_coprime(&OpTable::ring_add(z(12)), 2, 6), Err(Error::NotCoprime { .. })));
        let bad = t(12, 1, |x| (x[0] == 1) as i64);
        assert!(matches!(split_coprime(&bad, 4, 3), Err(Error::NotCompatible)));
    }
}
