//! Submodules of `Z_n^len` kept in Howell form.
//!
//! Rows are echelon with pivot entries that divide `n`, and for every row
//! `r` with pivot `d` the multiple `(n/d) r` lies in the span of the rows
//! below it. Under that invariant greedy reduction decides membership and
//! the span has exactly `prod n/d` elements.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;

use crate::zmod::{ext_gcd, gcd};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Submodule {
    n: u32,
    len: usize,
    /// `rows[c]` is the row whose pivot sits in column `c`.
    rows: Vec<Option<Vec<u8>>>,
    rank: usize,
}

impl Submodule {
    pub fn new(n: u32, len: usize) -> Self {
        Submodule { n, len, rows: vec![None; len], rank: 0 }
    }

    pub fn modulus(&self) -> u32 {
        self.n
    }

    pub fn vector_len(&self) -> usize {
        self.len
    }

    /// Number of pivot rows.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `(column, pivot)` pairs in column order.
    pub fn pivots(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.rows.iter().enumerate().filter_map(|(c, r)| r.as_ref().map(|r| (c, r[c] as u32)))
    }

    pub fn count(&self) -> BigUint {
        let mut acc = BigUint::from(1u32);
        for (_, d) in self.pivots() {
            acc *= self.n / d;
        }
        acc
    }

    /// The element count, if it does not exceed `limit`.
    pub fn count_fits(&self, limit: u128) -> Option<u128> {
        let mut acc: u128 = 1;
        for (_, d) in self.pivots() {
            acc = acc.checked_mul((self.n / d) as u128)?;
            if acc > limit {
                return None;
            }
        }
        Some(acc)
    }

    pub fn contains(&self, v: &[u8]) -> bool {
        let mut w = v.to_vec();
        self.reduce(&mut w, 0)
    }

    /// Reduces `w` from column `start`; true iff it reaches zero.
    fn reduce(&self, w: &mut [u8], start: usize) -> bool {
        let n = self.n;
        for c in start..self.len {
            let x = w[c] as u32;
            if x == 0 {
                continue;
            }
            let Some(row) = &self.rows[c] else { return false };
            let d = row[c] as u32;
            if !x.is_multiple_of(d) {
                return false;
            }
            let q = x / d;
            sub_scaled(w, row, q, n, c);
        }
        true
    }

    /// Adds `v` to the span. Returns whether the span grew.
    pub fn insert(&mut self, v: &[u8]) -> bool {
        if self.contains(v) {
            return false;
        }
        let mut pending = vec![v.to_vec()];
        while let Some(w) = pending.pop() {
            self.insert_one(w, &mut pending);
        }
        true
    }

    fn insert_one(&mut self, mut w: Vec<u8>, pending: &mut Vec<Vec<u8>>) {
        let n = self.n;
        let mut c = 0usize;
        while c < self.len {
            let x = w[c] as u32;
            if x == 0 {
                c += 1;
                continue;
            }
            match self.rows[c].take() {
                None => {
                    normalize(&mut w, c, n);
                    let d = w[c] as u32;
                    if d != 1 {
                        let ann = scaled(&w, n / d, n);
                        if ann.iter().any(|&e| e != 0) {
                            pending.push(ann);
                        }
                    }
                    self.rows[c] = Some(w);
                    self.rank += 1;
                    return;
                }
                Some(row) => {
                    let d = row[c] as u32;
                    if x.is_multiple_of(d) {
                        sub_scaled(&mut w, &row, x / d, n, c);
                        self.rows[c] = Some(row);
                        c += 1;
                        continue;
                    }
                    // Unimodular 2x2 step: the new pivot is gcd(d, x).
                    let (g, s, t) = ext_gcd(d as i64, x as i64);
                    let g = g as u32;
                    let s = s.rem_euclid(n as i64) as u32;
                    let t = t.rem_euclid(n as i64) as u32;
                    let mut new_row = vec![0u8; self.len];
                    let mut rest = vec![0u8; self.len];
                    let (xg, dg) = (x / g, d / g);
                    for i in c..self.len {
                        let r = row[i] as u64;
                        let v = w[i] as u64;
                        let nn = n as u64;
                        new_row[i] = ((s as u64 * r + t as u64 * v) % nn) as u8;
                        rest[i] = ((xg as u64 * r + (nn - dg as u64 % nn) * v) % nn) as u8;
                    }
                    debug_assert_eq!(new_row[c] as u32, g % n);
                    debug_assert_eq!(rest[c], 0);
                    let ann = scaled(&new_row, n / g, n);
                    if ann.iter().any(|&e| e != 0) {
                        pending.push(ann);
                    }
                    self.rows[c] = Some(new_row);
                    w = rest;
                    c += 1;
                }
            }
        }
    }

    /// Clears entries above pivots to their least residues. The result is
    /// the unique reduced Howell form of the span.
    pub fn canonicalize(&mut self) {
        let n = self.n;
        for c in 0..self.len {
            let Some(pivot_row) = self.rows[c].clone() else { continue };
            let d = pivot_row[c] as u32;
            for r in 0..c {
                if let Some(row) = self.rows[r].as_mut() {
                    let q = row[c] as u32 / d;
                    if q != 0 {
                        sub_scaled(row, &pivot_row, q, n, c);
                    }
                }
            }
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.rows.iter().filter_map(|r| r.as_deref())
    }

    /// Every element of the span, `Σ c_i r_i` with `0 <= c_i < n/d_i`.
    /// Caller is responsible for the size.
    pub fn elements(&self) -> Vec<Vec<u8>> {
        let rows: Vec<(&[u8], u32)> =
            self.rows.iter().enumerate().filter_map(|(c, r)| r.as_deref().map(|r| (r, self.n / r[c] as u32))).collect();
        let mut out = vec![vec![0u8; self.len]];
        for (row, order) in rows {
            let base = out.len();
            for k in 1..order {
                for i in 0..base {
                    let mut v = out[i].clone();
                    for (e, &r) in v.iter_mut().zip(row) {
                        *e = ((*e as u32 + k * r as u32) % self.n) as u8;
                    }
                    out.push(v);
                }
            }
        }
        out
    }
}

fn scaled(v: &[u8], q: u32, n: u32) -> Vec<u8> {
    v.iter().map(|&e| ((e as u64 * q as u64) % n as u64) as u8).collect()
}

#[inline]
fn sub_scaled(w: &mut [u8], row: &[u8], q: u32, n: u32, from: usize) {
    let n64 = n as u64;
    let q = q as u64 % n64;
    for i in from..w.len() {
        let r = row[i] as u64 * q % n64;
        w[i] = ((w[i] as u64 + n64 - r) % n64) as u8;
    }
}

/// Multiplies `w` by a unit so that `w[c]` becomes `gcd(w[c], n)`.
fn normalize(w: &mut [u8], c: usize, n: u32) {
    let x = w[c] as u64;
    let n64 = n as u64;
    let g = gcd(x, n64);
    if g == x {
        return;
    }
    let (ng, xg) = (n64 / g, x / g);
    let (_, s, _) = ext_gcd(xg as i64, ng as i64);
    let mut u = s.rem_euclid(ng as i64) as u64;
    while gcd(u, n64) != 1 {
        u += ng;
    }
    for e in w.iter_mut() {
        *e = (*e as u64 * u % n64) as u8;
    }
    debug_assert_eq!(w[c] as u64, g);
}

#[cfg(test)]
mod tests {
    use super::*;
    use hashbrown::HashSet;

    /// Explicit additive span by breadth-first sums.
    fn brute_span(n: u32, gens: &[Vec<u8>], len: usize) -> HashSet<Vec<u8>> {
        let mut set = HashSet::new();
        set.insert(vec![0u8; len]);
        let mut frontier: Vec<Vec<u8>> = set.iter().cloned().collect();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for v in &frontier {
                for g in gens {
                    let s: Vec<u8> = v.iter().zip(g).map(|(&a, &b)| ((a as u32 + b as u32) % n) as u8).collect();
                    if set.insert(s.clone()) {
                        next.push(s);
                    }
                }
            }
            frontier = next;
        }
        set
    }

    fn lcg(seed: &mut u64) -> u64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        *seed >> 33
    }

    #[test]
    fn matches_brute_force_span() {
        let mut seed = 7u64;
        for n in [2u32, 4, 6, 8, 9, 12] {
            for len in 1..=4usize {
                for _ in 0..25 {
                    let k = 1 + (lcg(&mut seed) % 3) as usize;
                    let gens: Vec<Vec<u8>> = (0..k)
                        .map(|_| {
                            (0..len)
                                .map(|_| {
                                    // bias toward non-units so pivots other than 1 occur
                                    let v = (lcg(&mut seed) % n as u64) as u32;
                                    if lcg(&mut seed).is_multiple_of(2) { (v * 2 % n) as u8 } else { v as u8 }
                                })
                                .collect()
                        })
                        .collect();
                    let brute = brute_span(n, &gens, len);
                    let mut sub = Submodule::new(n, len);
                    for g in &gens {
                        sub.insert(g);
                    }
                    assert_eq!(sub.count(), BigUint::from(brute.len()), "n={n} gens={gens:?}");
                    let mut all = vec![0u8; len];
                    loop {
                        assert_eq!(sub.contains(&all), brute.contains(&all), "n={n} gens={gens:?} v={all:?}");
                        let mut i = len;
                        loop {
                            if i == 0 {
                                break;
                            }
                            i -= 1;
                            all[i] += 1;
                            if (all[i] as u32) < n {
                                break;
                            }
                            all[i] = 0;
                        }
                        if all.iter().all(|&e| e == 0) {
                            break;
                        }
                    }
                    let elems: HashSet<Vec<u8>> = sub.elements().into_iter().collect();
                    assert_eq!(elems, brute);
                }
            }
        }
    }

    #[test]
    fn canonical_form_is_order_independent() {
        let n = 8;
        let gens = [vec![2u8, 4, 6], vec![4, 0, 2], vec![0, 6, 1], vec![6, 2, 0]];
        let mut a = Submodule::new(n, 3);
        let mut b = Submodule::new(n, 3);
        for g in &gens {
            a.insert(g);
        }
        for g in gens.iter().rev() {
            b.insert(g);
        }
        a.canonicalize();
        b.canonicalize();
        assert_eq!(a, b);
    }

    #[test]
    fn insert_reports_growth() {
        let mut s = Submodule::new(4, 2);
        assert!(s.insert(&[2, 0]));
        assert!(!s.insert(&[2, 0]));
        assert!(!s.insert(&[0, 0]));
        assert!(s.insert(&[1, 0]));
        assert_eq!(s.count(), BigUint::from(4u32));
    }
}
