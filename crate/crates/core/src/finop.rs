//! Finitary operations on `Z_n` stored as explicit value tables.
//!
//! The tuple `(x_1, ..., x_a)` lives at index
//! `x_1 * n^(a-1) + x_2 * n^(a-2) + ... + x_a`, so `x_1` is the most
//! significant digit. Every serialised form uses this order.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zmod::{Congruence, Modulus};

/// Tables are stored one byte per entry.
pub const MAX_TABLE_MODULUS: u32 = 256;
/// Hard cap on `n^a`.
pub const MAX_TABLE_ENTRIES: usize = 1 << 22;

/// `n^arity`, or an error when the table would be too large to store.
pub fn table_len(modulus: Modulus, arity: u32) -> Result<usize> {
    if arity == 0 {
        return Err(Error::ZeroArity);
    }
    if modulus.n() > MAX_TABLE_MODULUS {
        return Err(Error::ModulusTooLarge { n: modulus.n() as u64, limit: MAX_TABLE_MODULUS as u64 });
    }
    let entries = (modulus.n() as u128).checked_pow(arity).unwrap_or(u128::MAX);
    if entries > MAX_TABLE_ENTRIES as u128 {
        return Err(Error::TableTooLarge { entries, limit: MAX_TABLE_ENTRIES });
    }
    Ok(entries as usize)
}

/// A total `arity`-ary operation on `Z_n`.
///
/// Serialises as `{"modulus": n, "arity": a, "values": [...]}`;
/// deserialising validates length and range.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TableDoc", into = "TableDoc")]
pub struct OpTable {
    modulus: Modulus,
    arity: u32,
    values: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct TableDoc {
    modulus: u32,
    arity: u32,
    values: Vec<u32>,
}

impl TryFrom<TableDoc> for OpTable {
    type Error = Error;

    fn try_from(doc: TableDoc) -> Result<Self> {
        let modulus = Modulus::new(doc.modulus)?;
        let values = doc
            .values
            .into_iter()
            .map(|v| modulus.check_element(v as u64).map(|v| v as u8))
            .collect::<Result<Vec<u8>>>()?;
        OpTable::new(modulus, doc.arity, values)
    }
}

impl From<OpTable> for TableDoc {
    fn from(t: OpTable) -> Self {
        TableDoc { modulus: t.modulus.n(), arity: t.arity, values: t.values.into_iter().map(u32::from).collect() }
    }
}

impl OpTable {
    pub fn new(modulus: Modulus, arity: u32, values: Vec<u8>) -> Result<Self> {
        let len = table_len(modulus, arity)?;
        if values.len() != len {
            return Err(Error::LengthMismatch { expected: len, found: values.len() });
        }
        if let Some(&bad) = values.iter().find(|&&v| v as u32 >= modulus.n()) {
            return Err(Error::ElementOutOfRange { value: bad as u64, modulus: modulus.n() });
        }
        Ok(OpTable { modulus, arity, values })
    }

    /// Caller guarantees length and range.
    pub(crate) fn from_raw(modulus: Modulus, arity: u32, values: Vec<u8>) -> Self {
        debug_assert_eq!(Some(values.len()), table_len(modulus, arity).ok());
        debug_assert!(values.iter().all(|&v| (v as u32) < modulus.n()));
        OpTable { modulus, arity, values }
    }

    /// Tabulates `f`, reducing each result mod `n`.
    pub fn from_fn(modulus: Modulus, arity: u32, mut f: impl FnMut(&[u32]) -> i64) -> Result<Self> {
        let len = table_len(modulus, arity)?;
        let mut values = Vec::with_capacity(len);
        let mut digits = vec![0u32; arity as usize];
        for _ in 0..len {
            values.push(modulus.reduce(f(&digits)) as u8);
            odometer_step(&mut digits, modulus.n());
        }
        Ok(OpTable { modulus, arity, values })
    }

    pub fn projection(modulus: Modulus, arity: u32, index: u32) -> Result<Self> {
        if index == 0 || index > arity {
            return Err(Error::IndexOutOfRange { index, arity });
        }
        let i = index as usize - 1;
        OpTable::from_fn(modulus, arity, |x| x[i] as i64)
    }

    pub fn constant(modulus: Modulus, arity: u32, c: u32) -> Result<Self> {
        let c = modulus.check_element(c as u64)?;
        let len = table_len(modulus, arity)?;
        Ok(OpTable { modulus, arity, values: vec![c as u8; len] })
    }

    pub fn ring_add(modulus: Modulus) -> Self {
        OpTable::from_fn(modulus, 2, |x| x[0] as i64 + x[1] as i64).expect("binary table fits")
    }

    pub fn ring_mul(modulus: Modulus) -> Self {
        OpTable::from_fn(modulus, 2, |x| x[0] as i64 * x[1] as i64).expect("binary table fits")
    }

    #[inline]
    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    #[inline]
    pub fn arity(&self) -> u32 {
        self.arity
    }

    #[inline]
    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, x: &[u32]) -> Result<usize> {
        if x.len() != self.arity as usize {
            return Err(Error::ArityMismatch { expected: self.arity, found: x.len() as u32 });
        }
        let n = self.modulus.n();
        let mut idx = 0usize;
        for &xi in x {
            self.modulus.check_element(xi as u64)?;
            idx = idx * n as usize + xi as usize;
        }
        Ok(idx)
    }

    pub fn evaluate(&self, x: &[u32]) -> Result<u32> {
        Ok(self.values[self.index_of(x)?] as u32)
    }

    /// `Some(c)` when the table is identically `c`.
    pub fn constant_value(&self) -> Option<u32> {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first).then_some(first as u32)
    }

    /// `f(g_1(x), ..., g_l(x))`.
    pub fn compose(&self, gs: &[OpTable]) -> Result<OpTable> {
        if gs.len() != self.arity as usize {
            return Err(Error::ArityMismatch { expected: self.arity, found: gs.len() as u32 });
        }
        let inner = gs[0].arity;
        for g in gs {
            self.same_modulus(g)?;
            if g.arity != inner {
                return Err(Error::ArityMismatch { expected: inner, found: g.arity });
            }
        }
        let n = self.modulus.n() as usize;
        let len = gs[0].values.len();
        let mut values = Vec::with_capacity(len);
        for x in 0..len {
            let mut idx = 0usize;
            for g in gs {
                idx = idx * n + g.values[x] as usize;
            }
            values.push(self.values[idx]);
        }
        Ok(OpTable { modulus: self.modulus, arity: inner, values })
    }

    fn same_modulus(&self, other: &OpTable) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch { expected: self.modulus.n(), found: other.modulus.n() });
        }
        Ok(())
    }

    fn same_shape(&self, other: &OpTable) -> Result<()> {
        self.same_modulus(other)?;
        if self.arity != other.arity {
            return Err(Error::ArityMismatch { expected: self.arity, found: other.arity });
        }
        Ok(())
    }

    fn zip_with(&self, other: &OpTable, op: impl Fn(u32, u32) -> u32) -> Result<OpTable> {
        self.same_shape(other)?;
        let n = self.modulus.n();
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (op(a as u32, b as u32) % n) as u8)
            .collect();
        Ok(OpTable { modulus: self.modulus, arity: self.arity, values })
    }

    pub fn pointwise_add(&self, other: &OpTable) -> Result<OpTable> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn pointwise_sub(&self, other: &OpTable) -> Result<OpTable> {
        let n = self.modulus.n();
        self.zip_with(other, move |a, b| a + n - b)
    }

    pub fn pointwise_mul(&self, other: &OpTable) -> Result<OpTable> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: u32) -> OpTable {
        let n = self.modulus.n() as u64;
        let c = c as u64 % n;
        let values = self.values.iter().map(|&v| (v as u64 * c % n) as u8).collect();
        OpTable { modulus: self.modulus, arity: self.arity, values }
    }

    /// `x -> f(x + a)`, componentwise mod `n`.
    pub fn shift(&self, a: &[u32]) -> Result<OpTable> {
        if a.len() != self.arity as usize {
            return Err(Error::ArityMismatch { expected: self.arity, found: a.len() as u32 });
        }
        let n = self.modulus.n();
        let a: Vec<u32> = a.iter().map(|&ai| ai % n).collect();
        OpTable::from_fn(self.modulus, self.arity, |x| {
            let mut idx = 0usize;
            for (xi, ai) in x.iter().zip(&a) {
                idx = idx * n as usize + ((xi + ai) % n) as usize;
            }
            self.values[idx] as i64
        })
    }

    /// Whether `x_i = y_i (mod d)` for all `i` forces `f(x) = f(y) (mod d)`.
    ///
    /// Checks each input against the tuple of its blockwise least
    /// representatives, which is equivalent by transitivity.
    pub fn preserves_congruence(&self, theta: &Congruence) -> Result<bool> {
        if theta.modulus() != self.modulus {
            return Err(Error::ModulusMismatch { expected: self.modulus.n(), found: theta.modulus().n() });
        }
        Ok(self.preserves_divisor(theta.divisor()))
    }

    fn preserves_divisor(&self, d: u32) -> bool {
        let n = self.modulus.n();
        if d == 1 || d == n {
            return true;
        }
        let mut digits = vec![0u32; self.arity as usize];
        for x in 0..self.values.len() {
            let mut rep = 0usize;
            for &xi in &digits {
                rep = rep * n as usize + (xi % d) as usize;
            }
            if self.values[x] as u32 % d != self.values[rep] as u32 % d {
                return false;
            }
            odometer_step(&mut digits, n);
        }
        true
    }

    /// Divisors `d` of `n` whose congruence the table fails to preserve.
    pub fn violated_divisors(&self) -> Vec<u32> {
        self.modulus.divisors().into_iter().filter(|&d| !self.preserves_divisor(d)).collect()
    }

    pub fn is_compatible(&self) -> bool {
        self.modulus.divisors().into_iter().all(|d| self.preserves_divisor(d))
    }

    /// On `Z_{p^k}`: maps `M^a` into `M`, `M` being the multiples of `p`.
    pub fn preserves_m(&self) -> Result<bool> {
        let p = self.modulus.require_prime_power()?.p;
        let n = self.modulus.n();
        let mut digits = vec![0u32; self.arity as usize];
        for x in 0..self.values.len() {
            if digits.iter().all(|d| d % p == 0) && !(self.values[x] as u32).is_multiple_of(p) {
                return Ok(false);
            }
            odometer_step(&mut digits, n);
        }
        Ok(true)
    }

    pub fn packed_key(&self) -> PackedKey {
        PackedKey::encode(self)
    }
}

/// Advances a most-significant-first digit vector by one.
#[inline]
pub(crate) fn odometer_step(digits: &mut [u32], n: u32) {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < n {
            return;
        }
        *d = 0;
    }
}

/// Digits of `index` in base `n`, most significant first.
pub fn index_digits(mut index: usize, n: u32, arity: u32) -> Vec<u32> {
    let mut out = vec![0u32; arity as usize];
    for slot in out.iter_mut().rev() {
        *slot = (index % n as usize) as u32;
        index /= n as usize;
    }
    out
}

/// Bits used per table entry in a [`PackedKey`].
pub fn bits_per_entry(n: u32) -> u32 {
    32 - (n - 1).leading_zeros()
}

/// Canonical bit packing of a table.
///
/// Entry `i` occupies stream bits `i*w .. i*w + w` (least significant bit
/// first), where `w = ceil(log2 n)`. Stream bit `j` is bit `j % 8` of byte
/// `j / 8`; unused trailing bits are zero. Keys of one shape sort in the
/// canonical member order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PackedKey(pub Vec<u8>);

impl PackedKey {
    pub fn byte_len(modulus: Modulus, arity: u32) -> Result<usize> {
        let len = table_len(modulus, arity)?;
        Ok(key_bytes(modulus.n(), len))
    }

    pub fn encode(table: &OpTable) -> PackedKey {
        PackedKey(pack_values(table.modulus.n(), &table.values))
    }

    pub fn decode(&self, modulus: Modulus, arity: u32) -> Result<OpTable> {
        let len = table_len(modulus, arity)?;
        let values = unpack_values(modulus.n(), len, &self.0)?;
        OpTable::new(modulus, arity, values)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

pub(crate) fn key_bytes(n: u32, entries: usize) -> usize {
    (entries * bits_per_entry(n) as usize).div_ceil(8)
}

pub(crate) fn pack_values(n: u32, values: &[u8]) -> Vec<u8> {
    let w = bits_per_entry(n) as usize;
    let mut out = vec![0u8; key_bytes(n, values.len())];
    let mut bit = 0usize;
    for &v in values {
        for b in 0..w {
            if (v >> b) & 1 == 1 {
                out[bit / 8] |= 1 << (bit % 8);
            }
            bit += 1;
        }
    }
    out
}

pub(crate) fn unpack_values(n: u32, entries: usize, bytes: &[u8]) -> Result<Vec<u8>> {
    let w = bits_per_entry(n) as usize;
    if bytes.len() != key_bytes(n, entries) {
        return Err(Error::MalformedKey("wrong byte length"));
    }
    let mut values = Vec::with_capacity(entries);
    let mut bit = 0usize;
    for _ in 0..entries {
        let mut v = 0u32;
        for b in 0..w {
            if (bytes[bit / 8] >> (bit % 8)) & 1 == 1 {
                v |= 1 << b;
            }
            bit += 1;
        }
        if v >= n {
            return Err(Error::MalformedKey("entry out of range"));
        }
        values.push(v as u8);
    }
    while bit < bytes.len() * 8 {
        if (bytes[bit / 8] >> (bit % 8)) & 1 == 1 {
            return Err(Error::MalformedKey("nonzero padding"));
        }
        bit += 1;
    }
    Ok(values)
}
