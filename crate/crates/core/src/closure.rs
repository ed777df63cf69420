//! Exact m-ary parts of generated clones.
//!
//! The m-ary part of the clone generated by `G` is the least set of m-ary
//! tables that contains the m-ary projections and is closed under applying
//! every `g in G` to tuples of its members. Two exact strategies compute it:
//!
//! * **Plain**: a semi-naive worklist. Each round applies every generator to
//!   the tuples that contain at least one member discovered in the previous
//!   round.
//! * **Module**: when ring addition is a generator the part is an additive
//!   subgroup of `Z_n^(n^m)`, kept as a [`Submodule`]. A generator `g` of
//!   finite difference order is then applied through its iterated
//!   differences at zero along the spanning vectors: by Newton's expansion
//!   these span the same group as `g` applied to every tuple of members.
//!   Products of differences that vanish identically on `g` itself are
//!   pruned.
//!
//! Both stop early when the member count reaches the number of compatible
//! m-ary operations (or of all m-ary operations when some generator is not
//! compatible), since the closure is contained in that set.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use hashbrown::{DefaultHashBuilder, HashTable};
use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::finop::{table_len, OpTable, PackedKey};
use crate::howell::Submodule;
use crate::zmod::Modulus;

pub const DEFAULT_BUDGET: usize = 4_000_000;
pub const DEFAULT_WORK_LIMIT: u64 = 400_000_000_000;

const BATCH: usize = 2048;
/// Per-slot difference order beyond which a generator counts as having
/// infinite order.
const MAX_DIFF_ORDER: u32 = 64;
const MAX_PROFILE_CELLS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generator {
    pub name: String,
    pub table: OpTable,
}

impl Generator {
    pub fn new(name: impl Into<String>, table: OpTable) -> Self {
        Generator { name: name.into(), table }
    }
}

/// A modulus plus generators; projections are always implicit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloneSpec {
    modulus: Modulus,
    pub name: String,
    generators: Vec<Generator>,
    include_all_constants: bool,
}

impl CloneSpec {
    pub fn new(modulus: Modulus, name: impl Into<String>) -> Self {
        CloneSpec { modulus, name: name.into(), generators: Vec::new(), include_all_constants: false }
    }

    pub fn with_constants(mut self, on: bool) -> Self {
        self.include_all_constants = on;
        self
    }

    pub fn with_generator(mut self, name: impl Into<String>, table: OpTable) -> Result<Self> {
        self.push(Generator::new(name, table))?;
        Ok(self)
    }

    pub fn push(&mut self, generator: Generator) -> Result<()> {
        if generator.table.modulus() != self.modulus {
            return Err(Error::ModulusMismatch { expected: self.modulus.n(), found: generator.table.modulus().n() });
        }
        self.generators.push(generator);
        Ok(())
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn include_all_constants(&self) -> bool {
        self.include_all_constants
    }

    pub fn generator_names(&self) -> Vec<String> {
        self.generators.iter().map(|g| g.name.clone()).collect()
    }

    pub fn all_compatible(&self) -> bool {
        self.generators.iter().all(|g| g.table.is_compatible())
    }

    /// Order- and name-independent identity of the generated clone's
    /// presentation.
    pub fn fingerprint(&self) -> Vec<u8> {
        let mut keys: Vec<(u32, PackedKey)> =
            self.generators.iter().map(|g| (g.table.arity(), g.table.packed_key())).collect();
        keys.sort();
        keys.dedup();
        let mut out = Vec::new();
        out.extend_from_slice(&self.modulus.n().to_le_bytes());
        out.push(self.include_all_constants as u8);
        for (arity, key) in keys {
            out.extend_from_slice(&arity.to_le_bytes());
            out.extend_from_slice(&(key.0.len() as u32).to_le_bytes());
            out.extend_from_slice(&key.0);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClosureOptions {
    /// Maximum number of explicitly stored members.
    pub budget: usize,
    /// Maximum number of table-entry evaluations.
    pub work_limit: u64,
    /// Stop once the count reaches the compatible (or total) bound.
    pub saturate: bool,
}

impl Default for ClosureOptions {
    fn default() -> Self {
        ClosureOptions { budget: DEFAULT_BUDGET, work_limit: DEFAULT_WORK_LIMIT, saturate: true }
    }
}

impl ClosureOptions {
    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }
}

/// Flat arena of equal-length tables with a hash index.
#[derive(Clone)]
pub struct TableSet {
    stride: usize,
    arena: Vec<u8>,
    index: HashTable<u32>,
    hasher: DefaultHashBuilder,
}

impl core::fmt::Debug for TableSet {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("TableSet").field("stride", &self.stride).field("len", &self.len()).finish()
    }
}

impl TableSet {
    pub fn new(stride: usize) -> Self {
        TableSet { stride, arena: Vec::new(), index: HashTable::new(), hasher: DefaultHashBuilder::default() }
    }

    pub fn len(&self) -> usize {
        self.arena.len() / self.stride
    }

    pub fn is_empty(&self) -> bool {
        self.arena.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> &[u8] {
        &self.arena[i * self.stride..(i + 1) * self.stride]
    }

    pub fn contains(&self, v: &[u8]) -> bool {
        use core::hash::BuildHasher;
        let h = self.hasher.hash_one(v);
        let (arena, stride) = (&self.arena, self.stride);
        self.index.find(h, |&i| &arena[i as usize * stride..(i as usize + 1) * stride] == v).is_some()
    }

    pub fn insert(&mut self, v: &[u8]) -> bool {
        use core::hash::BuildHasher;
        debug_assert_eq!(v.len(), self.stride);
        let h = self.hasher.hash_one(v);
        let (arena, stride) = (&self.arena, self.stride);
        if self.index.find(h, |&i| &arena[i as usize * stride..(i as usize + 1) * stride] == v).is_some() {
            return false;
        }
        let id = self.len() as u32;
        self.arena.extend_from_slice(v);
        let (arena, hasher) = (&self.arena, &self.hasher);
        self.index.insert_unique(h, id, |&i| hasher.hash_one(&arena[i as usize * stride..(i as usize + 1) * stride]));
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        self.arena.chunks_exact(self.stride)
    }
}

/// Members of a computed part: explicit tables, or an additive subgroup.
#[derive(Debug, Clone)]
pub enum MemberSet {
    Explicit(TableSet),
    Module(Submodule),
}

impl MemberSet {
    pub fn count(&self) -> BigUint {
        match self {
            MemberSet::Explicit(s) => BigUint::from(s.len()),
            MemberSet::Module(m) => m.count(),
        }
    }

    pub fn contains(&self, values: &[u8]) -> bool {
        match self {
            MemberSet::Explicit(s) => s.contains(values),
            MemberSet::Module(m) => m.contains(values),
        }
    }

    /// All members, or `None` if there are more than `limit`.
    pub fn materialize(&self, limit: usize) -> Option<Vec<Vec<u8>>> {
        match self {
            MemberSet::Explicit(s) => (s.len() <= limit).then(|| s.iter().map(|v| v.to_vec()).collect()),
            MemberSet::Module(m) => m.count_fits(limit as u128).map(|_| m.elements()),
        }
    }
}

/// The m-ary part of a generated clone.
#[derive(Debug, Clone)]
pub struct ClosurePart {
    pub spec_name: String,
    pub generator_names: Vec<String>,
    pub modulus: Modulus,
    pub arity: u32,
    pub members: MemberSet,
    pub rounds: u32,
    pub complete: bool,
    /// True when the run stopped at the compatible/total bound.
    pub saturated: bool,
}

impl ClosurePart {
    pub fn count(&self) -> BigUint {
        self.members.count()
    }

    pub fn contains(&self, f: &OpTable) -> bool {
        f.modulus() == self.modulus && f.arity() == self.arity && self.members.contains(f.values())
    }

    /// Members sorted by packed key, or `None` if more than `limit`.
    pub fn sorted_members(&self, limit: usize) -> Option<Vec<OpTable>> {
        let raw = self.members.materialize(limit)?;
        let mut tables: Vec<(PackedKey, OpTable)> = raw
            .into_iter()
            .map(|v| {
                let t = OpTable::from_raw(self.modulus, self.arity, v);
                (t.packed_key(), t)
            })
            .collect();
        tables.sort_by(|a, b| a.0.cmp(&b.0));
        Some(tables.into_iter().map(|(_, t)| t).collect())
    }
}

/// Number of compatible `arity`-ary operations on `Z_n`.
///
/// On `Z_{p^k}` an operation is compatible iff its `i`-th base-`p` digit
/// depends only on the arguments mod `p^i`; for general `n` the count
/// multiplies over prime-power factors.
pub fn compatible_count(modulus: Modulus, arity: u32) -> BigUint {
    let mut acc = BigUint::from(1u32);
    for (p, k) in modulus.factors() {
        let mut bits = 0u64;
        for i in 1..=k {
            bits += (p as u64).pow(i * arity);
        }
        acc *= BigUint::from(p).pow(bits as u32);
    }
    acc
}

/// Number of all `arity`-ary operations on `Z_n`.
pub fn total_count(modulus: Modulus, arity: u32) -> BigUint {
    BigUint::from(modulus.n()).pow((modulus.n() as u64).pow(arity) as u32)
}

pub fn closure_part(spec: &CloneSpec, arity: u32, opts: &ClosureOptions) -> Result<ClosurePart> {
    Ok(Engine::new(spec, arity, opts, None)?.run().part)
}

/// Whether `f` lies in the generated clone. Stops as soon as `f` appears.
pub fn member(spec: &CloneSpec, f: &OpTable, opts: &ClosureOptions) -> Result<bool> {
    if f.modulus() != spec.modulus() {
        return Err(Error::ModulusMismatch { expected: spec.modulus().n(), found: f.modulus().n() });
    }
    if let Some(v) = trivial_member(spec, f) {
        return Ok(v);
    }
    let outcome = Engine::new(spec, f.arity(), opts, Some(f.values()))?.run();
    if outcome.found {
        Ok(true)
    } else if outcome.part.complete {
        Ok(false)
    } else {
        Err(incomplete(spec, f.arity()))
    }
}

fn incomplete(spec: &CloneSpec, arity: u32) -> Error {
    Error::Incomplete(alloc::format!("{} at arity {arity}", spec.name))
}

fn trivial_member(spec: &CloneSpec, f: &OpTable) -> Option<bool> {
    if spec.generators().iter().any(|g| &g.table == f) {
        return Some(true);
    }
    if (1..=f.arity()).any(|i| OpTable::projection(f.modulus(), f.arity(), i).ok().as_ref() == Some(f)) {
        return Some(true);
    }
    if spec.include_all_constants() && f.constant_value().is_some() {
        return Some(true);
    }
    None
}

/// Whether the clone of `big` contains the clone of `small`: every generator
/// of `small` (and its constants, when flagged) is a member of `big`.
pub fn includes(big: &CloneSpec, small: &CloneSpec, opts: &ClosureOptions) -> Result<bool> {
    if big.modulus() != small.modulus() {
        return Err(Error::ModulusMismatch { expected: big.modulus().n(), found: small.modulus().n() });
    }
    for g in small_side_generators(small) {
        if !member(big, &g, opts)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The operations whose membership certifies inclusion of `small`.
fn small_side_generators(small: &CloneSpec) -> Vec<OpTable> {
    let mut out: Vec<OpTable> = small.generators().iter().map(|g| g.table.clone()).collect();
    if small.include_all_constants() {
        for c in 0..small.modulus().n() {
            out.push(OpTable::constant(small.modulus(), 1, c).expect("unary constant"));
        }
    }
    out
}

/// Memoised closure parts keyed by presentation and arity.
#[derive(Debug, Default)]
pub struct ClosureCache {
    parts: BTreeMap<(Vec<u8>, u32), ClosurePart>,
    pub opts: ClosureOptions,
}

impl ClosureCache {
    pub fn new(opts: ClosureOptions) -> Self {
        ClosureCache { parts: BTreeMap::new(), opts }
    }

    pub fn part(&mut self, spec: &CloneSpec, arity: u32) -> Result<&ClosurePart> {
        let key = (spec.fingerprint(), arity);
        if !self.parts.get(&key).is_some_and(|p| p.complete) {
            let part = closure_part(spec, arity, &self.opts)?;
            self.parts.insert(key.clone(), part);
        }
        Ok(&self.parts[&key])
    }

    /// Membership through a cached complete part when one exists,
    /// otherwise a targeted early-exit run whose part is kept if it
    /// completes.
    pub fn member(&mut self, spec: &CloneSpec, f: &OpTable) -> Result<bool> {
        if f.modulus() != spec.modulus() {
            return Err(Error::ModulusMismatch { expected: spec.modulus().n(), found: f.modulus().n() });
        }
        if let Some(v) = trivial_member(spec, f) {
            return Ok(v);
        }
        let key = (spec.fingerprint(), f.arity());
        if let Some(part) = self.parts.get(&key) {
            if part.contains(f) {
                return Ok(true);
            }
            if part.complete {
                return Ok(false);
            }
        }
        let outcome = Engine::new(spec, f.arity(), &self.opts, Some(f.values()))?.run();
        if outcome.found {
            return Ok(true);
        }
        if !outcome.part.complete {
            return Err(incomplete(spec, f.arity()));
        }
        self.parts.insert(key, outcome.part);
        Ok(false)
    }

    /// A complete cached part, if one has been computed.
    pub fn cached(&self, spec: &CloneSpec, arity: u32) -> Option<&ClosurePart> {
        self.parts.get(&(spec.fingerprint(), arity)).filter(|p| p.complete)
    }

    pub fn includes(&mut self, big: &CloneSpec, small: &CloneSpec) -> Result<bool> {
        for g in small_side_generators(small) {
            if !self.member(big, &g)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

/// All compatible m-ary operations, by direct enumeration.
pub fn comp_part(modulus: Modulus, arity: u32, budget: usize) -> Result<ClosurePart> {
    let len = table_len(modulus, arity)?;
    let count = compatible_count(modulus, arity);
    if count > BigUint::from(budget) {
        return Err(Error::BudgetExceeded { needed: count.to_string(), budget });
    }
    let n = modulus.n();
    let factors = modulus.factors();
    let components: Vec<(u32, Vec<Vec<u8>>)> = factors
        .iter()
        .map(|&(p, k)| {
            let q = p.pow(k);
            (q, enumerate_prime_power_compatible(p, k, arity))
        })
        .collect();

    let mut set = TableSet::new(len);
    if components.len() == 1 {
        for t in &components[0].1 {
            set.insert(t);
        }
    } else {
        // Lift through CRT idempotents e_j = 1 mod q_j, 0 mod q_i (i != j).
        let idempotents: Vec<u64> = components
            .iter()
            .map(|(q, _)| (0..n as u64).find(|&e| e % *q as u64 == 1 && components.iter().all(|(r, _)| r == q || e % *r as u64 == 0)).unwrap())
            .collect();
        let comp_index: Vec<Vec<usize>> = components
            .iter()
            .map(|(q, _)| {
                (0..len)
                    .map(|x| {
                        let digits = crate::finop::index_digits(x, n, arity);
                        digits.iter().fold(0usize, |acc, &d| acc * *q as usize + (d % q) as usize)
                    })
                    .collect()
            })
            .collect();
        let mut choice = vec![0usize; components.len()];
        let mut buf = vec![0u8; len];
        'outer: loop {
            for (x, slot) in buf.iter_mut().enumerate() {
                let mut v = 0u64;
                for (j, (_, tables)) in components.iter().enumerate() {
                    v += idempotents[j] * tables[choice[j]][comp_index[j][x]] as u64;
                }
                *slot = (v % n as u64) as u8;
            }
            set.insert(&buf);
            for j in (0..components.len()).rev() {
                choice[j] += 1;
                if choice[j] < components[j].1.len() {
                    continue 'outer;
                }
                choice[j] = 0;
            }
            break;
        }
    }
    Ok(ClosurePart {
        spec_name: "comp".to_string(),
        generator_names: Vec::new(),
        modulus,
        arity,
        members: MemberSet::Explicit(set),
        rounds: 0,
        complete: true,
        saturated: true,
    })
}

/// `f(x) = Σ_i p^(i-1) d_i(x mod p^i)` over all digit functions `d_i`.
fn enumerate_prime_power_compatible(p: u32, k: u32, arity: u32) -> Vec<Vec<u8>> {
    let q = p.pow(k);
    let len = (q as usize).pow(arity);
    // For each level i, the class (mod p^i) index of every input tuple.
    let mut class_of: Vec<Vec<usize>> = Vec::new();
    let mut level_sizes = Vec::new();
    for i in 1..=k {
        let pi = p.pow(i);
        level_sizes.push((pi as usize).pow(arity));
        class_of.push(
            (0..len)
                .map(|x| {
                    let digits = crate::finop::index_digits(x, q, arity);
                    digits.iter().fold(0usize, |acc, &d| acc * pi as usize + (d % pi) as usize)
                })
                .collect(),
        );
    }
    let positions: usize = level_sizes.iter().sum();
    let mut digits = vec![0u32; positions];
    let mut out = Vec::new();
    loop {
        let mut table = vec![0u8; len];
        for (x, slot) in table.iter_mut().enumerate() {
            let mut v = 0u32;
            let mut offset = 0usize;
            let mut weight = 1u32;
            for i in 0..k as usize {
                v += weight * digits[offset + class_of[i][x]];
                offset += level_sizes[i];
                weight *= p;
            }
            *slot = v as u8;
        }
        out.push(table);
        let mut pos = positions;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < p {
                break;
            }
            digits[pos] = 0;
        }
    }
}

// ---------------------------------------------------------------------------
// engine

struct Prepared {
    table: Vec<u8>,
    arity: usize,
    constant: Option<u8>,
    profile: Option<DiffProfile>,
}

/// Which products of unit difference operators leave the generator nonzero.
/// The set is closed downwards.
struct DiffProfile {
    caps: Vec<u32>,
    allowed: Vec<bool>,
    max_total: u32,
}

impl DiffProfile {
    fn compute(table: &[u8], n: u32, arity: usize) -> Option<DiffProfile> {
        let len = table.len();
        let stride: Vec<usize> = (0..arity).map(|i| (n as usize).pow((arity - 1 - i) as u32)).collect();
        let diff = |t: &[u8], slot: usize| -> Vec<u8> {
            let s = stride[slot];
            let nn = n as usize;
            (0..len)
                .map(|x| {
                    let digit = (x / s) % nn;
                    let y = if digit + 1 == nn { x - digit * s } else { x + s };
                    ((t[y] as u32 + n - t[x] as u32) % n) as u8
                })
                .collect()
        };
        let is_zero = |t: &[u8]| t.iter().all(|&v| v == 0);
        let mut caps = Vec::with_capacity(arity);
        for slot in 0..arity {
            let mut t = table.to_vec();
            let mut order = 0u32;
            while !is_zero(&t) {
                if order > MAX_DIFF_ORDER {
                    return None;
                }
                t = diff(&t, slot);
                order += 1;
            }
            caps.push(order.saturating_sub(1));
        }
        let cells = caps.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c as usize + 1))?;
        if cells > MAX_PROFILE_CELLS {
            return None;
        }
        let mut allowed = vec![false; cells];
        let mut tables: Vec<Option<Vec<u8>>> = vec![None; cells];
        let mut max_total = 0u32;
        let mut counts = vec![0u32; arity];
        for cell in 0..cells {
            // cells are mixed radix, slot 0 most significant
            let mut rem = cell;
            for slot in (0..arity).rev() {
                counts[slot] = (rem % (caps[slot] as usize + 1)) as u32;
                rem /= caps[slot] as usize + 1;
            }
            let t = match counts.iter().rposition(|&c| c > 0) {
                None => table.to_vec(),
                Some(slot) => {
                    let below = cell - cell_stride(&caps, slot);
                    match &tables[below] {
                        Some(prev) => diff(prev, slot),
                        None => continue,
                    }
                }
            };
            if !is_zero(&t) {
                allowed[cell] = true;
                max_total = max_total.max(counts.iter().sum());
                tables[cell] = Some(t);
            }
        }
        Some(DiffProfile { caps, allowed, max_total })
    }

    #[inline]
    fn allows(&self, counts: &[u32]) -> bool {
        let mut cell = 0usize;
        for (c, cap) in counts.iter().zip(&self.caps) {
            if c > cap {
                return false;
            }
            cell = cell * (*cap as usize + 1) + *c as usize;
        }
        self.allowed[cell]
    }
}

fn cell_stride(caps: &[u32], slot: usize) -> usize {
    caps[slot + 1..].iter().map(|&c| c as usize + 1).product()
}

struct Outcome {
    part: ClosurePart,
    found: bool,
}

enum Stop {
    Found,
    Saturated,
    OverBudget,
}

struct Engine<'a> {
    spec: &'a CloneSpec,
    n: u32,
    arity: u32,
    len: usize,
    opts: &'a ClosureOptions,
    target: Option<&'a [u8]>,
    bound: Option<BigUint>,
    gens: Vec<Prepared>,
    has_add: bool,
    work: u64,
}

impl<'a> Engine<'a> {
    fn new(spec: &'a CloneSpec, arity: u32, opts: &'a ClosureOptions, target: Option<&'a [u8]>) -> Result<Self> {
        let modulus = spec.modulus();
        let len = table_len(modulus, arity)?;
        if let Some(t) = target {
            if t.len() != len {
                return Err(Error::LengthMismatch { expected: len, found: t.len() });
            }
        }
        let n = modulus.n();
        let add = OpTable::ring_add(modulus);
        let has_add = spec.generators().iter().any(|g| g.table == add);

        // Canonical order, whatever the order of the generators.
        let mut tables: Vec<&OpTable> = spec.generators().iter().map(|g| &g.table).collect();
        tables.sort_by_key(|a| (a.arity(), a.packed_key()));
        tables.dedup();
        let mut gens: Vec<Prepared> = tables
            .into_iter()
            .filter(|t| !(has_add && **t == add))
            .map(|t| Prepared {
                table: t.values().to_vec(),
                arity: t.arity() as usize,
                constant: t.constant_value().map(|c| c as u8),
                profile: if has_add { DiffProfile::compute(t.values(), n, t.arity() as usize) } else { None },
            })
            .collect();
        let module_ok = has_add && gens.iter().all(|g| g.profile.is_some());
        if module_ok {
            gens.sort_by_key(|g| g.profile.as_ref().map(|p| p.max_total).unwrap_or(0));
        }
        let bound = opts.saturate.then(|| {
            if spec.all_compatible() {
                compatible_count(modulus, arity)
            } else {
                total_count(modulus, arity)
            }
        });
        let mut engine =
            Engine { spec, n, arity, len, opts, target, bound, gens, has_add: module_ok, work: 0 };
        if has_add && !module_ok {
            // Addition goes back in as an ordinary generator for the plain path.
            engine.gens.insert(
                0,
                Prepared { table: add.values().to_vec(), arity: 2, constant: None, profile: None },
            );
        }
        Ok(engine)
    }

    fn seeds(&self) -> Vec<Vec<u8>> {
        let modulus = self.spec.modulus();
        let mut out: Vec<Vec<u8>> =
            (1..=self.arity).map(|i| OpTable::projection(modulus, self.arity, i).unwrap().into_values()).collect();
        if self.spec.include_all_constants() {
            for c in 0..self.n {
                out.push(vec![c as u8; self.len]);
            }
        }
        out
    }

    fn part(&self, members: MemberSet, rounds: u32, complete: bool, saturated: bool) -> ClosurePart {
        ClosurePart {
            spec_name: self.spec.name.clone(),
            generator_names: self.spec.generator_names(),
            modulus: self.spec.modulus(),
            arity: self.arity,
            members,
            rounds,
            complete,
            saturated,
        }
    }

    fn run(self) -> Outcome {
        if self.has_add {
            self.run_module()
        } else {
            self.run_plain()
        }
    }

    fn saturated_at(&self, count: usize) -> bool {
        self.bound.as_ref().is_some_and(|b| BigUint::from(count) >= *b)
    }

    // -- plain semi-naive ---------------------------------------------------

    fn run_plain(mut self) -> Outcome {
        let mut set = TableSet::new(self.len);
        let mut rounds = 0u32;
        let stop = 'run: {
            for s in self.seeds() {
                if let Some(stop) = self.plain_insert(&mut set, &s) {
                    break 'run Some(stop);
                }
            }
            let mut start = 0usize;
            loop {
                let end = set.len();
                if start == end {
                    break 'run None;
                }
                rounds += 1;
                for gi in 0..self.gens.len() {
                    if let Some(c) = self.gens[gi].constant {
                        if rounds == 1 {
                            if let Some(stop) = self.plain_insert(&mut set, &vec![c; self.len]) {
                                break 'run Some(stop);
                            }
                        }
                        continue;
                    }
                    if let Some(stop) = self.plain_pass(&mut set, gi, start, end) {
                        break 'run Some(stop);
                    }
                }
                start = end;
            }
        };
        let (complete, saturated, found) = match stop {
            None => (true, false, false),
            Some(Stop::Saturated) => (true, true, false),
            Some(Stop::Found) => (false, false, true),
            Some(Stop::OverBudget) => (false, false, false),
        };
        let part = self.part(MemberSet::Explicit(set), rounds, complete, saturated);
        Outcome { part, found }
    }

    fn plain_insert(&self, set: &mut TableSet, v: &[u8]) -> Option<Stop> {
        if !set.insert(v) {
            return None;
        }
        if self.target == Some(v) {
            return Some(Stop::Found);
        }
        if self.saturated_at(set.len()) {
            return Some(Stop::Saturated);
        }
        if set.len() > self.opts.budget {
            return Some(Stop::OverBudget);
        }
        None
    }

    /// Applies generator `gi` to all tuples over `[0, end)` that contain an
    /// index in `[start, end)`.
    fn plain_pass(&mut self, set: &mut TableSet, gi: usize, start: usize, end: usize) -> Option<Stop> {
        let l = self.gens[gi].arity;
        let mut batch: Vec<u32> = Vec::with_capacity(BATCH * l);
        let mut tuple = vec![0u32; l];
        for first_new in 0..l {
            let ranges: Vec<(usize, usize)> = (0..l)
                .map(|pos| match pos.cmp(&first_new) {
                    core::cmp::Ordering::Less => (0, start),
                    core::cmp::Ordering::Equal => (start, end),
                    core::cmp::Ordering::Greater => (0, end),
                })
                .collect();
            if ranges.iter().any(|(lo, hi)| lo >= hi) {
                continue;
            }
            for (slot, (lo, _)) in tuple.iter_mut().zip(&ranges) {
                *slot = *lo as u32;
            }
            'tuples: loop {
                batch.extend_from_slice(&tuple);
                if batch.len() == BATCH * l {
                    if let Some(stop) = self.plain_flush(set, gi, &batch) {
                        return Some(stop);
                    }
                    batch.clear();
                }
                for pos in (0..l).rev() {
                    tuple[pos] += 1;
                    if (tuple[pos] as usize) < ranges[pos].1 {
                        continue 'tuples;
                    }
                    tuple[pos] = ranges[pos].0 as u32;
                }
                break;
            }
        }
        if !batch.is_empty() {
            return self.plain_flush(set, gi, &batch);
        }
        None
    }

    fn plain_flush(&mut self, set: &mut TableSet, gi: usize, batch: &[u32]) -> Option<Stop> {
        let g = &self.gens[gi];
        let l = g.arity;
        let n = self.n as usize;
        let len = self.len;
        self.work += (batch.len() / l * len) as u64;
        let snapshot: &TableSet = set;
        let results: Vec<Option<Vec<u8>>> = par_map_chunks(batch, l, |tuple| {
            let mut out = vec![0u8; len];
            for (x, slot) in out.iter_mut().enumerate() {
                let mut idx = 0usize;
                for &t in tuple {
                    idx = idx * n + snapshot.get(t as usize)[x] as usize;
                }
                *slot = g.table[idx];
            }
            (!snapshot.contains(&out)).then_some(out)
        });
        for v in results.into_iter().flatten() {
            if let Some(stop) = self.plain_insert(set, &v) {
                return Some(stop);
            }
        }
        if self.work > self.opts.work_limit {
            return Some(Stop::OverBudget);
        }
        None
    }

    // -- additive subgroup --------------------------------------------------

    fn run_module(mut self) -> Outcome {
        let mut state = ModuleState { sub: Submodule::new(self.n, self.len), spanning: Vec::new() };
        let mut done_upto = vec![0usize; self.gens.len()];
        let mut started = vec![false; self.gens.len()];
        let mut rounds = 0u32;
        let stop = 'run: {
            for s in self.seeds() {
                if let Some(stop) = self.module_insert(&mut state, s) {
                    break 'run Some(stop);
                }
            }
            loop {
                let Some(gi) = (0..self.gens.len()).find(|&i| !started[i] || done_upto[i] < state.spanning.len())
                else {
                    break 'run None;
                };
                rounds += 1;
                let cur_end = state.spanning.len();
                match self.module_pass(&mut state, gi, done_upto[gi], cur_end, !started[gi]) {
                    PassResult::Stopped(stop) => break 'run Some(stop),
                    PassResult::Done => {
                        started[gi] = true;
                        done_upto[gi] = cur_end;
                    }
                    PassResult::Yielded => {}
                }
            }
        };
        let (complete, saturated, found) = match stop {
            None => (true, false, false),
            Some(Stop::Saturated) => (true, true, false),
            Some(Stop::Found) => (false, false, true),
            Some(Stop::OverBudget) => (false, false, false),
        };
        let mut sub = state.sub;
        sub.canonicalize();
        let part = self.part(MemberSet::Module(sub), rounds, complete, saturated);
        Outcome { part, found }
    }

    fn module_insert(&self, state: &mut ModuleState, v: Vec<u8>) -> Option<Stop> {
        if !state.sub.insert(&v) {
            return None;
        }
        state.spanning.push(v);
        if let Some(t) = self.target {
            if state.sub.contains(t) {
                return Some(Stop::Found);
            }
        }
        if let Some(b) = &self.bound {
            if state.sub.count() >= *b {
                return Some(Stop::Saturated);
            }
        }
        None
    }

    /// One pass of generator `gi`: every multiset of directions drawn from
    /// spanning vectors `[0, end)` that uses at least one vector from
    /// `[new_from, end)`, in increasing size.
    fn module_pass(
        &mut self,
        state: &mut ModuleState,
        gi: usize,
        new_from: usize,
        end: usize,
        fresh: bool,
    ) -> PassResult {
        let l = self.gens[gi].arity;
        let before = state.spanning.len();
        if fresh {
            let g = &self.gens[gi];
            let at_zero = g.constant.unwrap_or(g.table[0]);
            if let Some(stop) = self.module_insert(state, vec![at_zero; self.len]) {
                return PassResult::Stopped(stop);
            }
        }
        let Some(max_total) = self.gens[gi].profile.as_ref().map(|p| p.max_total) else {
            return PassResult::Done;
        };
        let ids_end = (end * l) as u32;
        let new_lo = (new_from * l) as u32;
        let profile = self.gens[gi].profile.take().unwrap();
        let result = self.module_levels(state, gi, &profile, max_total as usize, ids_end, new_lo, before);
        self.gens[gi].profile = Some(profile);
        result
    }

    #[allow(clippy::too_many_arguments)]
    fn module_levels(
        &mut self,
        state: &mut ModuleState,
        gi: usize,
        profile: &DiffProfile,
        max_total: usize,
        ids_end: u32,
        new_lo: u32,
        before: usize,
    ) -> PassResult {
        let l = self.gens[gi].arity;
        for size in 1..=max_total {
            let mut batch: Vec<u32> = Vec::with_capacity(BATCH * size);
            let mut counts = vec![0u32; l];
            let mut seq = Vec::with_capacity(size);
            // The walk resumes after the last emitted multiset of each batch.
            let mut resume: Option<Vec<u32>> = None;
            loop {
                let flow = {
                    let mut emit = |s: &[u32]| -> ControlFlow<()> {
                        batch.extend_from_slice(s);
                        if batch.len() == BATCH * size {
                            ControlFlow::Break(())
                        } else {
                            ControlFlow::Continue(())
                        }
                    };
                    walk_multisets(profile, l, size, ids_end, new_lo, resume.as_deref(), &mut counts, &mut seq, &mut emit)
                };
                let full = flow.is_break();
                if !batch.is_empty() {
                    if let Some(stop) = self.module_flush(state, gi, &batch, size) {
                        return PassResult::Stopped(stop);
                    }
                    resume = Some(batch[batch.len() - size..].to_vec());
                    batch.clear();
                }
                if !full {
                    break;
                }
                counts.iter_mut().for_each(|c| *c = 0);
                seq.clear();
            }
            if state.spanning.len() > before && gi > 0 {
                return PassResult::Yielded;
            }
        }
        PassResult::Done
    }

    fn module_flush(&mut self, state: &mut ModuleState, gi: usize, batch: &[u32], size: usize) -> Option<Stop> {
        let g = &self.gens[gi];
        let l = g.arity;
        let n = self.n;
        let len = self.len;
        self.work += (batch.len() / size) as u64 * ((1u64 << size) * len as u64);
        let snapshot = &state.sub;
        let spanning = &state.spanning;
        let results: Vec<Option<Vec<u8>>> = par_map_chunks(batch, size, |seq| {
            let v = iterated_difference(&g.table, l, n, len, spanning, seq);
            (v.iter().any(|&e| e != 0) && !snapshot.contains(&v)).then_some(v)
        });
        for v in results.into_iter().flatten() {
            if let Some(stop) = self.module_insert(state, v) {
                return Some(stop);
            }
        }
        if self.work > self.opts.work_limit {
            return Some(Stop::OverBudget);
        }
        None
    }
}

struct ModuleState {
    sub: Submodule,
    spanning: Vec<Vec<u8>>,
}

enum PassResult {
    Done,
    /// Grew while cheaper generators exist; they run first.
    Yielded,
    Stopped(Stop),
}

/// Enumerates non-decreasing id sequences of length `size` over
/// `[0, ids_end)` whose last id is at least `new_lo`, skipping any whose
/// per-slot counts the profile rules out. With `resume`, starts strictly
/// after that sequence.
#[allow(clippy::too_many_arguments)]
fn walk_multisets(
    profile: &DiffProfile,
    l: usize,
    size: usize,
    ids_end: u32,
    new_lo: u32,
    resume: Option<&[u32]>,
    counts: &mut [u32],
    seq: &mut Vec<u32>,
    emit: &mut dyn FnMut(&[u32]) -> ControlFlow<()>,
) -> ControlFlow<()> {
    fn rec(
        profile: &DiffProfile,
        l: usize,
        size: usize,
        ids_end: u32,
        new_lo: u32,
        resume: Option<&[u32]>,
        tight: bool,
        counts: &mut [u32],
        seq: &mut Vec<u32>,
        emit: &mut dyn FnMut(&[u32]) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        let pos = seq.len();
        let min_id = seq.last().copied().unwrap_or(0);
        let last = pos + 1 == size;
        let mut lo = if last { min_id.max(new_lo) } else { min_id };
        if tight {
            let r = resume.unwrap()[pos];
            // strictly after `resume` at the final position
            lo = lo.max(if last { r + 1 } else { r });
        }
        for id in lo..ids_end {
            let slot = id as usize % l;
            counts[slot] += 1;
            if profile.allows(counts) {
                seq.push(id);
                let flow = if last {
                    emit(seq)
                } else {
                    let still_tight = tight && id == resume.unwrap()[pos];
                    rec(profile, l, size, ids_end, new_lo, resume, still_tight, counts, seq, emit)
                };
                seq.pop();
                if flow.is_break() {
                    counts[slot] -= 1;
                    return flow;
                }
            }
            counts[slot] -= 1;
        }
        ControlFlow::Continue(())
    }
    rec(profile, l, size, ids_end, new_lo, resume, resume.is_some(), counts, seq, emit)
}

/// `Δ_{v_1} ... Δ_{v_r} g` at the zero tuple, where direction id `d` puts
/// spanning vector `d / l` into argument slot `d % l`.
fn iterated_difference(g: &[u8], l: usize, n: u32, len: usize, spanning: &[Vec<u8>], seq: &[u32]) -> Vec<u8> {
    let r = seq.len();
    let nn = n as usize;
    let mut args = vec![vec![0u8; len]; l];
    let mut acc = vec![0u32; len];
    let mut in_set = vec![false; r];
    let mut popcount = 0usize;
    for step in 0..(1usize << r) {
        if step > 0 {
            // Gray code: toggle the lowest set bit of `step`.
            let bit = step.trailing_zeros() as usize;
            let d = seq[bit] as usize;
            let (vec_idx, slot) = (d / l, d % l);
            let v = &spanning[vec_idx];
            let a = &mut args[slot];
            if in_set[bit] {
                for (e, &s) in a.iter_mut().zip(v) {
                    *e = ((*e as u32 + n - s as u32) % n) as u8;
                }
                popcount -= 1;
            } else {
                for (e, &s) in a.iter_mut().zip(v) {
                    *e = ((*e as u32 + s as u32) % n) as u8;
                }
                popcount += 1;
            }
            in_set[bit] = !in_set[bit];
        }
        let positive = (r - popcount).is_multiple_of(2);
        for (x, slot) in acc.iter_mut().enumerate() {
            let mut idx = 0usize;
            for a in &args {
                idx = idx * nn + a[x] as usize;
            }
            let val = g[idx] as u32;
            *slot = if positive { (*slot + val) % n } else { (*slot + n - val) % n };
        }
    }
    acc.into_iter().map(|v| v as u8).collect()
}

#[cfg(feature = "parallel")]
fn par_map_chunks<R: Send>(flat: &[u32], width: usize, f: impl Fn(&[u32]) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    flat.par_chunks(width).map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map_chunks<R>(flat: &[u32], width: usize, f: impl Fn(&[u32]) -> R) -> Vec<R> {
    flat.chunks(width).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(n: u32) -> Modulus {
        Modulus::new(n).unwrap()
    }

    fn pol(n: u32) -> CloneSpec {
        let m = z(n);
        CloneSpec::new(m, "pol")
            .with_constants(true)
            .with_generator("add", OpTable::ring_add(m))
            .unwrap()
            .with_generator("mul", OpTable::ring_mul(m))
            .unwrap()
    }

    fn table(n: u32, arity: u32, f: impl FnMut(&[u32]) -> i64) -> OpTable {
        OpTable::from_fn(z(n), arity, f).unwrap()
    }

    #[test]
    fn affine_unary_on_z2() {
        let m = z(2);
        let spec = CloneSpec::new(m, "aff").with_constants(true).with_generator("add", OpTable::ring_add(m)).unwrap();
        let part = closure_part(&spec, 1, &ClosureOptions::default()).unwrap();
        assert!(part.complete);
        // All four unary maps on Z_2 are affine: 0, 1, x, x+1.
        assert_eq!(part.count(), BigUint::from(4u32));
    }

    #[test]
    fn no_generators_gives_projections() {
        let spec = CloneSpec::new(z(4), "proj");
        let part = closure_part(&spec, 2, &ClosureOptions::default()).unwrap();
        assert!(part.complete);
        assert_eq!(part.count(), BigUint::from(2u32));
        let with_consts = CloneSpec::new(z(4), "consts").with_constants(true);
        let part = closure_part(&with_consts, 2, &ClosureOptions::default()).unwrap();
        assert_eq!(part.count(), BigUint::from(6u32));
    }

    /// Kempner-style oracle: distinct tables of c0 + c1 x + c2 x^2 + c3 x^3.
    #[test]
    fn pol_unary_z4_matches_polynomial_enumeration() {
        let mut tables = hashbrown::HashSet::new();
        for code in 0..256u32 {
            let c: Vec<u32> = (0..4).map(|i| (code >> (2 * i)) & 3).collect();
            let t: Vec<u32> = (0..4u32).map(|x| (c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x) % 4).collect();
            tables.insert(t);
        }
        let part = closure_part(&pol(4), 1, &ClosureOptions::default()).unwrap();
        assert!(part.complete);
        assert_eq!(part.count(), BigUint::from(tables.len()));
        assert_eq!(tables.len(), 64);
    }

    #[test]
    fn member_examples() {
        let m = z(4);
        let opts = ClosureOptions::default();
        assert!(member(&pol(4), &OpTable::ring_mul(m), &opts).unwrap());
        let aff = CloneSpec::new(m, "aff").with_constants(true).with_generator("add", OpTable::ring_add(m)).unwrap();
        let two_xy = table(4, 2, |x| 2 * x[0] as i64 * x[1] as i64);
        assert!(!member(&aff, &two_xy, &opts).unwrap());
        let e2 = aff.clone().with_generator("2xy", two_xy.clone()).unwrap();
        assert!(!member(&e2, &OpTable::ring_mul(m), &opts).unwrap());
        assert!(member(&pol(4), &two_xy, &opts).unwrap());
        assert!(includes(&pol(4), &e2, &opts).unwrap());
        assert!(!includes(&e2, &pol(4), &opts).unwrap());
        assert!(includes(&e2, &e2, &opts).unwrap());
        assert!(matches!(member(&pol(4), &OpTable::ring_mul(z(3)), &opts), Err(Error::ModulusMismatch { .. })));
    }

    #[test]
    fn budget_overrun_is_incomplete() {
        let m = z(3);
        let spec = CloneSpec::new(m, "mul").with_generator("mul", OpTable::ring_mul(m)).unwrap()
            .with_generator("sub", table(3, 2, |x| x[0] as i64 - x[1] as i64)).unwrap();
        let opts = ClosureOptions { budget: 10, ..Default::default() };
        let part = closure_part(&spec, 2, &opts).unwrap();
        assert!(!part.complete);
        let full = closure_part(&spec, 2, &ClosureOptions::default()).unwrap();
        assert!(full.complete);
        // sound under-approximation
        let members = part.sorted_members(usize::MAX).unwrap();
        assert!(members.iter().all(|t| full.contains(t)));
    }

    #[test]
    fn comp_part_counts() {
        assert_eq!(comp_part(z(2), 1, 100).unwrap().count(), BigUint::from(4u32));
        assert_eq!(comp_part(z(4), 1, 100).unwrap().count(), BigUint::from(64u32));
        assert_eq!(compatible_count(z(4), 2), BigUint::from(1u32 << 20));
        assert!(matches!(comp_part(z(8), 2, DEFAULT_BUDGET), Err(Error::BudgetExceeded { .. })));
        // Z_12 = Z_4 x Z_3: unary compatible count is 64 * 27.
        let c12 = comp_part(z(12), 1, 10_000).unwrap();
        assert_eq!(c12.count(), BigUint::from(64u32 * 27));
        for t in c12.sorted_members(usize::MAX).unwrap() {
            assert!(t.is_compatible());
        }
    }

    /// Brute-force oracle for the unary compatible count on small rings.
    #[test]
    fn comp_part_unary_matches_brute_force() {
        for n in [4u32, 6, 8] {
            let m = z(n);
            let mut count = 0u64;
            let total = (n as u64).pow(n);
            for code in 0..total {
                let mut c = code;
                let values: Vec<u8> = (0..n)
                    .map(|_| {
                        let v = (c % n as u64) as u8;
                        c /= n as u64;
                        v
                    })
                    .collect();
                if OpTable::new(m, 1, values).unwrap().is_compatible() {
                    count += 1;
                }
            }
            assert_eq!(comp_part(m, 1, 1 << 20).unwrap().count(), BigUint::from(count), "n={n}");
        }
    }

    #[test]
    fn module_and_plain_agree_on_small_specs() {
        let mut seed = 0x1234_5678u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            seed >> 33
        };
        for n in [2u32, 3, 4] {
            let m = z(n);
            for _ in 0..12 {
                let arity_g = 1 + (next() % 2) as u32;
                let len = table_len(m, arity_g).unwrap();
                let g = OpTable::new(m, arity_g, (0..len).map(|_| (next() % n as u64) as u8).collect()).unwrap();
                let consts = next() % 2 == 0;
                let with_add = CloneSpec::new(m, "x")
                    .with_constants(consts)
                    .with_generator("add", OpTable::ring_add(m))
                    .unwrap()
                    .with_generator("g", g.clone())
                    .unwrap();
                // Same clone through subtraction, which the module path does not recognise.
                let plain_spec = CloneSpec::new(m, "y")
                    .with_constants(consts)
                    .with_generator("g", g)
                    .unwrap()
                    .with_generator("sub", table(n, 2, |x| x[0] as i64 - x[1] as i64))
                    .unwrap();
                for arity in 1..=2u32 {
                    let opts = ClosureOptions::default();
                    let a = closure_part(&with_add, arity, &opts).unwrap();
                    if a.count() > BigUint::from(1500u32) {
                        continue;
                    }
                    let b = closure_part(&plain_spec, arity, &opts).unwrap();
                    assert!(matches!(a.members, MemberSet::Module(_)));
                    // on Z_2 subtraction is addition
                    assert_eq!(matches!(b.members, MemberSet::Explicit(_)), n > 2);
                    assert!(a.complete && b.complete);
                    assert_eq!(a.count(), b.count(), "n={n} arity={arity}");
                    let mb = b.sorted_members(usize::MAX).unwrap();
                    assert!(mb.iter().all(|t| a.contains(t)));
                }
            }
        }
    }

    #[test]
    fn diff_profile_of_mul_is_bilinear() {
        let mul = OpTable::ring_mul(z(4));
        let p = DiffProfile::compute(mul.values(), 4, 2).unwrap();
        assert_eq!(p.caps, vec![1, 1]);
        assert!(p.allows(&[1, 1]));
        assert!(p.allows(&[1, 0]));
        assert_eq!(p.max_total, 2);
        let sq = table(4, 1, |x| x[0] as i64 * x[0] as i64);
        let p = DiffProfile::compute(sq.values(), 4, 1).unwrap();
        assert_eq!(p.max_total, 2);
    }

    #[test]
    fn infinite_difference_order_falls_back_to_plain() {
        // On Z_6 the map x -> 3 [x = 0 mod 3] mixes the 3-part into the 2-part.
        let m = z(6);
        let g = table(6, 1, |x| if x[0] % 3 == 0 { 3 } else { 0 });
        assert!(DiffProfile::compute(g.values(), 6, 1).is_none());
        let spec = CloneSpec::new(m, "s").with_generator("add", OpTable::ring_add(m)).unwrap().with_generator("g", g).unwrap();
        let part = closure_part(&spec, 1, &ClosureOptions::default()).unwrap();
        assert!(part.complete);
        assert!(matches!(part.members, MemberSet::Explicit(_)));
    }

    #[test]
    fn multiset_walk_resumes_exactly() {
        let mul = OpTable::ring_mul(z(4));
        let profile = DiffProfile::compute(mul.values(), 4, 2).unwrap();
        let mut all = Vec::new();
        let mut counts = vec![0u32; 2];
        let mut seq = Vec::new();
        let _ = walk_multisets(&profile, 2, 2, 10, 4, None, &mut counts, &mut seq, &mut |s| {
            all.push(s.to_vec());
            ControlFlow::Continue(())
        });
        // Resume after each prefix and compare with the uninterrupted walk.
        for cut in 0..all.len() {
            let mut rest = Vec::new();
            let _ = walk_multisets(&profile, 2, 2, 10, 4, Some(&all[cut]), &mut counts, &mut seq, &mut |s| {
                rest.push(s.to_vec());
                ControlFlow::Continue(())
            });
            assert_eq!(rest, all[cut + 1..].to_vec());
        }
        // Only cross-slot pairs survive for a bilinear generator.
        assert!(all.iter().all(|s| s[0] % 2 != s[1] % 2));
        assert!(all.iter().all(|s| s[1] >= 4));
    }
}
