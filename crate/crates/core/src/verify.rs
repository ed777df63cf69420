//! Seeded verification harnesses. Each returns a report of named checks;
//! a report passes iff every check does.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::catalog::{self, CloneName, LatticeReport, Relation};
use crate::closure::{closure_part, comp_part, compatible_count, CloneSpec, ClosureCache, ClosureOptions};
use crate::error::{Error, Result};
use crate::finop::{table_len, OpTable};
use crate::reduction::{combine_crt, split_coprime, ReductionContext};
use crate::zmod::{crt_pair, units_product, Modulus};

pub const DEFAULT_SAMPLES: usize = 100;

/// Parameter ranges each harness accepts.
pub const FEASIBILITY: &str = "\
harness  parameters
G        p prime, k >= 2, (p^k)^2 <= 2^22; arities 1 and 2
decomp   p prime, k >= 2, p^k <= 16 (arity 2 tables of at most 256 entries)
star     p prime, k >= 2, p^k <= 27
crt      m, n >= 2 coprime, mn <= 64
ck       p = 2, k = 3
zp2      p = 2 (binary parts on Z_4)
catalog  p in {2, 3}; closure verdicts only for p = 2";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckOutcome {
    pub check: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HarnessReport {
    pub harness: String,
    pub params: Params,
    pub pass: bool,
    pub checks: Vec<CheckOutcome>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeReport>,
}

impl HarnessReport {
    fn new(harness: &str, params: Params) -> Self {
        HarnessReport { harness: harness.to_string(), params, pass: true, checks: Vec::new(), findings: Vec::new(), lattice: None }
    }

    fn check(&mut self, name: impl Into<String>, pass: bool, detail: Option<String>) {
        self.pass &= pass;
        self.checks.push(CheckOutcome { check: name.into(), pass, detail });
    }

    /// Folds many samples into one check, recording the first failure.
    fn tally(&mut self, name: impl Into<String>, outcomes: impl IntoIterator<Item = (bool, String)>) {
        let mut total = 0usize;
        let mut failed = 0usize;
        let mut first = None;
        for (ok, what) in outcomes {
            total += 1;
            if !ok {
                failed += 1;
                first.get_or_insert(what);
            }
        }
        let detail = match first {
            None => format!("{total}/{total} hold"),
            Some(w) => format!("{failed}/{total} fail; first: {w}"),
        };
        self.check(name, failed == 0, Some(detail));
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("{}: {}\n", self.harness, if self.pass { "PASS" } else { "FAIL" });
        for c in &self.checks {
            out.push_str(&format!("  [{}] {}", if c.pass { "ok" } else { "FAIL" }, c.check));
            if let Some(d) = &c.detail {
                out.push_str(&format!(" ({d})"));
            }
            out.push('\n');
        }
        for f in &self.findings {
            out.push_str(&format!("  finding: {f}\n"));
        }
        if let Some(l) = &self.lattice {
            out.push_str(&l.render_text());
        }
        out
    }
}

fn infeasible(what: String) -> Error {
    Error::Infeasible(format!("{what}\n{FEASIBILITY}"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_table(modulus: Modulus, arity: u32, rng: &mut impl Rng) -> Result<OpTable> {
    let len = table_len(modulus, arity)?;
    let n = modulus.n();
    OpTable::new(modulus, arity, (0..len).map(|_| rng.gen_range(0..n) as u8).collect())
}

/// Uniform random compatible operation: on each prime-power factor `p^k`,
/// `sum_i p^(i-1) d_i(x mod p^i)` with random digit functions `d_i`.
pub fn random_compatible(modulus: Modulus, arity: u32, rng: &mut impl Rng) -> Result<OpTable> {
    let len = table_len(modulus, arity)?;
    let n = modulus.n() as u64;
    let mut acc = vec![0u64; len];
    for (p, k) in modulus.factors() {
        let q = p.pow(k) as u64;
        // idempotent: 1 mod q, 0 mod n/q
        let e = (0..n).find(|&e| e % q == 1 % q && e % (n / q) == 0).expect("CRT idempotent");
        let mut component = vec![0u64; len];
        let mut weight = 1u64;
        for i in 1..=k {
            let pi = p.pow(i) as usize;
            let digits: Vec<u64> = (0..pi.pow(arity)).map(|_| rng.gen_range(0..p) as u64).collect();
            for (x, c) in component.iter_mut().enumerate() {
                let class = crate::finop::index_digits(x, n as u32, arity)
                    .iter()
                    .fold(0usize, |a, &d| a * pi + d as usize % pi);
                *c += weight * digits[class];
            }
            weight *= p as u64;
        }
        for (a, c) in acc.iter_mut().zip(&component) {
            *a = (*a + e * (c % q)) % n;
        }
    }
    OpTable::new(modulus, arity, acc.into_iter().map(|v| v as u8).collect())
}

fn ctx_for(p: u32, k: u32, max_big: u32, harness: &str) -> Result<ReductionContext> {
    let ctx = ReductionContext::new(p, k).map_err(|e| infeasible(format!("{harness}: {e}")))?;
    if ctx.big().n() > max_big {
        return Err(infeasible(format!("{harness}: p^k = {} is above {max_big}", ctx.big().n())));
    }
    Ok(ctx)
}

/// Closed form of G against the indicator of `M^n`, and the constant
/// `prod_{c not in M} (x - c)` on `M`.
pub fn verify_g(p: u32, k: u32) -> Result<HarnessReport> {
    let ctx = ctx_for(p, k, 2048, "G")?;
    let mut r = HarnessReport::new("G", Params { p: Some(p), k: Some(k), ..Default::default() });
    for arity in 1..=2 {
        if table_len(ctx.big(), arity).is_err() {
            return Err(infeasible(format!("G: Z_{}^{arity} table too large", ctx.big().n())));
        }
        let closed = ctx.g_closed_form(arity)?;
        let ind = ctx.m_indicator(arity)?;
        let bad = closed.values().iter().zip(ind.values()).filter(|(a, b)| a != b).count();
        r.check(
            format!("closed form equals indicator of M^{arity}"),
            bad == 0,
            Some(format!("{} entries, {bad} mismatches", closed.len())),
        );
    }
    let values = ctx.alpha_values();
    let units = units_product(ctx.big())?;
    let constant = values.iter().all(|&v| v == values[0]);
    r.check(
        "product over non-multiples of p is constant on M and equals the product of units",
        constant && values[0] == units,
        Some(format!("alpha = {} on Z_{}; units product = {units}", values[0], ctx.big().n())),
    );
    Ok(r)
}

pub fn verify_decomp(p: u32, k: u32, seed: u64, samples: usize) -> Result<HarnessReport> {
    let ctx = ctx_for(p, k, 16, "decomp")?;
    let mut r = HarnessReport::new(
        "decomp",
        Params { p: Some(p), k: Some(k), seed: Some(seed), samples: Some(samples), ..Default::default() },
    );
    let mut rng = rng(seed);
    let mut outcomes = Vec::with_capacity(samples);
    for i in 0..samples {
        let arity = 1 + (i % 2) as u32;
        let f = random_table(ctx.big(), arity, &mut rng)?;
        outcomes.push((ctx.verify_decomposition(&f)?, format!("sample {i}")));
    }
    r.tally(format!("f(x) = sum_c f(x) G(x - c) on Z_{}", ctx.big().n()), outcomes);
    Ok(r)
}

/// Star lifts commute with composition on `M^m`, and compatibility of `h`
/// matches the congruence check of `h*` on `M`.
pub fn verify_star(p: u32, k: u32, seed: u64, samples: usize) -> Result<HarnessReport> {
    let ctx = ctx_for(p, k, 27, "star")?;
    let small = ctx.small();
    let mut r = HarnessReport::new(
        "star",
        Params { p: Some(p), k: Some(k), seed: Some(seed), samples: Some(samples), ..Default::default() },
    );
    let mut rng = rng(seed);
    let mut compo = Vec::with_capacity(samples);
    let mut round_trip = Vec::with_capacity(samples);
    for i in 0..samples {
        let l = rng.gen_range(1..=2u32);
        let m = rng.gen_range(1..=2u32);
        let f = random_table(small, l, &mut rng)?;
        let gs: Vec<OpTable> = (0..l).map(|_| random_table(small, m, &mut rng)).collect::<Result<_>>()?;
        let lhs = ctx.star(&f.compose(&gs)?)?;
        let stars: Vec<OpTable> = gs.iter().map(|g| ctx.star(g)).collect::<Result<_>>()?;
        let rhs = ctx.star(&f)?.compose(&stars)?;
        let n = ctx.big().n();
        let agree = (0..lhs.len()).all(|x| {
            let on_m = crate::finop::index_digits(x, n, m).iter().all(|&d| ctx.in_m(d));
            !on_m || lhs.values()[x] == rhs.values()[x]
        });
        compo.push((agree, format!("sample {i}")));
        round_trip.push((ctx.restrict_to_small(&ctx.star(&f)?)? == f, format!("sample {i}")));
    }
    r.tally(format!("(f(g_1..g_l))* = f*(g_1*..g_l*) on M^m, Z_{} -> Z_{}", small.n(), ctx.big().n()), compo);
    r.tally("restrict(star(h)) = h", round_trip);

    let mut compat = Vec::with_capacity(samples);
    let mut both = [0usize; 2];
    for i in 0..samples {
        let arity = 1 + (i % 2) as u32;
        let h = if rng.gen_bool(0.5) { random_compatible(small, arity, &mut rng)? } else { random_table(small, arity, &mut rng)? };
        let (a, b) = ctx.star_compatibility_check(&h)?;
        both[a as usize] += 1;
        compat.push((a == b, format!("sample {i}: small side {a}, M side {b}")));
    }
    r.tally(format!("h compatible iff h* preserves the congruences of M ({} compatible, {} not)", both[1], both[0]), compat);
    Ok(r)
}

/// Splitting along `Z_{mn} = Z_m x Z_n` and recombining.
pub fn verify_crt(m: u32, n: u32, seed: u64, samples: usize) -> Result<HarnessReport> {
    let pair = crt_pair(m, n).map_err(|e| infeasible(format!("crt: {e}")))?;
    if m < 2 || n < 2 || pair.product() > 64 {
        return Err(infeasible(format!("crt: m = {m}, n = {n}")));
    }
    let (zm, zn, zmn) = (Modulus::new(m)?, Modulus::new(n)?, Modulus::new(pair.product())?);
    let mut r = HarnessReport::new(
        "crt",
        Params { m: Some(m), n: Some(n), seed: Some(seed), samples: Some(samples), ..Default::default() },
    );
    r.check("CRT coefficients", pair.a % m == 1 % m && pair.a % n == 0 && pair.b % m == 0 && pair.b % n == 1 % n, Some(format!("a = {}, b = {}", pair.a, pair.b)));
    let mut rng = rng(seed);
    let mut split_combine = Vec::new();
    let mut combine_split = Vec::new();
    let mut transfer = Vec::new();
    for i in 0..samples {
        let arity = 1 + (i % 2) as u32;
        let f = random_compatible(zmn, arity, &mut rng)?;
        let (g, h) = split_coprime(&f, m, n)?;
        split_combine.push((combine_crt(&g, &h)? == f, format!("sample {i}")));

        let g = random_compatible(zm, arity, &mut rng)?;
        let h = random_compatible(zn, arity, &mut rng)?;
        let back = split_coprime(&combine_crt(&g, &h)?, m, n)?;
        combine_split.push((back == (g, h), format!("sample {i}")));

        let g = if rng.gen_bool(0.5) { random_compatible(zm, arity, &mut rng)? } else { random_table(zm, arity, &mut rng)? };
        let h = if rng.gen_bool(0.5) { random_compatible(zn, arity, &mut rng)? } else { random_table(zn, arity, &mut rng)? };
        let combined = combine_crt(&g, &h)?.is_compatible();
        transfer.push((combined == (g.is_compatible() && h.is_compatible()), format!("sample {i}")));
    }
    r.tally("combine(split(f)) = f", split_combine);
    r.tally("split(combine(g, h)) = (g, h)", combine_split);
    r.tally("combine(g, h) compatible iff g and h are", transfer);
    Ok(r)
}

/// Membership of star lifts, ring operations and constants in `C(K)` for
/// the catalog clones `K` on `Z_{p^2}`.
pub fn verify_ck(p: u32, k: u32, max_j: u32, cache: &mut ClosureCache) -> Result<HarnessReport> {
    if (p, k) != (2, 3) {
        return Err(infeasible(format!("ck: p = {p}, k = {k}")));
    }
    let ctx = ReductionContext::new(p, k)?;
    let big = ctx.big();
    let mut r = HarnessReport::new("ck", Params { p: Some(p), k: Some(k), ..Default::default() });
    let mut constants = Vec::new();
    for arity in 1..=2 {
        for c in 0..big.n() {
            constants.push(OpTable::constant(big, arity, c)?);
        }
    }
    for name in catalog::entry_names(p, max_j) {
        if name == CloneName::O {
            continue;
        }
        let spec = catalog::reduced_spec(p, name)?;
        let mut lifts = Vec::new();
        for g in spec.generators() {
            let lift = ctx.star(&g.table)?;
            lifts.push((ctx.in_ck(&lift, &spec, cache)?, g.name.clone()));
        }
        r.tally(format!("star lifts of the generators of {name} lie in C({name})"), lifts);
        let consts: Vec<(bool, String)> = constants
            .iter()
            .map(|c| Ok((ctx.in_ck(c, &spec, cache)?, format!("constant {} arity {}", c.values()[0], c.arity()))))
            .collect::<Result<_>>()?;
        r.tally(format!("constants lie in C({name})"), consts);
        if name != CloneName::PolGrp {
            let ops = [
                ("x1", OpTable::projection(big, 2, 1)?),
                ("x+y", OpTable::ring_add(big)),
                ("xy", OpTable::ring_mul(big)),
            ];
            let outcomes: Vec<(bool, String)> =
                ops.iter().map(|(label, op)| Ok((ctx.in_ck(op, &spec, cache)?, label.to_string()))).collect::<Result<_>>()?;
            r.tally(format!("projections, addition and multiplication of Z_8 lie in C({name})"), outcomes);
        }
    }
    Ok(r)
}

/// On `Z_4`: the compatible binary part by enumeration, the polynomial
/// binary part, and closures of pol plus one compatible non-polynomial.
pub fn verify_zp2(p: u32, seed: u64, samples: usize, opts: &ClosureOptions) -> Result<HarnessReport> {
    if p != 2 {
        return Err(infeasible(format!("zp2: p = {p}")));
    }
    verify_zp2_for(&catalog::reduced_spec(p, CloneName::Pol)?, seed, samples, opts)
}

/// As `verify_zp2`, with a caller-supplied generating set for pol(Z_4).
pub fn verify_zp2_for(pol: &CloneSpec, seed: u64, samples: usize, opts: &ClosureOptions) -> Result<HarnessReport> {
    let p = 2;
    let z4 = Modulus::prime_power(2, 2)?;
    let mut r = HarnessReport::new("zp2", Params { p: Some(p), seed: Some(seed), samples: Some(samples), ..Default::default() });
    let want = compatible_count(z4, 2);
    let comp = comp_part(z4, 2, opts.budget)?;
    let all_compatible = comp.sorted_members(usize::MAX).map(|v| v.iter().all(|t| t.is_compatible())).unwrap_or(false);
    r.check(
        "compatible binary operations on Z_4 by enumeration",
        comp.count() == want && all_compatible,
        Some(format!("{} members", comp.count())),
    );
    if pol.modulus() != z4 {
        return Err(Error::ModulusMismatch { expected: 4, found: pol.modulus().n() });
    }
    let pol_part = closure_part(pol, 2, opts)?;
    r.check(
        "binary part of pol(Z_4) is complete and strictly smaller",
        pol_part.complete && pol_part.count() < want,
        Some(format!("{} members, complete = {}", pol_part.count(), pol_part.complete)),
    );
    let mut rng = rng(seed);
    let mut outcomes = Vec::with_capacity(samples);
    for i in 0..samples {
        let f = loop {
            let f = random_compatible(z4, 2, &mut rng)?;
            if !pol_part.contains(&f) {
                break f;
            }
        };
        let spec = pol.clone().with_generator("f", f)?;
        let part = closure_part(&spec, 2, opts)?;
        // All generators are compatible, so members are; equal counts give equal sets.
        let ok = part.complete && part.count() == want;
        outcomes.push((ok, format!("sample {i}: {} members, complete = {}", part.count(), part.complete)));
    }
    r.tally("pol(Z_4) plus one compatible non-polynomial generates every compatible binary operation", outcomes);
    Ok(r)
}

/// Construction checks for the catalog and, for `p = 2`, the lattice
/// verdicts on `Z_4`.
pub fn verify_catalog(p: u32, max_j: u32, arity_cap: u32, cache: &mut ClosureCache) -> Result<HarnessReport> {
    if p != 2 && p != 3 {
        return Err(infeasible(format!("catalog: p = {p}")));
    }
    verify_catalog_for(p, max_j, arity_cap, &catalog::reduced_specs(p, max_j)?, cache)
}

/// As `verify_catalog`, with caller-supplied entry specs.
pub fn verify_catalog_for(
    p: u32,
    max_j: u32,
    arity_cap: u32,
    specs: &[CloneSpec],
    cache: &mut ClosureCache,
) -> Result<HarnessReport> {
    if p != 2 && p != 3 {
        return Err(infeasible(format!("catalog: p = {p}")));
    }
    let mut r = HarnessReport::new("catalog", Params { p: Some(p), ..Default::default() });
    let entries = catalog::entry_reports(p, max_j)?;
    for e in &entries {
        if e.name != CloneName::O {
            r.check(format!("generators of {} are compatible on Z_{}", e.name, p * p), e.reduced_compatible, None);
        }
        if let (Some(lift), Some(compat)) = (e.lift_matches, e.original_compatible) {
            r.check(format!("star lifts of {} equal its Z_{} generators", e.name, p * p * p), lift, None);
            r.check(format!("Z_{} generators of {} are compatible", p * p * p, e.name), compat, None);
        }
    }
    if p != 2 {
        return Ok(r);
    }
    let report = catalog::lattice_report_for(p, max_j, arity_cap, specs, cache)?;
    // Edges inside [E_2, comp] must hold; the reference endpoints and the
    // diagram's other claims are reported as findings.
    let inside = |n: CloneName| !matches!(n, CloneName::PolGrp | CloneName::O);
    for e in &report.edges {
        if inside(e.lower) && inside(e.upper) {
            r.check(format!("{} <= {}", e.lower, e.upper), e.inclusion == Relation::Included, Some(e.inclusion.to_string()));
        }
    }
    for (lower, upper, witness) in [
        (CloneName::E(2), CloneName::N(2), "x^p"),
        (CloneName::E(2), CloneName::Pol, "xy"),
        (CloneName::Pol, CloneName::Comp, "h"),
        (CloneName::E(2), CloneName::E(3), "p*x1..x3"),
    ] {
        let v = report.verdict(upper, lower);
        let ok = v.is_some_and(|v| {
            v.relation == Relation::NotIncluded && v.witness.as_ref().is_some_and(|w| w.name == witness)
        });
        let detail = v.map(|v| match &v.witness {
            Some(w) => format!("{}, witness {}", v.relation, w.name),
            None => v.relation.to_string(),
        });
        r.check(format!("{upper} is not contained in {lower}"), ok, detail);
    }
    for e in &entries {
        if inside(e.name) {
            let v = report.verdict(e.name, CloneName::Comp);
            let ok = e.name == CloneName::Comp || v.is_some_and(|v| v.relation == Relation::Included);
            r.check(format!("{} <= comp", e.name), ok, None);
        }
    }
    r.findings = report.findings.clone();
    r.lattice = Some(report);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_compatible_is_compatible() {
        let mut r = rng(1);
        for n in [4u32, 8, 9, 12] {
            for arity in 1..=2 {
                for _ in 0..20 {
                    assert!(random_compatible(Modulus::new(n).unwrap(), arity, &mut r).unwrap().is_compatible());
                }
            }
        }
    }

    #[test]
    fn small_harnesses_pass() {
        for (p, k) in [(2, 2), (2, 3), (3, 2)] {
            assert!(verify_g(p, k).unwrap().pass);
        }
        assert!(verify_decomp(2, 2, 7, 20).unwrap().pass);
        assert!(verify_star(2, 3, 7, 20).unwrap().pass);
        assert!(verify_crt(4, 3, 7, 20).unwrap().pass);
        assert!(matches!(verify_ck(3, 3, 3, &mut ClosureCache::default()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn reports_are_seed_deterministic() {
        assert_eq!(verify_star(2, 3, 42, 10).unwrap(), verify_star(2, 3, 42, 10).unwrap());
    }
}
