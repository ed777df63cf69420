//! Named clones between `E_2` and `comp(Z_{p^2})` (plus two reference
//! endpoints), their counterparts on `Z_{p^3}`, and the lattice report.
//!
//! Every reduced entry contains addition and all constants; every original
//! entry contains addition, multiplication and all constants. Only the
//! extra generators are listed per entry.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::Serialize;

use crate::closure::{ClosureCache, CloneSpec, Generator};
use crate::error::{Error, Result};
use crate::finop::OpTable;
use crate::reduction::ReductionContext;
use crate::zmod::{is_prime, Modulus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CloneName {
    PolGrp,
    E(u32),
    N(u32),
    F1,
    F2,
    F3,
    Pol,
    Comp,
    O,
}

impl fmt::Display for CloneName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CloneName::PolGrp => f.write_str("pol_grp"),
            CloneName::E(j) => write!(f, "E_{j}"),
            CloneName::N(j) => write!(f, "N_{j}"),
            CloneName::F1 => f.write_str("F1"),
            CloneName::F2 => f.write_str("F2"),
            CloneName::F3 => f.write_str("F3"),
            CloneName::Pol => f.write_str("pol"),
            CloneName::Comp => f.write_str("comp"),
            CloneName::O => f.write_str("O"),
        }
    }
}

impl Serialize for CloneName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for CloneName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let indexed = |rest: &str| -> Option<u32> {
            let j: u32 = rest.trim_start_matches('_').parse().ok()?;
            (j >= 2).then_some(j)
        };
        let name = match s {
            "pol_grp" => CloneName::PolGrp,
            "F1" | "F_1" => CloneName::F1,
            "F2" | "F_2" => CloneName::F2,
            "F3" | "F_3" => CloneName::F3,
            "pol" => CloneName::Pol,
            "comp" => CloneName::Comp,
            "O" => CloneName::O,
            _ => match (s.strip_prefix('E'), s.strip_prefix('N')) {
                (Some(rest), _) => CloneName::E(indexed(rest).ok_or_else(|| Error::UnknownName(s.to_string()))?),
                (_, Some(rest)) => CloneName::N(indexed(rest).ok_or_else(|| Error::UnknownName(s.to_string()))?),
                _ => return Err(Error::UnknownName(s.to_string())),
            },
        };
        Ok(name)
    }
}

fn small_ring(p: u32) -> Result<Modulus> {
    if !is_prime(p) {
        return Err(Error::NotPrimePower(p));
    }
    Modulus::prime_power(p, 2)
}

fn big_ring(p: u32) -> Result<Modulus> {
    if !is_prime(p) {
        return Err(Error::NotPrimePower(p));
    }
    Modulus::prime_power(p, 3)
}

fn pow(x: u64, e: u32, n: u64) -> u64 {
    (0..e).fold(1u64, |acc, _| acc * x % n)
}

/// `p x_1 ... x_j` on `Z_{p^2}`.
pub fn p_monomial(p: u32, j: u32) -> Result<OpTable> {
    let m = small_ring(p)?;
    let q = m.n() as i64;
    OpTable::from_fn(m, j, |x| x.iter().fold(p as i64, |acc, &xi| acc * xi as i64 % q))
}

/// `x^p` on `Z_{p^2}`.
pub fn x_pow_p(p: u32) -> Result<OpTable> {
    let m = small_ring(p)?;
    OpTable::from_fn(m, 1, |x| pow(x[0] as u64, p, m.n() as u64) as i64)
}

/// `x^p y^p` on `Z_{p^2}`.
pub fn f1_generator(p: u32) -> Result<OpTable> {
    let m = small_ring(p)?;
    let q = m.n() as u64;
    OpTable::from_fn(m, 2, |x| (pow(x[0] as u64, p, q) * pow(x[1] as u64, p, q) % q) as i64)
}

/// `x^p (y^p - y)` on `Z_{p^2}`.
pub fn f2_generator(p: u32) -> Result<OpTable> {
    let m = small_ring(p)?;
    let q = m.n() as u64;
    OpTable::from_fn(m, 2, |x| {
        let y = x[1] as u64;
        (pow(x[0] as u64, p, q) * ((pow(y, p, q) + q - y) % q) % q) as i64
    })
}

/// `h(kp, lp) = klp` for `k, l < p`, zero elsewhere, on `Z_{p^2}`.
pub fn h_op(p: u32) -> Result<OpTable> {
    let m = small_ring(p)?;
    OpTable::from_fn(m, 2, |x| {
        if x[0] % p == 0 && x[1] % p == 0 {
            ((x[0] / p) * (x[1] / p) * p) as i64
        } else {
            0
        }
    })
}

/// `xy` on `Z_{p^2}`.
pub fn xy(p: u32) -> Result<OpTable> {
    Ok(OpTable::ring_mul(small_ring(p)?))
}

/// Indicator of `0` on `Z_{p^2}`; not compatible, so it generates
/// everything together with `+`, `xy` and the constants.
pub fn chi_zero(p: u32) -> Result<OpTable> {
    let m = small_ring(p)?;
    OpTable::from_fn(m, 1, |x| (x[0] == 0) as i64)
}

/// On `Z_{p^3}`, zero unless every argument lies in `M`; there `value`
/// receives the quotients `x_i / p`.
fn on_m(p: u32, arity: u32, value: impl Fn(&[u64]) -> u64) -> Result<OpTable> {
    let m = big_ring(p)?;
    let r = m.n() as u64;
    OpTable::from_fn(m, arity, |x| {
        if x.iter().any(|&xi| xi % p != 0) {
            return 0;
        }
        let ks: Vec<u64> = x.iter().map(|&xi| (xi / p) as u64).collect();
        (value(&ks) % r) as i64
    })
}

/// `xi_j(kp) = k_1 ... k_j p^2`.
pub fn xi(p: u32, j: u32) -> Result<OpTable> {
    let r = big_ring(p)?.n() as u64;
    let p = p as u64;
    on_m(p as u32, j, |k| k.iter().fold(p * p % r, |acc, &ki| acc * ki % r))
}

/// `pi(kp) = p k^p`.
pub fn pi_op(p: u32) -> Result<OpTable> {
    let r = big_ring(p)?.n() as u64;
    on_m(p, 1, |k| p as u64 * pow(k[0], p, r))
}

/// `psi(kp, lp) = p k^p l^p`.
pub fn psi(p: u32) -> Result<OpTable> {
    let r = big_ring(p)?.n() as u64;
    on_m(p, 2, |k| p as u64 * pow(k[0], p, r) % r * pow(k[1], p, r))
}

/// `rho(kp, lp) = p k^p (l^p - l)`.
pub fn rho(p: u32) -> Result<OpTable> {
    let r = big_ring(p)?.n() as u64;
    on_m(p, 2, |k| p as u64 * pow(k[0], p, r) % r * ((pow(k[1], p, r) + r - k[1] % r) % r))
}

/// `phi(kp^2, lp^2) = kl p^2` for `k, l < p`, zero elsewhere.
pub fn phi(p: u32) -> Result<OpTable> {
    let m = big_ring(p)?;
    let pp = p * p;
    OpTable::from_fn(m, 2, |x| {
        if x[0] % pp == 0 && x[1] % pp == 0 {
            ((x[0] / pp) * (x[1] / pp) * pp) as i64
        } else {
            0
        }
    })
}

/// `tau(kp, lp) = klp`.
pub fn tau(p: u32) -> Result<OpTable> {
    on_m(p, 2, |k| k[0] * k[1] * p as u64)
}

fn gen(name: impl Into<String>, table: Result<OpTable>) -> Result<Generator> {
    Ok(Generator::new(name, table?))
}

fn check_index(p: u32, name: CloneName) -> Result<()> {
    match name {
        CloneName::E(j) if j < 2 => Err(Error::UnknownName(name.to_string())),
        CloneName::N(j) if j < 2 || j < p => Err(Error::UnknownName(name.to_string())),
        _ => Ok(()),
    }
}

/// Extra generators of the entry on `Z_{p^2}`.
pub fn reduced_generators(p: u32, name: CloneName) -> Result<Vec<Generator>> {
    check_index(p, name)?;
    Ok(match name {
        CloneName::PolGrp => vec![],
        CloneName::E(j) => vec![gen(format!("p*x1..x{j}"), p_monomial(p, j))?],
        CloneName::N(j) => vec![gen(format!("p*x1..x{j}"), p_monomial(p, j))?, gen("x^p", x_pow_p(p))?],
        CloneName::F1 => vec![gen("x^p*y^p", f1_generator(p))?],
        CloneName::F2 => vec![gen("x^p*(y^p-y)", f2_generator(p))?],
        CloneName::F3 => vec![gen("h", h_op(p))?],
        CloneName::Pol => vec![gen("xy", xy(p))?],
        CloneName::Comp => vec![gen("xy", xy(p))?, gen("h", h_op(p))?],
        CloneName::O => vec![gen("xy", xy(p))?, gen("chi0", chi_zero(p))?],
    })
}

/// Extra generators of the corresponding clone on `Z_{p^3}`; `None` for
/// the two reference endpoints, which have no counterpart.
pub fn original_generators(p: u32, name: CloneName) -> Result<Option<Vec<Generator>>> {
    check_index(p, name)?;
    Ok(Some(match name {
        CloneName::PolGrp | CloneName::O => return Ok(None),
        CloneName::E(j) => vec![gen(format!("xi_{j}"), xi(p, j))?],
        CloneName::N(j) => vec![gen(format!("xi_{j}"), xi(p, j))?, gen("pi", pi_op(p))?],
        CloneName::F1 => vec![gen("psi", psi(p))?],
        CloneName::F2 => vec![gen("rho", rho(p))?],
        CloneName::F3 => vec![gen("phi", phi(p))?],
        CloneName::Pol => vec![gen("tau", tau(p))?],
        CloneName::Comp => vec![gen("tau", tau(p))?, gen("phi", phi(p))?],
    }))
}

pub fn reduced_spec(p: u32, name: CloneName) -> Result<CloneSpec> {
    let m = small_ring(p)?;
    let mut spec = CloneSpec::new(m, name.to_string()).with_constants(true).with_generator("add", OpTable::ring_add(m))?;
    for g in reduced_generators(p, name)? {
        spec.push(g)?;
    }
    Ok(spec)
}

pub fn original_spec(p: u32, name: CloneName) -> Result<Option<CloneSpec>> {
    let Some(extra) = original_generators(p, name)? else { return Ok(None) };
    let m = big_ring(p)?;
    let mut spec = CloneSpec::new(m, name.to_string())
        .with_constants(true)
        .with_generator("add", OpTable::ring_add(m))?
        .with_generator("mul", OpTable::ring_mul(m))?;
    for g in extra {
        spec.push(g)?;
    }
    Ok(Some(spec))
}

/// Entry names with `E_j` for `2 <= j <= max_j` and `N_j` for
/// `max(2, p) <= j <= max_j`, in canonical order.
pub fn entry_names(p: u32, max_j: u32) -> Vec<CloneName> {
    let mut out = vec![CloneName::PolGrp];
    out.extend((2..=max_j).map(CloneName::E));
    out.extend((p.max(2)..=max_j).map(CloneName::N));
    out.extend([CloneName::F1, CloneName::F2, CloneName::F3, CloneName::Pol, CloneName::Comp, CloneName::O]);
    out
}

/// Drawn lines of the diagram as `(lower, upper)`. The union clones `E`
/// and `N` are stood in for by `E_{max_j}` and `N_{max_j}`.
pub fn expected_covers(p: u32, max_j: u32) -> Vec<(CloneName, CloneName)> {
    use CloneName::*;
    let mut out = vec![(PolGrp, E(2))];
    for j in 2..max_j {
        out.push((E(j), E(j + 1)));
    }
    let n_lo = p.max(2);
    for j in n_lo..=max_j {
        out.push((E(j), N(j)));
    }
    for j in n_lo..max_j {
        out.push((N(j), N(j + 1)));
    }
    if n_lo <= max_j {
        out.push((N(max_j), F1));
        out.push((N(max_j), F2));
    }
    out.extend([(F2, F3), (F1, Pol), (F2, Pol), (Pol, Comp), (F3, Comp), (Comp, O)]);
    out
}

/// Inclusions implied by the drawn lines: their reflexive-transitive
/// closure, as `(lower, upper)` pairs.
pub fn expected_order(p: u32, max_j: u32) -> BTreeSet<(CloneName, CloneName)> {
    let names = entry_names(p, max_j);
    let mut order: BTreeSet<(CloneName, CloneName)> = names.iter().map(|&n| (n, n)).collect();
    order.extend(expected_covers(p, max_j));
    loop {
        let mut added = false;
        let snapshot: Vec<_> = order.iter().copied().collect();
        for &(a, b) in &snapshot {
            for &(c, d) in &snapshot {
                if b == c && order.insert((a, d)) {
                    added = true;
                }
            }
        }
        if !added {
            return order;
        }
    }
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: CloneName,
    pub reduced: Vec<Generator>,
    pub original: Option<Vec<Generator>>,
    /// Names this entry covers in the diagram.
    pub expected_covers: Vec<CloneName>,
}

pub fn catalog(p: u32, max_j: u32) -> Result<Vec<CatalogEntry>> {
    let covers = expected_covers(p, max_j);
    entry_names(p, max_j)
        .into_iter()
        .map(|name| {
            Ok(CatalogEntry {
                name,
                reduced: reduced_generators(p, name)?,
                original: original_generators(p, name)?,
                expected_covers: covers.iter().filter(|(_, up)| *up == name).map(|(lo, _)| *lo).collect(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// lattice report

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Included,
    NotIncluded,
    Unknown,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Included => "included",
            Relation::NotIncluded => "not_included",
            Relation::Unknown => "unknown",
        })
    }
}

/// Whether the clone `from` is contained in the clone `to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub from: CloneName,
    pub to: CloneName,
    pub relation: Relation,
    /// Generator of `from` outside `to`, when `relation` is `not_included`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub complete: bool,
    /// Whether the diagram implies the inclusion.
    pub expected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub name: String,
    pub table: OpTable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntryReport {
    pub name: CloneName,
    pub reduced_generators: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub original_generators: Option<Vec<String>>,
    pub expected_covers: Vec<CloneName>,
    pub reduced_compatible: bool,
    /// Star lifts of the reduced generators equal the original ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lift_matches: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub original_compatible: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeReport {
    pub lower: CloneName,
    pub upper: CloneName,
    pub inclusion: Relation,
    /// `not_included` when the reverse inclusion fails, i.e. the edge is strict.
    pub reverse: Relation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Caps {
    pub max_j: u32,
    pub arity: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LatticeReport {
    pub p: u32,
    pub caps: Caps,
    pub entries: Vec<EntryReport>,
    pub verdicts: Vec<Verdict>,
    pub edges: Vec<EdgeReport>,
    /// Verdicts that disagree with the diagram, and undecided pairs.
    pub findings: Vec<String>,
}

impl LatticeReport {
    pub fn verdict(&self, from: CloneName, to: CloneName) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.from == from && v.to == to)
    }

    /// Human-readable summary of edges and findings.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "lattice on Z_{} (E_j and N_j up to j = {}, arity cap {})\n",
            self.p * self.p,
            self.caps.max_j,
            self.caps.arity
        );
        out.push_str("edges (lower < upper):\n");
        for e in &self.edges {
            let mark = match (e.inclusion, e.reverse) {
                (Relation::Included, Relation::NotIncluded) => "strict",
                (Relation::Included, Relation::Included) => "equal",
                (Relation::Included, Relation::Unknown) => "included, strictness unknown",
                (Relation::NotIncluded, _) => "NOT included",
                (Relation::Unknown, _) => "unknown",
            };
            out.push_str(&format!("  {:>8} < {:<8} {mark}\n", e.lower.to_string(), e.upper.to_string()));
        }
        let included = self.verdicts.iter().filter(|v| v.relation == Relation::Included).count();
        let separated = self.verdicts.iter().filter(|v| v.relation == Relation::NotIncluded).count();
        let unknown = self.verdicts.len() - included - separated;
        out.push_str(&format!(
            "pairs: {} included, {} not included, {} unknown\n",
            included, separated, unknown
        ));
        if self.findings.is_empty() {
            out.push_str("findings: none\n");
        } else {
            out.push_str("findings:\n");
            for f in &self.findings {
                out.push_str(&format!("  {f}\n"));
            }
        }
        out
    }
}

fn relation_of(result: &Result<bool>) -> Relation {
    match result {
        Ok(true) => Relation::Included,
        Ok(false) => Relation::NotIncluded,
        Err(_) => Relation::Unknown,
    }
}

/// Inclusion verdicts for every ordered pair of entries on `Z_{p^2}`.
/// Memberships above `arity_cap` are not attempted.
pub fn lattice_report(p: u32, max_j: u32, arity_cap: u32, cache: &mut ClosureCache) -> Result<LatticeReport> {
    lattice_report_for(p, max_j, arity_cap, &reduced_specs(p, max_j)?, cache)
}

/// The specs of every entry on `Z_{p^2}`, in `entry_names` order.
pub fn reduced_specs(p: u32, max_j: u32) -> Result<Vec<CloneSpec>> {
    entry_names(p, max_j).into_iter().map(|n| reduced_spec(p, n)).collect()
}

/// As `lattice_report`, with caller-supplied specs for the entries (for
/// instance with generators reordered). Verdicts and witnesses do not
/// depend on generator order.
pub fn lattice_report_for(
    p: u32,
    max_j: u32,
    arity_cap: u32,
    specs: &[CloneSpec],
    cache: &mut ClosureCache,
) -> Result<LatticeReport> {
    if p != 2 {
        return Err(Error::Infeasible(format!(
            "closure-based lattice certification needs p = 2 (got p = {p}); p = 3 supports construction checks only"
        )));
    }
    let names = entry_names(p, max_j);
    let expected = expected_order(p, max_j);
    let ring = small_ring(p)?;
    let matches = specs.len() == names.len()
        && specs.iter().zip(&names).all(|(s, n)| s.name == n.to_string() && s.modulus() == ring);
    if !matches {
        return Err(Error::Infeasible("specs do not match the catalog entries".into()));
    }
    let entries = entry_reports(p, max_j)?;

    let mut verdicts = Vec::new();
    for (i, &from) in names.iter().enumerate() {
        for (j, &to) in names.iter().enumerate() {
            if i == j {
                continue;
            }
            verdicts.push(pair_verdict(&specs[i], &specs[j], from, to, arity_cap, &expected, cache));
        }
    }
    let lookup = |a: CloneName, b: CloneName| -> Relation {
        verdicts.iter().find(|v| v.from == a && v.to == b).map(|v| v.relation).unwrap_or(Relation::Unknown)
    };
    let edges: Vec<EdgeReport> = expected_covers(p, max_j)
        .into_iter()
        .map(|(lower, upper)| EdgeReport { lower, upper, inclusion: lookup(lower, upper), reverse: lookup(upper, lower) })
        .collect();

    let mut findings = Vec::new();
    for v in &verdicts {
        match (v.relation, v.expected) {
            (Relation::NotIncluded, true) => {
                findings.push(format!("{} is not contained in {}, though the diagram implies it", v.from, v.to))
            }
            (Relation::Included, false) => {
                findings.push(format!("{} is contained in {}, which the diagram does not imply", v.from, v.to))
            }
            (Relation::Unknown, _) => findings.push(format!("{} <= {} undecided", v.from, v.to)),
            _ => {}
        }
    }
    Ok(LatticeReport { p, caps: Caps { max_j, arity: arity_cap }, entries, verdicts, edges, findings })
}

fn pair_verdict(
    from_spec: &CloneSpec,
    to_spec: &CloneSpec,
    from: CloneName,
    to: CloneName,
    arity_cap: u32,
    expected: &BTreeSet<(CloneName, CloneName)>,
    cache: &mut ClosureCache,
) -> Verdict {
    let mut relation = Relation::Included;
    let mut witness = None;
    // Every entry has addition and all constants; only extras need checks.
    let mut gens: Vec<&Generator> = from_spec.generators().iter().collect();
    gens.sort_by(|a, b| (a.table.arity(), a.table.packed_key(), &a.name).cmp(&(b.table.arity(), b.table.packed_key(), &b.name)));
    for g in gens {
        if g.table.arity() > arity_cap {
            relation = Relation::Unknown;
            continue;
        }
        match relation_of(&cache.member(to_spec, &g.table)) {
            Relation::Included => {}
            Relation::NotIncluded => {
                relation = Relation::NotIncluded;
                witness = Some(Witness { name: g.name.clone(), table: g.table.clone() });
                break;
            }
            Relation::Unknown => relation = Relation::Unknown,
        }
    }
    Verdict {
        from,
        to,
        relation,
        witness,
        complete: relation != Relation::Unknown,
        expected: expected.contains(&(from, to)),
    }
}

/// Construction checks for every entry: compatibility of generators and
/// agreement of star lifts with the original-side tables.
pub fn entry_reports(p: u32, max_j: u32) -> Result<Vec<EntryReport>> {
    let ctx = ReductionContext::new(p, 3)?;
    catalog(p, max_j)?
        .into_iter()
        .map(|e| {
            let reduced_compatible = e.reduced.iter().all(|g| g.table.is_compatible());
            let (lift_matches, original_compatible, original_names) = match &e.original {
                None => (None, None, None),
                Some(orig) => {
                    let lifts = e
                        .reduced
                        .iter()
                        .map(|g| ctx.star(&g.table))
                        .collect::<Result<Vec<_>>>()?;
                    let matches = lifts.len() == orig.len() && lifts.iter().zip(orig).all(|(l, o)| *l == o.table);
                    let compat = orig.iter().all(|g| g.table.is_compatible());
                    (Some(matches), Some(compat), Some(orig.iter().map(|g| g.name.clone()).collect()))
                }
            };
            Ok(EntryReport {
                name: e.name,
                reduced_generators: e.reduced.iter().map(|g| g.name.clone()).collect(),
                original_generators: original_names,
                expected_covers: e.expected_covers,
                reduced_compatible,
                lift_matches,
                original_compatible,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::{member, ClosureOptions};

    #[test]
    fn names_round_trip() {
        for name in entry_names(2, 4) {
            assert_eq!(name.to_string().parse::<CloneName>().unwrap(), name);
        }
        assert_eq!("E3".parse::<CloneName>().unwrap(), CloneName::E(3));
        assert!("E_1".parse::<CloneName>().is_err());
        assert!("X".parse::<CloneName>().is_err());
    }

    #[test]
    fn reduced_examples() {
        let e2 = p_monomial(2, 2).unwrap();
        assert_eq!(e2.evaluate(&[1, 1]).unwrap(), 2);
        assert_eq!(e2.evaluate(&[1, 3]).unwrap(), 2);
        assert!((0..4).all(|y| e2.evaluate(&[2, y]).unwrap() == 0));
        let h = h_op(2).unwrap();
        assert_eq!(h.evaluate(&[2, 2]).unwrap(), 2);
        for x in 0..4 {
            for y in 0..4 {
                if (x, y) != (2, 2) {
                    assert_eq!(h.evaluate(&[x, y]).unwrap(), 0);
                }
            }
        }
        assert!(h.is_compatible());
        assert_eq!(x_pow_p(2).unwrap().values(), &[0, 1, 0, 1]);
    }

    #[test]
    fn original_examples() {
        let x2 = xi(2, 2).unwrap();
        assert_eq!(x2.evaluate(&[2, 2]).unwrap(), 4);
        assert_eq!(x2.evaluate(&[2, 6]).unwrap(), 4);
        assert_eq!(x2.evaluate(&[1, 2]).unwrap(), 0);
        let ph = phi(2).unwrap();
        assert_eq!(ph.evaluate(&[4, 4]).unwrap(), 4);
        assert_eq!(ph.evaluate(&[4, 2]).unwrap(), 0);
        let pol8 = CloneSpec::new(Modulus::new(8).unwrap(), "pol")
            .with_constants(true)
            .with_generator("add", OpTable::ring_add(Modulus::new(8).unwrap()))
            .unwrap()
            .with_generator("mul", OpTable::ring_mul(Modulus::new(8).unwrap()))
            .unwrap();
        assert!(member(&pol8, &x2, &ClosureOptions::default()).unwrap());
    }

    #[test]
    fn lifts_match_and_tables_are_compatible() {
        for p in [2u32, 3] {
            for e in entry_reports(p, 4).unwrap() {
                if e.name != CloneName::O {
                    assert!(e.reduced_compatible, "{} p={p}", e.name);
                }
                if let Some(ok) = e.lift_matches {
                    assert!(ok, "{} p={p}", e.name);
                    assert_eq!(e.original_compatible, Some(true));
                }
            }
        }
    }

    #[test]
    fn n_entries_start_at_p() {
        assert_eq!(entry_names(3, 3).iter().filter(|n| matches!(n, CloneName::N(_))).count(), 1);
        assert!(reduced_generators(3, CloneName::N(2)).is_err());
        let order = expected_order(2, 4);
        assert!(order.contains(&(CloneName::PolGrp, CloneName::O)));
        assert!(order.contains(&(CloneName::E(2), CloneName::F1)));
        assert!(!order.contains(&(CloneName::F1, CloneName::F2)));
        assert!(!order.contains(&(CloneName::F3, CloneName::Pol)));
    }
}
