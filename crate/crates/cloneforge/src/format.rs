//! On-disk formats.
//!
//! Operation tables are JSON documents `{"modulus", "arity", "values"}`
//! with `x1` the most significant index digit. A generator file lists the
//! generators of a clone on one ring:
//!
//! ```json
//! {"modulus": 4, "name": "E_2", "include_all_constants": true,
//!  "generators": [{"name": "x+y", "arity": 2, "values": [0, 1, 2, 3, 1, 2, 3, 0, ...]}]}
//! ```
//!
//! A closure export is one JSON header line followed by the members as
//! concatenated packed keys, sorted bytewise. Each key stores the table
//! entries in index order, `bits_per_entry(n)` bits each, least significant
//! bit first within each byte, zero padded to a whole byte.

use std::io::{BufRead, Write};

use cloneforge_core::catalog::{self, CloneName};
use cloneforge_core::finop::bits_per_entry;
use cloneforge_core::{CloneSpec, ClosurePart, Generator, Modulus, OpTable, PackedKey};
use serde::{Deserialize, Serialize};

pub const EXPORT_FORMAT: &str = "cloneforge-closure/1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] cloneforge_core::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, FormatError>;

pub fn parse_table(text: &str) -> Result<OpTable> {
    Ok(serde_json::from_str(text)?)
}

pub fn table_to_json(t: &OpTable) -> String {
    serde_json::to_string(t).expect("tables serialize")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorDoc {
    pub name: String,
    pub arity: u32,
    pub values: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDoc {
    pub modulus: u32,
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub include_all_constants: bool,
    #[serde(default)]
    pub generators: Vec<GeneratorDoc>,
}

fn default_name() -> String {
    "clone".to_string()
}

impl SpecDoc {
    pub fn from_spec(spec: &CloneSpec) -> SpecDoc {
        SpecDoc {
            modulus: spec.modulus().n(),
            name: spec.name.clone(),
            include_all_constants: spec.include_all_constants(),
            generators: spec
                .generators()
                .iter()
                .map(|g| GeneratorDoc {
                    name: g.name.clone(),
                    arity: g.table.arity(),
                    values: g.table.values().iter().map(|&v| v as u32).collect(),
                })
                .collect(),
        }
    }

    pub fn to_spec(&self) -> Result<CloneSpec> {
        let modulus = Modulus::new(self.modulus)?;
        let mut spec = CloneSpec::new(modulus, self.name.clone()).with_constants(self.include_all_constants);
        for g in &self.generators {
            let values = g
                .values
                .iter()
                .map(|&v| modulus.check_element(v as u64).map(|v| v as u8))
                .collect::<cloneforge_core::Result<Vec<u8>>>()?;
            let table = OpTable::new(modulus, g.arity, values)?;
            spec.push(Generator::new(g.name.clone(), table))?;
        }
        Ok(spec)
    }
}

/// Reads a generator file, or resolves `catalog:NAME` to the catalog clone
/// `NAME` on `Z_{p^2}`.
pub fn load_spec(source: &str, p: u32) -> Result<CloneSpec> {
    if let Some(name) = source.strip_prefix("catalog:") {
        let name: CloneName = name.parse()?;
        return Ok(catalog::reduced_spec(p, name)?);
    }
    let text = std::fs::read_to_string(source)?;
    parse_spec(&text)
}

pub fn parse_spec(text: &str) -> Result<CloneSpec> {
    serde_json::from_str::<SpecDoc>(text)?.to_spec()
}

pub fn load_table(path: &str) -> Result<OpTable> {
    parse_table(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportHeader {
    pub format: String,
    pub modulus: u32,
    pub arity: u32,
    pub spec_name: String,
    pub generator_names: Vec<String>,
    pub count: u64,
    pub complete: bool,
    pub bits_per_entry: u32,
    pub key_bytes: usize,
}

/// Writes `part` as a header line plus sorted packed keys.
pub fn export_closure(part: &ClosurePart, limit: usize, out: &mut impl Write) -> Result<ExportHeader> {
    let members = part
        .sorted_members(limit)
        .ok_or_else(|| FormatError::Invalid(format!("{} members exceed the export limit of {limit}", part.count())))?;
    let header = ExportHeader {
        format: EXPORT_FORMAT.to_string(),
        modulus: part.modulus.n(),
        arity: part.arity,
        spec_name: part.spec_name.clone(),
        generator_names: part.generator_names.clone(),
        count: members.len() as u64,
        complete: part.complete,
        bits_per_entry: bits_per_entry(part.modulus.n()),
        key_bytes: PackedKey::byte_len(part.modulus, part.arity)?,
    };
    serde_json::to_writer(&mut *out, &header)?;
    out.write_all(b"\n")?;
    for t in &members {
        out.write_all(t.packed_key().as_bytes())?;
    }
    Ok(header)
}

pub fn export_bytes(part: &ClosurePart, limit: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    export_closure(part, limit, &mut buf)?;
    Ok(buf)
}

/// Reads an export back, checking the header against the blob.
pub fn import_closure(input: &mut impl BufRead) -> Result<(ExportHeader, Vec<OpTable>)> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let header: ExportHeader = serde_json::from_str(line.trim_end())?;
    if header.format != EXPORT_FORMAT {
        return Err(FormatError::Invalid(format!("unknown format `{}`", header.format)));
    }
    let modulus = Modulus::new(header.modulus)?;
    let key_bytes = PackedKey::byte_len(modulus, header.arity)?;
    if key_bytes != header.key_bytes || bits_per_entry(modulus.n()) != header.bits_per_entry {
        return Err(FormatError::Invalid("key layout does not match the modulus and arity".to_string()));
    }
    let mut blob = Vec::new();
    input.read_to_end(&mut blob)?;
    if blob.len() as u64 != header.count * key_bytes as u64 {
        return Err(FormatError::Invalid(format!(
            "header promises {} members of {key_bytes} bytes, blob has {} bytes",
            header.count,
            blob.len()
        )));
    }
    let mut members = Vec::with_capacity(header.count as usize);
    for chunk in blob.chunks(key_bytes.max(1)) {
        if members.last().is_some_and(|prev: &OpTable| prev.packed_key().as_bytes() >= chunk) {
            return Err(FormatError::Invalid("members are not strictly sorted".to_string()));
        }
        members.push(PackedKey(chunk.to_vec()).decode(modulus, header.arity)?);
    }
    Ok((header, members))
}
