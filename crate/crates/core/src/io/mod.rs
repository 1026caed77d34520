//! File formats: permeability (`PERM`), partitions (`PART`), the raw SPE10
//! layout, synthetic fields and CSV reports. Every write goes through a
//! temporary file in the destination directory and is renamed into place.

mod report;
mod spe10;
mod synthetic;

pub use report::{eigs_csv, residual_csv, spectrum_csv, ReportRow, REPORT_HEADER};
pub use spe10::{convert_spe10, read_spe10, Spe10Slice, SPE10_DIMS};
pub use synthetic::{synthetic_field, SyntheticKind};

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid_fem::Permeability;

/// Writes `contents` to `path` atomically.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_ascii_whitespace()
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::format(format!("missing {what}")))?;
    tok.parse().map_err(|_| Error::format(format!("cannot parse {what} from '{tok}'")))
}

/// A permeability field together with its grid counts.
#[derive(Clone, Debug, PartialEq)]
pub struct PermField {
    pub counts: Vec<usize>,
    pub perm: Permeability,
}

pub fn parse_perm(text: &str) -> Result<PermField> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::format("empty permeability file"))?;
    let mut h = tokens(header);
    if h.next() != Some("PERM") {
        return Err(Error::format("permeability file must start with 'PERM'"));
    }
    let dim: usize = parse_num(h.next(), "dimension")?;
    if dim != 2 && dim != 3 {
        return Err(Error::format(format!("dimension must be 2 or 3, got {dim}")));
    }
    let counts: Vec<usize> = (0..dim).map(|a| parse_num(h.next(), &format!("count along axis {a}"))).collect::<Result<_>>()?;
    if h.next().is_some() {
        return Err(Error::format("trailing tokens in PERM header"));
    }
    let n: usize = counts.iter().product();
    let values: Vec<f64> = lines
        .flat_map(tokens)
        .enumerate()
        .map(|(i, t)| t.parse::<f64>().map_err(|_| Error::format(format!("bad permeability value '{t}' (entry {i})"))))
        .collect::<Result<_>>()?;
    if values.len() != n * dim {
        return Err(Error::format(format!(
            "expected {} permeability values ({n} cells x {dim}), found {}",
            n * dim,
            values.len()
        )));
    }
    Ok(PermField { counts, perm: Permeability::new(dim, values)? })
}

pub fn read_perm(path: &Path) -> Result<PermField> {
    parse_perm(&fs::read_to_string(path)?)
}

/// Values are written in shortest round-trip form, so reading and writing
/// again reproduces the file byte for byte.
pub fn format_perm(field: &PermField) -> String {
    let dim = field.perm.dim();
    let mut out = String::with_capacity(field.perm.n_cells() * 12 * dim);
    out.push_str("PERM ");
    out.push_str(&dim.to_string());
    for c in &field.counts {
        write!(out, " {c}").unwrap();
    }
    out.push('\n');
    for c in 0..field.perm.n_cells() {
        let k = field.perm.cell(c);
        for (a, v) in k.iter().enumerate() {
            if a > 0 {
                out.push(' ');
            }
            write!(out, "{v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_perm(path: &Path, field: &PermField) -> Result<()> {
    write_atomic(path, &format_perm(field))
}

/// Parses a `PART` file. Subdomain ids are compacted to `0..N` in increasing
/// order of id value.
pub fn parse_partition(text: &str, n_cells: usize) -> Result<Vec<usize>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::format("empty partition file"))?;
    let mut h = tokens(header);
    if h.next() != Some("PART") {
        return Err(Error::format("partition file must start with 'PART'"));
    }
    let declared: usize = parse_num(h.next(), "subdomain count")?;
    let cells: usize = parse_num(h.next(), "cell count")?;
    if cells != n_cells {
        return Err(Error::format(format!("partition has {cells} cells, grid has {n_cells}")));
    }
    let ids: Vec<i64> = lines.flat_map(tokens).map(|t| parse_num(Some(t), "subdomain id")).collect::<Result<_>>()?;
    if ids.len() != n_cells {
        return Err(Error::format(format!("expected {n_cells} subdomain ids, found {}", ids.len())));
    }
    if let Some(bad) = ids.iter().find(|&&v| v < 0) {
        return Err(Error::format(format!("negative subdomain id {bad}")));
    }
    let mut distinct: Vec<i64> = ids.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != declared {
        log::warn!("partition header declares {declared} subdomains, file uses {}", distinct.len());
    }
    Ok(ids.iter().map(|v| distinct.binary_search(v).unwrap()).collect())
}

pub fn read_partition(path: &Path, n_cells: usize) -> Result<Vec<usize>> {
    parse_partition(&fs::read_to_string(path)?, n_cells)
}

pub fn format_partition(owner: &[usize]) -> String {
    let n = owner.iter().max().map_or(0, |m| m + 1);
    let mut out = format!("PART {n} {}\n", owner.len());
    for o in owner {
        writeln!(out, "{o}").unwrap();
    }
    out
}
