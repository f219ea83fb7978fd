//! MPS export and import.
//!
//! Output follows the fixed-column layout whenever names fit in 8 characters
//! and numbers in 12. Names that do not fit, contain whitespace or could
//! collide with generated names are replaced by `C0000042` / `R0000042`
//! style names; the originals travel in a JSON sidecar [`NameMap`] together
//! with the instance metadata. Numbers are written in shortest round-trip
//! form, so a value longer than 12 characters widens its line; the parser is
//! whitespace-based and reads both layouts.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::error::{MilpError, Result};
use crate::instance::{MilpInstance, RowSense, VarId, VarKind};

const FIELD_WIDTH: usize = 8;
const OBJ_ROW: &str = "OBJ";

/// Original names for everything that was renamed on export.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NameMap {
    pub instance: String,
    /// Exported column name to original variable name.
    pub columns: BTreeMap<String, String>,
    /// Exported row name to original constraint name.
    pub rows: BTreeMap<String, String>,
    pub metadata: BTreeMap<String, String>,
}

impl NameMap {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpsDocument {
    pub text: String,
    pub names: NameMap,
}

fn is_generated(name: &str) -> bool {
    let b = name.as_bytes();
    b.len() == FIELD_WIDTH && (b[0] == b'C' || b[0] == b'R') && b[1..].iter().all(u8::is_ascii_digit)
}

fn needs_mangling(name: &str) -> bool {
    name.is_empty()
        || name.len() > FIELD_WIDTH
        || name.chars().any(|c| c.is_whitespace() || !c.is_ascii_graphic())
        || name.starts_with(['*', '$', '\''])
        || name == OBJ_ROW
        || name == "MARKER"
        || is_generated(name)
}

fn export_name(name: &str, prefix: char, index: usize, renamed: &mut BTreeMap<String, String>) -> String {
    if needs_mangling(name) {
        let m = format!("{prefix}{index:07}");
        renamed.insert(m.clone(), name.to_string());
        m
    } else {
        name.to_string()
    }
}

/// Shortest string that parses back to exactly `v`.
fn fmt_num(v: f64) -> String {
    let plain = format!("{v}");
    let sci = format!("{v:e}");
    if sci.len() < plain.len() {
        sci
    } else {
        plain
    }
}

fn entry(out: &mut String, f1: &str, f2: &str, value: &str) {
    let line = format!("    {f1:<8}  {f2:<8}  {value}");
    out.push_str(line.trim_end());
    out.push('\n');
}

fn marker(out: &mut String, index: usize, kind: &str) {
    out.push_str(&format!(
        "    M{index:07}  'MARKER'                 '{kind}'\n"
    ));
}

/// Renders `instance` as an MPS document plus its name map.
pub fn export_mps(instance: &MilpInstance) -> MpsDocument {
    let mut names = NameMap {
        instance: instance.name().to_string(),
        metadata: instance.metadata().clone(),
        ..NameMap::default()
    };
    let cols: Vec<String> = instance
        .variables()
        .iter()
        .enumerate()
        .map(|(j, v)| export_name(&v.name, 'C', j, &mut names.columns))
        .collect();
    let rows: Vec<String> = instance
        .constraints()
        .iter()
        .enumerate()
        .map(|(i, c)| export_name(&c.name, 'R', i, &mut names.rows))
        .collect();

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); instance.num_vars()];
    for (i, c) in instance.constraints().iter().enumerate() {
        for &(v, a) in &c.terms {
            by_col[v.0].push((i, a));
        }
    }

    let mut out = String::new();
    let title = if needs_mangling(instance.name()) && instance.name().len() > FIELD_WIDTH {
        instance
            .name()
            .chars()
            .filter(char::is_ascii_graphic)
            .take(FIELD_WIDTH)
            .collect::<String>()
    } else {
        instance.name().chars().filter(char::is_ascii_graphic).collect()
    };
    out.push_str(format!("NAME          {title}").trim_end());
    out.push('\n');

    out.push_str("ROWS\n N  OBJ\n");
    for (c, name) in instance.constraints().iter().zip(&rows) {
        let s = match c.sense {
            RowSense::Le => 'L',
            RowSense::Ge => 'G',
            RowSense::Eq => 'E',
        };
        out.push_str(&format!(" {s}  {name}\n"));
    }

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut markers = 0;
    for (j, v) in instance.variables().iter().enumerate() {
        let is_int = v.kind == VarKind::Binary;
        if is_int != in_int {
            marker(&mut out, markers, if is_int { "INTORG" } else { "INTEND" });
            markers += 1;
            in_int = is_int;
        }
        entry(&mut out, &cols[j], OBJ_ROW, &fmt_num(v.objective));
        for &(i, a) in &by_col[j] {
            entry(&mut out, &cols[j], &rows[i], &fmt_num(a));
        }
    }
    if in_int {
        marker(&mut out, markers, "INTEND");
    }

    out.push_str("RHS\n");
    for (c, name) in instance.constraints().iter().zip(&rows) {
        if c.rhs != 0.0 || c.rhs.is_sign_negative() {
            entry(&mut out, "RHS", name, &fmt_num(c.rhs));
        }
    }

    out.push_str("BOUNDS\n");
    for (v, name) in instance.variables().iter().zip(&cols) {
        if v.kind == VarKind::Binary {
            out.push_str(&format!(" BV BND       {name}\n"));
        }
    }
    out.push_str("ENDATA\n");

    MpsDocument { text: out, names }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    End,
}

fn err(line: usize, message: impl Into<String>) -> MilpError {
    MilpError::Mps {
        line,
        message: message.into(),
    }
}

fn num(line: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| err(line, format!("invalid number {tok:?}")))?;
    if !v.is_finite() {
        return Err(err(line, format!("non-finite number {tok:?}")));
    }
    Ok(v)
}

struct RowDef {
    name: String,
    sense: RowSense,
    rhs: f64,
    terms: Vec<(VarId, f64)>,
}

/// Parses an MPS document. With a name map, original names and metadata
/// are restored; without one, exported names are kept.
pub fn parse_mps(text: &str, names: Option<&NameMap>) -> Result<MilpInstance> {
    let mut section = Section::None;
    let mut title = String::new();
    let mut obj_row: Option<String> = None;
    let mut rows: Vec<RowDef> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut cols: Vec<(String, bool, f64)> = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut in_int = false;

    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with([' ', '\t']) {
            section = match toks[0] {
                "NAME" => {
                    title = toks[1..].join(" ");
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => return Err(err(ln, format!("unsupported section {other}"))),
            };
            continue;
        }
        match section {
            Section::Rows => {
                let [sense, name] = toks[..] else {
                    return Err(err(ln, "expected row type and name"));
                };
                let sense = match sense {
                    "N" => {
                        if obj_row.is_some() {
                            return Err(err(ln, "multiple objective rows"));
                        }
                        obj_row = Some(name.to_string());
                        continue;
                    }
                    "L" => RowSense::Le,
                    "G" => RowSense::Ge,
                    "E" => RowSense::Eq,
                    t => return Err(err(ln, format!("unknown row type {t}"))),
                };
                if row_index.insert(name.to_string(), rows.len()).is_some() {
                    return Err(err(ln, format!("duplicate row {name}")));
                }
                rows.push(RowDef {
                    name: name.to_string(),
                    sense,
                    rhs: 0.0,
                    terms: Vec::new(),
                });
            }
            Section::Columns => {
                if toks.len() == 3 && toks[1] == "'MARKER'" {
                    in_int = match toks[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        t => return Err(err(ln, format!("unknown marker {t}"))),
                    };
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(err(ln, "expected column, row, value pairs"));
                }
                let col = toks[0];
                let j = match col_index.get(col) {
                    Some(&j) => {
                        if j + 1 != cols.len() {
                            return Err(err(ln, format!("column {col} is not contiguous")));
                        }
                        j
                    }
                    None => {
                        col_index.insert(col.to_string(), cols.len());
                        cols.push((col.to_string(), in_int, 0.0));
                        cols.len() - 1
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let v = num(ln, pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        cols[j].2 = v;
                    } else {
                        let i = *row_index
                            .get(pair[0])
                            .ok_or_else(|| err(ln, format!("unknown row {}", pair[0])))?;
                        rows[i].terms.push((VarId(j), v));
                    }
                }
            }
            Section::Rhs => {
                let body = if toks.len() % 2 == 1 { &toks[1..] } else { &toks[..] };
                for pair in body.chunks(2) {
                    if pair.len() != 2 {
                        return Err(err(ln, "expected row, value pairs"));
                    }
                    if Some(pair[0]) == obj_row.as_deref() {
                        return Err(err(ln, "objective constants are not supported"));
                    }
                    let i = *row_index
                        .get(pair[0])
                        .ok_or_else(|| err(ln, format!("unknown row {}", pair[0])))?;
                    rows[i].rhs = num(ln, pair[1])?;
                }
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(err(ln, "expected bound type, set and column"));
                }
                let j = *col_index
                    .get(toks[2])
                    .ok_or_else(|| err(ln, format!("unknown column {}", toks[2])))?;
                let value = toks.get(3).map(|t| num(ln, t)).transpose()?;
                match (toks[0], value) {
                    ("BV", _) => cols[j].1 = true,
                    ("UP", Some(u)) if u == 1.0 && cols[j].1 => {}
                    ("LO", Some(l)) if l == 0.0 => {}
                    ("PL", _) => {}
                    (t, _) => {
                        return Err(err(ln, format!("unsupported bound {t} on {}", toks[2])))
                    }
                }
            }
            Section::None | Section::End => {
                return Err(err(ln, "data outside of a section"));
            }
        }
    }
    if section != Section::End {
        return Err(err(text.lines().count(), "missing ENDATA"));
    }

    let lookup = |map: Option<&BTreeMap<String, String>>, name: &str| -> String {
        map.and_then(|m| m.get(name)).cloned().unwrap_or_else(|| name.to_string())
    };
    let mut inst = MilpInstance::new(names.map_or(title, |n| n.instance.clone()));
    for (name, binary, obj) in &cols {
        let kind = if *binary { VarKind::Binary } else { VarKind::Continuous };
        inst.add_variable(lookup(names.map(|n| &n.columns), name), kind, *obj)?;
    }
    for r in rows {
        inst.add_constraint(lookup(names.map(|n| &n.rows), &r.name), r.terms, r.sense, r.rhs)?;
    }
    if let Some(n) = names {
        inst.set_metadata(n.metadata.clone());
    }
    Ok(inst)
}

/// Sidecar path holding the [`NameMap`] for an MPS file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".names.json");
    PathBuf::from(s)
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Writes the MPS file (gzip-compressed when the path ends in `.gz`) and its
/// name-map sidecar. Returns the sidecar path.
pub fn write_mps(instance: &MilpInstance, path: &Path) -> Result<PathBuf> {
    let doc = export_mps(instance);
    let file = BufWriter::new(File::create(path)?);
    if is_gz(path) {
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(doc.text.as_bytes())?;
        enc.finish()?.flush()?;
    } else {
        let mut file = file;
        file.write_all(doc.text.as_bytes())?;
        file.flush()?;
    }
    let side = sidecar_path(path);
    std::fs::write(&side, doc.names.to_json()?)?;
    Ok(side)
}

/// Reads an MPS file, applying its sidecar name map when present.
pub fn read_mps(path: &Path) -> Result<MilpInstance> {
    let mut text = String::new();
    let file = BufReader::new(File::open(path)?);
    if is_gz(path) {
        GzDecoder::new(file).read_to_string(&mut text)?;
    } else {
        let mut file = file;
        file.read_to_string(&mut text)?;
    }
    let side = sidecar_path(path);
    let names = if side.exists() {
        let raw = std::fs::read_to_string(&side)?;
        Some(NameMap::from_json(&raw).map_err(|e| MilpError::NameMap(e.to_string()))?)
    } else {
        None
    };
    parse_mps(&text, names.as_ref())
}
