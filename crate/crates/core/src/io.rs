//! Plain-text formats shared by the library and the command line.
//!
//! Every file is line oriented. Lines starting with `#` are headers; those of
//! the form `# key: value` are metadata, the rest are free comments. Data
//! lines are whitespace separated numbers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::angular::AngularIndex;
use crate::dynamics::LevelTable;
use crate::error::{Error, Result};
use crate::wavepacket::{Frame, PacketInfo, ShExpansion, Symmetry};

/// Ordered `key: value` metadata taken from `#` header lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Header {
    entries: Vec<(String, String)>,
}

impl Header {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    /// Last value recorded for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn extend(&mut self, other: &Header) -> &mut Self {
        self.entries.extend(other.entries.iter().cloned());
        self
    }

    /// `# key: value` lines.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s
    }
}

/// A parsed text table: header plus numeric rows, each with its line number.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Header,
    pub rows: Vec<(usize, Vec<String>)>,
    pub path: String,
}

impl Table {
    pub fn parse(text: &str, path: &str) -> Self {
        let mut header = Header::new();
        let mut rows = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once(':') {
                    let k = k.trim();
                    if !k.is_empty() && !k.contains(char::is_whitespace) {
                        header.push(k, v.trim());
                    }
                }
                continue;
            }
            rows.push((n + 1, line.split_whitespace().map(str::to_owned).collect()));
        }
        Self {
            header,
            rows,
            path: path.to_owned(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text, &path.display().to_string()))
    }

    pub fn error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    /// Checks the column count and parses field `k` of a row.
    pub fn field<T: std::str::FromStr>(&self, row: &(usize, Vec<String>), k: usize, what: &str) -> Result<T> {
        let s = row
            .1
            .get(k)
            .ok_or_else(|| self.error(row.0, format!("missing column '{what}'")))?;
        s.parse()
            .map_err(|_| self.error(row.0, format!("cannot parse {what} from '{s}'")))
    }

    pub fn expect_columns(&self, row: &(usize, Vec<String>), n: usize) -> Result<()> {
        if row.1.len() != n {
            return Err(self.error(
                row.0,
                format!("expected {n} columns, found {}", row.1.len()),
            ));
        }
        Ok(())
    }

    fn header_value<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.header.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| self.error(0, format!("bad header value {key}: {v}"))),
        }
    }
}

/// Writes `text` to `path`, mapping failures to I/O errors.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Coefficient table: metadata headers, then `I M re im` rows.
pub fn format_coefficients(wp: &ShExpansion, extra: &Header) -> String {
    let info = wp.info();
    let mut h = Header::new();
    h.extend(extra);
    if let Some(n) = info.n {
        h.push("N", n);
    }
    if let Some(eta) = info.eta {
        h.push("eta", eta);
    }
    if let Some(sym) = info.symmetry {
        h.push("symmetry", sym);
    }
    h.push("frame", wp.frame());
    if let Some(src) = &info.source {
        h.push("source", src);
    }
    h.push("i_max", wp.i_max());
    h.push("terms", wp.len());
    let mut s = h.render();
    s.push_str("# columns: I M re im\n");
    for (k, b) in wp.iter() {
        let _ = writeln!(s, "{} {} {:.17e} {:.17e}", k.i(), k.m(), b.re, b.im);
    }
    s
}

pub fn parse_coefficients(text: &str, path: &str) -> Result<ShExpansion> {
    let t = Table::parse(text, path);
    let mut coeffs = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        t.expect_columns(row, 4)?;
        let i: u32 = t.field(row, 0, "I")?;
        let m: i32 = t.field(row, 1, "M")?;
        let idx = AngularIndex::new(i, m).map_err(|e| t.error(row.0, e.to_string()))?;
        let re: f64 = t.field(row, 2, "re")?;
        let im: f64 = t.field(row, 3, "im")?;
        coeffs.push((idx, Complex64::new(re, im)));
    }
    let frame: Frame = t.header_value("frame")?.unwrap_or(Frame::SymmetryAxisIsX);
    let info = PacketInfo {
        n: t.header_value("N")?,
        eta: t.header_value("eta")?,
        symmetry: t.header_value::<Symmetry>("symmetry")?,
        source: t.header.get("source").map(str::to_owned),
    };
    ShExpansion::from_coefficients(coeffs, frame, info)
}

pub fn read_coefficients(path: &Path) -> Result<ShExpansion> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_coefficients(&text, &path.display().to_string())
}

/// Level table: `# unit:` header, then `I energy` rows.
pub fn format_levels(levels: &LevelTable, extra: &Header) -> String {
    let mut h = Header::new();
    h.extend(extra);
    if let Some(u) = levels.unit() {
        h.push("unit", u);
    }
    let mut s = h.render();
    s.push_str("# columns: I energy\n");
    for (i, e) in levels.levels() {
        let _ = writeln!(s, "{i} {e:.17e}");
    }
    s
}

pub fn parse_levels(text: &str, path: &str) -> Result<LevelTable> {
    let t = Table::parse(text, path);
    let mut levels = BTreeMap::new();
    for row in &t.rows {
        t.expect_columns(row, 2)?;
        let i: u32 = t.field(row, 0, "I")?;
        let e: f64 = t.field(row, 1, "energy")?;
        if levels.insert(i, e).is_some() {
            return Err(t.error(row.0, format!("duplicate level I={i}")));
        }
    }
    LevelTable::new(levels, t.header.get("unit").map(str::to_owned))
        .map_err(|e| t.error(0, e.to_string()))
}

pub fn read_levels(path: &Path) -> Result<LevelTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_levels(&text, &path.display().to_string())
}
