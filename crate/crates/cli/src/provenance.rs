use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rotwave::io::Header;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL: &str = concat!("rotwave ", env!("CARGO_PKG_VERSION"));

/// Every setting that can change an output byte, in insertion order.
///
/// Paths enter through the content hash of the file they name, so moving an
/// input or the output directory leaves the hash unchanged. The worker count
/// is not recorded at all.
#[derive(Debug, Clone)]
pub struct RunConfig {
    command: String,
    entries: Vec<(String, String)>,
    out_dir: PathBuf,
}

impl RunConfig {
    pub fn new(command: &str, out_dir: &Path, format_version: u32, seed: u64) -> Self {
        let mut c = Self {
            command: command.to_owned(),
            entries: Vec::new(),
            out_dir: out_dir.to_owned(),
        };
        c.set("format-version", format_version);
        c.set("seed", seed);
        c
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_owned(), value.to_string()));
        self
    }

    pub fn set_opt<T: ToString>(&mut self, key: &str, value: Option<T>) -> &mut Self {
        match value {
            Some(v) => self.set(key, v),
            None => self.set(key, "none"),
        }
    }

    /// Records an input by content.
    pub fn input(&mut self, key: &str, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path).map_err(|e| rotwave::Error::Io {
            path: path.to_owned(),
            source: e,
        })?;
        self.set(key, format!("sha256:{}", hex::encode(Sha256::digest(&bytes))));
        Ok(bytes)
    }

    fn canonical(&self) -> String {
        let mut s = format!("tool: {TOOL}\ncommand: {}\n", self.command);
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}: {v}");
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of the canonical echo.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))[..16].to_owned()
    }

    /// Provenance lines carried by every artifact.
    pub fn header(&self) -> Header {
        let mut h = Header::new();
        h.push("tool", TOOL)
            .push("command", &self.command)
            .push("config-hash", self.hash());
        h
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Writes `<stem>.config.txt` next to the artifacts.
    pub fn write_echo(&self, stem: &str) -> Result<PathBuf, CliError> {
        let mut text = self.canonical();
        let _ = writeln!(text, "config-hash: {}", self.hash());
        self.write(&format!("{stem}.config.txt"), text.as_bytes())
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        std::fs::write(&p, bytes).map_err(|e| rotwave::Error::Io {
            path: p.clone(),
            source: e,
        })?;
        Ok(p)
    }
}

/// Strips a trailing extension so artifacts can share a stem.
pub fn stem(name: &str) -> &str {
    match name.rsplit_once('.') {
        Some((s, ext)) if !s.is_empty() && !ext.contains('/') => s,
        _ => name,
    }
}
