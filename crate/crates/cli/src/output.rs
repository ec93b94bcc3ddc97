//! Output directory handling and provenance stamping.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const TOOL: &str = "engage";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: RunConfig,
}

impl Provenance {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            seed: config.seed,
            config_sha256: config.hash(),
            config: config.clone(),
        }
    }

    /// Comment lines for CSV headers.
    pub fn comments(&self) -> Vec<String> {
        vec![
            format!("tool: {} {}", self.tool, self.version),
            format!("command: {}", self.command),
            format!("seed: {}", self.seed),
            format!("config_sha256: {}", self.config_sha256),
        ]
    }
}

/// Output directory, created on first use.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(CliError::io(root))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn writer(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        Ok(BufWriter::new(File::create(&path).map_err(CliError::io(&path))?))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, text).map_err(CliError::io(&path))
    }

    /// `{"provenance": ..., <key>: value}` pretty-printed.
    pub fn write_json<T: Serialize>(&self, name: &str, provenance: &Provenance, key: &str, value: &T) -> Result<()> {
        let mut doc = serde_json::Map::new();
        doc.insert("provenance".into(), serde_json::to_value(provenance)?);
        doc.insert(key.into(), serde_json::to_value(value)?);
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// CSV with provenance comments and the given header.
    pub fn write_csv<I, R>(&self, name: &str, provenance: &Provenance, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.path(name);
        let mut out = self.writer(name)?;
        for c in provenance.comments() {
            writeln!(out, "# {c}").map_err(CliError::io(&path))?;
        }
        let mut w = csv_writer(out);
        let fail = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
        w.write_record(header).map_err(fail)?;
        for row in rows {
            w.write_record(row).map_err(fail)?;
        }
        w.flush().map_err(CliError::io(&path))
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::Writer::from_writer(out)
}

/// Reads `<key>` from a JSON document written by [`OutDir::write_json`].
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, key: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let value = doc
        .get_mut(key)
        .map(serde_json::Value::take)
        .ok_or_else(|| CliError::Data(format!("{}: missing {key:?}", path.display())))?;
    serde_json::from_value(value).map_err(|e| CliError::Data(format!("{}: {key}: {e}", path.display())))
}
