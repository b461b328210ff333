//! Provenance header shared by every output file, and the writers that place
//! it at the top of each format.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use digcount_core::fsm::TransitionTable;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::AppConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<String>,
    pub config: AppConfig,
    /// Effective transition table as `[state, event, next]` triples.
    pub table: Vec<[String; 3]>,
    /// Command-specific provenance such as resolved scenario seeds.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub extra: Value,
}

impl ArtifactHeader {
    pub fn new(command: &str, inputs: &[PathBuf], config: &AppConfig, table: &TransitionTable) -> Self {
        Self {
            tool: "digcount".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            config: config.clone(),
            table: table
                .arcs()
                .map(|(s, e, n)| [s.code().to_string(), e.code().to_string(), n.code().to_string()])
                .collect(),
            extra: Value::Null,
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("header serialises")
    }

    /// `# `-prefixed lines for text and CSV outputs.
    pub fn comment_lines(&self) -> String {
        format!(
            "# {} {} {}\n# header: {}\n",
            self.tool,
            self.version,
            self.command,
            serde_json::to_string(self).expect("header serialises")
        )
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))
}

/// Writes `path` through `body`, reporting failures as input errors.
pub fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let file = fs::File::create(path).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

/// Line-delimited JSON with a leading `{"header": ...}` record.
pub fn write_jsonl<T: Serialize>(path: &Path, header: &ArtifactHeader, records: &[T]) -> Result<()> {
    write_file(path, |out| {
        serde_json::to_writer(&mut *out, &serde_json::json!({ "header": header }))?;
        out.write_all(b"\n")?;
        for r in records {
            serde_json::to_writer(&mut *out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        out.write_all(b"\n")
    })
}

pub fn write_text(path: &Path, header: &ArtifactHeader, body: &str) -> Result<()> {
    write_file(path, |out| {
        out.write_all(header.comment_lines().as_bytes())?;
        out.write_all(body.as_bytes())
    })
}
