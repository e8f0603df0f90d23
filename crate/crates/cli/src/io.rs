//! JSONL records and file helpers.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use procgraph_core::metrics::EvalReport;
use procgraph_core::refine::RefineTrace;
use procgraph_core::ProceduralGraph;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One document-graph pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub id: String,
    #[serde(default)]
    pub document: String,
    #[serde(default)]
    pub graph: ProceduralGraph,
}

/// A document for extraction; the graph, if present, is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub document: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedRecord {
    pub id: String,
    pub document: String,
    pub fragments: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dotlang: Option<String>,
    /// A prediction may also be given directly as a graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<ProceduralGraph>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<RefineTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub id: String,
    pub report: EvalReport,
}

/// A line that failed to decode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Decode every non-blank line; failures are returned in place.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<Result<T, LineError>>, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| LineError {
            line: i + 1,
            message: e.to_string(),
        }));
    }
    Ok(out)
}

/// Raw non-blank lines, untouched.
pub fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(read_text(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_owned)
        .collect())
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in rows {
        let line = serde_json::to_string(r).map_err(|e| CliError::Json(e.to_string()))?;
        writeln!(w, "{}", line).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_lines(path: &Path, lines: &[String]) -> Result<(), CliError> {
    let mut body = lines.join("\n");
    if !lines.is_empty() {
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(value).map_err(|e| CliError::Json(e.to_string()))?;
    fs::write(path, body + "\n").map_err(|e| CliError::io(path, e))
}

pub fn require_file(path: &Path) -> Result<PathBuf, CliError> {
    if path.is_file() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::Usage(format!("no such file: {}", path.display())))
    }
}
