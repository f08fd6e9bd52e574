//! Report envelope, rendering and atomic persistence.

use crate::config::Format;
use crate::LabError;
use serde::Serialize;
use std::fs;
use std::path::Path;
use std::process;

/// Versioned wrapper around a command's payload. The body is what the
/// determinism contract covers; `runtime_ms` is allowed to vary.
#[derive(Debug, Serialize)]
pub struct Envelope {
    pub report_version: u32,
    pub command: String,
    pub runtime_ms: u64,
    pub body: serde_json::Value,
}

impl Envelope {
    pub fn new(command: &str, runtime_ms: u64, body: serde_json::Value) -> Self {
        Envelope {
            report_version: 1,
            command: command.into(),
            runtime_ms,
            body,
        }
    }

    pub fn render(&self, format: Format) -> Result<String, LabError> {
        match format {
            Format::Json => {
                let mut text = serde_json::to_string_pretty(self)
                    .map_err(|e| LabError::Config(format!("serialize: {e}")))?;
                text.push('\n');
                Ok(text)
            }
            Format::Csv => Ok(to_csv(&self.body)),
        }
    }
}

fn quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.into()
    }
}

fn scalar(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::String(s) => quote(s),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, value: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        serde_json::Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, out);
            }
        }
        other => out.push((prefix.into(), scalar(other))),
    }
}

/// One header line and one data line: nested objects become dotted columns,
/// arrays become indexed ones. serde_json keeps object keys sorted, so the
/// column order is deterministic.
pub fn to_csv(body: &serde_json::Value) -> String {
    let mut cells = Vec::new();
    flatten("", body, &mut cells);
    let header: Vec<&str> = cells.iter().map(|(k, _)| k.as_str()).collect();
    let row: Vec<&str> = cells.iter().map(|(_, v)| v.as_str()).collect();
    format!("{}\n{}\n", header.join(","), row.join(","))
}

/// Writes via a sibling temp file and rename, so readers never observe a
/// partial report.
pub fn write_atomic(path: &Path, content: &str) -> Result<(), LabError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let staged = path.with_extension(format!("tmp-{}", process::id()));
    fs::write(&staged, content)?;
    let outcome = fs::rename(&staged, path);
    if outcome.is_err() {
        let _ = fs::remove_file(&staged);
    }
    outcome?;
    // Ensure the rename target's directory entry survives a crash.
    if let Some(dir) = dir {
        if let Ok(handle) = fs::File::open(dir) {
            let _ = handle.sync_all();
        }
    }
    Ok(())
}
