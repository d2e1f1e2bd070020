//! Local diagnostic log: one JSON object per line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Debug,
    Info,
    Warn,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub ts: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app: Option<String>,
    pub node: String,
    pub level: Level,
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(ts: u64, node: &str, level: Level, code: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            ts,
            app: None,
            node: node.to_string(),
            level,
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn warn(ts: u64, node: &str, code: &str, message: impl Into<String>) -> Self {
        Self::new(ts, node, Level::Warn, code, message)
    }
}

#[derive(Default)]
pub struct DiagnosticLog {
    lines: Vec<String>,
    file: Option<BufWriter<File>>,
}

impl DiagnosticLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_file(path: &Path) -> std::io::Result<Self> {
        let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        Ok(DiagnosticLog {
            lines: Vec::new(),
            file: Some(BufWriter::new(file)),
        })
    }

    pub fn push<T: Serialize>(&mut self, entry: &T) {
        let line = serde_json::to_string(entry).expect("diagnostics serialize");
        if let Some(f) = &mut self.file {
            // the in-memory copy stays authoritative if the disk write fails
            let _ = writeln!(f, "{line}");
        }
        self.lines.push(line);
    }

    pub fn extend(&mut self, app: &str, diags: impl IntoIterator<Item = Diagnostic>) {
        for mut d in diags {
            d.app.get_or_insert_with(|| app.to_string());
            self.push(&d);
        }
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn flush(&mut self) {
        if let Some(f) = &mut self.file {
            let _ = f.flush();
        }
    }
}

impl std::fmt::Debug for DiagnosticLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiagnosticLog").field("lines", &self.lines.len()).finish()
    }
}
