//! Append-only egress ledger.
//!
//! On disk it is newline-delimited JSON, one record per line, with exactly
//! these fields:
//!
//! | field     | type            | meaning                                   |
//! |-----------|-----------------|-------------------------------------------|
//! | `ts`      | integer         | virtual time of the egress, ms            |
//! | `app`     | string          | app instance id                           |
//! | `node`    | string          | network node id                           |
//! | `dest`    | string          | destination host[:port]                   |
//! | `content` | string          | content key, e.g. `cropped:face`          |
//! | `kind`    | string          | data kind, e.g. `image`                   |
//! | `items`   | integer         | number of items in the delivery           |
//! | `bytes`   | integer         | serialized payload bytes                  |
//! | `blocked` | boolean         | true when nothing left the hub            |
//! | `reason`  | string or null  | `permission_denied`, `sink_unreachable`   |
//!
//! The reverse index is rebuilt from the file on open.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::ContentType;
use crate::data::ContentLabel;
use crate::operators::EgressRecord;

pub const HOUR_MS: u64 = 3_600_000;
pub use super::drivers::DAY_MS;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("ledger {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("ledger {path} line {line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("unknown group_by {0:?}")]
    UnknownGrouping(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    App,
    Content,
    Node,
    Dest,
    Hour,
    Day,
    #[default]
    None,
}

impl std::str::FromStr for GroupBy {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "app" => GroupBy::App,
            "content" => GroupBy::Content,
            "node" => GroupBy::Node,
            "dest" => GroupBy::Dest,
            "hour" => GroupBy::Hour,
            "day" => GroupBy::Day,
            "none" | "" => GroupBy::None,
            other => return Err(LedgerError::UnknownGrouping(other.to_string())),
        })
    }
}

/// Filters for [`EgressLedger::query`]. `from` is inclusive, `to` exclusive.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EgressFilter {
    pub app: Option<String>,
    /// Matches the content key (`cropped:face`), its display form
    /// (`face image`) or the bare label (`face`).
    pub content: Option<String>,
    pub from: Option<u64>,
    pub to: Option<u64>,
    #[serde(default)]
    pub group_by: GroupBy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub group: String,
    /// Items and bytes that actually left the hub.
    pub items: u64,
    pub bytes: u64,
    pub blocked_items: u64,
    pub records: u64,
}

pub fn content_display(r: &EgressRecord) -> String {
    match ContentLabel::parse_key(&r.content) {
        Ok(c) => ContentType::new(c, r.kind).display(),
        Err(_) => format!("{} {}", r.content, r.kind),
    }
}

fn content_matches(r: &EgressRecord, wanted: &str) -> bool {
    if r.content == wanted {
        return true;
    }
    match ContentLabel::parse_key(&r.content) {
        Ok(c) => c.label() == wanted || ContentType::new(c, r.kind).display() == wanted,
        Err(_) => false,
    }
}

type IndexKey = (String, String, u64);

#[derive(Default)]
pub struct EgressLedger {
    records: Vec<EgressRecord>,
    /// (app, content key, hour bucket) → record positions
    index: BTreeMap<IndexKey, Vec<usize>>,
    path: Option<PathBuf>,
    file: Option<BufWriter<File>>,
}

impl EgressLedger {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens or creates an on-disk ledger and replays its records.
    pub fn open(path: &Path) -> Result<Self, LedgerError> {
        let io_err = |source| LedgerError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut ledger = EgressLedger::default();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io_err)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let r: EgressRecord = serde_json::from_str(&line).map_err(|source| LedgerError::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    source,
                })?;
                ledger.insert(r);
            }
        } else if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io_err)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
        ledger.path = Some(path.to_path_buf());
        ledger.file = Some(BufWriter::new(file));
        Ok(ledger)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn insert(&mut self, r: EgressRecord) {
        let key = (r.app.clone(), r.content.clone(), r.ts / HOUR_MS);
        self.index.entry(key).or_default().push(self.records.len());
        self.records.push(r);
    }

    pub fn append(&mut self, r: EgressRecord) -> Result<(), LedgerError> {
        if let Some(f) = &mut self.file {
            let line = serde_json::to_string(&r).expect("records serialize");
            let res = writeln!(f, "{line}").and_then(|_| f.flush());
            res.map_err(|source| LedgerError::Io {
                path: self.path.clone().unwrap_or_default(),
                source,
            })?;
        }
        self.insert(r);
        Ok(())
    }

    pub fn records(&self) -> &[EgressRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// (app, content key, hour) → record count, straight from the index.
    pub fn buckets(&self) -> impl Iterator<Item = (&IndexKey, usize)> {
        self.index.iter().map(|(k, v)| (k, v.len()))
    }

    fn candidates(&self, f: &EgressFilter) -> Vec<&EgressRecord> {
        let in_range = |r: &EgressRecord| f.from.is_none_or(|a| r.ts >= a) && f.to.is_none_or(|b| r.ts < b);
        let hits: Vec<&EgressRecord> = match &f.app {
            Some(app) => {
                let lo = f.from.map(|a| a / HOUR_MS).unwrap_or(0);
                let hi = f.to.map(|b| b.saturating_sub(1) / HOUR_MS).unwrap_or(u64::MAX);
                let start = (app.clone(), String::new(), 0);
                let mut ids: Vec<usize> = self
                    .index
                    .range(start..)
                    .take_while(|((a, _, _), _)| a == app)
                    .filter(|((_, _, h), _)| (lo..=hi).contains(h))
                    .flat_map(|(_, ids)| ids.iter().copied())
                    .collect();
                ids.sort_unstable();
                ids.into_iter().map(|i| &self.records[i]).collect()
            }
            None => self.records.iter().collect(),
        };
        hits.into_iter()
            .filter(|r| in_range(r))
            .filter(|r| f.content.as_deref().is_none_or(|c| content_matches(r, c)))
            .collect()
    }

    pub fn select(&self, f: &EgressFilter) -> Vec<EgressRecord> {
        self.candidates(f).into_iter().cloned().collect()
    }

    /// Grouped totals; groups sort by name, time buckets chronologically.
    pub fn query(&self, f: &EgressFilter) -> Vec<ReportRow> {
        let mut groups: BTreeMap<(u64, String), ReportRow> = BTreeMap::new();
        for r in self.candidates(f) {
            let (order, group) = match f.group_by {
                GroupBy::App => (0, r.app.clone()),
                GroupBy::Content => (0, content_display(r)),
                GroupBy::Node => (0, r.node.clone()),
                GroupBy::Dest => (0, r.dest.clone()),
                GroupBy::Hour => {
                    let b = r.ts / HOUR_MS * HOUR_MS;
                    (b, b.to_string())
                }
                GroupBy::Day => {
                    let b = r.ts / DAY_MS * DAY_MS;
                    (b, b.to_string())
                }
                GroupBy::None => (0, "all".to_string()),
            };
            let row = groups.entry((order, group.clone())).or_insert_with(|| ReportRow {
                group,
                items: 0,
                bytes: 0,
                blocked_items: 0,
                records: 0,
            });
            row.records += 1;
            if r.blocked {
                row.blocked_items += r.items;
            } else {
                row.items += r.items;
                row.bytes += r.bytes;
            }
        }
        groups.into_values().collect()
    }
}

impl std::fmt::Debug for EgressLedger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EgressLedger")
            .field("records", &self.records.len())
            .field("path", &self.path)
            .finish()
    }
}
