//! Per-run report: what each entry produced, skipped, or failed on.

use anyhow::Result;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub seed: u64,
    pub entries: Vec<EntryReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntryReport {
    pub id: String,
    pub status: EntryStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Ok,
    Skipped,
    Error,
}

impl RunReport {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            seed,
            entries: Vec::new(),
        }
    }

    pub fn ok(&mut self, id: &str) {
        self.entries.push(EntryReport {
            id: id.to_string(),
            status: EntryStatus::Ok,
            reason: None,
        });
    }

    pub fn skipped(&mut self, id: &str, reason: impl Into<String>) {
        self.entries.push(EntryReport {
            id: id.to_string(),
            status: EntryStatus::Skipped,
            reason: Some(reason.into()),
        });
    }

    pub fn error(&mut self, id: &str, reason: impl Into<String>) {
        self.entries.push(EntryReport {
            id: id.to_string(),
            status: EntryStatus::Error,
            reason: Some(reason.into()),
        });
    }

    /// Every entry errored (skips are not failures).
    pub fn total_failure(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.status == EntryStatus::Error)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn summarize(&self) -> String {
        let ok = self
            .entries
            .iter()
            .filter(|e| e.status == EntryStatus::Ok)
            .count();
        let skipped = self
            .entries
            .iter()
            .filter(|e| e.status == EntryStatus::Skipped)
            .count();
        let errors = self.entries.len() - ok - skipped;
        format!(
            "{}: {ok} ok, {skipped} skipped, {errors} errors",
            self.command
        )
    }
}
