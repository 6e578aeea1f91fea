//! Rebuilding balances from an event file and checking it against its run.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use mobcoin_core::ledger::{conservation_check, Balances, Ledger};
use mobcoin_core::LedgerEvent;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::balance_digest;
use crate::output::SUMMARY;
use crate::run::Summary;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {source}")]
    Ledger { line: usize, source: mobcoin_core::LedgerError },
    #[error("balances do not sum to zero")]
    Conservation,
    #[error("{what} does not match {SUMMARY}: expected {expected}, found {found}")]
    SummaryMismatch { what: &'static str, expected: String, found: String },
}

impl ReplayError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ReplayError::Io(..) => 2,
            _ => 3,
        }
    }
}

#[derive(Debug)]
pub struct ReplayReport {
    pub balances: Balances,
    pub events: u64,
    pub events_sha256: String,
    /// whether a summary was found next to the events and matched
    pub summary_checked: bool,
}

/// Replays `path` from scratch. Sequence numbers, per-event non-negativity and
/// conservation are always checked. When a `summary.json` sits in the same
/// directory the file digest, event count and final balances must match it.
pub fn replay_file(path: &Path) -> Result<ReplayReport, ReplayError> {
    let file = File::open(path).map_err(|e| ReplayError::Io(path.display().to_string(), e))?;
    let mut reader = BufReader::new(file);
    let mut ledger = Ledger::new();
    let mut hasher = Sha256::new();
    let mut buf = String::new();
    let mut line = 0usize;
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf).map_err(|e| ReplayError::Io(path.display().to_string(), e))?;
        if n == 0 {
            break;
        }
        line += 1;
        hasher.update(buf.as_bytes());
        let event: LedgerEvent = serde_json::from_str(buf.trim_end()).map_err(|e| ReplayError::Malformed { line, message: e.to_string() })?;
        ledger.append_event(&event).map_err(|source| ReplayError::Ledger { line, source })?;
    }
    if !conservation_check(ledger.balances()) {
        return Err(ReplayError::Conservation);
    }
    let events_sha256 = hex::encode(hasher.finalize());
    let events = ledger.next_seq();
    let summary_path = path.parent().map(|p| p.join(SUMMARY));
    let mut summary_checked = false;
    if let Some(sp) = summary_path.filter(|p| p.exists()) {
        let text = std::fs::read_to_string(&sp).map_err(|e| ReplayError::Io(sp.display().to_string(), e))?;
        let summary: Summary = serde_json::from_str(&text).map_err(|e| ReplayError::Malformed { line: 0, message: format!("{SUMMARY}: {e}") })?;
        let check = |what: &'static str, expected: String, found: String| {
            if expected == found {
                Ok(())
            } else {
                Err(ReplayError::SummaryMismatch { what, expected, found })
            }
        };
        check("event count", summary.events.to_string(), events.to_string())?;
        check("events digest", summary.events_sha256.clone(), events_sha256.clone())?;
        check("final balances", summary.final_balances_sha256.clone(), balance_digest(ledger.balances()))?;
        summary_checked = true;
    }
    Ok(ReplayReport { balances: ledger.balances().clone(), events, events_sha256, summary_checked })
}
