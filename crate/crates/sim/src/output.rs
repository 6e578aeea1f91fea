//! Artifact writers: the event journal, CSV tables and the run summary.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use mobcoin_core::{Journal, LedgerEvent};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const EVENTS: &str = "events.jsonl";
pub const METRICS: &str = "metrics.csv";
pub const MARKET: &str = "market.csv";
pub const VOTING: &str = "voting.csv";
pub const SUMMARY: &str = "summary.json";

/// JSON-lines journal that hashes exactly the bytes it writes. The first IO
/// error is kept and reported by [`EventWriter::finish`].
pub struct EventWriter<W: Write> {
    out: W,
    hasher: Sha256,
    line: Vec<u8>,
    count: u64,
    error: Option<io::Error>,
}

impl<W: Write> EventWriter<W> {
    pub fn new(out: W) -> Self {
        EventWriter { out, hasher: Sha256::new(), line: Vec::with_capacity(160), count: 0, error: None }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn take_error(&mut self) -> Option<io::Error> {
        self.error.take()
    }

    /// Flushes and returns the hex digest of everything written.
    pub fn finish(mut self) -> io::Result<(String, u64)> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok((hex::encode(self.hasher.finalize()), self.count))
    }
}

impl<W: Write> Journal for EventWriter<W> {
    fn record(&mut self, event: &LedgerEvent) {
        if self.error.is_some() {
            return;
        }
        self.line.clear();
        serde_json::to_writer(&mut self.line, event).expect("events serialize to JSON");
        self.line.push(b'\n');
        self.hasher.update(&self.line);
        self.count += 1;
        if let Err(e) = self.out.write_all(&self.line) {
            self.error = Some(e);
        }
    }
}

/// Journal that only counts and hashes, for runs without an output directory.
pub fn sink() -> EventWriter<io::Sink> {
    EventWriter::new(io::sink())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketRow {
    pub day: u32,
    pub clearing_price: i64,
    pub volume_cents: i64,
    pub fees_cents: i64,
    pub n_orders: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VotingRow {
    pub year: u32,
    pub kind: String,
    pub id: u32,
    /// coins of weight behind the item
    pub score: f64,
    pub selected: bool,
}

/// Open handles for one run directory.
pub struct RunFiles {
    pub dir: PathBuf,
    pub events: EventWriter<BufWriter<File>>,
    pub metrics: csv::Writer<File>,
    pub market: csv::Writer<File>,
    pub voting: csv::Writer<File>,
}

impl RunFiles {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let events = EventWriter::new(BufWriter::with_capacity(1 << 20, File::create(dir.join(EVENTS))?));
        // headers are written explicitly so that empty tables still have them
        let open =
            |name: &str| -> io::Result<csv::Writer<File>> { Ok(csv::WriterBuilder::new().has_headers(false).from_writer(File::create(dir.join(name))?)) };
        Ok(RunFiles { dir: dir.to_path_buf(), events, metrics: open(METRICS)?, market: open(MARKET)?, voting: open(VOTING)? })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}
