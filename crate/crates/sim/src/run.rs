//! Whole-scenario runs and the summary they leave behind.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Scenario;
use crate::engine::{balance_digest, Integrity, MetricsRow, SimError, Simulation, YearRecord};
use crate::output::{self, RunFiles};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeShare {
    pub mode: String,
    pub share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalYear {
    pub year: u32,
    /// trip-weighted over the year
    pub modal_split: Vec<ModeShare>,
    pub trips: u64,
    pub wfh_days: u64,
    pub mean_price_cents: f64,
    pub volume_cents: i64,
    pub emissions_g: f64,
    pub forced_purchases: u64,
    pub cap_saturations: u64,
    pub gini_end: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub status: String,
    pub error: Option<String>,
    pub config_sha256: String,
    pub seed: u64,
    pub population: u32,
    pub days_simulated: u32,
    pub events: u64,
    pub events_sha256: String,
    pub final_balances_sha256: String,
    pub forced_purchase_fiat_cents: i64,
    pub integrity: Integrity,
    pub final_year: Option<FinalYear>,
    pub years: Vec<YearRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("output error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Accumulates the final-year KPIs from metrics rows.
#[derive(Default)]
struct YearAcc {
    year: u32,
    trips_by_mode: Vec<f64>,
    trips: u64,
    wfh: u64,
    price_sum: f64,
    days: u32,
    volume: i64,
    emissions: f64,
    forced: u64,
    saturations: u64,
    gini: f64,
}

impl YearAcc {
    fn add(&mut self, row: &MetricsRow) {
        if row.year != self.year || self.days == 0 {
            *self = YearAcc { year: row.year, trips_by_mode: vec![0.0; row.modal_split.len()], ..Default::default() };
        }
        for (acc, s) in self.trips_by_mode.iter_mut().zip(&row.modal_split) {
            *acc += s * row.trips as f64;
        }
        self.trips += row.trips;
        self.wfh += row.wfh;
        self.price_sum += row.clearing_price as f64;
        self.days += 1;
        self.volume += row.volume_cents;
        self.emissions += row.emissions_g;
        self.forced += row.forced_purchases;
        self.saturations += row.cap_saturations;
        self.gini = row.gini;
    }

    fn finish(&self, modes: &[String]) -> Option<FinalYear> {
        (self.days > 0).then(|| FinalYear {
            year: self.year,
            modal_split: modes
                .iter()
                .zip(&self.trips_by_mode)
                .map(|(m, &t)| ModeShare { mode: m.clone(), share: if self.trips > 0 { t / self.trips as f64 } else { 0.0 } })
                .collect(),
            trips: self.trips,
            wfh_days: self.wfh,
            mean_price_cents: self.price_sum / self.days as f64,
            volume_cents: self.volume,
            emissions_g: self.emissions,
            forced_purchases: self.forced,
            cap_saturations: self.saturations,
            gini_end: self.gini,
        })
    }
}

pub fn metrics_header(modes: &[String]) -> Vec<String> {
    let mut h: Vec<String> = ["day", "year", "trips", "wfh"].iter().map(|s| s.to_string()).collect();
    h.extend(modes.iter().map(|m| format!("share_{m}")));
    h.extend(
        [
            "clearing_price",
            "volume_cents",
            "circulation_cents",
            "agency_balance_cents",
            "emissions_g",
            "gini",
            "forced_purchases",
            "cap_saturations",
            "deliveries",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

fn metrics_record(r: &MetricsRow) -> Vec<String> {
    let mut v = vec![r.day.to_string(), r.year.to_string(), r.trips.to_string(), r.wfh.to_string()];
    v.extend(r.modal_split.iter().map(|s| s.to_string()));
    v.extend([
        r.clearing_price.to_string(),
        r.volume_cents.to_string(),
        r.circulation_cents.to_string(),
        r.agency_balance_cents.to_string(),
        r.emissions_g.to_string(),
        r.gini.to_string(),
        r.forced_purchases.to_string(),
        r.cap_saturations.to_string(),
        r.deliveries.to_string(),
    ]);
    v
}

/// Everything a run produced, for callers that want it in memory.
pub struct RunResult {
    pub summary: Summary,
    pub metrics: Vec<MetricsRow>,
}

/// Runs the whole horizon writing the artifacts into `dir`. On a simulation
/// error the partial outputs are flushed and the summary carries
/// `status = "failed"`; the error is returned as well.
pub fn run_to_dir(scenario: Scenario, dir: &Path) -> Result<RunResult, (RunError, Option<Box<Summary>>)> {
    let mut files = RunFiles::create(dir).map_err(|e| (RunError::Io(e), None))?;
    let modes: Vec<String> = scenario.modes.iter().map(|m| m.id.clone()).collect();
    let mut sim = Simulation::new(scenario);
    let res = drive(&mut sim, &mut files, &modes);
    let RunFiles { events, mut metrics, mut market, mut voting, .. } = files;
    let flushed = metrics.flush().and(market.flush()).and(voting.flush());
    let (status, error, metrics_rows, years, acc) = match res {
        Ok((rows, years, acc)) => ("ok", None, rows, years, acc),
        Err((e, rows, years, acc)) => ("failed", Some(e), rows, years, acc),
    };
    let (events_sha256, n_events) = match events.finish() {
        Ok(x) => x,
        Err(e) => return Err((RunError::Io(e), None)),
    };
    let summary = Summary {
        status: status.to_string(),
        error: error.as_ref().map(|e| e.to_string()),
        config_sha256: sim.scenario.config_hash.clone(),
        seed: sim.scenario.config.seed,
        population: sim.agents.len() as u32,
        days_simulated: metrics_rows.len() as u32,
        events: n_events,
        events_sha256,
        final_balances_sha256: balance_digest(sim.ledger.balances()),
        forced_purchase_fiat_cents: sim.forced_fiat_cents,
        integrity: sim.integrity.clone(),
        final_year: acc.finish(&modes),
        years,
    };
    let written = output::write_json(&dir.join(output::SUMMARY), &summary);
    if let Some(e) = error {
        return Err((e, Some(Box::new(summary))));
    }
    if let Err(e) = flushed.and(written) {
        return Err((RunError::Io(e), Some(Box::new(summary))));
    }
    Ok(RunResult { summary, metrics: metrics_rows })
}

type Partial = (Vec<MetricsRow>, Vec<YearRecord>, YearAcc);

#[allow(clippy::result_large_err)] // called once per run
fn drive(sim: &mut Simulation, files: &mut RunFiles, modes: &[String]) -> Result<Partial, (RunError, Vec<MetricsRow>, Vec<YearRecord>, YearAcc)> {
    let mut rows = Vec::new();
    let mut years = Vec::new();
    let mut acc = YearAcc::default();
    macro_rules! tryr {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(e) => return Err((RunError::from(e), rows, years, acc)),
            }
        };
    }
    tryr!(files.metrics.write_record(metrics_header(modes)));
    tryr!(files.market.write_record(["day", "clearing_price", "volume_cents", "fees_cents", "n_orders"]));
    tryr!(files.voting.write_record(["year", "kind", "id", "score", "selected"]));
    // nothing to simulate without people
    if sim.agents.is_empty() {
        return Ok((rows, years, acc));
    }
    for day in 0..sim.scenario.days() {
        let out = tryr!(sim.run_day(day, &mut files.events));
        if let Some(e) = files.events.take_error() {
            return Err((RunError::Io(e), rows, years, acc));
        }
        if let Some(m) = out.metrics {
            tryr!(files.metrics.write_record(metrics_record(&m)));
            acc.add(&m);
            rows.push(m);
        }
        if let Some(r) = out.market {
            tryr!(files.market.serialize(r));
        }
        for v in out.voting {
            tryr!(files.voting.serialize(v));
        }
        years.extend(out.year_end);
    }
    Ok((rows, years, acc))
}

/// Runs without writing files, returning the rows and the events digest.
pub fn run_in_memory(scenario: Scenario) -> Result<(Simulation, Vec<MetricsRow>, String), SimError> {
    let mut sim = Simulation::new(scenario);
    let mut journal = output::sink();
    let mut rows = Vec::new();
    if !sim.agents.is_empty() {
        for day in 0..sim.scenario.days() {
            rows.extend(sim.run_day(day, &mut journal)?.metrics);
        }
    }
    let (digest, _) = journal.finish().expect("sink never fails");
    Ok((sim, rows, digest))
}
