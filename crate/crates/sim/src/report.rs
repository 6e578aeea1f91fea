//! Human-readable summary of a finished run directory.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use crate::output::{METRICS, SUMMARY};
use crate::run::Summary;

/// Last metrics row as `(header, values)`.
pub fn last_metrics_row(dir: &Path) -> Result<(Vec<String>, Vec<String>)> {
    let mut rdr = csv::Reader::from_path(dir.join(METRICS)).with_context(|| format!("reading {METRICS}"))?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut last = None;
    for rec in rdr.records() {
        last = Some(rec?);
    }
    let last = last.map(|r| r.iter().map(str::to_string).collect()).unwrap_or_default();
    Ok((header, last))
}

pub fn render(dir: &Path) -> Result<String> {
    let text = std::fs::read_to_string(dir.join(SUMMARY)).with_context(|| format!("reading {SUMMARY}"))?;
    let s: Summary = serde_json::from_str(&text).with_context(|| format!("parsing {SUMMARY}"))?;
    let (header, last) = last_metrics_row(dir)?;
    let mut out = String::new();
    writeln!(out, "status            {}", s.status)?;
    if let Some(e) = &s.error {
        writeln!(out, "error             {e}")?;
    }
    writeln!(out, "seed              {}", s.seed)?;
    writeln!(out, "config sha256     {}", s.config_sha256)?;
    writeln!(out, "population        {}", s.population)?;
    writeln!(out, "days              {}", s.days_simulated)?;
    writeln!(out, "events            {}", s.events)?;
    writeln!(out, "integrity         {}", if s.integrity.all() { "pass" } else { "FAIL" })?;
    if let Some(fy) = &s.final_year {
        writeln!(out)?;
        writeln!(out, "final year {}", fy.year)?;
        writeln!(out, "{:<12} {:>10} {:>10}", "mode", "year", "last day")?;
        for ms in &fy.modal_split {
            let col = format!("share_{}", ms.mode);
            let last_day = header.iter().position(|h| *h == col).and_then(|i| last.get(i)).cloned().unwrap_or_default();
            let last_day = last_day.parse::<f64>().map(|v| format!("{v:.4}")).unwrap_or(last_day);
            writeln!(out, "{:<12} {:>10.4} {:>10}", ms.mode, ms.share, last_day)?;
        }
        writeln!(out, "trips             {}", fy.trips)?;
        writeln!(out, "wfh days          {}", fy.wfh_days)?;
        writeln!(out, "mean price        {:.2} cents/coin", fy.mean_price_cents)?;
        writeln!(out, "traded            {:.2} coins", fy.volume_cents as f64 / 100.0)?;
        writeln!(out, "emissions         {:.1} kg", fy.emissions_g / 1000.0)?;
        writeln!(out, "forced purchases  {}", fy.forced_purchases)?;
        writeln!(out, "cap saturations   {}", fy.cap_saturations)?;
        writeln!(out, "gini (year end)   {:.4}", fy.gini_end)?;
    }
    if !s.years.is_empty() {
        writeln!(out)?;
        writeln!(out, "{:<6} {:>16} {:>16}  measures", "year", "allocated", "next")?;
        for y in &s.years {
            let ms: Vec<String> = y.selected_measures.iter().map(u32::to_string).collect();
            writeln!(
                out,
                "{:<6} {:>16.2} {:>16.2}  {}",
                y.year,
                y.allocation_cents as f64 / 100.0,
                y.next_allocation_cents as f64 / 100.0,
                if ms.is_empty() { "-".to_string() } else { ms.join(",") }
            )?;
        }
    }
    Ok(out)
}
