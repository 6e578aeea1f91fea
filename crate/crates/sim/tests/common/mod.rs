#![allow(dead_code)]

use std::path::PathBuf;

use mobcoin::config::{resolve, ScenarioConfig};
use mobcoin::Scenario;

pub const REFERENCE: &str = include_str!("../../scenarios/reference.toml");

pub fn reference_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/reference.toml")
}

pub fn reference_config() -> ScenarioConfig {
    toml::from_str(REFERENCE).expect("reference scenario parses")
}

pub fn build(config: ScenarioConfig) -> Scenario {
    resolve(config, "test".into()).expect("scenario is valid")
}

pub fn reference() -> Scenario {
    build(reference_config())
}

/// Identical agents facing five indistinguishable modes: same speed, rate,
/// constant and availability, no congestion, no work-from-home.
pub fn symmetric(count: u32) -> ScenarioConfig {
    let mut c = reference_config();
    for m in &mut c.modes {
        m.rate_dist = 1.0;
        m.rate_time = 0.0;
        m.congestion_applies = false;
        m.occupancy_divides = false;
        m.congestible = false;
        m.speed_kmh = 20.0;
        m.access_min = 5.0;
        m.asc = 0.0;
        m.availability = 1.0;
        m.max_distance_km = None;
    }
    c.e_max = 0.0;
    let p = &mut c.population;
    p.count = count;
    p.distance_km = mobcoin::config::Range(8.0, 8.0);
    p.beta_time = mobcoin::config::Range(0.05, 0.05);
    p.beta_cost = mobcoin::config::Range(0.004, 0.004);
    p.asc_spread = 0.0;
    p.employed_share = 0.0;
    p.business_trip_rate = 0.0;
    c.deliveries.rate = 0.0;
    c
}

/// Trip-weighted share of `mode` over all rows.
pub fn mode_share(rows: &[mobcoin::MetricsRow], mode: usize) -> f64 {
    let trips: f64 = rows.iter().map(|r| r.trips as f64).sum();
    let used: f64 = rows.iter().map(|r| r.modal_split[mode] * r.trips as f64).sum();
    used / trips
}

/// Mean of the daily shares of `mode` over days with trips.
pub fn mean_daily_share(rows: &[mobcoin::MetricsRow], mode: usize) -> f64 {
    let days: Vec<f64> = rows.iter().filter(|r| r.trips > 0).map(|r| r.modal_split[mode]).collect();
    days.iter().sum::<f64>() / days.len() as f64
}
