//! Signed per-trip coin prices and the daily earning cap.
//!
//! A trip price is linear in distance and duration, with a congestion
//! multiplier on the distance term and division by vehicle occupancy:
//!
//! ```text
//! price = round_half_away( (rate_dist * distance * c + rate_time * duration) / o )
//! ```
//!
//! where `c` is the congestion multiplier when the mode is congestion-priced
//! (else 1) and `o` the occupancy when the mode shares cost across occupants
//! (else 1). Positive prices are charges, negative prices are earnings.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::AccountId;
use crate::money::{round_half_away, CoinAmount};

/// Position of a mode in the scenario's mode catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeIx(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Car,
    Bus,
    Rail,
    Bike,
    Walk,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub id: String,
    pub kind: ModeKind,
    /// gCO2 per person-km, used for reporting only.
    pub emission_factor: f64,
}

/// Pricing rule of one mode. Rates are signed coin-cents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRate {
    /// coin-cents per km
    pub rate_dist: f64,
    /// coin-cents per minute
    pub rate_time: f64,
    pub congestion_applies: bool,
    pub occupancy_divides: bool,
}

impl ModeRate {
    pub fn is_earning(&self) -> bool {
        self.rate_dist < 0.0 || self.rate_time < 0.0
    }

    pub fn is_charged(&self) -> bool {
        self.rate_dist > 0.0 || self.rate_time > 0.0
    }
}

/// Rates indexed by [`ModeIx`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PriceSchedule {
    pub rates: Vec<ModeRate>,
}

impl PriceSchedule {
    pub fn new(rates: Vec<ModeRate>) -> Self {
        PriceSchedule { rates }
    }

    pub fn rate(&self, mode: ModeIx) -> Result<&ModeRate, PricingError> {
        self.rates.get(mode.0).ok_or(PricingError::UnknownMode(mode))
    }

    /// Checks the per-mode sign rules.
    pub fn validate(&self) -> Result<(), PricingError> {
        for (i, r) in self.rates.iter().enumerate() {
            let m = ModeIx(i);
            if !r.rate_dist.is_finite() || !r.rate_time.is_finite() {
                return Err(PricingError::NonFiniteRate(m));
            }
            if r.is_earning() && r.is_charged() {
                return Err(PricingError::MixedSigns(m));
            }
            if r.is_earning() && (r.congestion_applies || r.occupancy_divides) {
                return Err(PricingError::ScaledEarning(m));
            }
        }
        Ok(())
    }

    pub fn has_earning_mode(&self) -> bool {
        self.rates.iter().any(ModeRate::is_earning)
    }

    pub fn has_charged_mode(&self) -> bool {
        self.rates.iter().any(ModeRate::is_charged)
    }
}

/// Congestion multiplier, 1 at free flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficState {
    pub congestion_multiplier: f64,
}

impl TrafficState {
    pub const FREE_FLOW: TrafficState = TrafficState { congestion_multiplier: 1.0 };

    /// Clamps `multiplier` into `[1, c_max]`.
    pub fn clamped(multiplier: f64, c_max: f64) -> Self {
        let m = if multiplier.is_nan() { 1.0 } else { multiplier.max(1.0).min(c_max.max(1.0)) };
        TrafficState { congestion_multiplier: m }
    }
}

impl Default for TrafficState {
    fn default() -> Self {
        Self::FREE_FLOW
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripQuery {
    pub mode: ModeIx,
    pub distance_km: f64,
    pub duration_min: f64,
    pub occupancy: u32,
    pub traffic: TrafficState,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error("unknown mode #{}", .0 .0)]
    UnknownMode(ModeIx),
    #[error("invalid trip: {0}")]
    InvalidTrip(&'static str),
    #[error("mode #{} mixes charging and earning rates", .0 .0)]
    MixedSigns(ModeIx),
    #[error("earning mode #{} must not be scaled by congestion or occupancy", .0 .0)]
    ScaledEarning(ModeIx),
    #[error("mode #{} has a non-finite rate", .0 .0)]
    NonFiniteRate(ModeIx),
}

/// Signed price of a trip (positive = charge, negative = earn).
pub fn trip_price(q: &TripQuery, s: &PriceSchedule) -> Result<CoinAmount, PricingError> {
    let rate = s.rate(q.mode)?;
    if !(q.distance_km >= 0.0 && q.distance_km.is_finite()) {
        return Err(PricingError::InvalidTrip("distance must be finite and non-negative"));
    }
    if !(q.duration_min >= 0.0 && q.duration_min.is_finite()) {
        return Err(PricingError::InvalidTrip("duration must be finite and non-negative"));
    }
    if q.distance_km == 0.0 && q.duration_min == 0.0 {
        return Err(PricingError::InvalidTrip("distance and duration are both zero"));
    }
    if q.occupancy == 0 {
        return Err(PricingError::InvalidTrip("occupancy must be at least 1"));
    }
    let c = if rate.congestion_applies { q.traffic.congestion_multiplier } else { 1.0 };
    let o = if rate.occupancy_divides { q.occupancy as f64 } else { 1.0 };
    let raw = (rate.rate_dist * q.distance_km * c + rate.rate_time * q.duration_min) / o;
    Ok(CoinAmount::from_cents(round_half_away(raw)))
}

/// Per-agent earnings already credited on `day`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EarnCapState {
    pub agent: AccountId,
    pub day: u32,
    pub earned_today: CoinAmount,
}

impl EarnCapState {
    pub fn new(agent: AccountId, day: u32) -> Self {
        EarnCapState { agent, day, earned_today: CoinAmount::ZERO }
    }

    /// Moves to `day`, resetting the counter when the day changes.
    pub fn roll_to(&mut self, day: u32) {
        if self.day != day {
            self.day = day;
            self.earned_today = CoinAmount::ZERO;
        }
    }

    pub fn headroom(&self, e_max: CoinAmount) -> CoinAmount {
        (e_max - self.earned_today).non_negative()
    }
}

/// Credits `min(earn, e_max - earned_today)` and records it in `state`.
/// Negative `earn` is treated as zero.
pub fn apply_daily_cap(state: &mut EarnCapState, day: u32, earn: CoinAmount, e_max: CoinAmount) -> CoinAmount {
    state.roll_to(day);
    let credited = earn.non_negative().min(state.headroom(e_max));
    state.earned_today += credited;
    credited
}
