//! Agency policy: yearly allocation, supply steering and year-end expiry.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{AccountId, AccountKind, Balances, EventKind, Transfer};
use crate::market::largest_remainder;
use crate::money::{round_half_away, CoinAmount};
use crate::pricing::ModeIx;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationPolicy {
    pub base_per_person: CoinAmount,
    pub low_access_bonus: CoinAmount,
    /// persons with fewer available modes than this receive the bonus
    pub low_access_threshold: usize,
    pub period_days: u32,
    /// return remaining person balances to the Agency after voting
    pub expire_at_year_end: bool,
}

impl AllocationPolicy {
    pub fn entitlement(&self, available_modes: usize) -> CoinAmount {
        if available_modes < self.low_access_threshold {
            self.base_per_person + self.low_access_bonus
        } else {
            self.base_per_person
        }
    }
}

/// Proportional controller on one mode's share of trips.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupplyController {
    /// target share per mode, indexed by [`ModeIx`]
    pub target_split: Vec<f64>,
    pub gain: f64,
    pub max_rel_change: f64,
    pub controlled_mode: ModeIx,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgencyError {
    #[error("invalid split: {0}")]
    InvalidSplit(&'static str),
    #[error("invalid controller: {0}")]
    InvalidController(&'static str),
}

fn check_split(split: &[f64]) -> Result<(), AgencyError> {
    if split.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(AgencyError::InvalidSplit("shares must lie in [0, 1]"));
    }
    let sum: f64 = split.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(AgencyError::InvalidSplit("shares must sum to 1"));
    }
    Ok(())
}

impl SupplyController {
    pub fn validate(&self) -> Result<(), AgencyError> {
        check_split(&self.target_split)?;
        if !(self.gain >= 0.0 && self.gain.is_finite()) {
            return Err(AgencyError::InvalidController("gain must be non-negative"));
        }
        if !(self.max_rel_change > 0.0 && self.max_rel_change <= 1.0) {
            return Err(AgencyError::InvalidController("max_rel_change must lie in (0, 1]"));
        }
        if self.controlled_mode.0 >= self.target_split.len() {
            return Err(AgencyError::InvalidController("controlled mode has no target share"));
        }
        Ok(())
    }
}

/// Sum of individual entitlements for `population` given as
/// `(person, number of available modes)`.
pub fn total_entitlement(population: &[(AccountId, usize)], policy: &AllocationPolicy) -> CoinAmount {
    population.iter().map(|&(_, n)| policy.entitlement(n)).sum()
}

/// Allocation legs distributing exactly `year_total` in proportion to the
/// individual entitlements (largest remainder in coin-cents, ties to the
/// earlier person).
pub fn allocate(population: &[(AccountId, usize)], policy: &AllocationPolicy, year_total: CoinAmount) -> Vec<Transfer> {
    let weights: Vec<i64> = population.iter().map(|&(_, n)| policy.entitlement(n).cents()).collect();
    let shares = largest_remainder(year_total.non_negative().cents(), &weights);
    population
        .iter()
        .zip(shares)
        .filter(|(_, s)| *s > 0)
        .map(|(&(acc, _), s)| Transfer::new(EventKind::Allocation, AccountId::AGENCY, acc, CoinAmount::from_cents(s)))
        .collect()
}

/// Next year's total supply:
/// `prev * (1 - gain * (observed - target))` on the controlled mode, clamped to
/// `prev * (1 +/- max_rel_change)`.
pub fn adjust_supply(observed_split: &[f64], controller: &SupplyController, prev_total: CoinAmount) -> Result<CoinAmount, AgencyError> {
    check_split(observed_split)?;
    let m = controller.controlled_mode.0;
    let observed = *observed_split.get(m).ok_or(AgencyError::InvalidController("controlled mode missing from split"))?;
    let target = *controller.target_split.get(m).ok_or(AgencyError::InvalidController("controlled mode has no target share"))?;
    let prev = prev_total.cents() as f64;
    let gap = observed - target;
    if gap == 0.0 {
        return Ok(prev_total);
    }
    let raw = round_half_away(prev * (1.0 - controller.gain * gap));
    let lo = round_half_away(prev * (1.0 - controller.max_rel_change));
    let hi = round_half_away(prev * (1.0 + controller.max_rel_change));
    Ok(CoinAmount::from_cents(raw.max(lo).min(hi).max(0)))
}

/// Returns every positive person balance to the Agency.
pub fn year_end_expiry(balances: &Balances) -> Vec<Transfer> {
    balances
        .iter()
        .filter(|(a, b)| a.kind == AccountKind::Person && b.is_positive())
        .map(|(a, b)| Transfer::new(EventKind::Expiry, a, AccountId::AGENCY, b))
        .collect()
}
