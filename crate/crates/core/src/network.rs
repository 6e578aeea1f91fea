//! Per-mode supply: travel times, capacities and the resulting traffic state.
//!
//! Congestible modes follow a volume-delay curve:
//!
//! ```text
//! t = base_time * travel_time_factor * (1 + alpha * (demand / (capacity * capacity_factor))^beta)
//! ```
//!
//! Other modes run at `base_time * travel_time_factor` regardless of demand.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pricing::{ModeIx, TrafficState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSupply {
    /// minutes for the reference relation
    pub base_time: f64,
    /// trips per day
    pub capacity: f64,
    pub congestible: bool,
    pub travel_time_factor: f64,
    pub capacity_factor: f64,
    pub alpha: f64,
    pub beta: f64,
    pub available: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    /// indexed by [`ModeIx`]
    pub modes: Vec<ModeSupply>,
    /// upper bound of the congestion multiplier
    pub c_max: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("unknown mode #{}", .0 .0)]
    UnknownMode(ModeIx),
    #[error("mode #{ix}: {msg}", ix = .0 .0, msg = .1)]
    Invalid(ModeIx, &'static str),
}

impl NetworkState {
    pub fn supply(&self, mode: ModeIx) -> Result<&ModeSupply, NetworkError> {
        self.modes.get(mode.0).ok_or(NetworkError::UnknownMode(mode))
    }

    pub fn supply_mut(&mut self, mode: ModeIx) -> Result<&mut ModeSupply, NetworkError> {
        self.modes.get_mut(mode.0).ok_or(NetworkError::UnknownMode(mode))
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        for (i, m) in self.modes.iter().enumerate() {
            let ix = ModeIx(i);
            if !(m.travel_time_factor > 0.0 && m.capacity_factor > 0.0) {
                return Err(NetworkError::Invalid(ix, "factors must be positive"));
            }
            if !(m.base_time >= 0.0 && m.base_time.is_finite()) {
                return Err(NetworkError::Invalid(ix, "base_time must be finite and non-negative"));
            }
            if m.congestible && !(m.capacity > 0.0) {
                return Err(NetworkError::Invalid(ix, "congestible modes need positive capacity"));
            }
            if !(m.alpha >= 0.0 && m.beta >= 0.0) {
                return Err(NetworkError::Invalid(ix, "alpha and beta must be non-negative"));
            }
        }
        if !(self.c_max >= 1.0) {
            return Err(NetworkError::Invalid(ModeIx(usize::MAX), "c_max must be at least 1"));
        }
        Ok(())
    }

    /// Ratio of congested to free-flow time, `1 + alpha (V/C)^beta`, unclamped.
    pub fn delay_ratio(&self, mode: ModeIx, demand: f64) -> Result<f64, NetworkError> {
        let s = self.supply(mode)?;
        if !s.congestible || demand <= 0.0 {
            return Ok(1.0);
        }
        let vc = demand / (s.capacity * s.capacity_factor);
        Ok(1.0 + s.alpha * libm::pow(vc, s.beta))
    }

    /// Travel time on the reference relation at `demand` trips per day.
    pub fn congested_time(&self, mode: ModeIx, demand: f64) -> Result<f64, NetworkError> {
        let s = self.supply(mode)?;
        Ok(s.base_time * s.travel_time_factor * self.delay_ratio(mode, demand)?)
    }

    /// Congestion multiplier for pricing, clamped into `[1, c_max]`.
    pub fn traffic_state(&self, mode: ModeIx, demand: f64) -> Result<TrafficState, NetworkError> {
        Ok(TrafficState::clamped(self.delay_ratio(mode, demand)?, self.c_max))
    }
}
