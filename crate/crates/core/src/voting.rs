//! Year-end infrastructure voting weighted by remaining coin balance.
//!
//! Two ballot forms are supported. Split ballots spread a voter's weight over
//! several measures; measures are then ranked by score and picked greedily
//! within the budget. Bundle ballots back exactly one pre-composed bundle and
//! the bundle with the largest total weight wins.
//!
//! Weights are integer coin-cents and split fractions are integer parts per
//! million, so scores are exact integers and rankings cannot flip under
//! positive integer rescaling of the weights.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{AccountId, AccountKind, Balances};
use crate::money::CoinAmount;
use crate::network::{NetworkError, NetworkState};
use crate::pricing::ModeIx;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Change {
    TravelTimeFactor(f64),
    CapacityFactor(f64),
    Availability(bool),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub mode: ModeIx,
    pub change: Change,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub id: u32,
    pub label: String,
    /// budget units
    pub cost: i64,
    pub effects: Vec<Effect>,
}

impl Measure {
    pub fn validate(&self) -> Result<(), VotingError> {
        if self.cost < 0 {
            return Err(VotingError::InvalidMeasure(self.id, "cost must be non-negative"));
        }
        for e in &self.effects {
            if let Change::TravelTimeFactor(f) | Change::CapacityFactor(f) = e.change {
                if !(f > 0.0 && f.is_finite()) {
                    return Err(VotingError::InvalidMeasure(self.id, "factors must be positive"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bundle {
    pub id: u32,
    pub measures: Vec<u32>,
}

/// A fraction of one vote in parts per million.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Share(pub u32);

impl Share {
    pub const WHOLE: Share = Share(1_000_000);

    /// Rounds `f` (clamped into `[0, 1]`) to the nearest ppm.
    pub fn from_fraction(f: f64) -> Share {
        let f = if f.is_nan() { 0.0 } else { f.clamp(0.0, 1.0) };
        Share(libm::round(f * 1e6) as u32)
    }

    pub fn fraction(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BallotChoice {
    Split(Vec<(u32, Share)>),
    Bundle(u32),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub voter: AccountId,
    pub weight: CoinAmount,
    pub choice: BallotChoice,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// weight equals balance
    #[default]
    Linear,
    /// weight equals `min(balance, cap)`
    Capped(CoinAmount),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VotingError {
    #[error("unknown measure {0}")]
    UnknownMeasure(u32),
    #[error("unknown bundle {0}")]
    UnknownBundle(u32),
    #[error("ballot of {0} splits more than one whole vote")]
    OverSplit(AccountId),
    #[error("measure {0}: {1}")]
    InvalidMeasure(u32, &'static str),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Voting weight per person, ascending person index.
pub fn voting_weights(balances: &Balances, rule: WeightRule) -> Vec<(AccountId, CoinAmount)> {
    balances
        .iter()
        .filter(|(a, _)| a.kind == AccountKind::Person)
        .map(|(a, b)| {
            let w = b.non_negative();
            let w = match rule {
                WeightRule::Linear => w,
                WeightRule::Capped(cap) => w.min(cap.non_negative()),
            };
            (a, w)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitTally {
    /// Exact score per measure (weight cents times ppm), ascending measure id.
    pub scores: Vec<(u32, u128)>,
    /// Selected measure ids in selection order.
    pub selected: Vec<u32>,
}

impl SplitTally {
    /// Score of `id` in coins (`score / 1e6 / 100`).
    pub fn score_coins(&self, id: u32) -> f64 {
        self.scores.iter().find(|(m, _)| *m == id).map(|(_, s)| *s as f64 / 1e8).unwrap_or(0.0)
    }
}

/// Ranks measures by split score (ties by ascending id) and selects each
/// measure with a positive score whose cost still fits in the remaining budget.
pub fn tally_split(ballots: &[Ballot], measures: &[Measure], budget: i64) -> Result<SplitTally, VotingError> {
    let mut scores: BTreeMap<u32, u128> = measures.iter().map(|m| (m.id, 0)).collect();
    for b in ballots {
        let BallotChoice::Split(parts) = &b.choice else { continue };
        let total: u64 = parts.iter().map(|(_, s)| s.0 as u64).sum();
        if total > Share::WHOLE.0 as u64 {
            return Err(VotingError::OverSplit(b.voter));
        }
        let w = b.weight.non_negative().cents() as u128;
        for &(id, share) in parts {
            let slot = scores.get_mut(&id).ok_or(VotingError::UnknownMeasure(id))?;
            *slot += w * share.0 as u128;
        }
    }
    let mut ranked: Vec<(u32, u128)> = scores.iter().map(|(&k, &v)| (k, v)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut spent = 0i64;
    let mut selected = Vec::new();
    for (id, score) in ranked {
        if score == 0 {
            break;
        }
        let cost = measures.iter().find(|m| m.id == id).map(|m| m.cost).unwrap_or(0);
        if spent + cost <= budget {
            spent += cost;
            selected.push(id);
        }
    }
    Ok(SplitTally { scores: scores.into_iter().collect(), selected })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BundleTally {
    /// Total weight cents per bundle, ascending bundle id.
    pub totals: Vec<(u32, u128)>,
    /// `None` when no weight was cast.
    pub winner: Option<u32>,
}

/// Plurality over bundles by total weight; ties go to the lowest bundle id.
pub fn tally_bundle(ballots: &[Ballot], bundles: &[Bundle]) -> Result<BundleTally, VotingError> {
    let mut totals: BTreeMap<u32, u128> = bundles.iter().map(|b| (b.id, 0)).collect();
    for b in ballots {
        let BallotChoice::Bundle(id) = b.choice else { continue };
        let slot = totals.get_mut(&id).ok_or(VotingError::UnknownBundle(id))?;
        *slot += b.weight.non_negative().cents() as u128;
    }
    let mut winner: Option<(u32, u128)> = None;
    for (&id, &t) in &totals {
        if t > 0 && winner.is_none_or(|(_, wt)| t > wt) {
            winner = Some((id, t));
        }
    }
    Ok(BundleTally { totals: totals.into_iter().collect(), winner: winner.map(|w| w.0) })
}

/// Applies the effects of `selected` to a copy of `network`. Factors
/// multiply and availability changes combine so that any enabling effect
/// wins. Measures are applied in ascending id, so the floating-point result
/// does not depend on the order of `selected`.
pub fn apply_measures(network: &NetworkState, selected: &[&Measure]) -> Result<NetworkState, VotingError> {
    let mut next = network.clone();
    let mut availability: BTreeMap<ModeIx, bool> = BTreeMap::new();
    let mut ordered: Vec<&Measure> = selected.to_vec();
    ordered.sort_by_key(|m| m.id);
    for m in ordered {
        for e in &m.effects {
            let supply = next.supply_mut(e.mode)?;
            match e.change {
                Change::TravelTimeFactor(f) => supply.travel_time_factor *= f,
                Change::CapacityFactor(f) => supply.capacity_factor *= f,
                Change::Availability(on) => {
                    let slot = availability.entry(e.mode).or_insert(false);
                    *slot |= on;
                }
            }
        }
    }
    for (mode, on) in availability {
        next.supply_mut(mode)?.available = on;
    }
    Ok(next)
}
