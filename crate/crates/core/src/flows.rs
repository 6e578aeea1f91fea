//! Settlement of commuting, business trips and deliveries.
//!
//! Each settlement is built as a list of ledger legs and committed as one
//! batch. Credits to a party are placed before debits from it, so a solvent
//! batch never passes through a negative balance. When a payer is still short,
//! [`commit_with_forced_purchase`] inserts a forced purchase from the Agency
//! reserve right before the debit.
//!
//! Commuting cases:
//!
//! | case | day                | contract         | legs                                           |
//! |------|--------------------|------------------|------------------------------------------------|
//! | i    | work from home     | `WfhAllowance(a)`| employer -> agent `Allowance a`                |
//! | ii   | charged commute    | `JobTicket`      | employer -> agent `Reimbursement p`, agent -> Agency `TripCharge p` |
//! | iii  | charged commute    | otherwise        | agent -> Agency `TripCharge p`                 |
//! | iv   | earning commute    | any              | Agency -> agent `TripEarn`, capped per day     |

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{AccountId, EventKind, Journal, Ledger, LedgerError, Memo, Transfer};
use crate::market::{forced_purchase, ForcedPurchase, MarketError, MarketRules, Order, Side};
use crate::money::{round_half_away, CoinAmount, FiatCents};
use crate::pricing::{apply_daily_cap, EarnCapState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommutePolicy {
    /// coins per work-from-home day
    WfhAllowance(CoinAmount),
    JobTicket,
    NoReimbursement,
}

/// Business trips are always reimbursed, whatever the commute policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmploymentContract {
    pub employer: AccountId,
    pub commute_policy: CommutePolicy,
}

impl EmploymentContract {
    pub fn wfh_allowance(&self) -> CoinAmount {
        match self.commute_policy {
            CommutePolicy::WfhAllowance(a) => a,
            _ => CoinAmount::ZERO,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DayKind {
    Wfh,
    /// `price` is the signed price of the day's commute
    Commute {
        price: CoinAmount,
        trip: u64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommuteSettlement {
    pub legs: Vec<Transfer>,
    /// earnings not credited because of the daily cap
    pub forfeited: CoinAmount,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("{0} has no employment contract")]
    NoContract(AccountId),
}

/// Credits an earning `|price|` subject to the daily cap.
pub fn settle_earning(agent: AccountId, earn: CoinAmount, trip: u64, cap: &mut EarnCapState, day: u32, e_max: CoinAmount) -> CommuteSettlement {
    let credited = apply_daily_cap(cap, day, earn, e_max);
    let mut legs = Vec::new();
    if credited.is_positive() {
        legs.push(Transfer::new(EventKind::TripEarn, AccountId::AGENCY, agent, credited).with_memo(Memo::Trip(trip)));
    }
    CommuteSettlement { legs, forfeited: earn.non_negative() - credited }
}

fn reimbursed_charge(agent: AccountId, employer: AccountId, price: CoinAmount, trip: u64) -> Vec<Transfer> {
    alloc::vec![
        Transfer::new(EventKind::Reimbursement, employer, agent, price).with_memo(Memo::Trip(trip)),
        Transfer::new(EventKind::TripCharge, agent, AccountId::AGENCY, price).with_memo(Memo::Trip(trip)),
    ]
}

/// Legs for one commuting day, cases (i) to (iv).
pub fn settle_commute(
    agent: AccountId,
    day_kind: DayKind,
    contract: Option<&EmploymentContract>,
    cap: &mut EarnCapState,
    day: u32,
    e_max: CoinAmount,
) -> CommuteSettlement {
    match day_kind {
        DayKind::Wfh => {
            let mut legs = Vec::new();
            if let Some(c) = contract {
                let a = c.wfh_allowance();
                if a.is_positive() {
                    legs.push(Transfer::new(EventKind::Allowance, c.employer, agent, a));
                }
            }
            CommuteSettlement { legs, forfeited: CoinAmount::ZERO }
        }
        DayKind::Commute { price, trip } if price.is_positive() => {
            let legs = match contract {
                Some(c) if c.commute_policy == CommutePolicy::JobTicket => reimbursed_charge(agent, c.employer, price, trip),
                _ => alloc::vec![Transfer::new(EventKind::TripCharge, agent, AccountId::AGENCY, price).with_memo(Memo::Trip(trip))],
            };
            CommuteSettlement { legs, forfeited: CoinAmount::ZERO }
        }
        DayKind::Commute { price, trip } if price.is_negative() => settle_earning(agent, -price, trip, cap, day, e_max),
        DayKind::Commute { .. } => CommuteSettlement::default(),
    }
}

/// Business trips follow case (ii) regardless of the commute policy.
pub fn settle_business_trip(agent: AccountId, price: CoinAmount, contract: Option<&EmploymentContract>, trip: u64) -> Result<Vec<Transfer>, FlowError> {
    if !price.is_positive() {
        return Ok(Vec::new());
    }
    let c = contract.ok_or(FlowError::NoContract(agent))?;
    Ok(reimbursed_charge(agent, c.employer, price, trip))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeliveryQuery {
    pub distance_km: f64,
    pub weight_kg: f64,
    pub volume_l: f64,
    pub customer: AccountId,
    pub merchant: AccountId,
}

/// Delivery price coefficients in coin-cents per unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeliveryCoeffs {
    pub per_km: f64,
    pub per_kg: f64,
    pub per_liter: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryModel {
    CustomerPays,
    /// customer pays the merchant this fiat flat rate
    MerchantFlatRate(FiatCents),
}

/// `round(per_km * distance + per_kg * weight + per_liter * volume)`, never negative.
pub fn delivery_price(q: &DeliveryQuery, coeffs: &DeliveryCoeffs) -> CoinAmount {
    let raw = coeffs.per_km * q.distance_km + coeffs.per_kg * q.weight_kg + coeffs.per_liter * q.volume_l;
    CoinAmount::from_cents(round_half_away(raw).max(0))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeliverySettlement {
    pub legs: Vec<Transfer>,
    /// `(payer, payee, amount)` outside the coin ledger
    pub fiat: Option<(AccountId, AccountId, FiatCents)>,
}

pub fn settle_delivery(q: &DeliveryQuery, model: DeliveryModel, price: CoinAmount, delivery: u64) -> DeliverySettlement {
    let payer = match model {
        DeliveryModel::CustomerPays => q.customer,
        DeliveryModel::MerchantFlatRate(_) => q.merchant,
    };
    let mut legs = Vec::new();
    if price.is_positive() {
        legs.push(Transfer::new(EventKind::DeliveryCharge, payer, AccountId::AGENCY, price).with_memo(Memo::Delivery(delivery)));
    }
    let fiat = match model {
        DeliveryModel::MerchantFlatRate(flat) => Some((q.customer, q.merchant, flat)),
        DeliveryModel::CustomerPays => None,
    };
    DeliverySettlement { legs, fiat }
}

/// Buy order at the price cap covering `expected_outflow - balance`, if positive.
/// Session limits are applied when the order is submitted to the book.
pub fn employer_replenishment(
    employer: AccountId,
    balance: CoinAmount,
    expected_outflow: CoinAmount,
    rules: &MarketRules,
    order_id: u64,
    day: u32,
) -> Option<Order> {
    let need = expected_outflow - balance;
    need.is_positive().then_some(Order { id: order_id, account: employer, side: Side::Buy, quantity: need, limit: rules.price_cap, day })
}

/// Market state a forced purchase is priced against.
#[derive(Clone, Copy, Debug)]
pub struct ForcedPurchaseTerms<'a> {
    pub price: FiatCents,
    pub rules: &'a MarketRules,
    /// coins the Agency can sell at the start of the batch
    pub reserve: CoinAmount,
}

/// Commits `legs` as one batch, topping up any payer whose balance would not
/// cover a debit with a forced purchase placed just before that debit. Agency
/// inflows earlier in the batch add to the reserve, outflows draw it down.
pub fn commit_with_forced_purchase<J: Journal + ?Sized>(
    ledger: &mut Ledger,
    day: u32,
    legs: &[Transfer],
    terms: ForcedPurchaseTerms<'_>,
    journal: &mut J,
) -> Result<Vec<ForcedPurchase>, FlowError> {
    let mut batch: Vec<Transfer> = Vec::with_capacity(legs.len() + 1);
    let mut purchases = Vec::new();
    let mut overlay: Vec<(AccountId, CoinAmount)> = Vec::new();
    let mut reserve = terms.reserve;
    let bal = |overlay: &mut Vec<(AccountId, CoinAmount)>, a: AccountId| -> usize {
        overlay.iter().position(|(x, _)| *x == a).unwrap_or_else(|| {
            overlay.push((a, ledger.balance(a)));
            overlay.len() - 1
        })
    };
    for leg in legs {
        if !leg.from.is_agency() {
            let i = bal(&mut overlay, leg.from);
            let shortfall = leg.amount - overlay[i].1;
            if let Some(fp) = forced_purchase(leg.from, shortfall, terms.price, terms.rules, reserve)? {
                reserve -= shortfall;
                overlay[i].1 += shortfall;
                batch.push(fp.transfer);
                purchases.push(fp);
            }
            overlay[i].1 -= leg.amount;
        } else {
            reserve -= leg.amount;
        }
        if leg.to.is_agency() {
            reserve += leg.amount;
        } else {
            let j = bal(&mut overlay, leg.to);
            overlay[j].1 += leg.amount;
        }
        batch.push(*leg);
    }
    ledger.commit(day, &batch, journal)?;
    Ok(purchases)
}
