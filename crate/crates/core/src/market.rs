//! Regulated coin market: a periodic uniform-price call auction.
//!
//! Orders are collected into an [`OrderBook`] through [`OrderBook::submit`],
//! which applies the agency's rules: per-account session quantity limits,
//! lot rounding, limit-price clamping into `[floor, cap]` and reservation of
//! the coins backing each sell order.
//!
//! [`clear_session`] then picks one price for the whole book:
//!
//! 1. candidate prices are every order limit plus the floor and the cap;
//! 2. at price `p`, demand is the buy quantity with `limit >= p`, supply the
//!    sell quantity with `limit <= p`, and executable volume `min(demand, supply)`;
//! 3. the price with the largest executable volume wins, ties going to the
//!    price closest to the previous clearing price and then to the lower price;
//! 4. the long side is rationed pro rata by quantity in whole lots with
//!    largest-remainder rounding, remaining ties going to the lower order id.
//!
//! The transaction fee `round(fee_rate * volume)` is paid in coins by the
//! sellers to the Agency, split pro rata over their fills.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{AccountId, EventKind, Memo, Transfer};
use crate::money::{round_half_away, CoinAmount, FiatCents};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Buy,
    Sell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Order {
    pub id: u64,
    pub account: AccountId,
    pub side: Side,
    pub quantity: CoinAmount,
    /// fiat-cents per coin
    pub limit: FiatCents,
    pub day: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketRules {
    pub price_floor: FiatCents,
    pub price_cap: FiatCents,
    /// per account per session
    pub buy_limit: CoinAmount,
    /// per account per session
    pub sell_limit: CoinAmount,
    pub fee_rate: f64,
    /// surcharge on forced purchases
    pub penalty_rate: f64,
    pub session_every: u32,
    /// trading granularity
    pub lot: CoinAmount,
}

impl MarketRules {
    pub fn validate(&self) -> Result<(), MarketError> {
        let bad = MarketError::InvalidRules;
        if self.price_floor.cents() <= 0 {
            return Err(bad("price_floor must be positive"));
        }
        if self.price_floor > self.price_cap {
            return Err(bad("price_floor exceeds price_cap"));
        }
        if self.buy_limit.is_negative() || self.sell_limit.is_negative() {
            return Err(bad("quantity limits must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.fee_rate) {
            return Err(bad("fee_rate must lie in [0, 1)"));
        }
        if !(self.penalty_rate >= 0.0 && self.penalty_rate.is_finite()) {
            return Err(bad("penalty_rate must be non-negative"));
        }
        if self.session_every == 0 {
            return Err(bad("session_every must be at least 1"));
        }
        if !self.lot.is_positive() {
            return Err(bad("lot must be positive"));
        }
        Ok(())
    }

    pub fn clamp_price(&self, p: FiatCents) -> FiatCents {
        p.max(self.price_floor).min(self.price_cap)
    }

    /// Coins a seller must hold beyond `quantity` to cover its worst-case fee share.
    pub fn fee_headroom(&self, quantity: CoinAmount) -> CoinAmount {
        if self.fee_rate > 0.0 {
            CoinAmount::from_cents(libm::ceil(self.fee_rate * quantity.cents() as f64) as i64 + 1)
        } else {
            CoinAmount::ZERO
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("unknown account {0}")]
    UnknownAccount(AccountId),
    #[error("sell by {account} needs {needed} but only {available} is unreserved")]
    UnbackedSell { account: AccountId, available: CoinAmount, needed: CoinAmount },
    #[error("order quantity is zero after applying limits and lot size")]
    EmptyOrder,
    #[error("order quantity must be positive")]
    NonPositiveQuantity,
    #[error("agency reserve {reserve} cannot cover shortfall {shortfall}")]
    EmptyAgencyReserve { reserve: CoinAmount, shortfall: CoinAmount },
    #[error("invalid market rules: {0}")]
    InvalidRules(&'static str),
}

/// Orders of one session plus the per-account bookkeeping the rules need.
#[derive(Clone, Debug, Default)]
pub struct OrderBook {
    orders: Vec<Order>,
    submitted: BTreeMap<(AccountId, Side), CoinAmount>,
    reserved: BTreeMap<AccountId, CoinAmount>,
}

impl OrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn orders(&self) -> &[Order] {
        &self.orders
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn reserved(&self, account: AccountId) -> CoinAmount {
        self.reserved.get(&account).copied().unwrap_or_default()
    }

    /// Validates, clips and books `order`. `balance` is the account's current
    /// coin balance, or `None` if the account does not exist; for the Agency
    /// it is the coin reserve available for open-market sales. Agency orders
    /// are exempt from the per-account limits and the fee headroom.
    pub fn submit(&mut self, order: Order, rules: &MarketRules, balance: Option<CoinAmount>) -> Result<Order, MarketError> {
        if !order.quantity.is_positive() {
            return Err(MarketError::NonPositiveQuantity);
        }
        let balance = balance.ok_or(MarketError::UnknownAccount(order.account))?;
        let mut quantity = order.quantity;
        if !order.account.is_agency() {
            let cap = match order.side {
                Side::Buy => rules.buy_limit,
                Side::Sell => rules.sell_limit,
            };
            let used = self.submitted.get(&(order.account, order.side)).copied().unwrap_or_default();
            quantity = quantity.min((cap - used).non_negative());
        }
        let lot = rules.lot.cents();
        quantity = CoinAmount::from_cents(quantity.cents() / lot * lot);
        if quantity.is_zero() {
            return Err(MarketError::EmptyOrder);
        }
        if order.side == Side::Sell {
            let needed = if order.account.is_agency() { quantity } else { quantity + rules.fee_headroom(quantity) };
            let available = balance - self.reserved(order.account);
            if available < needed {
                return Err(MarketError::UnbackedSell { account: order.account, available, needed });
            }
            *self.reserved.entry(order.account).or_default() += needed;
        }
        *self.submitted.entry((order.account, order.side)).or_default() += quantity;
        let accepted = Order { quantity, limit: rules.clamp_price(order.limit), ..order };
        self.orders.push(accepted);
        Ok(accepted)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fill {
    pub order_id: u64,
    pub account: AccountId,
    pub side: Side,
    pub quantity: CoinAmount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearingResult {
    pub clearing_price: FiatCents,
    pub volume: CoinAmount,
    /// One entry per order, ascending order id; unfilled orders have quantity 0.
    pub fills: Vec<Fill>,
    /// Coin fee owed by each filled sell order, ascending order id.
    pub fees: Vec<(u64, AccountId, CoinAmount)>,
    pub fees_collected: CoinAmount,
    /// Net fiat movement per account, ascending account id.
    pub fiat_transfers: Vec<(AccountId, FiatCents)>,
}

impl ClearingResult {
    fn no_trade(orders: &[Order], price: FiatCents) -> Self {
        let mut fills: Vec<Fill> = orders.iter().map(|o| Fill { order_id: o.id, account: o.account, side: o.side, quantity: CoinAmount::ZERO }).collect();
        fills.sort_by_key(|f| f.order_id);
        ClearingResult {
            clearing_price: price,
            volume: CoinAmount::ZERO,
            fills,
            fees: Vec::new(),
            fees_collected: CoinAmount::ZERO,
            fiat_transfers: Vec::new(),
        }
    }

    /// Ledger legs realising the session: seller-to-buyer trades (matched in
    /// ascending order id on both sides) followed by seller fees to the Agency.
    pub fn transfers(&self) -> Vec<Transfer> {
        let mut out = Vec::new();
        let buys: Vec<&Fill> = self.fills.iter().filter(|f| f.side == Side::Buy && f.quantity.is_positive()).collect();
        let sells: Vec<&Fill> = self.fills.iter().filter(|f| f.side == Side::Sell && f.quantity.is_positive()).collect();
        let (mut bi, mut si) = (0, 0);
        let mut buy_left = buys.first().map(|f| f.quantity).unwrap_or_default();
        let mut sell_left = sells.first().map(|f| f.quantity).unwrap_or_default();
        while bi < buys.len() && si < sells.len() {
            let q = buy_left.min(sell_left);
            if buys[bi].account != sells[si].account {
                out.push(Transfer::new(EventKind::Trade, sells[si].account, buys[bi].account, q).with_memo(Memo::Order(buys[bi].order_id)));
            }
            buy_left -= q;
            sell_left -= q;
            if buy_left.is_zero() {
                bi += 1;
                buy_left = buys.get(bi).map(|f| f.quantity).unwrap_or_default();
            }
            if sell_left.is_zero() {
                si += 1;
                sell_left = sells.get(si).map(|f| f.quantity).unwrap_or_default();
            }
        }
        for &(id, account, fee) in &self.fees {
            if fee.is_positive() && !account.is_agency() {
                out.push(Transfer::new(EventKind::TransactionFee, account, AccountId::AGENCY, fee).with_memo(Memo::Order(id)));
            }
        }
        out
    }
}

/// Executable volume at every candidate price, as `(price, volume)`.
fn executable_curve(orders: &[Order], rules: &MarketRules) -> Vec<(FiatCents, i64)> {
    let mut buys: Vec<(FiatCents, i64)> = Vec::new();
    let mut sells: Vec<(FiatCents, i64)> = Vec::new();
    for o in orders {
        match o.side {
            Side::Buy => buys.push((o.limit, o.quantity.cents())),
            Side::Sell => sells.push((o.limit, o.quantity.cents())),
        }
    }
    // buys by descending limit, sells by ascending limit, with running totals
    buys.sort_by_key(|b| core::cmp::Reverse(b.0));
    sells.sort_by_key(|s| s.0);
    let prefix = |v: &mut Vec<(FiatCents, i64)>| {
        let mut acc = 0;
        for e in v.iter_mut() {
            acc += e.1;
            e.1 = acc;
        }
    };
    prefix(&mut buys);
    prefix(&mut sells);

    let mut candidates: Vec<FiatCents> = orders.iter().map(|o| o.limit).collect();
    candidates.push(rules.price_floor);
    candidates.push(rules.price_cap);
    candidates.sort();
    candidates.dedup();

    candidates
        .into_iter()
        .map(|p| {
            let nb = buys.partition_point(|e| e.0 >= p);
            let demand = if nb == 0 { 0 } else { buys[nb - 1].1 };
            let ns = sells.partition_point(|e| e.0 <= p);
            let supply = if ns == 0 { 0 } else { sells[ns - 1].1 };
            (p, demand.min(supply))
        })
        .collect()
}

/// Splits `total` over `weights` in proportion, rounding with largest
/// remainders; equal remainders favour earlier entries.
pub(crate) fn largest_remainder(total: i64, weights: &[i64]) -> Vec<i64> {
    let sum: i128 = weights.iter().map(|&w| w as i128).sum();
    if sum == 0 {
        return alloc::vec![0; weights.len()];
    }
    let mut shares = Vec::with_capacity(weights.len());
    let mut rems = Vec::with_capacity(weights.len());
    let mut assigned: i128 = 0;
    for (i, &w) in weights.iter().enumerate() {
        let num = total as i128 * w as i128;
        let q = num / sum;
        shares.push(q as i64);
        rems.push((num % sum, i));
        assigned += q;
    }
    let extra = (total as i128 - assigned) as usize;
    // stable on index for equal remainders
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rems.iter().take(extra) {
        shares[i] += 1;
    }
    shares
}

/// Clears one session. `orders` are assumed to have passed [`OrderBook::submit`].
pub fn clear_session(orders: &[Order], rules: &MarketRules, prev_price: FiatCents) -> ClearingResult {
    let fallback = rules.clamp_price(prev_price);
    if orders.is_empty() {
        return ClearingResult::no_trade(orders, fallback);
    }
    let curve = executable_curve(orders, rules);
    let mut best: Option<(FiatCents, i64)> = None;
    for &(p, vol) in &curve {
        let better = match best {
            None => true,
            Some((bp, bv)) => {
                let dist = (p.cents() - prev_price.cents()).abs();
                let bdist = (bp.cents() - prev_price.cents()).abs();
                vol > bv || (vol == bv && (dist < bdist || (dist == bdist && p < bp)))
            }
        };
        if better {
            best = Some((p, vol));
        }
    }
    let (price, volume) = best.expect("candidate set contains floor and cap");
    if volume == 0 {
        return ClearingResult::no_trade(orders, fallback);
    }

    let mut sorted: Vec<&Order> = orders.iter().collect();
    sorted.sort_by_key(|o| o.id);
    let eligible = |o: &Order| match o.side {
        Side::Buy => o.limit >= price,
        Side::Sell => o.limit <= price,
    };
    let demand: i64 = sorted.iter().filter(|o| o.side == Side::Buy && eligible(o)).map(|o| o.quantity.cents()).sum();
    let supply: i64 = sorted.iter().filter(|o| o.side == Side::Sell && eligible(o)).map(|o| o.quantity.cents()).sum();

    let mut filled: Vec<i64> = alloc::vec![0; sorted.len()];
    for side in [Side::Buy, Side::Sell] {
        let side_total = if side == Side::Buy { demand } else { supply };
        let idx: Vec<usize> = (0..sorted.len()).filter(|&i| sorted[i].side == side && eligible(sorted[i])).collect();
        if side_total == volume {
            for &i in &idx {
                filled[i] = sorted[i].quantity.cents();
            }
            continue;
        }
        let lot = rules.lot.cents();
        let unit = if idx.iter().all(|&i| sorted[i].quantity.cents() % lot == 0) && volume % lot == 0 { lot } else { 1 };
        let weights: Vec<i64> = idx.iter().map(|&i| sorted[i].quantity.cents() / unit).collect();
        let shares = largest_remainder(volume / unit, &weights);
        for (k, &i) in idx.iter().enumerate() {
            filled[i] = shares[k] * unit;
        }
    }

    let fills: Vec<Fill> =
        sorted.iter().zip(&filled).map(|(o, &q)| Fill { order_id: o.id, account: o.account, side: o.side, quantity: CoinAmount::from_cents(q) }).collect();

    let fee_total = round_half_away(rules.fee_rate * volume as f64);
    let seller_fills: Vec<&Fill> = fills.iter().filter(|f| f.side == Side::Sell && f.quantity.is_positive()).collect();
    let fee_shares = largest_remainder(fee_total, &seller_fills.iter().map(|f| f.quantity.cents()).collect::<Vec<_>>());
    let fees: Vec<(u64, AccountId, CoinAmount)> =
        seller_fills.iter().zip(&fee_shares).map(|(f, &c)| (f.order_id, f.account, CoinAmount::from_cents(c))).collect();

    let mut fiat: BTreeMap<AccountId, FiatCents> = BTreeMap::new();
    for f in fills.iter().filter(|f| f.quantity.is_positive()) {
        let value = price.value_of(f.quantity);
        let e = fiat.entry(f.account).or_default();
        match f.side {
            Side::Buy => *e = *e - value,
            Side::Sell => *e += value,
        }
    }

    ClearingResult {
        clearing_price: price,
        volume: CoinAmount::from_cents(volume),
        fills,
        fees,
        fees_collected: CoinAmount::from_cents(fee_total),
        fiat_transfers: fiat.into_iter().collect(),
    }
}

/// Immediate purchase from the Agency reserve for a balance shortfall.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForcedPurchase {
    pub transfer: Transfer,
    /// total fiat paid, surcharge included
    pub fiat_cost: FiatCents,
    pub surcharge: FiatCents,
}

/// Sells `shortfall` coins from the Agency reserve to `account` at
/// `current_price * (1 + penalty_rate)`. A zero shortfall is a no-op.
pub fn forced_purchase(
    account: AccountId,
    shortfall: CoinAmount,
    current_price: FiatCents,
    rules: &MarketRules,
    reserve: CoinAmount,
) -> Result<Option<ForcedPurchase>, MarketError> {
    if !shortfall.is_positive() {
        return Ok(None);
    }
    if reserve < shortfall {
        return Err(MarketError::EmptyAgencyReserve { reserve, shortfall });
    }
    let base = current_price.value_of(shortfall);
    let fiat_cost = FiatCents(round_half_away(shortfall.cents() as f64 * current_price.cents() as f64 * (1.0 + rules.penalty_rate) / 100.0));
    let surcharge = fiat_cost - base;
    Ok(Some(ForcedPurchase {
        transfer: Transfer::new(EventKind::ForcedPurchase, AccountId::AGENCY, account, shortfall).with_memo(Memo::Penalty(surcharge)),
        fiat_cost,
        surcharge,
    }))
}
