//! Append-only coin ledger.
//!
//! Every coin movement is a [`LedgerEvent`] transferring a strictly positive
//! amount from one account to another. The Agency account is the only mint and
//! sink and is the only account allowed to go negative, so the sum of all
//! balances is zero after every committed event.
//!
//! Multi-leg settlements are committed with [`Ledger::commit`], which checks
//! every leg against a scratch copy first and then applies all legs or none.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::money::{CoinAmount, FiatCents};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AccountKind {
    Person,
    Employer,
    Merchant,
    Agency,
}

/// Ordered by `(kind, index)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AccountId {
    pub kind: AccountKind,
    pub index: u32,
}

impl AccountId {
    pub const AGENCY: AccountId = AccountId { kind: AccountKind::Agency, index: 0 };

    pub const fn person(index: u32) -> Self {
        AccountId { kind: AccountKind::Person, index }
    }

    pub const fn employer(index: u32) -> Self {
        AccountId { kind: AccountKind::Employer, index }
    }

    pub const fn merchant(index: u32) -> Self {
        AccountId { kind: AccountKind::Merchant, index }
    }

    pub fn is_agency(self) -> bool {
        self.kind == AccountKind::Agency
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            AccountKind::Person => "person",
            AccountKind::Employer => "employer",
            AccountKind::Merchant => "merchant",
            AccountKind::Agency => "agency",
        };
        write!(f, "{}:{}", tag, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed account id `{0}`")]
pub struct ParseAccountError(pub String);

impl FromStr for AccountId {
    type Err = ParseAccountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseAccountError(s.into());
        let (tag, idx) = s.split_once(':').ok_or_else(bad)?;
        let index: u32 = idx.parse().map_err(|_| bad())?;
        let kind = match tag {
            "person" => AccountKind::Person,
            "employer" => AccountKind::Employer,
            "merchant" => AccountKind::Merchant,
            "agency" if index == 0 => AccountKind::Agency,
            _ => return Err(bad()),
        };
        Ok(AccountId { kind, index })
    }
}

impl Serialize for AccountId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AccountId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Allocation,
    TripCharge,
    TripEarn,
    Trade,
    TransactionFee,
    Reimbursement,
    Allowance,
    DeliveryCharge,
    ForcedPurchase,
    Penalty,
    Expiry,
}

/// Structured tag attached to an event. Serialized as `""`, `"trip:12"`,
/// `"order:5"`, `"measure:3"`, `"delivery:7"` or `"penalty:220"` (the
/// fiat-cents surcharge paid on a forced purchase).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Memo {
    #[default]
    None,
    Trip(u64),
    Order(u64),
    Measure(u32),
    Delivery(u64),
    Penalty(FiatCents),
}

impl fmt::Display for Memo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Memo::None => Ok(()),
            Memo::Trip(id) => write!(f, "trip:{id}"),
            Memo::Order(id) => write!(f, "order:{id}"),
            Memo::Measure(id) => write!(f, "measure:{id}"),
            Memo::Delivery(id) => write!(f, "delivery:{id}"),
            Memo::Penalty(fiat) => write!(f, "penalty:{}", fiat.0),
        }
    }
}

impl FromStr for Memo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Ok(Memo::None);
        }
        let (tag, val) = s.split_once(':').ok_or_else(|| String::from(s))?;
        let bad = |_| String::from(s);
        Ok(match tag {
            "trip" => Memo::Trip(val.parse().map_err(bad)?),
            "order" => Memo::Order(val.parse().map_err(bad)?),
            "measure" => Memo::Measure(val.parse().map_err(bad)?),
            "delivery" => Memo::Delivery(val.parse().map_err(bad)?),
            "penalty" => Memo::Penalty(FiatCents(val.parse().map_err(bad)?)),
            _ => return Err(s.into()),
        })
    }
}

impl Serialize for Memo {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Memo {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(|s| serde::de::Error::custom(alloc::format!("malformed memo `{s}`")))
    }
}

/// One committed coin movement. Serialized with exactly the fields
/// `seq, day, kind, from, to, amount_cents, memo`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub seq: u64,
    pub day: u32,
    pub kind: EventKind,
    pub from: AccountId,
    pub to: AccountId,
    #[serde(rename = "amount_cents")]
    pub amount: CoinAmount,
    pub memo: Memo,
}

/// A settlement leg that has not been sequenced yet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Transfer {
    pub kind: EventKind,
    pub from: AccountId,
    pub to: AccountId,
    pub amount: CoinAmount,
    pub memo: Memo,
}

impl Transfer {
    pub fn new(kind: EventKind, from: AccountId, to: AccountId, amount: CoinAmount) -> Self {
        Transfer { kind, from, to, amount, memo: Memo::None }
    }

    pub fn with_memo(mut self, memo: Memo) -> Self {
        self.memo = memo;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("{account} holds {balance} but {needed} is debited")]
    InsufficientBalance { account: AccountId, balance: CoinAmount, needed: CoinAmount },
    #[error("expected seq {expected}, found {found}")]
    SequenceGap { expected: u64, found: u64 },
    #[error("negative balance for {account} at seq {seq}")]
    NegativeBalanceAt { seq: u64, account: AccountId },
    #[error("event amount must be strictly positive, got {0}")]
    NonPositiveAmount(CoinAmount),
    #[error("invalid account {0}")]
    InvalidAccount(AccountId),
}

/// Receives committed events in sequence order.
pub trait Journal {
    fn record(&mut self, event: &LedgerEvent);
}

impl Journal for Vec<LedgerEvent> {
    fn record(&mut self, event: &LedgerEvent) {
        self.push(*event);
    }
}

/// Discards events.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullJournal;

impl Journal for NullJournal {
    fn record(&mut self, _event: &LedgerEvent) {}
}

/// Dense balance table for all account kinds.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Balances {
    persons: Vec<i64>,
    employers: Vec<i64>,
    merchants: Vec<i64>,
    agency: i64,
}

impl Balances {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, account: AccountId) -> CoinAmount {
        let i = account.index as usize;
        CoinAmount::from_cents(match account.kind {
            AccountKind::Person => self.persons.get(i).copied().unwrap_or(0),
            AccountKind::Employer => self.employers.get(i).copied().unwrap_or(0),
            AccountKind::Merchant => self.merchants.get(i).copied().unwrap_or(0),
            AccountKind::Agency => self.agency,
        })
    }

    fn slot(&mut self, account: AccountId) -> &mut i64 {
        let i = account.index as usize;
        let table = match account.kind {
            AccountKind::Person => &mut self.persons,
            AccountKind::Employer => &mut self.employers,
            AccountKind::Merchant => &mut self.merchants,
            AccountKind::Agency => return &mut self.agency,
        };
        if table.len() <= i {
            table.resize(i + 1, 0);
        }
        &mut table[i]
    }

    fn add(&mut self, account: AccountId, delta: i64) {
        *self.slot(account) += delta;
    }

    /// All tracked accounts in `(kind, index)` order.
    pub fn iter(&self) -> impl Iterator<Item = (AccountId, CoinAmount)> + '_ {
        fn table(v: &[i64], make: fn(u32) -> AccountId) -> impl Iterator<Item = (AccountId, CoinAmount)> + '_ {
            v.iter().enumerate().map(move |(i, &c)| (make(i as u32), CoinAmount::from_cents(c)))
        }
        table(&self.persons, AccountId::person)
            .chain(table(&self.employers, AccountId::employer))
            .chain(table(&self.merchants, AccountId::merchant))
            .chain(core::iter::once((AccountId::AGENCY, CoinAmount::from_cents(self.agency))))
    }

    pub fn persons(&self) -> &[i64] {
        &self.persons
    }

    pub fn to_map(&self) -> BTreeMap<AccountId, CoinAmount> {
        self.iter().collect()
    }

    /// Coins held outside the Agency, i.e. `-(Agency balance)`.
    pub fn circulation(&self) -> CoinAmount {
        CoinAmount::from_cents(-self.agency)
    }
}

/// Sum of every balance, Agency included, is exactly zero.
pub fn conservation_check(balances: &Balances) -> bool {
    balances.iter().map(|(_, c)| c.cents() as i128).sum::<i128>() == 0
}

fn validate_account(account: AccountId) -> Result<(), LedgerError> {
    if account.kind == AccountKind::Agency && account.index != 0 {
        return Err(LedgerError::InvalidAccount(account));
    }
    Ok(())
}

/// Single-writer ledger state: balances plus the next sequence number.
#[derive(Clone, Debug, Default)]
pub struct Ledger {
    balances: Balances,
    next_seq: u64,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn balances(&self) -> &Balances {
        &self.balances
    }

    pub fn balance(&self, account: AccountId) -> CoinAmount {
        self.balances.get(account)
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Appends an already sequenced event.
    pub fn append_event(&mut self, event: &LedgerEvent) -> Result<(), LedgerError> {
        if event.seq != self.next_seq {
            return Err(LedgerError::SequenceGap { expected: self.next_seq, found: event.seq });
        }
        if !event.amount.is_positive() {
            return Err(LedgerError::NonPositiveAmount(event.amount));
        }
        validate_account(event.from)?;
        validate_account(event.to)?;
        let balance = self.balances.get(event.from);
        if !event.from.is_agency() && balance < event.amount {
            return Err(LedgerError::InsufficientBalance { account: event.from, balance, needed: event.amount });
        }
        self.balances.add(event.from, -event.amount.cents());
        self.balances.add(event.to, event.amount.cents());
        self.next_seq += 1;
        Ok(())
    }

    /// Checks that `legs` can be applied in order without any non-Agency
    /// balance dropping below zero. Does not mutate.
    pub fn check_batch(&self, legs: &[Transfer]) -> Result<(), LedgerError> {
        let mut overlay: Vec<(AccountId, i64)> = Vec::new();
        let current = |overlay: &mut Vec<(AccountId, i64)>, acc: AccountId| -> usize {
            match overlay.iter().position(|(a, _)| *a == acc) {
                Some(i) => i,
                None => {
                    overlay.push((acc, self.balances.get(acc).cents()));
                    overlay.len() - 1
                }
            }
        };
        for leg in legs {
            if !leg.amount.is_positive() {
                return Err(LedgerError::NonPositiveAmount(leg.amount));
            }
            validate_account(leg.from)?;
            validate_account(leg.to)?;
            let fi = current(&mut overlay, leg.from);
            if !leg.from.is_agency() && overlay[fi].1 < leg.amount.cents() {
                return Err(LedgerError::InsufficientBalance { account: leg.from, balance: CoinAmount::from_cents(overlay[fi].1), needed: leg.amount });
            }
            overlay[fi].1 -= leg.amount.cents();
            let ti = current(&mut overlay, leg.to);
            overlay[ti].1 += leg.amount.cents();
        }
        Ok(())
    }

    /// Atomically sequences and applies a batch of legs on `day`, handing each
    /// resulting event to `journal`. On error nothing is applied.
    pub fn commit<J: Journal + ?Sized>(&mut self, day: u32, legs: &[Transfer], journal: &mut J) -> Result<(), LedgerError> {
        self.check_batch(legs)?;
        for leg in legs {
            let event = LedgerEvent { seq: self.next_seq, day, kind: leg.kind, from: leg.from, to: leg.to, amount: leg.amount, memo: leg.memo };
            self.balances.add(leg.from, -leg.amount.cents());
            self.balances.add(leg.to, leg.amount.cents());
            self.next_seq += 1;
            journal.record(&event);
        }
        Ok(())
    }
}

/// Rebuilds balances from a complete event stream starting at seq 0.
pub fn replay<'a, I>(events: I) -> Result<Balances, LedgerError>
where
    I: IntoIterator<Item = &'a LedgerEvent>,
{
    let mut ledger = Ledger::new();
    for ev in events {
        ledger.append_event(ev).map_err(|e| match e {
            LedgerError::InsufficientBalance { account, .. } => LedgerError::NegativeBalanceAt { seq: ev.seq, account },
            other => other,
        })?;
    }
    Ok(ledger.balances)
}
