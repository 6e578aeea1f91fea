//! Core primitives of a tradeable mobility credit ("MobilityCoin") system.
//!
//! Everything in this crate is pure bookkeeping and arithmetic: an exact
//! coin ledger, per-trip pricing with a daily earning cap, logit mode choice,
//! a regulated call-auction market, agency allocation and supply control,
//! commuter and delivery settlement, balance-weighted voting, and a small
//! per-mode supply model. The crate is `no_std` and only needs `alloc`; file
//! formats, configuration and the simulation loop live in the `mobcoin` crate.

#![no_std]
#![forbid(unsafe_code)]
// negated comparisons below are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod agency;
pub mod choice;
pub mod flows;
pub mod ledger;
pub mod market;
pub mod money;
pub mod network;
pub mod pricing;
pub mod voting;

pub use ledger::{AccountId, AccountKind, Balances, EventKind, Journal, Ledger, LedgerError, LedgerEvent, Memo, Transfer};
pub use money::{CoinAmount, FiatCents};
pub use pricing::ModeIx;
