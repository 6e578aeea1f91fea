//! Exact monetary units.
//!
//! Coins are held in coin-cents (1 coin = 100 coin-cents); fiat is held in
//! fiat-cents. Market prices are quoted in fiat-cents per whole coin.

use core::fmt;
use core::iter::Sum;
use core::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Coin-cents per coin.
pub const CENTS_PER_COIN: i64 = 100;

/// Rounds to the nearest integer, halves away from zero.
pub fn round_half_away(x: f64) -> i64 {
    libm::round(x) as i64
}

/// A signed amount of MobilityCoins in coin-cents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoinAmount(i64);

impl CoinAmount {
    pub const ZERO: CoinAmount = CoinAmount(0);

    pub const fn from_cents(cents: i64) -> Self {
        CoinAmount(cents)
    }

    /// Whole coins, exact.
    pub const fn from_whole_coins(coins: i64) -> Self {
        CoinAmount(coins * CENTS_PER_COIN)
    }

    /// Fractional coins, rounded half away from zero to the nearest cent.
    pub fn from_coins(coins: f64) -> Self {
        CoinAmount(round_half_away(coins * CENTS_PER_COIN as f64))
    }

    pub const fn cents(self) -> i64 {
        self.0
    }

    pub fn coins(self) -> f64 {
        self.0 as f64 / CENTS_PER_COIN as f64
    }

    pub const fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub const fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub const fn abs(self) -> Self {
        CoinAmount(self.0.abs())
    }

    pub fn checked_add(self, rhs: Self) -> Option<Self> {
        self.0.checked_add(rhs.0).map(CoinAmount)
    }

    pub fn checked_sub(self, rhs: Self) -> Option<Self> {
        self.0.checked_sub(rhs.0).map(CoinAmount)
    }

    /// `max(self, 0)`.
    pub fn non_negative(self) -> Self {
        CoinAmount(self.0.max(0))
    }
}

impl Add for CoinAmount {
    type Output = CoinAmount;
    fn add(self, rhs: Self) -> Self {
        CoinAmount(self.0 + rhs.0)
    }
}

impl Sub for CoinAmount {
    type Output = CoinAmount;
    fn sub(self, rhs: Self) -> Self {
        CoinAmount(self.0 - rhs.0)
    }
}

impl Neg for CoinAmount {
    type Output = CoinAmount;
    fn neg(self) -> Self {
        CoinAmount(-self.0)
    }
}

impl AddAssign for CoinAmount {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl SubAssign for CoinAmount {
    fn sub_assign(&mut self, rhs: Self) {
        self.0 -= rhs.0;
    }
}

impl Sum for CoinAmount {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        CoinAmount(iter.map(|c| c.0).sum())
    }
}

fn fmt_cents(cents: i64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let sign = if cents < 0 { "-" } else { "" };
    let abs = cents.unsigned_abs();
    write!(f, "{}{}.{:02}", sign, abs / 100, abs % 100)
}

impl fmt::Display for CoinAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_cents(self.0, f)
    }
}

/// Fiat money in cents. Also used for prices in fiat-cents per coin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FiatCents(pub i64);

impl FiatCents {
    pub const ZERO: FiatCents = FiatCents(0);

    pub const fn cents(self) -> i64 {
        self.0
    }

    /// Fiat value of `coins` at `self` fiat-cents per coin, rounded half away from zero.
    pub fn value_of(self, coins: CoinAmount) -> FiatCents {
        let num = coins.cents() as i128 * self.0 as i128;
        FiatCents(div_round_half_away(num, CENTS_PER_COIN as i128) as i64)
    }
}

impl Add for FiatCents {
    type Output = FiatCents;
    fn add(self, rhs: Self) -> Self {
        FiatCents(self.0 + rhs.0)
    }
}

impl Sub for FiatCents {
    type Output = FiatCents;
    fn sub(self, rhs: Self) -> Self {
        FiatCents(self.0 - rhs.0)
    }
}

impl AddAssign for FiatCents {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl fmt::Display for FiatCents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_cents(self.0, f)
    }
}

/// Integer division rounding half away from zero. `den` must be positive.
pub(crate) fn div_round_half_away(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    let q = num / den;
    let r = num % den;
    if 2 * r.abs() >= den {
        q + num.signum()
    } else {
        q
    }
}
