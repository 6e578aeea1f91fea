//! Pre-trip mode choice as a multinomial logit.
//!
//! Utility of option `m`:
//!
//! ```text
//! U_m = asc_m - beta_time * t_m - beta_cost * (coin_price_m * market_price)
//! ```
//!
//! with `coin_price_m` in coins and `market_price` in fiat-cents per coin, so
//! earning modes (negative coin price) receive a utility bonus. Choice
//! probabilities are `exp(mu U_m) / sum_k exp(mu U_k)`.
//!
//! Sampling is reproducible across platforms: a 53-bit integer draw is compared
//! against cumulative probabilities quantized to multiples of `2^-53`.

use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::AccountId;
use crate::money::{CoinAmount, FiatCents};
use crate::pricing::ModeIx;

/// One mode an agent can use for their reference trip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeOption {
    pub mode: ModeIx,
    pub distance_km: f64,
    /// free-flow door-to-door minutes
    pub base_minutes: f64,
    /// alternative-specific constant
    pub asc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub account: AccountId,
    /// Ordered by mode index; this order is the sampling order.
    pub options: Vec<ModeOption>,
    /// utility per minute
    pub beta_time: f64,
    /// utility per fiat-cent
    pub beta_cost: f64,
    pub logit_scale: f64,
    pub wfh_eligible: bool,
    /// constant of the work-from-home alternative
    pub asc_wfh: f64,
    pub employer: Option<AccountId>,
}

impl AgentProfile {
    pub fn option(&self, mode: ModeIx) -> Option<&ModeOption> {
        self.options.iter().find(|o| o.mode == mode)
    }

    /// Checks the non-empty choice set and finite parameters.
    pub fn validate(&self) -> Result<(), ChoiceError> {
        if self.options.is_empty() {
            return Err(ChoiceError::NoOptions(self.account));
        }
        let finite = self.beta_time.is_finite()
            && self.beta_cost.is_finite()
            && self.asc_wfh.is_finite()
            && self.options.iter().all(|o| o.asc.is_finite() && o.base_minutes.is_finite() && o.distance_km.is_finite());
        if !finite || !(self.beta_time > 0.0) || !(self.beta_cost > 0.0) {
            return Err(ChoiceError::BadParameter(self.account));
        }
        if !(self.logit_scale > 0.0 && self.logit_scale.is_finite()) {
            return Err(ChoiceError::BadParameter(self.account));
        }
        Ok(())
    }
}

/// Cost and time of one option as seen before the trip.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptionCost {
    pub mode: ModeIx,
    pub coin_price: CoinAmount,
    /// minutes
    pub travel_time: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceContext {
    pub options: Vec<OptionCost>,
    /// last clearing price
    pub market_price: FiatCents,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChoiceError {
    #[error("context lacks an entry for mode #{}", .0 .0)]
    MissingOption(ModeIx),
    #[error("context has an entry for unavailable mode #{}", .0 .0)]
    UnexpectedOption(ModeIx),
    #[error("market price must be positive, got {0}")]
    NonPositivePrice(FiatCents),
    #[error("agent {0} has no available mode")]
    NoOptions(AccountId),
    #[error("agent {0} has an invalid behavioral parameter")]
    BadParameter(AccountId),
}

/// Fiat-cent value of a signed coin amount at `market_price`.
pub fn fiat_value(coins: CoinAmount, market_price: FiatCents) -> f64 {
    coins.coins() * market_price.cents() as f64
}

/// Utility of a single option.
pub fn utility(asc: f64, beta_time: f64, minutes: f64, beta_cost: f64, coin_price: CoinAmount, market_price: FiatCents) -> f64 {
    asc - beta_time * minutes - beta_cost * fiat_value(coin_price, market_price)
}

/// Utility of staying home. `allowance` is the coins the employer pays for
/// the day (zero without a work-from-home contract).
pub fn wfh_utility(profile: &AgentProfile, allowance: CoinAmount, market_price: FiatCents) -> f64 {
    profile.asc_wfh + profile.beta_cost * fiat_value(allowance, market_price)
}

/// Utilities aligned with `profile.options`.
pub fn option_utilities(profile: &AgentProfile, ctx: &ChoiceContext) -> Result<Vec<f64>, ChoiceError> {
    if ctx.market_price.cents() <= 0 {
        return Err(ChoiceError::NonPositivePrice(ctx.market_price));
    }
    if let Some(extra) = ctx.options.iter().find(|c| profile.option(c.mode).is_none()) {
        return Err(ChoiceError::UnexpectedOption(extra.mode));
    }
    profile
        .options
        .iter()
        .map(|opt| {
            let cost = ctx.options.iter().find(|c| c.mode == opt.mode).ok_or(ChoiceError::MissingOption(opt.mode))?;
            Ok(utility(opt.asc, profile.beta_time, cost.travel_time, profile.beta_cost, cost.coin_price, ctx.market_price))
        })
        .collect()
}

/// Logit probabilities with scale `mu`, computed relative to the maximum utility.
pub fn choice_probabilities(utilities: &[f64], mu: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(utilities.len());
    choice_probabilities_into(utilities, mu, &mut out);
    out
}

/// As [`choice_probabilities`], reusing `out`.
pub fn choice_probabilities_into(utilities: &[f64], mu: f64, out: &mut Vec<f64>) {
    out.clear();
    if utilities.is_empty() {
        return;
    }
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for &u in utilities {
        let e = libm::exp(mu * (u - max));
        total += e;
        out.push(e);
    }
    for p in out.iter_mut() {
        *p /= total;
    }
}

/// Natural log of the logit probabilities. Stays strictly monotone where the
/// plain probabilities round to 0 or 1.
pub fn choice_log_probabilities(utilities: &[f64], mu: f64) -> Vec<f64> {
    if utilities.is_empty() {
        return Vec::new();
    }
    let (imax, max) = utilities.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, u)| if u > acc.1 { (i, u) } else { acc });
    let rest: f64 = utilities.iter().enumerate().filter(|&(i, _)| i != imax).map(|(_, &u)| libm::exp(mu * (u - max))).sum();
    let log_total = libm::log1p(rest);
    utilities.iter().map(|&u| mu * (u - max) - log_total).collect()
}

const SAMPLE_BITS: u32 = 53;

/// Inverse-CDF draw over `probabilities` in their given order. Options with
/// zero probability are never returned.
pub fn sample_choice<R: RngCore + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    debug_assert!(!probabilities.is_empty());
    let draw = rng.next_u64() >> (64 - SAMPLE_BITS);
    let scale = (1u64 << SAMPLE_BITS) as f64;
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probabilities.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last_positive = i;
        cum += p;
        let threshold = libm::floor(cum * scale) as u64;
        if draw < threshold {
            return i;
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn profile(n: usize) -> AgentProfile {
        AgentProfile {
            account: AccountId::person(0),
            options: (0..n).map(|i| ModeOption { mode: ModeIx(i), distance_km: 10.0, base_minutes: 30.0, asc: 0.0 }).collect(),
            beta_time: 0.1,
            beta_cost: 0.01,
            logit_scale: 1.0,
            wfh_eligible: false,
            asc_wfh: 0.0,
            employer: None,
        }
    }

    fn ctx(prices: &[(i64, f64)], mp: i64) -> ChoiceContext {
        ChoiceContext {
            options: prices
                .iter()
                .enumerate()
                .map(|(i, &(c, t))| OptionCost { mode: ModeIx(i), coin_price: CoinAmount::from_cents(c), travel_time: t })
                .collect(),
            market_price: FiatCents(mp),
        }
    }

    #[test]
    fn charge_lowers_utility_and_earning_raises_it() {
        let u = option_utilities(&profile(2), &ctx(&[(1500, 30.0), (0, 30.0)], 200)).unwrap();
        assert!(u[0] < u[1]);
        let u = option_utilities(&profile(2), &ctx(&[(-200, 30.0), (0, 30.0)], 200)).unwrap();
        assert!(u[0] > u[1]);
    }

    #[test]
    fn reference_car_vs_bus() {
        // independent evaluation: U = -0.1 t - 0.01 * coins * 200
        let u = option_utilities(&profile(2), &ctx(&[(3000, 20.0), (1500, 40.0)], 200)).unwrap();
        assert!((u[0] - (-2.0 - 60.0)).abs() < 1e-12);
        assert!((u[1] - (-4.0 - 30.0)).abs() < 1e-12);
    }

    #[test]
    fn context_must_match_choice_set() {
        let err = option_utilities(&profile(3), &ctx(&[(0, 1.0), (0, 1.0)], 200)).unwrap_err();
        assert_eq!(err, ChoiceError::MissingOption(ModeIx(2)));
        let err = option_utilities(&profile(1), &ctx(&[(0, 1.0), (0, 1.0)], 200)).unwrap_err();
        assert_eq!(err, ChoiceError::UnexpectedOption(ModeIx(1)));
        let err = option_utilities(&profile(1), &ctx(&[(0, 1.0)], 0)).unwrap_err();
        assert_eq!(err, ChoiceError::NonPositivePrice(FiatCents(0)));
    }

    #[test]
    fn five_equal_options() {
        let p = choice_probabilities(&[1.5; 5], 1.0);
        for x in p {
            assert!((x - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn single_option_and_closed_form_pair() {
        assert_eq!(choice_probabilities(&[-3.0], 2.0), vec![1.0]);
        let p = choice_probabilities(&[libm::log(3.0), 0.0], 1.0);
        assert!((p[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn extreme_utilities_do_not_overflow() {
        let p = choice_probabilities(&[1e6, 1e6 - 1.0, -1e6], 1.0);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(sample_choice(&[1.0], &mut rng), 0);
            assert_eq!(sample_choice(&[1.0, 0.0], &mut rng), 0);
            assert_eq!(sample_choice(&[0.0, 1.0], &mut rng), 1);
        }
    }

    #[test]
    fn fair_coin_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let first = (0..n).filter(|_| sample_choice(&[0.5, 0.5], &mut rng) == 0).count();
        assert!((first as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn same_seed_same_choice() {
        let p = [0.2, 0.3, 0.5];
        let a: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            (0..50).map(|_| sample_choice(&p, &mut r)).collect()
        };
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let b: Vec<_> = (0..50).map(|_| sample_choice(&p, &mut r)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn profile_validation() {
        assert!(profile(2).validate().is_ok());
        assert!(matches!(profile(0).validate(), Err(ChoiceError::NoOptions(_))));
        let mut p = profile(1);
        p.beta_cost = f64::NAN;
        assert!(matches!(p.validate(), Err(ChoiceError::BadParameter(_))));
    }
}
