//! The day loop.
//!
//! Every agent owns a ChaCha8 stream (seeded from the scenario seed, stream
//! number = agent index) and draws the same number of values every day
//! whatever it decides. Runs that differ only in prices therefore share their
//! random numbers, and mode choices compare a 53-bit integer draw against the
//! cumulative probabilities quantized to 2^-53.

use mobcoin_core::agency::{adjust_supply, allocate, total_entitlement, year_end_expiry, AgencyError};
use mobcoin_core::choice::{choice_probabilities_into, sample_choice, utility, wfh_utility, AgentProfile, ModeOption};
use mobcoin_core::flows::{
    commit_with_forced_purchase, delivery_price, employer_replenishment, settle_business_trip, settle_commute, settle_delivery, settle_earning, CommutePolicy,
    DayKind, DeliveryQuery, EmploymentContract, FlowError, ForcedPurchaseTerms,
};
use mobcoin_core::ledger::{conservation_check, Balances};
use mobcoin_core::market::{clear_session, MarketError, Order, OrderBook, Side};
use mobcoin_core::network::{NetworkError, NetworkState};
use mobcoin_core::pricing::{trip_price, EarnCapState, PricingError, TrafficState, TripQuery};
use mobcoin_core::voting::{apply_measures, tally_bundle, tally_split, voting_weights, Ballot, BallotChoice, Change, Measure, Share, VotingError};
use mobcoin_core::{AccountId, CoinAmount, EventKind, FiatCents, Journal, Ledger, LedgerError, ModeIx, Transfer};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{Scenario, VotingMode};
use crate::output::{MarketRow, VotingRow};

const POPULATION_STREAM: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Voting(#[from] VotingError),
    #[error(transparent)]
    Agency(#[from] AgencyError),
    #[error("invariant violated on day {day}: {what}")]
    Invariant { day: u32, what: String },
}

pub struct Agent {
    pub profile: AgentProfile,
    /// modes the agent could use if the network offers them
    pub access: Vec<ModeOption>,
    pub contract: Option<EmploymentContract>,
    pub entitlement: CoinAmount,
    cap: EarnCapState,
    rng: ChaCha8Rng,
    /// trips per mode in the current year
    year_trips: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub day: u32,
    pub year: u32,
    pub trips: u64,
    pub wfh: u64,
    /// share of trips per mode, all zero without trips
    pub modal_split: Vec<f64>,
    pub clearing_price: i64,
    pub volume_cents: i64,
    pub circulation_cents: i64,
    pub agency_balance_cents: i64,
    pub emissions_g: f64,
    pub gini: f64,
    pub forced_purchases: u64,
    pub cap_saturations: u64,
    pub deliveries: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YearRecord {
    pub year: u32,
    pub allocation_cents: i64,
    pub observed_split: Vec<f64>,
    pub next_allocation_cents: i64,
    pub selected_measures: Vec<u32>,
}

#[derive(Clone, Debug, Default)]
pub struct DayOutput {
    pub metrics: Option<MetricsRow>,
    pub market: Option<MarketRow>,
    pub voting: Vec<VotingRow>,
    pub year_end: Option<YearRecord>,
}

/// Running totals checked after every day.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Integrity {
    pub conservation: bool,
    pub non_negative: bool,
    pub modal_split_sums: bool,
    pub gini_in_range: bool,
    pub circulation_matches_agency: bool,
}

impl Integrity {
    pub fn all(&self) -> bool {
        self.conservation && self.non_negative && self.modal_split_sums && self.gini_in_range && self.circulation_matches_agency
    }
}

impl Default for Integrity {
    fn default() -> Self {
        Integrity { conservation: true, non_negative: true, modal_split_sums: true, gini_in_range: true, circulation_matches_agency: true }
    }
}

pub struct Simulation {
    pub scenario: Scenario,
    pub network: NetworkState,
    pub ledger: Ledger,
    pub agents: Vec<Agent>,
    pub price: FiatCents,
    pub integrity: Integrity,
    pub forced_fiat_cents: i64,
    employer_policies: Vec<CommutePolicy>,
    employer_outflow: Vec<CoinAmount>,
    merchant_outflow: Vec<CoinAmount>,
    prev_demand: Vec<f64>,
    year_trips: Vec<u64>,
    year_total: CoinAmount,
    agency_after_allocation: CoinAmount,
    next_trip: u64,
    next_order: u64,
    next_delivery: u64,
    scratch: Scratch,
}

#[derive(Default)]
struct Scratch {
    utilities: Vec<f64>,
    probabilities: Vec<f64>,
    prices: Vec<CoinAmount>,
    times: Vec<f64>,
    spreads: Vec<f64>,
    deliveries: Vec<DeliveryQuery>,
}

fn agent_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn option_for(scenario: &Scenario, mode: ModeIx, distance_km: f64, asc: f64) -> ModeOption {
    let m = &scenario.config.modes[mode.0];
    ModeOption { mode, distance_km, base_minutes: m.access_min + 60.0 * distance_km / m.speed_kmh, asc }
}

fn pick_policy(u: f64, w: &crate::config::PolicyWeights, allowance: CoinAmount) -> CommutePolicy {
    let total = w.wfh_allowance + w.job_ticket + w.no_reimbursement;
    let x = u * total;
    if x < w.wfh_allowance {
        CommutePolicy::WfhAllowance(allowance)
    } else if x < w.wfh_allowance + w.job_ticket {
        CommutePolicy::JobTicket
    } else {
        CommutePolicy::NoReimbursement
    }
}

/// Gini coefficient of non-negative values (0 when all are zero).
pub fn gini(values: &mut [i64]) -> f64 {
    values.sort_unstable();
    let n = values.len() as f64;
    let total: f64 = values.iter().map(|&v| v as f64).sum();
    if values.is_empty() || total <= 0.0 {
        return 0.0;
    }
    let weighted: f64 = values.iter().enumerate().map(|(i, &v)| (2.0 * (i as f64 + 1.0) - n - 1.0) * v as f64).sum();
    weighted / (n * total)
}

/// SHA-256 over `account,cents` lines for every non-zero balance.
pub fn balance_digest(balances: &Balances) -> String {
    let mut h = Sha256::new();
    for (acc, b) in balances.iter().filter(|(_, b)| !b.is_zero()) {
        h.update(format!("{acc},{}\n", b.cents()).as_bytes());
    }
    hex::encode(h.finalize())
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Self {
        let cfg = &scenario.config;
        let p = &cfg.population;
        let seed = cfg.seed;
        let n_modes = scenario.modes.len();
        let mut pop_rng = agent_rng(seed, POPULATION_STREAM);

        let employer_policies: Vec<CommutePolicy> =
            (0..cfg.employers.count).map(|_| pick_policy(pop_rng.random::<f64>(), &cfg.employers.policy_weights, scenario.wfh_allowance)).collect();
        let contract = |e: u32, policies: &[CommutePolicy]| EmploymentContract { employer: AccountId::employer(e), commute_policy: policies[e as usize] };

        let mut agents = Vec::new();
        match (&p.agents, &scenario.explicit_agents) {
            (Some(list), Some(modes)) => {
                for (i, (a, mix)) in list.iter().zip(modes).enumerate() {
                    let access = mix
                        .iter()
                        .map(|&m| {
                            let id = &scenario.modes[m.0].id;
                            let asc = a.asc.get(id).copied().unwrap_or(cfg.modes[m.0].asc);
                            option_for(&scenario, m, a.distance_km, asc)
                        })
                        .collect();
                    let contract = a.employer.map(|e| contract(e, &employer_policies));
                    agents.push(Agent {
                        profile: AgentProfile {
                            account: AccountId::person(i as u32),
                            options: Vec::new(),
                            beta_time: a.beta_time,
                            beta_cost: a.beta_cost,
                            logit_scale: p.logit_scale,
                            wfh_eligible: a.wfh_eligible && contract.is_some(),
                            asc_wfh: a.asc_wfh.unwrap_or(p.asc_wfh),
                            employer: contract.map(|c| c.employer),
                        },
                        access,
                        contract,
                        entitlement: CoinAmount::ZERO,
                        cap: EarnCapState::new(AccountId::person(i as u32), 0),
                        rng: agent_rng(seed, i as u64),
                        year_trips: vec![0; n_modes],
                    });
                }
            }
            _ => {
                for i in 0..p.count {
                    let distance = p.distance_km.at(pop_rng.random());
                    let beta_time = p.beta_time.at(pop_rng.random());
                    let beta_cost = p.beta_cost.at(pop_rng.random());
                    let mut access = Vec::new();
                    for (m, mc) in cfg.modes.iter().enumerate() {
                        let u_access: f64 = pop_rng.random();
                        let noise = p.asc_spread * (2.0 * pop_rng.random::<f64>() - 1.0);
                        let in_range = mc.max_distance_km.is_none_or(|d| distance <= d);
                        if u_access < mc.availability && in_range {
                            access.push(option_for(&scenario, ModeIx(m), distance, mc.asc + noise));
                        }
                    }
                    let u_emp: f64 = pop_rng.random();
                    let u_which: f64 = pop_rng.random();
                    let u_wfh: f64 = pop_rng.random();
                    let contract = (cfg.employers.count > 0 && u_emp < p.employed_share)
                        .then(|| contract(((u_which * cfg.employers.count as f64) as u32).min(cfg.employers.count - 1), &employer_policies));
                    agents.push(Agent {
                        profile: AgentProfile {
                            account: AccountId::person(i),
                            options: Vec::new(),
                            beta_time,
                            beta_cost,
                            logit_scale: p.logit_scale,
                            wfh_eligible: contract.is_some() && u_wfh < p.wfh_eligible_share,
                            asc_wfh: p.asc_wfh,
                            employer: contract.map(|c| c.employer),
                        },
                        access,
                        contract,
                        entitlement: CoinAmount::ZERO,
                        cap: EarnCapState::new(AccountId::person(i), 0),
                        rng: agent_rng(seed, i as u64),
                        year_trips: vec![0; n_modes],
                    });
                }
            }
        }

        let mut sim = Simulation {
            network: scenario.network.clone(),
            ledger: Ledger::new(),
            agents,
            price: scenario.initial_price,
            integrity: Integrity::default(),
            forced_fiat_cents: 0,
            employer_outflow: vec![CoinAmount::ZERO; cfg.employers.count as usize],
            merchant_outflow: vec![CoinAmount::ZERO; cfg.deliveries.merchants as usize],
            employer_policies,
            prev_demand: vec![0.0; n_modes],
            year_trips: vec![0; n_modes],
            year_total: CoinAmount::ZERO,
            agency_after_allocation: CoinAmount::ZERO,
            next_trip: 0,
            next_order: 0,
            next_delivery: 0,
            scratch: Scratch::default(),
            scenario,
        };
        sim.refresh_options();
        sim
    }

    pub fn employer_policies(&self) -> &[CommutePolicy] {
        &self.employer_policies
    }

    /// Coins the Agency can still sell: the configured reserve plus net
    /// inflows since the last allocation.
    pub fn reserve(&self) -> CoinAmount {
        self.scenario.initial_reserve + self.ledger.balance(AccountId::AGENCY) - self.agency_after_allocation
    }

    fn refresh_options(&mut self) {
        let net = &self.network;
        for a in &mut self.agents {
            a.profile.options = a.access.iter().copied().filter(|o| net.modes[o.mode.0].available).collect();
        }
    }

    fn population_access(&self) -> Vec<(AccountId, usize)> {
        self.agents.iter().map(|a| (a.profile.account, a.profile.options.len())).collect()
    }

    fn allocate_year<J: Journal + ?Sized>(&mut self, day: u32, total: CoinAmount, journal: &mut J) -> Result<(), SimError> {
        let legs = allocate(&self.population_access(), &self.scenario.policy, total);
        for a in &mut self.agents {
            a.entitlement = CoinAmount::ZERO;
        }
        for leg in &legs {
            self.agents[leg.to.index as usize].entitlement = leg.amount;
        }
        self.ledger.commit(day, &legs, journal)?;
        self.year_total = total;
        self.agency_after_allocation = self.ledger.balance(AccountId::AGENCY);
        Ok(())
    }

    fn settle<J: Journal + ?Sized>(&mut self, day: u32, legs: &[Transfer], journal: &mut J) -> Result<u64, SimError> {
        if legs.is_empty() {
            return Ok(0);
        }
        let terms = ForcedPurchaseTerms { price: self.price, rules: &self.scenario.rules, reserve: self.reserve() };
        let bought = commit_with_forced_purchase(&mut self.ledger, day, legs, terms, journal)?;
        for leg in legs {
            match leg.from.kind {
                mobcoin_core::AccountKind::Employer => self.employer_outflow[leg.from.index as usize] += leg.amount,
                mobcoin_core::AccountKind::Merchant => self.merchant_outflow[leg.from.index as usize] += leg.amount,
                _ => {}
            }
        }
        self.forced_fiat_cents += bought.iter().map(|f| f.fiat_cost.cents()).sum::<i64>();
        Ok(bought.len() as u64)
    }

    /// Runs one day and returns its outputs. Day 0 starts with the first allocation.
    pub fn run_day<J: Journal + ?Sized>(&mut self, day: u32, journal: &mut J) -> Result<DayOutput, SimError> {
        let dpy = self.scenario.config.days_per_year;
        let year = day / dpy;
        if day == 0 {
            let total = total_entitlement(&self.population_access(), &self.scenario.policy);
            self.allocate_year(day, total, journal)?;
        }
        let n_modes = self.scenario.modes.len();
        let legs_per_day = self.scenario.config.legs_per_commute as i64;
        let occupancy = self.scenario.config.population.occupancy;
        let e_max = self.scenario.e_max;

        // (1) traffic from yesterday's demand
        let mut traffic = Vec::with_capacity(n_modes);
        let mut time_factor = Vec::with_capacity(n_modes);
        for m in 0..n_modes {
            let ix = ModeIx(m);
            traffic.push(self.network.traffic_state(ix, self.prev_demand[m])?);
            let s = self.network.supply(ix)?;
            time_factor.push(s.travel_time_factor * self.network.delay_ratio(ix, self.prev_demand[m])?);
        }

        // (2) agents
        let mut demand = vec![0u64; n_modes];
        let mut wfh = 0u64;
        let mut emissions = 0.0;
        let mut forced = 0u64;
        let mut saturations = 0u64;
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.spreads.clear();
        scratch.deliveries.clear();
        let delivery_cfg = self.scenario.config.deliveries.clone();
        let business = (self.scenario.config.population.business_trip_rate, self.scenario.config.population.business_distance_km);
        for i in 0..self.agents.len() {
            let a = &mut self.agents[i];
            let who = a.profile.account;
            scratch.utilities.clear();
            scratch.prices.clear();
            scratch.times.clear();
            for o in &a.profile.options {
                let t = o.base_minutes * time_factor[o.mode.0];
                let q = TripQuery { mode: o.mode, distance_km: o.distance_km, duration_min: t, occupancy, traffic: traffic[o.mode.0] };
                let p = trip_price(&q, &self.scenario.schedule)?;
                scratch.utilities.push(utility(o.asc, a.profile.beta_time, t, a.profile.beta_cost, p, self.price));
                scratch.prices.push(p);
                scratch.times.push(t);
            }
            let allowance = a.contract.map(|c| c.wfh_allowance()).unwrap_or_default();
            if a.profile.wfh_eligible {
                scratch.utilities.push(wfh_utility(&a.profile, allowance, self.price));
            }
            let pick = if scratch.utilities.is_empty() {
                a.rng.next_u64();
                None
            } else {
                choice_probabilities_into(&scratch.utilities, a.profile.logit_scale, &mut scratch.probabilities);
                Some(sample_choice(&scratch.probabilities, &mut a.rng))
            };
            let u_business: f64 = a.rng.random();
            let u_business_km: f64 = a.rng.random();
            scratch.spreads.push(a.rng.random());
            let u_delivery: f64 = a.rng.random();
            let u_merchant: f64 = a.rng.random();
            let (ud, uw, uv): (f64, f64, f64) = (a.rng.random(), a.rng.random(), a.rng.random());
            if u_delivery < delivery_cfg.rate && delivery_cfg.merchants > 0 {
                let merchant = ((u_merchant * delivery_cfg.merchants as f64) as u32).min(delivery_cfg.merchants - 1);
                scratch.deliveries.push(DeliveryQuery {
                    distance_km: delivery_cfg.distance_km.at(ud),
                    weight_kg: delivery_cfg.weight_kg.at(uw),
                    volume_l: delivery_cfg.volume_l.at(uv),
                    customer: who,
                    merchant: AccountId::merchant(merchant),
                });
            }

            let Some(k) = pick else { continue };
            let contract = a.contract;
            if k == a.profile.options.len() {
                wfh += 1;
                let s = settle_commute(who, DayKind::Wfh, contract.as_ref(), &mut a.cap, day, e_max);
                forced += self.settle(day, &s.legs, journal)?;
                continue;
            }
            let opt = a.profile.options[k];
            let m = opt.mode;
            demand[m.0] += 1;
            a.year_trips[m.0] += 1;
            emissions += opt.distance_km * legs_per_day as f64 * self.scenario.modes[m.0].emission_factor;
            let trip = self.next_trip;
            self.next_trip += 1;
            let price = CoinAmount::from_cents(scratch.prices[k].cents() * legs_per_day);
            let s = settle_commute(who, DayKind::Commute { price, trip }, contract.as_ref(), &mut a.cap, day, e_max);
            if s.forfeited.is_positive() {
                saturations += 1;
            }

            let mut business_legs = Vec::new();
            if u_business < business.0 {
                let km = business.1.at(u_business_km);
                let t = (self.scenario.config.modes[m.0].access_min + 60.0 * km / self.scenario.config.modes[m.0].speed_kmh) * time_factor[m.0];
                let q = TripQuery { mode: m, distance_km: km, duration_min: t, occupancy, traffic: traffic[m.0] };
                let leg_price = trip_price(&q, &self.scenario.schedule)?;
                let bprice = CoinAmount::from_cents(leg_price.cents() * legs_per_day);
                let btrip = self.next_trip;
                self.next_trip += 1;
                demand[m.0] += 1;
                a.year_trips[m.0] += 1;
                emissions += km * legs_per_day as f64 * self.scenario.modes[m.0].emission_factor;
                if bprice.is_negative() {
                    let e = settle_earning(who, -bprice, btrip, &mut a.cap, day, e_max);
                    if e.forfeited.is_positive() {
                        saturations += 1;
                    }
                    business_legs = e.legs;
                } else if contract.is_some() {
                    business_legs = settle_business_trip(who, bprice, contract.as_ref(), btrip)?;
                } else if bprice.is_positive() {
                    business_legs = vec![Transfer::new(EventKind::TripCharge, who, AccountId::AGENCY, bprice).with_memo(mobcoin_core::Memo::Trip(btrip))];
                }
            }
            forced += self.settle(day, &s.legs, journal)?;
            forced += self.settle(day, &business_legs, journal)?;
        }

        // (3) deliveries
        let deliveries = scratch.deliveries.len() as u64;
        for q in std::mem::take(&mut scratch.deliveries) {
            let price = delivery_price(&q, &self.scenario.delivery_coeffs);
            let id = self.next_delivery;
            self.next_delivery += 1;
            let s = settle_delivery(&q, self.scenario.delivery_model, price, id);
            forced += self.settle(day, &s.legs, journal)?;
        }

        // (4) market session
        let mut out = DayOutput::default();
        let mut volume_cents = 0;
        if (day + 1).is_multiple_of(self.scenario.rules.session_every) {
            let row = self.session(day, &scratch.spreads, journal)?;
            volume_cents = row.volume_cents;
            out.market = Some(row);
        }
        self.scratch = scratch;

        // (5) metrics
        let trips: u64 = demand.iter().sum();
        let modal_split: Vec<f64> = demand.iter().map(|&d| if trips > 0 { d as f64 / trips as f64 } else { 0.0 }).collect();
        for (m, &d) in demand.iter().enumerate() {
            self.year_trips[m] += d;
            self.prev_demand[m] = d as f64;
        }
        let mut persons: Vec<i64> = self.ledger.balances().persons().to_vec();
        persons.resize(self.agents.len(), 0);
        let g = gini(&mut persons);
        let balances = self.ledger.balances();
        let circulation = balances.circulation();
        let agency = balances.get(AccountId::AGENCY);
        let split_sum: f64 = modal_split.iter().sum();
        self.integrity.conservation &= conservation_check(balances);
        self.integrity.non_negative &= balances.iter().all(|(a, b)| a.is_agency() || !b.is_negative());
        self.integrity.modal_split_sums &= trips == 0 || (split_sum - 1.0).abs() <= 1e-9;
        self.integrity.gini_in_range &= (0.0..=1.0).contains(&g);
        self.integrity.circulation_matches_agency &= circulation == -agency;
        if !self.integrity.conservation {
            return Err(SimError::Invariant { day, what: "sum of balances is not zero".into() });
        }
        out.metrics = Some(MetricsRow {
            day,
            year,
            trips,
            wfh,
            modal_split,
            clearing_price: self.price.cents(),
            volume_cents,
            circulation_cents: circulation.cents(),
            agency_balance_cents: agency.cents(),
            emissions_g: emissions,
            gini: g,
            forced_purchases: forced,
            cap_saturations: saturations,
            deliveries,
        });

        if (day + 1).is_multiple_of(dpy) {
            let (rows, record) = self.year_end(day, year, journal)?;
            out.voting = rows;
            out.year_end = Some(record);
        }
        Ok(out)
    }

    fn session<J: Journal + ?Sized>(&mut self, day: u32, spreads: &[f64], journal: &mut J) -> Result<MarketRow, SimError> {
        let rules = self.scenario.rules;
        let mut book = OrderBook::new();
        let mut order = |sim: &mut Simulation, account: AccountId, side: Side, quantity: CoinAmount, limit: FiatCents, backing: CoinAmount| {
            if !quantity.is_positive() {
                return;
            }
            let o = Order { id: sim.next_order, account, side, quantity, limit, day };
            sim.next_order += 1;
            // clipped-to-nothing and unbacked orders are dropped
            let _ = book.submit(o, &rules, Some(backing));
        };

        let reserve = self.reserve();
        let offer = self.scenario.agency_offer.min(reserve);
        order(self, AccountId::AGENCY, Side::Sell, offer, self.price, reserve);

        for (outflows, make) in [(0usize, AccountId::employer as fn(u32) -> AccountId), (1, AccountId::merchant)] {
            let n = if outflows == 0 { self.employer_outflow.len() } else { self.merchant_outflow.len() };
            for j in 0..n {
                let acc = make(j as u32);
                let expected = if outflows == 0 { self.employer_outflow[j] } else { self.merchant_outflow[j] };
                let balance = self.ledger.balance(acc);
                if let Some(o) = employer_replenishment(acc, balance, expected, &rules, 0, day) {
                    order(self, acc, Side::Buy, o.quantity, o.limit, balance);
                }
            }
        }
        self.employer_outflow.iter_mut().for_each(|x| *x = CoinAmount::ZERO);
        self.merchant_outflow.iter_mut().for_each(|x| *x = CoinAmount::ZERO);

        let dpy = self.scenario.config.days_per_year as i64;
        let days_left = dpy - 1 - (day as i64 % dpy);
        let t = self.scenario.config.trading.clone();
        for i in 0..self.agents.len() {
            let (acc, entitlement) = (self.agents[i].profile.account, self.agents[i].entitlement);
            let balance = self.ledger.balance(acc);
            let prorata = entitlement.cents() as f64 * days_left as f64 / dpy as f64;
            let low = CoinAmount::from_cents((t.low_fraction * prorata) as i64);
            let high = CoinAmount::from_cents((t.high_fraction * prorata) as i64);
            let u = spreads.get(i).copied().unwrap_or(0.5);
            // reservation prices scatter on both sides of the last price, so
            // the side in excess is what moves it
            let p = self.price.cents() as f64;
            let limit = FiatCents(mobcoin_core::money::round_half_away(p * (1.0 + t.spread * (2.0 * u - 1.0))).max(1));
            if balance < low {
                order(self, acc, Side::Buy, low - balance, limit, balance);
            } else if balance > high {
                let q = balance - high;
                let q = q - rules.fee_headroom(q);
                order(self, acc, Side::Sell, q, limit, balance);
            }
        }

        let result = clear_session(book.orders(), &rules, self.price);
        self.ledger.commit(day, &result.transfers(), journal)?;
        self.price = result.clearing_price;
        Ok(MarketRow {
            day,
            clearing_price: result.clearing_price.cents(),
            volume_cents: result.volume.cents(),
            fees_cents: result.fees_collected.cents(),
            n_orders: book.len(),
        })
    }

    fn helps(change: Change) -> bool {
        match change {
            Change::TravelTimeFactor(f) => f < 1.0,
            Change::CapacityFactor(f) => f > 1.0,
            Change::Availability(on) => on,
        }
    }

    fn ballots(&self, weights: &[(AccountId, CoinAmount)]) -> Vec<Ballot> {
        let measures = &self.scenario.measures;
        let helpful = |mode: ModeIx, m: &Measure| m.effects.iter().any(|e| e.mode == mode && Self::helps(e.change));
        let mut out = Vec::new();
        for &(voter, weight) in weights {
            let Some(agent) = self.agents.get(voter.index as usize) else { continue };
            let (fav, n) = agent.year_trips.iter().enumerate().fold((0, 0), |best, (m, &n)| if n > best.1 { (m, n) } else { best });
            if n == 0 || !weight.is_positive() {
                continue;
            }
            let fav = ModeIx(fav);
            let choice = match self.scenario.config.voting.mode {
                VotingMode::Split => {
                    let ids: Vec<u32> = measures.iter().filter(|m| helpful(fav, m)).map(|m| m.id).collect();
                    if ids.is_empty() {
                        continue;
                    }
                    let share = Share(Share::WHOLE.0 / ids.len() as u32);
                    BallotChoice::Split(ids.into_iter().map(|id| (id, share)).collect())
                }
                VotingMode::Bundle => {
                    let score =
                        |b: &mobcoin_core::voting::Bundle| b.measures.iter().filter(|id| measures.iter().any(|m| m.id == **id && helpful(fav, m))).count();
                    let best = self.scenario.bundles.iter().fold(None::<(u32, usize)>, |acc, b| {
                        let s = score(b);
                        if s > 0 && acc.is_none_or(|(_, bs)| s > bs) {
                            Some((b.id, s))
                        } else {
                            acc
                        }
                    });
                    match best {
                        Some((id, _)) => BallotChoice::Bundle(id),
                        None => continue,
                    }
                }
            };
            out.push(Ballot { voter, weight, choice });
        }
        out
    }

    fn year_end<J: Journal + ?Sized>(&mut self, day: u32, year: u32, journal: &mut J) -> Result<(Vec<VotingRow>, YearRecord), SimError> {
        // voting on the balances left at year end
        let weights = voting_weights(self.ledger.balances(), self.scenario.weight_rule);
        let ballots = self.ballots(&weights);
        let budget = self.scenario.config.voting.budget;
        let mut rows = Vec::new();
        let selected: Vec<u32> = match self.scenario.config.voting.mode {
            VotingMode::Split => {
                let tally = tally_split(&ballots, &self.scenario.measures, budget)?;
                for &(id, _) in &tally.scores {
                    rows.push(VotingRow { year, kind: "measure".into(), id, score: tally.score_coins(id), selected: tally.selected.contains(&id) });
                }
                tally.selected
            }
            VotingMode::Bundle => {
                let tally = tally_bundle(&ballots, &self.scenario.bundles)?;
                // the winner is enacted only if its measures fit the budget together
                let enacted = tally.winner.and_then(|w| self.scenario.bundles.iter().find(|b| b.id == w)).filter(|b| {
                    let cost: i64 = b.measures.iter().filter_map(|id| self.scenario.measures.iter().find(|m| m.id == *id)).map(|m| m.cost).sum();
                    cost <= budget
                });
                for &(id, total) in &tally.totals {
                    rows.push(VotingRow { year, kind: "bundle".into(), id, score: total as f64 / 100.0, selected: enacted.is_some_and(|b| b.id == id) });
                }
                enacted.map(|b| b.measures.clone()).unwrap_or_default()
            }
        };
        if !selected.is_empty() {
            let chosen: Vec<&Measure> = self.scenario.measures.iter().filter(|m| selected.contains(&m.id)).collect();
            self.network = apply_measures(&self.network, &chosen)?;
            self.refresh_options();
        }

        if self.scenario.policy.expire_at_year_end {
            let legs = year_end_expiry(self.ledger.balances());
            self.ledger.commit(day, &legs, journal)?;
        }

        let total: u64 = self.year_trips.iter().sum();
        let observed: Vec<f64> = self.year_trips.iter().map(|&n| if total > 0 { n as f64 / total as f64 } else { 0.0 }).collect();
        let prev = self.year_total;
        let next = if total > 0 { adjust_supply(&observed, &self.scenario.controller, prev)? } else { prev };
        self.allocate_year(day, next, journal)?;

        self.year_trips.iter_mut().for_each(|x| *x = 0);
        for a in &mut self.agents {
            a.year_trips.iter_mut().for_each(|x| *x = 0);
        }
        let record =
            YearRecord { year, allocation_cents: prev.cents(), observed_split: observed, next_allocation_cents: next.cents(), selected_measures: selected };
        Ok((rows, record))
    }
}

/// Per-leg price of `mode` on the reference relation at free flow.
pub fn reference_price(scenario: &Scenario, mode: ModeIx) -> Result<CoinAmount, PricingError> {
    let m = &scenario.config.modes[mode.0];
    let d = scenario.config.reference_od.distance_km;
    let q = TripQuery {
        mode,
        distance_km: d,
        duration_min: m.access_min + 60.0 * d / m.speed_kmh,
        occupancy: scenario.config.population.occupancy,
        traffic: TrafficState::FREE_FLOW,
    };
    trip_price(&q, &scenario.schedule)
}
