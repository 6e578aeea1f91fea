//! Scenario files: TOML schema, validation and resolution into core types.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use mobcoin_core::agency::{AllocationPolicy, SupplyController};
use mobcoin_core::flows::{DeliveryCoeffs, DeliveryModel};
use mobcoin_core::market::MarketRules;
use mobcoin_core::network::{ModeSupply, NetworkState};
use mobcoin_core::pricing::{Mode, ModeKind, ModeRate, PriceSchedule};
use mobcoin_core::voting::{Bundle, Change, Effect, Measure, WeightRule};
use mobcoin_core::{CoinAmount, FiatCents, ModeIx};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DAYS_PER_YEAR: u32 = 365;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("dangling reference in {context}: unknown {kind} `{id}`")]
    Dangling { context: String, kind: &'static str, id: String },
    #[error("invalid scenario: {0}")]
    Invariant(String),
}

impl ConfigError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Io { .. } | ConfigError::Schema { .. } => 1,
            ConfigError::Dangling { .. } => 4,
            ConfigError::Invariant(_) => 5,
        }
    }
}

fn invariant(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invariant(msg.into())
}

/// Closed interval used for uniform draws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range(pub f64, pub f64);

impl Range {
    fn check(&self, name: &str, min: f64) -> Result<(), ConfigError> {
        if !(self.0.is_finite() && self.1.is_finite() && self.0 <= self.1 && self.0 >= min) {
            return Err(invariant(format!("{name} must be an ordered pair of finite values >= {min}")));
        }
        Ok(())
    }

    pub fn at(&self, u: f64) -> f64 {
        self.0 + (self.1 - self.0) * u
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub horizon_years: u32,
    #[serde(default = "default_days")]
    pub days_per_year: u32,
    /// coins an agent may earn per day
    pub e_max: f64,
    #[serde(default = "default_legs")]
    pub legs_per_commute: u32,
    pub reference_od: ReferenceOd,
    pub network: NetworkConfig,
    pub modes: Vec<ModeConfig>,
    pub population: PopulationConfig,
    pub market: MarketConfig,
    pub agency: AgencyConfig,
    pub employers: EmployerConfig,
    pub deliveries: DeliveryConfig,
    pub trading: TradingConfig,
    pub voting: VotingConfig,
}

fn default_days() -> u32 {
    DAYS_PER_YEAR
}

fn default_legs() -> u32 {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceOd {
    pub distance_km: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub c_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub id: String,
    pub kind: ModeKind,
    /// gCO2 per person-km
    pub emission_factor: f64,
    /// coins per km, negative for earning modes
    pub rate_dist: f64,
    /// coins per minute
    #[serde(default)]
    pub rate_time: f64,
    #[serde(default)]
    pub congestion_applies: bool,
    #[serde(default)]
    pub occupancy_divides: bool,
    pub speed_kmh: f64,
    #[serde(default)]
    pub access_min: f64,
    #[serde(default)]
    pub congestible: bool,
    /// capacity per direction as a share of the population
    #[serde(default)]
    pub capacity_share: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// mean alternative-specific constant
    #[serde(default)]
    pub asc: f64,
    /// probability that a generated agent can use the mode
    #[serde(default = "one")]
    pub availability: f64,
    pub max_distance_km: Option<f64>,
    #[serde(default = "yes")]
    pub available: bool,
}

fn default_alpha() -> f64 {
    0.15
}

fn default_beta() -> f64 {
    4.0
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    /// generated agents; ignored when `agents` is given
    #[serde(default)]
    pub count: u32,
    pub distance_km: Range,
    /// utility per minute
    pub beta_time: Range,
    /// utility per fiat-cent
    pub beta_cost: Range,
    /// half-width of the uniform noise added to each mode constant
    #[serde(default)]
    pub asc_spread: f64,
    #[serde(default = "one")]
    pub logit_scale: f64,
    #[serde(default)]
    pub employed_share: f64,
    #[serde(default)]
    pub wfh_eligible_share: f64,
    #[serde(default)]
    pub asc_wfh: f64,
    /// per commuting agent-day
    #[serde(default)]
    pub business_trip_rate: f64,
    #[serde(default = "default_business")]
    pub business_distance_km: Range,
    #[serde(default = "default_occupancy")]
    pub occupancy: u32,
    #[serde(default)]
    pub agents: Option<Vec<AgentConfig>>,
}

fn default_business() -> Range {
    Range(5.0, 20.0)
}

fn default_occupancy() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub distance_km: f64,
    pub beta_time: f64,
    pub beta_cost: f64,
    /// ids of the modes this agent can use
    pub modes: Vec<String>,
    /// per-mode constants overriding the mode default
    #[serde(default)]
    pub asc: BTreeMap<String, f64>,
    #[serde(default)]
    pub wfh_eligible: bool,
    pub asc_wfh: Option<f64>,
    /// employer index
    pub employer: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub price_floor_cents: i64,
    pub price_cap_cents: i64,
    pub initial_price_cents: i64,
    /// coins per account per session
    pub buy_limit: f64,
    pub sell_limit: f64,
    pub fee_rate: f64,
    pub penalty_rate: f64,
    pub session_every: u32,
    #[serde(default = "one")]
    pub lot: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgencyConfig {
    /// coins per person and year
    pub base_per_person: f64,
    #[serde(default)]
    pub low_access_bonus: f64,
    #[serde(default)]
    pub low_access_threshold: usize,
    #[serde(default = "yes")]
    pub expire_at_year_end: bool,
    /// coins available for forced purchases on top of collected charges
    pub initial_reserve: f64,
    /// coins offered at the current price each session
    #[serde(default)]
    pub offer_per_session: f64,
    pub controller: ControllerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub controlled_mode: String,
    /// target share per mode id; missing modes count as 0
    pub target_split: BTreeMap<String, f64>,
    pub gain: f64,
    pub max_rel_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmployerConfig {
    pub count: u32,
    /// coins per work-from-home day
    #[serde(default)]
    pub wfh_allowance: f64,
    pub policy_weights: PolicyWeights,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyWeights {
    #[serde(default)]
    pub wfh_allowance: f64,
    #[serde(default)]
    pub job_ticket: f64,
    #[serde(default)]
    pub no_reimbursement: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryModelConfig {
    CustomerPays,
    MerchantFlatRate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeliveryConfig {
    pub merchants: u32,
    /// probability of a delivery per agent-day
    pub rate: f64,
    pub model: DeliveryModelConfig,
    #[serde(default)]
    pub flat_rate_cents: i64,
    /// coins per km, kg and liter
    pub per_km: f64,
    pub per_kg: f64,
    pub per_liter: f64,
    pub distance_km: Range,
    pub weight_kg: Range,
    pub volume_l: Range,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradingConfig {
    /// buy when the balance is below this share of the pro-rata entitlement left
    pub low_fraction: f64,
    /// sell when the balance is above this share
    pub high_fraction: f64,
    /// limits are drawn uniformly within this relative distance of the current price
    pub spread: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VotingMode {
    Split,
    Bundle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VotingConfig {
    pub mode: VotingMode,
    pub budget: i64,
    /// coins; weights above are capped
    pub weight_cap: Option<f64>,
    #[serde(default)]
    pub measures: Vec<MeasureConfig>,
    #[serde(default)]
    pub bundles: Vec<BundleConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub id: u32,
    #[serde(default)]
    pub label: String,
    pub cost: i64,
    pub effects: Vec<EffectConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectConfig {
    pub mode: String,
    pub travel_time_factor: Option<f64>,
    pub capacity_factor: Option<f64>,
    pub available: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleConfig {
    pub id: u32,
    pub measures: Vec<u32>,
}

/// A scenario with every reference resolved and every rule validated.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// SHA-256 of the source text, hex
    pub config_hash: String,
    pub modes: Vec<Mode>,
    pub schedule: PriceSchedule,
    pub network: NetworkState,
    pub rules: MarketRules,
    pub initial_price: FiatCents,
    pub policy: AllocationPolicy,
    pub controller: SupplyController,
    pub measures: Vec<Measure>,
    pub bundles: Vec<Bundle>,
    pub weight_rule: WeightRule,
    pub delivery_model: DeliveryModel,
    pub delivery_coeffs: DeliveryCoeffs,
    pub e_max: CoinAmount,
    pub initial_reserve: CoinAmount,
    pub agency_offer: CoinAmount,
    pub wfh_allowance: CoinAmount,
    /// mode index per explicit agent's mode list
    pub explicit_agents: Option<Vec<Vec<ModeIx>>>,
}

impl Scenario {
    pub fn mode_ix(&self, id: &str) -> Option<ModeIx> {
        self.modes.iter().position(|m| m.id == id).map(ModeIx)
    }

    pub fn days(&self) -> u32 {
        self.config.horizon_years * self.config.days_per_year
    }

    pub fn population(&self) -> u32 {
        match &self.config.population.agents {
            Some(a) => a.len() as u32,
            None => self.config.population.count,
        }
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_config(path: &Path) -> Result<Scenario, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Schema { path: String::new(), message: e.to_string() })?;
    let config: ScenarioConfig =
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema { path: e.path().to_string(), message: e.inner().message().to_string() })?;
    let hash = hex::encode(Sha256::digest(text.as_bytes()));
    resolve(config, hash)
}

fn coins(c: f64, name: &str) -> Result<CoinAmount, ConfigError> {
    if !c.is_finite() {
        return Err(invariant(format!("{name} must be finite")));
    }
    Ok(CoinAmount::from_coins(c))
}

fn probability(p: f64, name: &str) -> Result<(), ConfigError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invariant(format!("{name} must lie in [0, 1]")));
    }
    Ok(())
}

pub fn resolve(config: ScenarioConfig, config_hash: String) -> Result<Scenario, ConfigError> {
    let c = &config;
    if c.horizon_years == 0 || c.days_per_year == 0 {
        return Err(invariant("horizon_years and days_per_year must be positive"));
    }
    if c.legs_per_commute == 0 {
        return Err(invariant("legs_per_commute must be at least 1"));
    }
    if c.modes.is_empty() {
        return Err(invariant("at least one mode is required"));
    }
    let mut seen = BTreeSet::new();
    for m in &c.modes {
        if !seen.insert(m.id.as_str()) {
            return Err(invariant(format!("duplicate mode id `{}`", m.id)));
        }
        if !(m.speed_kmh > 0.0 && m.access_min >= 0.0) {
            return Err(invariant(format!("mode `{}` needs a positive speed and non-negative access time", m.id)));
        }
        probability(m.availability, &format!("modes.{}.availability", m.id))?;
        if m.congestible && !(m.capacity_share > 0.0) {
            return Err(invariant(format!("congestible mode `{}` needs a positive capacity_share", m.id)));
        }
        if !(m.emission_factor >= 0.0) {
            return Err(invariant(format!("mode `{}` has a negative emission factor", m.id)));
        }
    }
    let modes: Vec<Mode> = c.modes.iter().map(|m| Mode { id: m.id.clone(), kind: m.kind, emission_factor: m.emission_factor }).collect();
    let ix = |id: &str, context: &str| -> Result<ModeIx, ConfigError> {
        modes.iter().position(|m| m.id == id).map(ModeIx).ok_or_else(|| ConfigError::Dangling {
            context: context.to_string(),
            kind: "mode",
            id: id.to_string(),
        })
    };

    let schedule = PriceSchedule::new(
        c.modes
            .iter()
            .map(|m| ModeRate {
                rate_dist: m.rate_dist * 100.0,
                rate_time: m.rate_time * 100.0,
                congestion_applies: m.congestion_applies,
                occupancy_divides: m.occupancy_divides,
            })
            .collect(),
    );
    schedule.validate().map_err(|e| invariant(e.to_string()))?;
    if !(c.e_max >= 0.0) {
        return Err(invariant("e_max must be non-negative"));
    }
    if c.e_max > 0.0 && !schedule.has_earning_mode() {
        return Err(invariant("e_max > 0 but no mode earns coins"));
    }

    let population = c.population.count.max(c.population.agents.as_ref().map_or(0, |a| a.len() as u32)) as f64;
    let ref_dist = c.reference_od.distance_km;
    if !(ref_dist > 0.0) {
        return Err(invariant("reference_od.distance_km must be positive"));
    }
    let network = NetworkState {
        modes: c
            .modes
            .iter()
            .map(|m| ModeSupply {
                base_time: m.access_min + 60.0 * ref_dist / m.speed_kmh,
                capacity: m.capacity_share * population.max(1.0),
                congestible: m.congestible,
                travel_time_factor: 1.0,
                capacity_factor: 1.0,
                alpha: m.alpha,
                beta: m.beta,
                available: m.available,
            })
            .collect(),
        c_max: c.network.c_max,
    };
    network.validate().map_err(|e| invariant(e.to_string()))?;

    let p = &c.population;
    p.distance_km.check("population.distance_km", 0.0)?;
    p.beta_time.check("population.beta_time", 0.0)?;
    p.beta_cost.check("population.beta_cost", 0.0)?;
    p.business_distance_km.check("population.business_distance_km", 0.0)?;
    if !(p.beta_time.0 > 0.0 && p.beta_cost.0 > 0.0) {
        return Err(invariant("behavioral betas must be positive"));
    }
    probability(p.employed_share, "population.employed_share")?;
    probability(p.wfh_eligible_share, "population.wfh_eligible_share")?;
    probability(p.business_trip_rate, "population.business_trip_rate")?;
    if !(p.logit_scale > 0.0 && p.asc_spread >= 0.0) || p.occupancy == 0 {
        return Err(invariant("logit_scale and occupancy must be positive, asc_spread non-negative"));
    }
    let explicit_agents = match &p.agents {
        None => None,
        Some(agents) => {
            let mut out = Vec::with_capacity(agents.len());
            for (i, a) in agents.iter().enumerate() {
                let ctx = format!("population.agents[{i}]");
                let mut mix = Vec::new();
                for id in &a.modes {
                    mix.push(ix(id, &ctx)?);
                }
                for id in a.asc.keys() {
                    ix(id, &ctx)?;
                }
                if let Some(e) = a.employer {
                    if e >= c.employers.count {
                        return Err(ConfigError::Dangling { context: ctx, kind: "employer", id: e.to_string() });
                    }
                }
                if !(a.beta_time > 0.0 && a.beta_cost > 0.0 && a.distance_km > 0.0) {
                    return Err(invariant(format!("{ctx}: betas and distance must be positive")));
                }
                mix.sort();
                mix.dedup();
                out.push(mix);
            }
            Some(out)
        }
    };

    let m = &c.market;
    let rules = MarketRules {
        price_floor: FiatCents(m.price_floor_cents),
        price_cap: FiatCents(m.price_cap_cents),
        buy_limit: coins(m.buy_limit, "market.buy_limit")?,
        sell_limit: coins(m.sell_limit, "market.sell_limit")?,
        fee_rate: m.fee_rate,
        penalty_rate: m.penalty_rate,
        session_every: m.session_every,
        lot: coins(m.lot, "market.lot")?,
    };
    rules.validate().map_err(|e| invariant(e.to_string()))?;
    let initial_price = FiatCents(m.initial_price_cents);
    if initial_price < rules.price_floor || initial_price > rules.price_cap {
        return Err(invariant("market.initial_price_cents must lie within the price band"));
    }

    let a = &c.agency;
    let policy = AllocationPolicy {
        base_per_person: coins(a.base_per_person, "agency.base_per_person")?,
        low_access_bonus: coins(a.low_access_bonus, "agency.low_access_bonus")?,
        low_access_threshold: a.low_access_threshold,
        period_days: c.days_per_year,
        expire_at_year_end: a.expire_at_year_end,
    };
    if policy.base_per_person.is_negative() || policy.low_access_bonus.is_negative() {
        return Err(invariant("allocation amounts must be non-negative"));
    }
    let initial_reserve = coins(a.initial_reserve, "agency.initial_reserve")?;
    let agency_offer = coins(a.offer_per_session, "agency.offer_per_session")?;
    if initial_reserve.is_negative() || agency_offer.is_negative() {
        return Err(invariant("agency reserve and offer must be non-negative"));
    }
    let controlled = ix(&a.controller.controlled_mode, "agency.controller.controlled_mode")?;
    let mut target = vec![0.0; modes.len()];
    for (id, share) in &a.controller.target_split {
        target[ix(id, "agency.controller.target_split")?.0] = *share;
    }
    let controller =
        SupplyController { target_split: target, gain: a.controller.gain, max_rel_change: a.controller.max_rel_change, controlled_mode: controlled };
    controller.validate().map_err(|e| invariant(e.to_string()))?;

    let e = &c.employers;
    let w = &e.policy_weights;
    if [w.wfh_allowance, w.job_ticket, w.no_reimbursement].iter().any(|x| !(*x >= 0.0)) {
        return Err(invariant("employer policy weights must be non-negative"));
    }
    if e.count > 0 && w.wfh_allowance + w.job_ticket + w.no_reimbursement <= 0.0 {
        return Err(invariant("employer policy weights must not all be zero"));
    }
    let wfh_allowance = coins(e.wfh_allowance, "employers.wfh_allowance")?;
    if wfh_allowance.is_negative() {
        return Err(invariant("employers.wfh_allowance must be non-negative"));
    }
    if p.agents.is_none() && p.employed_share > 0.0 && e.count == 0 && p.count > 0 {
        return Err(invariant("employed_share > 0 requires at least one employer"));
    }

    let d = &c.deliveries;
    probability(d.rate, "deliveries.rate")?;
    d.distance_km.check("deliveries.distance_km", 0.0)?;
    d.weight_kg.check("deliveries.weight_kg", 0.0)?;
    d.volume_l.check("deliveries.volume_l", 0.0)?;
    if d.rate > 0.0 && d.merchants == 0 {
        return Err(invariant("deliveries need at least one merchant"));
    }
    if [d.per_km, d.per_kg, d.per_liter].iter().any(|x| !(*x >= 0.0)) {
        return Err(invariant("delivery coefficients must be non-negative"));
    }
    let delivery_model = match d.model {
        DeliveryModelConfig::CustomerPays => DeliveryModel::CustomerPays,
        DeliveryModelConfig::MerchantFlatRate => DeliveryModel::MerchantFlatRate(FiatCents(d.flat_rate_cents)),
    };
    let delivery_coeffs = DeliveryCoeffs { per_km: d.per_km * 100.0, per_kg: d.per_kg * 100.0, per_liter: d.per_liter * 100.0 };

    let t = &c.trading;
    if !(t.low_fraction >= 0.0 && t.high_fraction >= t.low_fraction && (0.0..1.0).contains(&t.spread)) {
        return Err(invariant("trading thresholds need 0 <= low_fraction <= high_fraction and spread in [0, 1)"));
    }

    let v = &c.voting;
    if v.budget < 0 {
        return Err(invariant("voting.budget must be non-negative"));
    }
    let mut measures = Vec::new();
    let mut ids = BTreeSet::new();
    for mc in &v.measures {
        if !ids.insert(mc.id) {
            return Err(invariant(format!("duplicate measure id {}", mc.id)));
        }
        let ctx = format!("voting.measures[id={}]", mc.id);
        let mut effects = Vec::new();
        for ef in &mc.effects {
            let mode = ix(&ef.mode, &ctx)?;
            let changes: Vec<Change> =
                [ef.travel_time_factor.map(Change::TravelTimeFactor), ef.capacity_factor.map(Change::CapacityFactor), ef.available.map(Change::Availability)]
                    .into_iter()
                    .flatten()
                    .collect();
            if changes.is_empty() {
                return Err(invariant(format!("{ctx}: effect on `{}` changes nothing", ef.mode)));
            }
            effects.extend(changes.into_iter().map(|change| Effect { mode, change }));
        }
        let measure = Measure { id: mc.id, label: mc.label.clone(), cost: mc.cost, effects };
        measure.validate().map_err(|e| invariant(e.to_string()))?;
        measures.push(measure);
    }
    let mut bundles = Vec::new();
    let mut bundle_ids = BTreeSet::new();
    for b in &v.bundles {
        if !bundle_ids.insert(b.id) {
            return Err(invariant(format!("duplicate bundle id {}", b.id)));
        }
        for m in &b.measures {
            if !ids.contains(m) {
                return Err(ConfigError::Dangling { context: format!("voting.bundles[id={}]", b.id), kind: "measure", id: m.to_string() });
            }
        }
        bundles.push(Bundle { id: b.id, measures: b.measures.clone() });
    }
    let weight_rule = match v.weight_cap {
        Some(cap) => WeightRule::Capped(coins(cap, "voting.weight_cap")?),
        None => WeightRule::Linear,
    };

    Ok(Scenario {
        e_max: coins(c.e_max, "e_max")?,
        config_hash,
        modes,
        schedule,
        network,
        rules,
        initial_price,
        policy,
        controller,
        measures,
        bundles,
        weight_rule,
        delivery_model,
        delivery_coeffs,
        initial_reserve,
        agency_offer,
        wfh_allowance,
        explicit_agents,
        config,
    })
}
