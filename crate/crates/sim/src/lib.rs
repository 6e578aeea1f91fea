//! Scenario loading, the simulation loop and the artifact formats behind the
//! `mobcoin` command.

// negated comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engine;
pub mod output;
pub mod replay;
pub mod report;
pub mod run;

pub use config::{load_config, parse_config, Scenario};
pub use engine::{MetricsRow, Simulation};
