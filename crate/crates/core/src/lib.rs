//! Temporal fair division of indivisible goods.
//!
//! Goods arrive over a sequence of days and are allocated among a fixed set of
//! agents with additive, exact-rational valuations. The crate provides:
//!
//! * the instance / allocation model and preference machinery ([`model`]),
//! * every fairness predicate together with per-day, overall, up-to-each-day
//!   and laminar scopes ([`fairness`]),
//! * allocation algorithms for the general setting ([`general`]), two agents
//!   ([`two_agents`]), identically-ordered agents ([`identical`]) and laminar
//!   set families ([`laminar`]),
//! * an exhaustive existence oracle with built-in impossibility fixtures
//!   ([`oracle`]),
//! * JSON documents and seeded generators ([`io`]) and the command line
//!   ([`cli`]).

pub mod cli;
pub mod error;
pub mod fairness;
pub mod general;
pub mod identical;
pub mod io;
pub mod laminar;
pub mod model;
pub mod oracle;
pub mod two_agents;

pub use error::{Error, Result};
pub use fairness::{
    cancel_out, check, check_temporal, check_with, sd_dominates, sdef1_count_conditions,
    CheckOptions, CountMode, FairnessReport, Predicate, Scope, Violation,
};
pub use laminar::LaminarFamily;
pub use model::{
    classify, head_set, prefix_goods, top_set, AgentId, Allocation, AllocationPair, GoodId,
    GoodSet, GoodSpec, PreferenceOrdering, Rational, Restrictions, TemporalInstance,
};
