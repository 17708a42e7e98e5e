//! Schedulers for a hybrid data-center switch: a fast circuit switch that pays
//! a reconfiguration delay whenever its crossbar matching changes, next to a
//! slow packet switch that absorbs whatever demand the circuit leaves behind.
//!
//! * [`eclipse`]: greedy extraction of (matching, duration) configurations
//!   by cost-adjusted utility, direct routing only.
//! * [`twohop`]: the same greedy loop, additionally booking traffic over
//!   two-hop paths through spare capacity of earlier matchings.
//! * [`bff`]: Best First Fit, an event-driven LPT list scheduler for a
//!   circuit switch where only the reconfigured inputs pay the delay.
//!
//! All times are in units of circuit-switch transmission (`r_c = 1`).

pub mod bff;
pub mod demand;
pub mod eclipse;
pub mod error;
pub mod eval;
pub mod matching;
pub mod matrix;
pub mod twohop;

pub use bff::{bff_schedule, BffOptions, BffOutcome, Connection, EventSchedule};
pub use demand::{generate_demand, TrafficGenConfig};
pub use eclipse::{
    best_configuration, eclipse_schedule, utility, Configuration, EclipseOutcome, Schedule,
    ScheduleStep, SearchStrategy, SystemParams,
};
pub use error::{Error, Result};
pub use eval::{
    run_algorithm, summarize, transmission_time, validate, Algorithm, Outcome, Plan, RunResult,
    SummaryStats, ValidationReport, Violation, ViolationKind,
};
pub use matching::{brute_force_mwm, max_weight_matching, Matching};
pub use matrix::{max_load, DemandMatrix, Matrix};
pub use twohop::{
    apply_configuration, build_irem, two_hop_schedule, BookingLedger, IndirectDemand,
    ResidueState, TwoHopOutcome,
};
