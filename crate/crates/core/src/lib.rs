//! Deterministic multi-agent society simulator.
//!
//! Three social environments (gridworld coordination, an iterated public
//! goods game, a bilateral trading market) share one turn loop, one
//! Overseer elimination mechanic and one Stability Score. Constitutions
//! reach agents either through in-run deliberation or through offline
//! MAP-Elites evolution.

pub mod action_log;
pub mod agents;
pub mod classify;
pub mod constitution;
pub mod deliberation;
pub mod env;
pub mod evolution;
pub mod fixtures;
pub mod rng;
pub mod scoring;
pub mod sim;
pub mod stats;

pub use agents::AgentId;
pub use constitution::{Amendment, AmendmentAction, Constitution, ConstitutionRule, Directive};
pub use scoring::StabilityBreakdown;
pub use sim::{run_scripted, run_simulation, EnvKind, Method, RunRecord, SimulationConfig};
