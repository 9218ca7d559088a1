//! Discrete-choice life-cycle model of labor supply.
//!
//! An agent lives from labor-market entry to the end of a fixed horizon and
//! chooses each year whether to stay in its employment state, switch between
//! employment and unemployment, or retire. The crate solves the model with
//! grid-based backward induction ([`dp`]) and with an advantage actor-critic
//! learner ([`rl`]), simulates populations under any solved policy
//! ([`simulate`]) and compares baseline and reform scenarios ([`metrics`],
//! [`cli`]).

pub mod cli;
pub mod config;
pub mod dp;
pub mod error;
pub mod fiscal;
pub mod metrics;
pub mod model;
pub mod policy;
pub mod rl;
pub mod simulate;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use fiscal::FiscalRules;
pub use model::{Action, ActionSet, AgentState, Employment, Env};
pub use policy::{Policy, PolicyHandle, SolverRegistry};
