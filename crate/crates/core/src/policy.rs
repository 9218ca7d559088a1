//! Policies and the solver registry.
//!
//! Every solution method produces a [`Policy`]: a map from state to action.
//! Solvers are registered by name (`dp`, `rl`, `random`) and selected at run
//! time from the command line.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::config::ScenarioConfig;
use crate::dp::{DpPolicy, ValueGrid};
use crate::error::{Error, Result};
use crate::model::{Action, AgentState, Env};
use crate::rl::{ActMode, RlPolicy, TrainedPolicy};

pub trait Policy: Send + Sync {
    fn name(&self) -> &str;

    /// Model hash the policy was solved for; `None` for model-free policies.
    fn model_hash(&self) -> Option<&str>;

    /// Chooses a feasible action. Stochastic policies draw from `rng`.
    fn act(&self, env: &Env, s: &AgentState, rng: &mut dyn RngCore) -> Result<Action>;

    /// Deterministic action used for policy maps, if the policy has one.
    fn greedy(&self, _env: &Env, _s: &AgentState) -> Option<Result<Action>> {
        None
    }
}

pub type PolicyHandle = Arc<dyn Policy>;

/// Uniform choice over feasible actions.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomPolicy;

pub fn random_policy() -> PolicyHandle {
    Arc::new(RandomPolicy)
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn model_hash(&self) -> Option<&str> {
        None
    }

    fn act(&self, env: &Env, s: &AgentState, rng: &mut dyn RngCore) -> Result<Action> {
        let feasible = env.feasible_actions(s);
        let k = rng.random_range(0..feasible.len());
        Ok(feasible.iter().nth(k).expect("feasible set is never empty"))
    }
}

/// Solver output persisted next to run results.
#[derive(Clone)]
pub enum Artifact {
    ValueGrid(Arc<ValueGrid>),
    Network(Arc<TrainedPolicy>),
}

impl Artifact {
    pub fn file_name(&self) -> &'static str {
        match self {
            Artifact::ValueGrid(_) => "valuegrid.bin",
            Artifact::Network(_) => "policy.bin",
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        match self {
            Artifact::ValueGrid(vg) => vg.write(path),
            Artifact::Network(net) => net.write(path),
        }
    }
}

pub struct Solved {
    pub policy: PolicyHandle,
    pub artifact: Option<Artifact>,
    /// Mean episode return per training batch.
    pub telemetry: Option<Vec<f64>>,
}

impl Solved {
    /// Shares the policy and artifact; training telemetry stays with the
    /// original.
    pub fn clone_handle(&self) -> Solved {
        Solved {
            policy: self.policy.clone(),
            artifact: self.artifact.clone(),
            telemetry: None,
        }
    }
}

/// A named solution method.
pub trait Solver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether one solution serves every simulation run.
    fn reuse_across_runs(&self) -> bool;

    fn solve(&self, cfg: &ScenarioConfig, run: usize) -> Result<Solved>;

    /// Rebuilds a policy from a previously written artifact.
    fn load(&self, _cfg: &ScenarioConfig, path: &Path) -> Result<Solved> {
        Err(Error::Format(format!("solver `{}` has no artifact to load from {}", self.name(), path.display())))
    }
}

pub struct DpSolver;

impl Solver for DpSolver {
    fn name(&self) -> &'static str {
        "dp"
    }

    fn reuse_across_runs(&self) -> bool {
        true
    }

    fn solve(&self, cfg: &ScenarioConfig, _run: usize) -> Result<Solved> {
        let grid = Arc::new(crate::dp::solve(cfg)?);
        Ok(Solved {
            policy: Arc::new(DpPolicy::new(grid.clone())),
            artifact: Some(Artifact::ValueGrid(grid)),
            telemetry: None,
        })
    }

    fn load(&self, cfg: &ScenarioConfig, path: &Path) -> Result<Solved> {
        let grid = Arc::new(ValueGrid::read(path)?);
        let found = cfg.model_hash();
        if grid.model_hash != found {
            return Err(Error::HashMismatch {
                expected: grid.model_hash.clone(),
                found,
            });
        }
        Ok(Solved {
            policy: Arc::new(DpPolicy::new(grid.clone())),
            artifact: Some(Artifact::ValueGrid(grid)),
            telemetry: None,
        })
    }
}

pub struct RlSolver;

impl Solver for RlSolver {
    fn name(&self) -> &'static str {
        "rl"
    }

    fn reuse_across_runs(&self) -> bool {
        false
    }

    fn solve(&self, cfg: &ScenarioConfig, run: usize) -> Result<Solved> {
        let mut tc = cfg.train.clone();
        tc.seed = tc.seed.wrapping_add(run as u64);
        let trained = Arc::new(crate::rl::train(cfg, &tc)?);
        let telemetry = trained.telemetry.clone();
        Ok(Solved {
            policy: Arc::new(RlPolicy::new(trained.clone(), ActMode::Sample)),
            artifact: Some(Artifact::Network(trained)),
            telemetry: Some(telemetry),
        })
    }

    fn load(&self, cfg: &ScenarioConfig, path: &Path) -> Result<Solved> {
        let trained = Arc::new(TrainedPolicy::read(path)?);
        let found = cfg.model_hash();
        if trained.model_hash != found {
            return Err(Error::HashMismatch {
                expected: trained.model_hash.clone(),
                found,
            });
        }
        Ok(Solved {
            policy: Arc::new(RlPolicy::new(trained.clone(), ActMode::Sample)),
            artifact: Some(Artifact::Network(trained)),
            telemetry: None,
        })
    }
}

pub struct RandomSolver;

impl Solver for RandomSolver {
    fn name(&self) -> &'static str {
        "random"
    }

    fn reuse_across_runs(&self) -> bool {
        true
    }

    fn solve(&self, _cfg: &ScenarioConfig, _run: usize) -> Result<Solved> {
        Ok(Solved {
            policy: random_policy(),
            artifact: None,
            telemetry: None,
        })
    }
}

/// Solvers addressable by name.
pub struct SolverRegistry {
    entries: Vec<Box<dyn Solver>>,
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut r = SolverRegistry { entries: Vec::new() };
        r.register(Box::new(DpSolver));
        r.register(Box::new(RlSolver));
        r.register(Box::new(RandomSolver));
        r
    }
}

impl SolverRegistry {
    /// Adds a solver, replacing any existing one with the same name.
    pub fn register(&mut self, solver: Box<dyn Solver>) {
        self.entries.retain(|s| s.name() != solver.name());
        self.entries.push(solver);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Solver> {
        self.entries
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownSolver(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|s| s.name()).collect()
    }
}
