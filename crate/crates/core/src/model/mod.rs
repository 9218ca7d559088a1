//! The life-cycle decision process: states, feasible actions, wage dynamics,
//! per-period reward and the terminal pension value.
//!
//! Every operation is a pure function of `(state, parameters, draw)`. Solvers
//! and the simulator only talk to the process through [`Env`].
//!
//! Timing convention: an action chosen at age `a` determines the employment
//! state lived during the year `[a, a+1)` (the *year state*). Income, reward,
//! pension accrual and the next wage offer are all computed from the year
//! state. After the final decision age the agent reaches the end of the
//! horizon and is credited with the terminal value of its pension stream.

mod params;
mod wage;

pub use params::{AgeProfile, ModelParams, RewardParams, TerminalParams, WageProcessParams};
pub use wage::WageDistribution;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiscal::FiscalRules;

/// Employment state. The discriminant order is the one-hot order used by the
/// learner and the axis order used by the value grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Employment {
    Unemployed = 0,
    Employed = 1,
    Retired = 2,
}

impl Employment {
    pub const ALL: [Employment; 3] = [Employment::Unemployed, Employment::Employed, Employment::Retired];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Employment::Unemployed => "unemployed",
            Employment::Employed => "employed",
            Employment::Retired => "retired",
        }
    }
}

impl fmt::Display for Employment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Yearly decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Stay = 0,
    Switch = 1,
    Retire = 2,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Stay, Action::Switch, Action::Retire];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

/// Set of feasible actions, stored as a bit mask indexed by action code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct ActionSet(u8);

impl ActionSet {
    pub fn empty() -> Self {
        ActionSet(0)
    }

    pub fn of(actions: &[Action]) -> Self {
        actions.iter().fold(Self::empty(), |set, &a| set.with(a))
    }

    pub fn with(self, a: Action) -> Self {
        ActionSet(self.0 | (1 << a.code()))
    }

    pub fn contains(self, a: Action) -> bool {
        self.0 & (1 << a.code()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Feasible actions in ascending code order.
    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |&a| self.contains(a))
    }

    /// Mask as `[bool; 3]` indexed by action code.
    pub fn mask(self) -> [bool; 3] {
        [self.contains(Action::Stay), self.contains(Action::Switch), self.contains(Action::Retire)]
    }
}

/// One agent's position in the state space at a decision epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub employment: Employment,
    pub age: u32,
    /// Annual pension entitlement accrued so far, euros/year.
    pub pension_accrued: f64,
    /// Reference wage of the last employment spell, euros/year. Zero if the
    /// agent has never worked.
    pub prev_wage: f64,
    /// Years since the last employment-state transition.
    pub time_in_state: u32,
    /// Current wage or wage offer, euros/year.
    pub wage: f64,
}

impl fmt::Display for AgentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, age {}, pension {:.2}, prev_wage {:.2}, tis {}, wage {:.2})",
            self.employment, self.age, self.pension_accrued, self.prev_wage, self.time_in_state, self.wage
        )
    }
}

/// Deterministic part of a one-year transition. The next state still needs
/// the wage draw, see [`Transition::next_state`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    /// Post-action state for the elapsed year.
    pub year: AgentState,
    pub net_income: f64,
    /// Unscaled utility `ln(n) - kappa * 1[employed]`.
    pub utility: f64,
    /// Utility divided by the reward scale.
    pub reward: f64,
    pub next_pension: f64,
    pub next_prev_wage: f64,
}

impl Transition {
    pub fn next_state(&self, wage_draw: f64) -> AgentState {
        AgentState {
            employment: self.year.employment,
            age: self.year.age + 1,
            pension_accrued: self.next_pension,
            prev_wage: self.next_prev_wage,
            time_in_state: self.year.time_in_state,
            wage: wage_draw,
        }
    }
}

/// A view of the decision process under one parameterization.
#[derive(Clone, Copy, Debug)]
pub struct Env<'a> {
    pub params: &'a ModelParams,
    pub fiscal: &'a FiscalRules,
}

impl<'a> Env<'a> {
    pub fn new(params: &'a ModelParams, fiscal: &'a FiscalRules) -> Self {
        Env { params, fiscal }
    }

    pub fn gamma(&self) -> f64 {
        self.params.reward.gamma
    }

    pub fn first_age(&self) -> u32 {
        self.params.first_age
    }

    pub fn last_age(&self) -> u32 {
        self.params.last_age
    }

    /// Number of decision epochs in one life cycle.
    pub fn horizon(&self) -> usize {
        (self.params.last_age - self.params.first_age + 1) as usize
    }

    /// First integer age at which `Retire` may be chosen.
    pub fn retirement_age(&self) -> u32 {
        self.params.retirement_age()
    }

    pub fn feasible_actions(&self, s: &AgentState) -> ActionSet {
        match s.employment {
            Employment::Retired => ActionSet::of(&[Action::Stay]),
            _ if s.age < self.retirement_age() => ActionSet::of(&[Action::Stay, Action::Switch]),
            _ => ActionSet::of(&[Action::Stay, Action::Switch, Action::Retire]),
        }
    }

    /// Unscaled utility of a year spent in `employment` with net income `n`.
    pub fn utility(&self, employment: Employment, net_income: f64) -> Result<f64> {
        if !(net_income > 0.0) {
            return Err(Error::NonPositiveIncome {
                net_income,
                state: employment.to_string(),
            });
        }
        let work = if employment == Employment::Employed { self.params.reward.kappa } else { 0.0 };
        Ok(net_income.ln() - work)
    }

    /// Scaled reward for a year spent in `s.employment` with net income `n`.
    pub fn reward(&self, s: &AgentState, net_income: f64) -> Result<f64> {
        Ok(self.utility(s.employment, net_income)? / self.params.reward.reward_scale)
    }

    /// Post-action state for the year that starts at `s.age`.
    pub fn year_state(&self, s: &AgentState, a: Action) -> Result<AgentState> {
        if !self.feasible_actions(s).contains(a) {
            return Err(Error::InfeasibleAction {
                action: a,
                state: s.to_string(),
            });
        }
        let employment = match (s.employment, a) {
            (e, Action::Stay) => e,
            (Employment::Employed, Action::Switch) => Employment::Unemployed,
            (Employment::Unemployed, Action::Switch) => Employment::Employed,
            (_, Action::Retire) => Employment::Retired,
            (Employment::Retired, Action::Switch) => unreachable!("filtered by feasibility"),
        };
        let time_in_state = if employment == s.employment {
            (s.time_in_state + 1).min(self.params.tis_cap)
        } else {
            0
        };
        Ok(AgentState {
            employment,
            time_in_state,
            ..*s
        })
    }

    /// Everything about the year `[s.age, s.age+1)` that does not depend on
    /// the next wage draw.
    pub fn transition(&self, s: &AgentState, a: Action) -> Result<Transition> {
        let year = self.year_state(s, a)?;
        let net_income = self.fiscal.net_income(&year)?;
        let utility = self.utility(year.employment, net_income).map_err(|_| Error::NonPositiveIncome {
            net_income,
            state: year.to_string(),
        })?;
        let next_pension = s.pension_accrued + self.fiscal.accrue_pension(&year);
        let next_prev_wage = if year.employment == Employment::Employed { s.wage } else { s.prev_wage };
        Ok(Transition {
            year,
            net_income,
            utility,
            reward: utility / self.params.reward.reward_scale,
            next_pension,
            next_prev_wage,
        })
    }

    /// Distribution of the wage offer at `year.age + 1` given the year state.
    pub fn next_wage_distribution(&self, year: &AgentState) -> WageDistribution {
        let unemployed = year.employment == Employment::Unemployed;
        WageDistribution::next(&self.params.wage, year.wage, unemployed, year.age + 1)
    }

    /// Wage offer distribution at labor-market entry.
    pub fn entry_wage_distribution(&self) -> WageDistribution {
        WageDistribution::at_age(&self.params.wage, self.params.first_age)
    }

    /// One full year: action, income, reward and the next state.
    pub fn step(&self, s: &AgentState, a: Action, wage_draw: f64) -> Result<(AgentState, Transition)> {
        let t = self.transition(s, a)?;
        Ok((t.next_state(wage_draw), t))
    }

    /// Initial state at labor-market entry: unemployed, no pension, no
    /// employment history, wage offer drawn from the entry distribution.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> AgentState {
        AgentState {
            employment: Employment::Unemployed,
            age: self.params.first_age,
            pension_accrued: 0.0,
            prev_wage: 0.0,
            time_in_state: 0,
            wage: self.entry_wage_distribution().sample(rng),
        }
    }

    /// Net income of a retiree with the given accrued pension.
    pub fn retiree_net_income(&self, pension_accrued: f64) -> Result<f64> {
        let retiree = AgentState {
            employment: Employment::Retired,
            age: self.params.last_age + 1,
            pension_accrued,
            prev_wage: 0.0,
            time_in_state: 0,
            wage: self.params.wage.wage_floor,
        };
        self.fiscal.net_income(&retiree)
    }

    /// Scaled value of the post-horizon pension stream. Agents not yet retired
    /// are valued as if they retire now.
    pub fn terminal_value(&self, s: &AgentState) -> Result<f64> {
        self.terminal_value_for_pension(s.pension_accrued)
    }

    pub fn terminal_value_for_pension(&self, pension_accrued: f64) -> Result<f64> {
        let net = self.retiree_net_income(pension_accrued)?;
        let per_year = self.utility(Employment::Retired, net)? / self.params.reward.reward_scale;
        Ok(per_year * self.params.terminal.annuity_factor(self.params.reward.gamma))
    }
}
