//! Seeded Monte Carlo populations under any policy.
//!
//! Every agent owns two ChaCha8 streams seeded from `(base_seed, run, agent)`:
//! one for wage shocks and one for the policy's own randomness. Results do
//! not depend on how agents are scheduled across workers, and policies run
//! on the same seed face the same shocks for as long as their paths agree.
//! Aggregates are reduced in agent order.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::metrics::StatBlock;
use crate::model::{Action, AgentState, Employment, Env};
use crate::policy::PolicyHandle;

/// RNG stream keyed by a domain tag and a tuple of integers.
pub fn seeded_stream(tag: &[u8], parts: &[u64]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag);
    for p in parts {
        h.update(p.to_le_bytes());
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Wage-shock stream of agent `agent` in run `run`.
pub fn agent_rng(base_seed: u64, run: u64, agent: u64) -> ChaCha8Rng {
    seeded_stream(b"agent", &[base_seed, run, agent])
}

/// Action-sampling stream of agent `agent` in run `run`.
pub fn policy_rng(base_seed: u64, run: u64, agent: u64) -> ChaCha8Rng {
    seeded_stream(b"agent-policy", &[base_seed, run, agent])
}

/// One simulated year.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YearRecord {
    /// State at the decision epoch, before the action.
    pub state: AgentState,
    pub action: Action,
    /// Employment state lived during the year.
    pub year_employment: Employment,
    pub net_income: f64,
    pub utility: f64,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub agent: usize,
    pub years: Vec<YearRecord>,
    /// State at the end of the horizon.
    pub final_state: AgentState,
    pub terminal_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgeRow {
    pub age: u32,
    pub employed_share: f64,
    pub unemployed_share: f64,
    pub retired_share: f64,
    pub mean_net_income: f64,
}

/// Per-age population shares over the employment states lived each year.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateReport {
    pub population: usize,
    pub rows: Vec<AgeRow>,
}

pub const AGGREGATE_HEADER: &str = "age,employed_share,unemployed_share,retired_share,mean_net_income";
pub const TRAJECTORY_HEADER: &str = "agent,age,employment,pension_accrued,prev_wage,time_in_state,wage,action,\
year_employment,net_income,utility,reward,terminal_value";

impl AggregateReport {
    pub fn from_trajectories(trajs: &[Trajectory]) -> Self {
        let n = trajs.len();
        let horizon = trajs.first().map_or(0, |t| t.years.len());
        let rows = (0..horizon)
            .map(|k| {
                let mut counts = [0usize; 3];
                let mut income = 0.0;
                for t in trajs {
                    let y = &t.years[k];
                    counts[y.year_employment.index()] += 1;
                    income += y.net_income;
                }
                let share = |e: Employment| counts[e.index()] as f64 / n as f64;
                AgeRow {
                    age: trajs[0].years[k].state.age,
                    employed_share: share(Employment::Employed),
                    unemployed_share: share(Employment::Unemployed),
                    retired_share: share(Employment::Retired),
                    mean_net_income: income / n as f64,
                }
            })
            .collect();
        AggregateReport { population: n, rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(AGGREGATE_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.age, r.employed_share, r.unemployed_share, r.retired_share, r.mean_net_income
            ));
        }
        out
    }

    /// Element-wise mean and sample standard deviation over runs.
    pub fn mean_std(reports: &[AggregateReport]) -> (AggregateReport, AggregateReport) {
        let k = reports.len();
        let base = &reports[0];
        let field = |r: &AgeRow, j: usize| match j {
            0 => r.employed_share,
            1 => r.unemployed_share,
            2 => r.retired_share,
            _ => r.mean_net_income,
        };
        let mut mean = base.clone();
        let mut std = base.clone();
        for (i, (m, s)) in mean.rows.iter_mut().zip(std.rows.iter_mut()).enumerate() {
            let mut mv = [0.0; 4];
            let mut sv = [0.0; 4];
            for (j, (mj, sj)) in mv.iter_mut().zip(sv.iter_mut()).enumerate() {
                let xs: Vec<f64> = reports.iter().map(|r| field(&r.rows[i], j)).collect();
                (*mj, *sj) = mean_and_std(&xs);
            }
            (m.employed_share, m.unemployed_share, m.retired_share, m.mean_net_income) = (mv[0], mv[1], mv[2], mv[3]);
            (s.employed_share, s.unemployed_share, s.retired_share, s.mean_net_income) = (sv[0], sv[1], sv[2], sv[3]);
        }
        mean.population = reports.iter().map(|r| r.population).sum::<usize>() / k;
        (mean, std)
    }
}

/// Mean and sample standard deviation; the deviation of one value is 0.
pub fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Simulates one agent from entry to the end of the horizon.
pub fn simulate_agent(env: &Env, policy: &PolicyHandle, base_seed: u64, run: u64, agent: usize) -> Result<Trajectory> {
    let mut rng = agent_rng(base_seed, run, agent as u64);
    let mut act_rng = policy_rng(base_seed, run, agent as u64);
    let mut s = env.initial_state(&mut rng);
    let mut years = Vec::with_capacity(env.horizon());
    for _ in 0..env.horizon() {
        let a = policy.act(env, &s, &mut act_rng)?;
        let t = env.transition(&s, a)?;
        let draw = env.next_wage_distribution(&t.year).sample(&mut rng);
        years.push(YearRecord {
            state: s,
            action: a,
            year_employment: t.year.employment,
            net_income: t.net_income,
            utility: t.utility,
            reward: t.reward,
        });
        s = t.next_state(draw);
    }
    Ok(Trajectory {
        agent,
        years,
        final_state: s,
        terminal_value: env.terminal_value(&s)?,
    })
}

fn check_hash(policy: &PolicyHandle, cfg: &ScenarioConfig) -> Result<()> {
    if let Some(h) = policy.model_hash() {
        let found = cfg.model_hash();
        if h != found {
            return Err(Error::HashMismatch {
                expected: h.to_string(),
                found,
            });
        }
    }
    Ok(())
}

/// Simulates `n_agents` agents of run `run`. `workers == 0` uses the global
/// thread pool.
pub fn run_population(
    policy: &PolicyHandle,
    cfg: &ScenarioConfig,
    n_agents: usize,
    seed: u64,
    run: u64,
    workers: usize,
) -> Result<(Vec<Trajectory>, AggregateReport)> {
    if n_agents == 0 {
        return Err(Error::config("simulation.agents", "must be >= 1"));
    }
    check_hash(policy, cfg)?;
    let env = cfg.env();
    let work = || {
        (0..n_agents)
            .into_par_iter()
            .map(|i| simulate_agent(&env, policy, seed, run, i))
            .collect::<Result<Vec<_>>>()
    };
    let trajs = if workers == 0 {
        work()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::config("simulation.workers", e.to_string()))?
            .install(work)?
    };
    let report = AggregateReport::from_trajectories(&trajs);
    Ok((trajs, report))
}

/// Outcome of one simulation run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub run: usize,
    pub report: AggregateReport,
    pub stats: StatBlock,
    pub telemetry: Option<Vec<f64>>,
    pub trajectories: Option<Vec<Trajectory>>,
}

/// Runs averaged over `runs` independent populations.
#[derive(Clone, Debug)]
pub struct MultiRun {
    pub runs: Vec<RunOutcome>,
    pub mean: AggregateReport,
    pub std: AggregateReport,
    pub stats_mean: StatBlock,
    pub stats_std: StatBlock,
}

/// Simulates `runs` populations of `agents` agents. `produce(run)` supplies
/// the policy for each run (and optional training telemetry), so a solver
/// can either retrain per run or hand out one shared solution.
pub fn multi_run<F>(
    cfg: &ScenarioConfig,
    runs: usize,
    agents: usize,
    base_seed: u64,
    workers: usize,
    keep_trajectories: bool,
    mut produce: F,
) -> Result<MultiRun>
where
    F: FnMut(usize) -> Result<(PolicyHandle, Option<Vec<f64>>)>,
{
    if runs == 0 {
        return Err(Error::config("simulation.runs", "must be >= 1"));
    }
    let env = cfg.env();
    let mut outcomes = Vec::with_capacity(runs);
    for run in 0..runs {
        let (policy, telemetry) = produce(run)?;
        let (trajs, report) = run_population(&policy, cfg, agents, base_seed, run as u64, workers)?;
        let stats = StatBlock::compute(&env, &trajs, cfg.simulation.scale_to);
        outcomes.push(RunOutcome {
            run,
            report,
            stats,
            telemetry,
            trajectories: keep_trajectories.then_some(trajs),
        });
    }
    let reports: Vec<AggregateReport> = outcomes.iter().map(|o| o.report.clone()).collect();
    let (mean, std) = AggregateReport::mean_std(&reports);
    let blocks: Vec<StatBlock> = outcomes.iter().map(|o| o.stats.clone()).collect();
    let (stats_mean, stats_std) = StatBlock::mean_std(&blocks);
    Ok(MultiRun {
        runs: outcomes,
        mean,
        std,
        stats_mean,
        stats_std,
    })
}

/// Writes one CSV row per (agent, age).
pub fn write_trajectories(w: &mut impl Write, trajs: &[Trajectory]) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for t in trajs {
        for y in &t.years {
            let s = &y.state;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                t.agent,
                s.age,
                s.employment,
                s.pension_accrued,
                s.prev_wage,
                s.time_in_state,
                s.wage,
                y.action.code(),
                y.year_employment,
                y.net_income,
                y.utility,
                y.reward,
                t.terminal_value
            )?;
        }
    }
    Ok(())
}

pub fn write_trajectories_file(path: impl AsRef<Path>, trajs: &[Trajectory]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_trajectories(&mut w, trajs).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}
