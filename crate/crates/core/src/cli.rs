//! Command-line front end: configuration loading, scenario runs, comparisons
//! and reports.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{load_config_with_base, Scale, ScenarioConfig};
use crate::error::{Error, Result};
use crate::metrics::{compensating_consumption_from_means, StatBlock};
use crate::model::{AgentState, Employment};
use crate::policy::{Artifact, PolicyHandle, SolverRegistry};
use crate::simulate::{multi_run, write_trajectories_file, AggregateReport, MultiRun};

#[derive(Parser, Debug)]
#[command(name = "lifecycle", version, about = "Life-cycle labor-supply solver and reform simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve by value iteration, simulate, and write run artifacts.
    SolveDp(RunArgs),
    /// Train the actor-critic learner, simulate, and write run artifacts.
    TrainRl(RunArgs),
    /// Simulate under a registered solver, optionally from a saved artifact.
    Simulate(SimulateArgs),
    /// Compare two run directories (the first is the reference).
    Compare(CompareArgs),
    /// Print the statistics of a run directory.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Scenario JSON overlay.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the simulation and training seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Base preset the overlay is applied to.
    #[arg(long, default_value = "desk")]
    pub scale: String,
    /// Simulation worker threads (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Independent simulation runs (overrides the config).
    #[arg(long)]
    pub runs: Option<usize>,
    /// Agents per run (overrides the config).
    #[arg(long)]
    pub agents: Option<usize>,
    /// Also write per-agent trajectory CSVs.
    #[arg(long)]
    pub trajectories: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Registered solver name.
    #[arg(long, default_value = "dp")]
    pub solver: String,
    /// Saved solver artifact to reuse instead of solving.
    #[arg(long)]
    pub artifact: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct CompareArgs {
    /// Reference run directory.
    pub run_a: PathBuf,
    /// Alternative run directory.
    pub run_b: PathBuf,
    /// Directory for comparison.json and employment_diff.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ReportArgs {
    /// Run directory containing summary.json.
    pub run: PathBuf,
}

/// Options of [`run_scenario`] beyond the configuration.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub artifact: Option<PathBuf>,
    pub trajectories: bool,
}

/// Loads the configuration described by the run flags.
pub fn resolve_config(args: &RunArgs) -> Result<ScenarioConfig> {
    let scale: Scale = args.scale.parse()?;
    let base = ScenarioConfig::preset(scale);
    let mut cfg = match &args.config {
        Some(path) => load_config_with_base(path, &base)?,
        None => base,
    };
    if let Some(seed) = args.seed {
        cfg.simulation.seed = seed;
        cfg.train.seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.simulation.workers = w;
    }
    if let Some(r) = args.runs {
        cfg.simulation.runs = r;
    }
    if let Some(a) = args.agents {
        cfg.simulation.agents = a;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Everything a scenario run produced.
pub struct ScenarioRun {
    pub multi: MultiRun,
    pub summary: Value,
    /// Policy of the first run.
    pub policy: PolicyHandle,
    pub artifact: Option<Artifact>,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Optimal actions over the (pension, wage) knots of the configured grid as
/// long-format CSV `pension_accrued,wage,action`.
fn policy_map_csv(cfg: &ScenarioConfig, policy: &PolicyHandle, artifact: Option<&Artifact>, age: u32, employment: Employment) -> Result<Option<String>> {
    let sim = &cfg.simulation;
    let mut out = String::from("pension_accrued,wage,action\n");
    if let Some(Artifact::ValueGrid(vg)) = artifact {
        let map = vg.policy_map(age, employment, sim.reference_prev_wage_knot, sim.reference_tis_knot)?;
        let (pk, wk) = (vg.spec.pension_knots(), vg.spec.wage_knots());
        for (p, row) in map.iter().enumerate() {
            for (w, a) in row.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", pk[p], wk[w], a.code()));
            }
        }
        return Ok(Some(out));
    }
    let env = cfg.env();
    let g = &cfg.grid;
    let prev = g.prev_wage_knots()[sim.reference_prev_wage_knot];
    for &p in &g.pension_knots() {
        for &w in &g.wage_knots() {
            let s = AgentState {
                employment,
                age,
                pension_accrued: p,
                prev_wage: prev,
                time_in_state: sim.reference_tis_knot as u32,
                wage: w,
            };
            match policy.greedy(&env, &s) {
                Some(a) => out.push_str(&format!("{},{},{}\n", p, w, a?.code())),
                None => return Ok(None),
            }
        }
    }
    Ok(Some(out))
}

/// Solves (or loads) a policy with the named solver, simulates the configured
/// runs and writes the run directory.
pub fn run_scenario(cfg: &ScenarioConfig, solver_name: &str, out_dir: &Path, opts: &RunOptions) -> Result<ScenarioRun> {
    let registry = SolverRegistry::default();
    let solver = registry.get(solver_name)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let start = Instant::now();

    let mut shared = match &opts.artifact {
        Some(path) => Some(solver.load(cfg, path)?),
        None => None,
    };
    let mut first: Option<(PolicyHandle, Option<Artifact>)> = None;
    let sim = &cfg.simulation;
    let multi = multi_run(cfg, sim.runs, sim.agents, sim.seed, sim.workers, opts.trajectories, |run| {
        let solved = match &shared {
            Some(s) => s.clone_handle(),
            None => {
                let s = solver.solve(cfg, run)?;
                if let Some(a) = &s.artifact {
                    let name = if run == 0 {
                        a.file_name().to_string()
                    } else {
                        a.file_name().replace(".bin", &format!("_run{run}.bin"))
                    };
                    a.write(out_dir.join(name))?;
                }
                if solver.reuse_across_runs() {
                    shared = Some(s.clone_handle());
                }
                s
            }
        };
        if first.is_none() {
            first = Some((solved.policy.clone(), solved.artifact.clone()));
        }
        Ok((solved.policy, solved.telemetry))
    })?;
    let (policy, artifact) = first.expect("at least one run");

    write_file(&out_dir.join("aggregates.csv"), multi.mean.to_csv().as_bytes())?;
    if opts.trajectories {
        for r in &multi.runs {
            if let Some(t) = &r.trajectories {
                write_trajectories_file(out_dir.join(format!("trajectories_run{}.csv", r.run)), t)?;
            }
        }
    }
    for panel in &sim.panels {
        if let Some(csv) = policy_map_csv(cfg, &policy, artifact.as_ref(), panel.age, panel.employment)? {
            let name = format!("policy_age{}_{}.csv", panel.age, panel.employment);
            write_file(&out_dir.join(name), csv.as_bytes())?;
        }
    }

    let mut summary = json!({
        "scenario": cfg.name,
        "solver": solver.name(),
        "config_hash": cfg.content_hash(),
        "model_hash": cfg.model_hash(),
        "reform_neutral_hash": cfg.reform_neutral_hash(),
        "first_age": cfg.model.first_age,
        "last_age": cfg.model.last_age,
        "gamma": cfg.model.reward.gamma,
        "runs": sim.runs,
        "agents": sim.agents,
        "seed": sim.seed,
        "stats": multi.stats_mean,
        "stats_std": multi.stats_std,
        "per_run": multi.runs.iter().map(|r| &r.stats).collect::<Vec<_>>(),
        "wall_clock_seconds": start.elapsed().as_secs_f64(),
        "config": cfg,
    });
    let telemetry: Vec<&Vec<f64>> = multi.runs.iter().filter_map(|r| r.telemetry.as_ref()).collect();
    if !telemetry.is_empty() {
        summary["training_telemetry"] = json!(telemetry);
    }
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&out_dir.join("summary.json"), text.as_bytes())?;

    Ok(ScenarioRun {
        multi,
        summary,
        policy,
        artifact,
    })
}

fn read_summary(dir: &Path) -> Result<Value> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn read_aggregates(dir: &Path) -> Result<Vec<(u32, f64)>> {
    let path = dir.join("aggregates.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let mut cols = l.split(',');
            let bad = || Error::Parse(format!("{}: malformed row `{l}`", path.display()));
            let age = cols.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let employed = cols.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            Ok((age, employed))
        })
        .collect()
}

fn stats_of(summary: &Value) -> Result<StatBlock> {
    serde_json::from_value(summary["stats"].clone()).map_err(|e| Error::Parse(format!("summary stats: {e}")))
}

/// Delta table of `run_b` against the reference `run_a`.
pub fn compare(run_a: &Path, run_b: &Path, out_dir: &Path) -> Result<Value> {
    let (sa, sb) = (read_summary(run_a)?, read_summary(run_b)?);
    if sa["first_age"] != sb["first_age"] || sa["last_age"] != sb["last_age"] {
        return Err(Error::Horizon(format!(
            "{} covers ages {}..{}, {} covers {}..{}",
            run_a.display(),
            sa["first_age"],
            sa["last_age"],
            run_b.display(),
            sb["first_age"],
            sb["last_age"]
        )));
    }
    let (ha, hb) = (sa["reform_neutral_hash"].as_str(), sb["reform_neutral_hash"].as_str());
    if ha != hb {
        return Err(Error::HashMismatch {
            expected: ha.unwrap_or_default().to_string(),
            found: hb.unwrap_or_default().to_string(),
        });
    }
    let (a, b) = (stats_of(&sa)?, stats_of(&sb)?);
    let gamma = sa["gamma"].as_f64().ok_or_else(|| Error::Parse("summary gamma".into()))?;
    let first = sa["first_age"].as_u64().unwrap_or_default();
    let last = sa["last_age"].as_u64().unwrap_or_default();
    let horizon = (last - first + 1) as usize;
    let cc = compensating_consumption_from_means(a.discounted_unscaled_utility, b.discounted_unscaled_utility, gamma, horizon)?;
    let row = |va: f64, vb: f64| json!({ "a": va, "b": vb, "delta": vb - va });
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let report = json!({
        "run_a": run_a.display().to_string(),
        "run_b": run_b.display().to_string(),
        "scenario_a": sa["scenario"],
        "scenario_b": sb["scenario"],
        "initial_discounted_utility": row(a.initial_discounted_utility, b.initial_discounted_utility),
        "time_avg_discounted_utility": row(a.time_avg_discounted_utility, b.time_avg_discounted_utility),
        "equivalent_net_income": row(a.equivalent_net_income, b.equivalent_net_income),
        "employment_person_years": row(a.employment_person_years, b.employment_person_years),
        "compensating_consumption_pct": cc,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&out_dir.join("comparison.json"), text.as_bytes())?;

    let (ea, eb) = (read_aggregates(run_a)?, read_aggregates(run_b)?);
    let mut csv = String::from("age,employed_share_a,employed_share_b,employed_share_diff\n");
    for ((age, x), (_, y)) in ea.iter().zip(&eb) {
        csv.push_str(&format!("{age},{x},{y},{}\n", y - x));
    }
    write_file(&out_dir.join("employment_diff.csv"), csv.as_bytes())?;
    Ok(report)
}

/// Human-readable statistics table of a run directory.
pub fn report(run: &Path) -> Result<String> {
    let s = read_summary(run)?;
    let (mean, std) = (stats_of(&s)?, serde_json::from_value::<StatBlock>(s["stats_std"].clone()).ok());
    let sd = |f: fn(&StatBlock) -> f64| std.as_ref().map_or(0.0, f);
    let mut out = format!(
        "scenario {} / solver {} / {} runs x {} agents\n",
        s["scenario"].as_str().unwrap_or("?"),
        s["solver"].as_str().unwrap_or("?"),
        s["runs"],
        s["agents"]
    );
    let rows: [(&str, fn(&StatBlock) -> f64); 4] = [
        ("initial discounted utility", |b| b.initial_discounted_utility),
        ("time-averaged discounted utility", |b| b.time_avg_discounted_utility),
        ("equivalent net income (e/y)", |b| b.equivalent_net_income),
        ("employment (person-years)", |b| b.employment_person_years),
    ];
    for (label, f) in rows {
        out.push_str(&format!("{label:<34} {:>14.4} ± {:.4}\n", f(&mean), sd(f)));
    }
    Ok(out)
}

fn aggregate_only(dir: &Path) -> Result<AggregateReport> {
    let rows = read_aggregates(dir)?;
    Ok(AggregateReport {
        population: 0,
        rows: rows
            .into_iter()
            .map(|(age, e)| crate::simulate::AgeRow {
                age,
                employed_share: e,
                unemployed_share: f64::NAN,
                retired_share: f64::NAN,
                mean_net_income: f64::NAN,
            })
            .collect(),
    })
}

/// Runs a parsed command line.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SolveDp(args) => {
            let cfg = resolve_config(&args)?;
            run_scenario(&cfg, "dp", &args.out, &RunOptions { artifact: None, trajectories: args.trajectories })?;
            println!("wrote {}", args.out.display());
        }
        Command::TrainRl(args) => {
            let cfg = resolve_config(&args)?;
            run_scenario(&cfg, "rl", &args.out, &RunOptions { artifact: None, trajectories: args.trajectories })?;
            println!("wrote {}", args.out.display());
        }
        Command::Simulate(args) => {
            let cfg = resolve_config(&args.run)?;
            let opts = RunOptions {
                artifact: args.artifact.clone(),
                trajectories: args.run.trajectories,
            };
            run_scenario(&cfg, &args.solver, &args.run.out, &opts)?;
            println!("wrote {}", args.run.out.display());
        }
        Command::Compare(args) => {
            let r = compare(&args.run_a, &args.run_b, &args.out)?;
            println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
        }
        Command::Report(args) => {
            print!("{}", report(&args.run)?);
            let agg = aggregate_only(&args.run)?;
            let peak = agg.rows.iter().max_by(|a, b| a.employed_share.total_cmp(&b.employed_share));
            if let Some(p) = peak {
                println!("peak employment share {:.4} at age {}", p.employed_share, p.age);
            }
        }
    }
    Ok(())
}

/// Entry point of the binary. Errors go to stderr as JSON.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", json!({ "error": { "kind": "usage", "message": e.to_string() } }));
            return 2;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            1
        }
    }
}
