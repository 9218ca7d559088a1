//! Backward-induction value iteration on a knot grid.
//!
//! Continuation values between knots come from tensor-product natural cubic
//! splines over (pension, prev_wage, wage); employment and time-in-state are
//! looked up at the nearest knot. Expectations over next year's wage use
//! Gauss–Hermite quadrature of the log-normal shock.

mod grid;
mod io;
pub mod quadrature;
pub mod spline;

pub use grid::GridSpec;
pub use quadrature::{wage_quadrature, GaussHermite};

use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::model::{Action, AgentState, Employment, Env};
use crate::policy::Policy;
use spline::{Spline3, SplineCoeffs};

/// Values and spline coefficients of one age.
#[derive(Clone, Debug)]
struct Layer {
    values: Vec<f64>,
    coeffs: Vec<SplineCoeffs>,
}

/// Solved value function: one layer per decision age plus the terminal layer.
///
/// Layer `k` holds age `first_age + k`; the last layer is the end of the
/// horizon (`last_age + 1`). Within a layer the axis order is
/// employment, tis, pension, prev_wage, wage (wage fastest).
#[derive(Clone, Debug)]
pub struct ValueGrid {
    pub spec: GridSpec,
    pub model_hash: String,
    /// Model and fiscal parameters the grid was solved under; needed to
    /// evaluate action values away from the knots.
    pub config: ScenarioConfig,
    spline: Spline3,
    layers: Vec<Layer>,
    /// Argmax action code per knot for each decision layer.
    actions: Vec<Vec<u8>>,
}

fn knot_index(spec: &GridSpec, e: usize, t: usize, p: usize, q: usize, w: usize) -> usize {
    (((e * spec.n_tis + t) * spec.n_pension + p) * spec.n_prev_wage + q) * spec.n_wage + w
}

impl ValueGrid {
    fn spline_for(spec: &GridSpec) -> Spline3 {
        Spline3::new(spec.pension_knots(), spec.prev_wage_knots(), spec.wage_knots())
    }

    fn build_layer(spline: &Spline3, spec: &GridSpec, values: Vec<f64>) -> Layer {
        let slab = spec.slab_len();
        let coeffs = values.chunks(slab).map(|chunk| spline.fit(chunk)).collect();
        Layer { values, coeffs }
    }

    pub fn first_age(&self) -> u32 {
        self.config.model.first_age
    }

    pub fn last_age(&self) -> u32 {
        self.config.model.last_age
    }

    /// Number of stored layers, terminal layer included.
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    fn layer(&self, age: u32) -> Option<&Layer> {
        age.checked_sub(self.first_age()).and_then(|k| self.layers.get(k as usize))
    }

    fn slab(&self, employment: Employment, time_in_state: u32) -> usize {
        employment.index() * self.spec.n_tis + self.spec.tis_knot(time_in_state)
    }

    /// Knot state at the given indices.
    pub fn knot_state(&self, age: u32, e: Employment, t: usize, p: usize, q: usize, w: usize) -> AgentState {
        let ax = &self.spline.axes;
        AgentState {
            employment: e,
            age,
            pension_accrued: ax[0].knots()[p],
            prev_wage: ax[1].knots()[q],
            time_in_state: t as u32,
            wage: ax[2].knots()[w],
        }
    }

    /// Stored value at a knot.
    pub fn knot_value(&self, age: u32, e: Employment, t: usize, p: usize, q: usize, w: usize) -> Option<f64> {
        self.layer(age).map(|l| l.values[knot_index(&self.spec, e.index(), t, p, q, w)])
    }

    /// Stored argmax action at a knot of a decision age.
    pub fn knot_action(&self, age: u32, e: Employment, t: usize, p: usize, q: usize, w: usize) -> Option<Action> {
        let k = age.checked_sub(self.first_age())? as usize;
        let codes = self.actions.get(k)?;
        Action::from_code(codes[knot_index(&self.spec, e.index(), t, p, q, w)])
    }

    /// Interpolated value of state `s` at its age.
    pub fn value(&self, s: &AgentState) -> Option<f64> {
        let layer = self.layer(s.age)?;
        let slab = self.slab(s.employment, s.time_in_state);
        Some(self.spline.eval(&layer.coeffs[slab], s.pension_accrued, s.prev_wage, s.wage))
    }

    /// Expected value of taking `a` in `s`: reward plus discounted
    /// interpolated continuation, averaged over the wage quadrature.
    pub fn action_value(&self, s: &AgentState, a: Action) -> Result<f64> {
        let gh = GaussHermite::new(self.spec.quadrature_nodes);
        let next = self
            .layer(s.age + 1)
            .ok_or_else(|| Error::Horizon(format!("age {} is outside the solved horizon", s.age)))?;
        let mut buf = Vec::with_capacity(gh.len());
        action_value(&self.config.env(), &self.spline, &self.spec, next, &gh, s, a, &mut buf)
    }

    /// Greedy action at an arbitrary state: argmax of the action values,
    /// ties to the lowest action code.
    pub fn greedy_action(&self, s: &AgentState) -> Result<Action> {
        let env = self.config.env();
        let gh = GaussHermite::new(self.spec.quadrature_nodes);
        let mut buf = Vec::with_capacity(gh.len());
        let feasible = env.feasible_actions(s);
        if feasible.len() == 1 {
            return Ok(feasible.iter().next().expect("non-empty"));
        }
        let next = self
            .layer(s.age + 1)
            .ok_or_else(|| Error::Horizon(format!("age {} is outside the solved horizon", s.age)))?;
        let mut best = (Action::Stay, f64::NEG_INFINITY);
        for a in feasible.iter() {
            let q = action_value(&env, &self.spline, &self.spec, next, &gh, s, a, &mut buf)?;
            if q > best.1 {
                best = (a, q);
            }
        }
        Ok(best.0)
    }

    /// Stored optimal actions over (pension knots x wage knots) at a fixed
    /// age and employment state, with prev_wage and tis at reference knots.
    pub fn policy_map(&self, age: u32, employment: Employment, prev_knot: usize, tis_knot: usize) -> Result<Vec<Vec<Action>>> {
        if age < self.first_age() || age > self.last_age() {
            return Err(Error::Horizon(format!("age {age} outside the decision horizon")));
        }
        let q = prev_knot.min(self.spec.n_prev_wage - 1);
        let t = tis_knot.min(self.spec.n_tis - 1);
        Ok((0..self.spec.n_pension)
            .map(|p| {
                (0..self.spec.n_wage)
                    .map(|w| self.knot_action(age, employment, t, p, q, w).expect("decision age"))
                    .collect()
            })
            .collect())
    }
}

#[allow(clippy::too_many_arguments)]
fn action_value(
    env: &Env,
    spline: &Spline3,
    spec: &GridSpec,
    next: &Layer,
    gh: &GaussHermite,
    s: &AgentState,
    a: Action,
    buf: &mut Vec<(f64, f64)>,
) -> Result<f64> {
    let t = env.transition(s, a)?;
    gh.wage_nodes(&env.next_wage_distribution(&t.year), buf);
    let slab = t.year.employment.index() * spec.n_tis + spec.tis_knot(t.year.time_in_state);
    let cont = spline.expect(&next.coeffs[slab], t.next_pension, t.next_prev_wage, buf);
    Ok(t.reward + env.gamma() * cont)
}

/// Solves the configuration's decision process on its grid.
pub fn solve(cfg: &ScenarioConfig) -> Result<ValueGrid> {
    backward_induct(cfg, &cfg.grid)
}

/// Backward induction from the terminal layer down to the first age.
pub fn backward_induct(cfg: &ScenarioConfig, spec: &GridSpec) -> Result<ValueGrid> {
    spec.validate()?;
    let env = cfg.env();
    let spline = ValueGrid::spline_for(spec);
    let gh = GaussHermite::new(spec.quadrature_nodes);
    let (first, last) = (env.first_age(), env.last_age());
    let n_layers = (last - first + 2) as usize;
    let layer_len = spec.layer_len();
    let (np, nq, nw) = (spec.n_pension, spec.n_prev_wage, spec.n_wage);
    let pension = spline.axes[0].knots().to_vec();

    // terminal layer depends on pension only
    let mut terminal = vec![0.0; layer_len];
    let by_pension: Vec<f64> = pension
        .iter()
        .map(|&p| env.terminal_value_for_pension(p))
        .collect::<Result<_>>()?;
    for (k, v) in terminal.iter_mut().enumerate() {
        let p = (k / (nq * nw)) % np;
        *v = by_pension[p];
    }
    let mut layers: Vec<Option<Layer>> = (0..n_layers).map(|_| None).collect();
    layers[n_layers - 1] = Some(ValueGrid::build_layer(&spline, spec, terminal));
    let mut actions: Vec<Vec<u8>> = vec![Vec::new(); n_layers - 1];

    let mut config = cfg.clone();
    config.grid = spec.clone();
    let scratch = ValueGrid {
        spec: spec.clone(),
        model_hash: cfg.model_hash(),
        config,
        spline: spline.clone(),
        layers: Vec::new(),
        actions: Vec::new(),
    };

    for age in (first..=last).rev() {
        let k = (age - first) as usize;
        let next = layers[k + 1].as_ref().expect("next layer solved");
        let mut values = vec![0.0; layer_len];
        let mut codes = vec![0u8; layer_len];
        values
            .par_chunks_mut(nw)
            .zip(codes.par_chunks_mut(nw))
            .enumerate()
            .try_for_each_init(
                || Vec::with_capacity(gh.len()),
                |buf, (row, (vals, acts))| -> Result<()> {
                    let q = row % nq;
                    let p = (row / nq) % np;
                    let t = (row / (nq * np)) % spec.n_tis;
                    let e = Employment::from_index(row / (nq * np * spec.n_tis)).expect("employment index");
                    for w in 0..nw {
                        let s = scratch.knot_state(age, e, t, p, q, w);
                        let mut best = (Action::Stay, f64::NEG_INFINITY);
                        for a in env.feasible_actions(&s).iter() {
                            let v = action_value(&env, &spline, spec, next, &gh, &s, a, buf)?;
                            if !v.is_finite() {
                                return Err(Error::NonFinite(format!("action {a:?} at knot {s}")));
                            }
                            if v > best.1 {
                                best = (a, v);
                            }
                        }
                        vals[w] = best.1;
                        acts[w] = best.0.code();
                    }
                    Ok(())
                },
            )?;
        layers[k] = Some(ValueGrid::build_layer(&spline, spec, values));
        actions[k] = codes;
    }

    Ok(ValueGrid {
        layers: layers.into_iter().map(|l| l.expect("all layers solved")).collect(),
        actions,
        ..scratch
    })
}

/// Greedy policy of a solved value grid.
pub struct DpPolicy {
    grid: Arc<ValueGrid>,
}

impl DpPolicy {
    pub fn new(grid: Arc<ValueGrid>) -> Self {
        DpPolicy { grid }
    }

    pub fn grid(&self) -> &ValueGrid {
        &self.grid
    }
}

impl Policy for DpPolicy {
    fn name(&self) -> &str {
        "dp"
    }

    fn model_hash(&self) -> Option<&str> {
        Some(&self.grid.model_hash)
    }

    fn act(&self, _env: &Env, s: &AgentState, _rng: &mut dyn RngCore) -> Result<Action> {
        self.grid.greedy_action(s)
    }

    fn greedy(&self, _env: &Env, s: &AgentState) -> Option<Result<Action>> {
        Some(self.grid.greedy_action(s))
    }
}

