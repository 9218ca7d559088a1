//! Advantage actor-critic learner.
//!
//! A policy network maps the encoded state to action logits; a separate value
//! network predicts the discounted return and serves as the baseline.
//! Whole life cycles are sampled under the current policy, Monte Carlo
//! returns (terminal value included) are the regression targets, and both
//! networks take one clipped gradient step per batch.

mod io;
pub mod mlp;

use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::model::{Action, ActionSet, AgentState, Env};
use crate::policy::Policy;
use crate::simulate::seeded_stream;
pub use mlp::Mlp;

pub const N_FEATURES: usize = 8;
pub const N_ACTIONS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Heavy-ball momentum SGD.
    Momentum,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Linear decay to zero over the training budget.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub total_env_steps: u64,
    pub batch_episodes: usize,
    pub learning_rate_policy: f64,
    pub learning_rate_value: f64,
    pub entropy_coefficient: f64,
    /// Entropy coefficient reached at the end of training, interpolated
    /// linearly from `entropy_coefficient`. `None` keeps it constant.
    pub entropy_coefficient_final: Option<f64>,
    pub gradient_clip_norm: f64,
    pub optimizer: Optimizer,
    pub lr_schedule: LrSchedule,
    pub momentum: f64,
    /// Standardize advantages within each batch.
    pub normalize_advantages: bool,
    pub leaky_slope: f64,
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub wage_ref: f64,
    pub pension_ref: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_env_steps: 1_000_000,
            batch_episodes: 16,
            learning_rate_policy: 1e-3,
            learning_rate_value: 1e-3,
            entropy_coefficient: 0.05,
            entropy_coefficient_final: Some(0.0),
            gradient_clip_norm: 5.0,
            optimizer: Optimizer::Adam,
            lr_schedule: LrSchedule::Constant,
            momentum: 0.9,
            normalize_advantages: true,
            leaky_slope: 0.01,
            policy_hidden: vec![32, 32, 32],
            value_hidden: vec![128, 128, 128],
            wage_ref: 40_000.0,
            pension_ref: 20_000.0,
            seed: 2020,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, key: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("train.{key}"), "must be > 0"))
            }
        };
        if self.total_env_steps == 0 {
            return Err(Error::config("train.total_env_steps", "must be > 0"));
        }
        if self.batch_episodes == 0 {
            return Err(Error::config("train.batch_episodes", "must be > 0"));
        }
        positive(self.learning_rate_policy, "learning_rate_policy")?;
        positive(self.learning_rate_value, "learning_rate_value")?;
        positive(self.gradient_clip_norm, "gradient_clip_norm")?;
        positive(self.wage_ref, "wage_ref")?;
        positive(self.pension_ref, "pension_ref")?;
        if !(self.entropy_coefficient >= 0.0) {
            return Err(Error::config("train.entropy_coefficient", "must be >= 0"));
        }
        if self.entropy_coefficient_final.is_some_and(|v| !(v >= 0.0)) {
            return Err(Error::config("train.entropy_coefficient_final", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("train.momentum", "must be in [0, 1)"));
        }
        if !(self.leaky_slope >= 0.0) {
            return Err(Error::config("train.leaky_slope", "must be >= 0"));
        }
        if self.policy_hidden.contains(&0) {
            return Err(Error::config("train.policy_hidden", "layer widths must be positive"));
        }
        if self.value_hidden.contains(&0) {
            return Err(Error::config("train.value_hidden", "layer widths must be positive"));
        }
        Ok(())
    }
}

/// Feature normalization constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Encoder {
    pub first_age: u32,
    pub last_age: u32,
    pub tis_cap: u32,
    pub wage_ref: f64,
    pub pension_ref: f64,
}

impl Encoder {
    pub fn new(env: &Env, tc: &TrainConfig) -> Self {
        Encoder {
            first_age: env.first_age(),
            last_age: env.last_age(),
            tis_cap: env.params.tis_cap,
            wage_ref: tc.wage_ref,
            pension_ref: tc.pension_ref,
        }
    }

    /// `[1-hot(U, E, R), age, wage, prev_wage, pension, tis]`.
    pub fn encode(&self, s: &AgentState) -> [f64; N_FEATURES] {
        let mut f = [0.0; N_FEATURES];
        f[s.employment.index()] = 1.0;
        f[3] = (s.age as f64 - self.first_age as f64) / (self.last_age.saturating_sub(self.first_age).max(1) as f64);
        f[4] = s.wage / self.wage_ref;
        f[5] = s.prev_wage / self.wage_ref;
        f[6] = s.pension_accrued / self.pension_ref;
        f[7] = s.time_in_state as f64 / self.tis_cap.max(1) as f64;
        f
    }
}

/// Softmax over feasible logits; infeasible entries get probability zero.
pub fn masked_softmax(logits: &[f64], feasible: ActionSet) -> [f64; N_ACTIONS] {
    let mask = feasible.mask();
    let max = (0..N_ACTIONS)
        .filter(|&j| mask[j])
        .map(|j| logits[j])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; N_ACTIONS];
    let mut total = 0.0;
    for j in 0..N_ACTIONS {
        if mask[j] {
            p[j] = (logits[j] - max).exp();
            total += p[j];
        }
    }
    for v in &mut p {
        *v /= total;
    }
    p
}

/// Action probabilities of `policy` at `features`.
pub fn policy_forward(policy: &Mlp, features: &[f64], feasible: ActionSet) -> [f64; N_ACTIONS] {
    let mut logits = Vec::with_capacity(N_ACTIONS);
    policy.forward_one(features, &mut logits);
    masked_softmax(&logits, feasible)
}

pub fn value_forward(value: &Mlp, features: &[f64]) -> f64 {
    let mut out = Vec::with_capacity(1);
    value.forward_one(features, &mut out);
    out[0]
}

/// Draws an action index from `p` with one uniform variate.
fn sample_index(p: &[f64; N_ACTIONS], feasible: ActionSet, u: f64) -> Action {
    let mut acc = 0.0;
    let mut chosen = None;
    for a in feasible.iter() {
        acc += p[a.code() as usize];
        chosen = Some(a);
        if u < acc {
            break;
        }
    }
    chosen.expect("feasible set is never empty")
}

fn argmax(p: &[f64; N_ACTIONS], feasible: ActionSet) -> Action {
    let mut best = (Action::Stay, f64::NEG_INFINITY);
    for a in feasible.iter() {
        if p[a.code() as usize] > best.1 {
            best = (a, p[a.code() as usize]);
        }
    }
    best.0
}

/// Trained networks plus everything needed to run them.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedPolicy {
    pub model_hash: String,
    pub encoder: Encoder,
    pub policy: Mlp,
    pub value: Mlp,
    /// Mean discounted episode return of each training batch.
    pub telemetry: Vec<f64>,
}

impl TrainedPolicy {
    pub fn probabilities(&self, env: &Env, s: &AgentState) -> [f64; N_ACTIONS] {
        policy_forward(&self.policy, &self.encoder.encode(s), env.feasible_actions(s))
    }

    pub fn value(&self, s: &AgentState) -> f64 {
        value_forward(&self.value, &self.encoder.encode(s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    Greedy,
}

pub struct RlPolicy {
    trained: Arc<TrainedPolicy>,
    mode: ActMode,
}

impl RlPolicy {
    pub fn new(trained: Arc<TrainedPolicy>, mode: ActMode) -> Self {
        RlPolicy { trained, mode }
    }

    pub fn trained(&self) -> &TrainedPolicy {
        &self.trained
    }
}

impl Policy for RlPolicy {
    fn name(&self) -> &str {
        "rl"
    }

    fn model_hash(&self) -> Option<&str> {
        Some(&self.trained.model_hash)
    }

    fn act(&self, env: &Env, s: &AgentState, rng: &mut dyn RngCore) -> Result<Action> {
        let feasible = env.feasible_actions(s);
        if feasible.len() == 1 {
            return Ok(feasible.iter().next().expect("non-empty"));
        }
        let p = self.trained.probabilities(env, s);
        Ok(match self.mode {
            ActMode::Sample => sample_index(&p, feasible, rng.random::<f64>()),
            ActMode::Greedy => argmax(&p, feasible),
        })
    }

    fn greedy(&self, env: &Env, s: &AgentState) -> Option<Result<Action>> {
        let feasible = env.feasible_actions(s);
        Some(Ok(argmax(&self.trained.probabilities(env, s), feasible)))
    }
}

/// Per-parameter optimizer state.
struct OptState {
    kind: Optimizer,
    lr: f64,
    momentum: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptState {
    fn new(kind: Optimizer, lr: f64, momentum: f64, n: usize) -> Self {
        OptState {
            kind,
            lr,
            momentum,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr_factor: f64) {
        self.t += 1;
        let lr = self.lr * lr_factor;
        match self.kind {
            Optimizer::Momentum => {
                for ((p, g), m) in params.iter_mut().zip(grads).zip(&mut self.m) {
                    *m = self.momentum * *m + g;
                    *p -= lr * *m;
                }
            }
            Optimizer::Adam => {
                let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
                let c1 = 1.0 - b1.powi(self.t);
                let c2 = 1.0 - b2.powi(self.t);
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
    }
}

/// Rescales `g` in place so its Euclidean norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(g: &mut [f64], max_norm: f64) -> f64 {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        g.iter_mut().for_each(|v| *v *= k);
    }
    norm
}

/// One batch of sampled life cycles, flattened to `episodes x horizon` rows.
pub struct Batch {
    pub features: Array2<f64>,
    pub actions: Vec<Action>,
    pub masks: Vec<ActionSet>,
    pub returns: Vec<f64>,
    /// Discounted return from the first age of each episode.
    pub episode_returns: Vec<f64>,
}

/// Samples `n` episodes under `policy` in lockstep. Episode `e` uses the
/// stream derived from `(seed, batch, e)`.
pub fn sample_batch(env: &Env, encoder: &Encoder, policy: &Mlp, n: usize, seed: u64, batch: u64) -> Result<Batch> {
    let horizon = env.horizon();
    let gamma = env.gamma();
    let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|e| seeded_stream(b"rl-episode", &[seed, batch, e as u64])).collect();
    let mut states: Vec<AgentState> = rngs.iter_mut().map(|r| env.initial_state(r)).collect();
    let rows = n * horizon;
    let mut features = Array2::zeros((rows, N_FEATURES));
    let mut actions = vec![Action::Stay; rows];
    let mut masks = vec![ActionSet::empty(); rows];
    let mut rewards = vec![0.0; rows];
    let mut x = Array2::zeros((n, N_FEATURES));
    for t in 0..horizon {
        for (e, s) in states.iter().enumerate() {
            x.row_mut(e).assign(&ndarray::ArrayView1::from(&encoder.encode(s)));
        }
        let logits = policy.forward(&x);
        for e in 0..n {
            let row = e * horizon + t;
            let s = states[e];
            let feasible = env.feasible_actions(&s);
            let p = masked_softmax(logits.row(e).as_slice().expect("contiguous"), feasible);
            let u: f64 = rngs[e].random();
            let a = sample_index(&p, feasible, u);
            let tr = env.transition(&s, a)?;
            let draw = env.next_wage_distribution(&tr.year).sample(&mut rngs[e]);
            features.row_mut(row).assign(&x.row(e));
            actions[row] = a;
            masks[row] = feasible;
            rewards[row] = tr.reward;
            states[e] = tr.next_state(draw);
        }
    }
    let mut returns = vec![0.0; rows];
    let mut episode_returns = Vec::with_capacity(n);
    for (e, s) in states.iter().enumerate() {
        let mut g = env.terminal_value(s)?;
        for t in (0..horizon).rev() {
            let row = e * horizon + t;
            g = rewards[row] + gamma * g;
            returns[row] = g;
        }
        episode_returns.push(g);
    }
    Ok(Batch {
        features,
        actions,
        masks,
        returns,
        episode_returns,
    })
}

/// Policy-loss gradient at the logits:
/// `mean(-A log pi(a) - beta H(pi))` over the batch rows.
pub fn policy_logit_gradient(
    logits: &Array2<f64>,
    actions: &[Action],
    masks: &[ActionSet],
    advantages: &[f64],
    beta: f64,
) -> (Array2<f64>, f64, f64) {
    let n = logits.nrows();
    let mut d = Array2::zeros(logits.raw_dim());
    let (mut loss, mut entropy_sum) = (0.0, 0.0);
    for r in 0..n {
        let p = masked_softmax(logits.row(r).as_slice().expect("contiguous"), masks[r]);
        let mask = masks[r].mask();
        let h: f64 = (0..N_ACTIONS).filter(|&j| mask[j] && p[j] > 0.0).map(|j| -p[j] * p[j].ln()).sum();
        let a = actions[r].code() as usize;
        loss += -advantages[r] * p[a].ln() - beta * h;
        entropy_sum += h;
        for j in 0..N_ACTIONS {
            if !mask[j] {
                continue;
            }
            let onehot = if j == a { 1.0 } else { 0.0 };
            let log_p = if p[j] > 0.0 { p[j].ln() } else { 0.0 };
            d[[r, j]] = (advantages[r] * (p[j] - onehot) + beta * p[j] * (log_p + h)) / n as f64;
        }
    }
    (d, loss / n as f64, entropy_sum / n as f64)
}

/// Trains a policy for `cfg` with training settings `tc`.
pub fn train(cfg: &ScenarioConfig, tc: &TrainConfig) -> Result<TrainedPolicy> {
    tc.validate()?;
    let env = cfg.env();
    let encoder = Encoder::new(&env, tc);
    let mut init_rng = seeded_stream(b"rl-init", &[tc.seed]);
    let mut sizes = vec![N_FEATURES];
    sizes.extend(&tc.policy_hidden);
    sizes.push(N_ACTIONS);
    let mut policy = Mlp::new(&sizes, tc.leaky_slope, &mut init_rng);
    let mut sizes = vec![N_FEATURES];
    sizes.extend(&tc.value_hidden);
    sizes.push(1);
    let mut value = Mlp::new(&sizes, tc.leaky_slope, &mut init_rng);

    let mut opt_pi = OptState::new(tc.optimizer, tc.learning_rate_policy, tc.momentum, policy.n_params());
    let mut opt_v = OptState::new(tc.optimizer, tc.learning_rate_value, tc.momentum, value.n_params());
    let steps_per_batch = (tc.batch_episodes * env.horizon()) as u64;
    let n_batches = tc.total_env_steps.div_ceil(steps_per_batch);
    let mut telemetry = Vec::with_capacity(n_batches as usize);

    for b in 0..n_batches {
        let batch = sample_batch(&env, &encoder, &policy, tc.batch_episodes, tc.seed, b)?;
        let rows = batch.returns.len();
        let mean_return = batch.episode_returns.iter().sum::<f64>() / batch.episode_returns.len() as f64;

        let (v_pred, v_cache) = value.forward_cached(&batch.features);
        let mut advantages: Vec<f64> = (0..rows).map(|r| batch.returns[r] - v_pred[[r, 0]]).collect();
        let dv = Array2::from_shape_fn((rows, 1), |(r, _)| -advantages[r] / rows as f64);
        let v_loss = advantages.iter().map(|a| 0.5 * a * a).sum::<f64>() / rows as f64;
        if tc.normalize_advantages {
            let mean = advantages.iter().sum::<f64>() / rows as f64;
            let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / rows as f64;
            let sd = var.sqrt().max(1e-8);
            advantages.iter_mut().for_each(|a| *a = (*a - mean) / sd);
        }

        let progress = b as f64 / n_batches as f64;
        let beta = match tc.entropy_coefficient_final {
            Some(end) => tc.entropy_coefficient + (end - tc.entropy_coefficient) * progress,
            None => tc.entropy_coefficient,
        };
        let (logits, pi_cache) = policy.forward_cached(&batch.features);
        let (dlogits, pi_loss, entropy) =
            policy_logit_gradient(&logits, &batch.actions, &batch.masks, &advantages, beta);

        if !(pi_loss.is_finite() && v_loss.is_finite() && mean_return.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite loss at batch {b} (policy loss {pi_loss}, value loss {v_loss}, mean return {mean_return}, \
                 entropy {entropy}, lr policy {}, lr value {})",
                tc.learning_rate_policy, tc.learning_rate_value
            )));
        }

        let mut g_pi = policy.backward(&pi_cache, &dlogits);
        let mut g_v = value.backward(&v_cache, &dv);
        clip_global_norm(&mut g_pi, tc.gradient_clip_norm);
        clip_global_norm(&mut g_v, tc.gradient_clip_norm);
        let lr_factor = match tc.lr_schedule {
            LrSchedule::Constant => 1.0,
            LrSchedule::Linear => 1.0 - progress,
        };
        let mut theta = policy.to_flat();
        opt_pi.step(&mut theta, &g_pi, lr_factor);
        policy.set_flat(&theta);
        let mut phi = value.to_flat();
        opt_v.step(&mut phi, &g_v, lr_factor);
        value.set_flat(&phi);

        telemetry.push(mean_return);
    }

    Ok(TrainedPolicy {
        model_hash: cfg.model_hash(),
        encoder,
        policy,
        value,
        telemetry,
    })
}
