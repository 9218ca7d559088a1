//! Population statistics and scenario comparisons.
//!
//! Discounted-utility statistics use scaled rewards and include the terminal
//! value. Compensating consumption works on unscaled in-horizon utilities;
//! equivalent net income and person-years are in-horizon flow measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Employment, Env};
use crate::simulate::{mean_and_std, Trajectory};

/// Bracket for the compensating-consumption root search.
pub const CC_BRACKET: (f64, f64) = (-0.99, 10.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatBlock {
    pub agents: usize,
    pub initial_discounted_utility: f64,
    pub time_avg_discounted_utility: f64,
    pub equivalent_net_income: f64,
    /// Employed person-years rescaled to the configured population size.
    pub employment_person_years: f64,
    /// Mean over agents of the in-horizon unscaled discounted utility; the
    /// input to compensating consumption.
    pub discounted_unscaled_utility: f64,
    /// Against a reference run, when one is given.
    pub compensating_consumption_pct: Option<f64>,
}

impl StatBlock {
    pub fn compute(env: &Env, trajs: &[Trajectory], scale_to: usize) -> Self {
        let gamma = env.gamma();
        StatBlock {
            agents: trajs.len(),
            initial_discounted_utility: initial_discounted_utility(trajs, gamma),
            time_avg_discounted_utility: time_avg_discounted_utility(trajs, gamma),
            equivalent_net_income: equivalent_net_income(trajs),
            employment_person_years: employment_person_years(trajs, scale_to),
            discounted_unscaled_utility: discounted_unscaled_utility(trajs, gamma),
            compensating_consumption_pct: None,
        }
    }

    fn fields(&self) -> [f64; 5] {
        [
            self.initial_discounted_utility,
            self.time_avg_discounted_utility,
            self.equivalent_net_income,
            self.employment_person_years,
            self.discounted_unscaled_utility,
        ]
    }

    fn from_fields(agents: usize, f: [f64; 5], cc: Option<f64>) -> Self {
        StatBlock {
            agents,
            initial_discounted_utility: f[0],
            time_avg_discounted_utility: f[1],
            equivalent_net_income: f[2],
            employment_person_years: f[3],
            discounted_unscaled_utility: f[4],
            compensating_consumption_pct: cc,
        }
    }

    /// Field-wise mean and sample standard deviation across runs.
    pub fn mean_std(blocks: &[StatBlock]) -> (StatBlock, StatBlock) {
        let mut mean = [0.0; 5];
        let mut std = [0.0; 5];
        for j in 0..5 {
            let xs: Vec<f64> = blocks.iter().map(|b| b.fields()[j]).collect();
            (mean[j], std[j]) = mean_and_std(&xs);
        }
        let ccs: Option<Vec<f64>> = blocks.iter().map(|b| b.compensating_consumption_pct).collect();
        let (cc_mean, cc_std) = match ccs {
            Some(v) if !v.is_empty() => {
                let (m, s) = mean_and_std(&v);
                (Some(m), Some(s))
            }
            _ => (None, None),
        };
        let agents = blocks.first().map_or(0, |b| b.agents);
        (StatBlock::from_fields(agents, mean, cc_mean), StatBlock::from_fields(agents, std, cc_std))
    }
}

fn mean_over<F: Fn(&Trajectory) -> f64>(trajs: &[Trajectory], f: F) -> f64 {
    trajs.iter().map(f).sum::<f64>() / trajs.len() as f64
}

/// Mean of `sum_t gamma^t r_t + gamma^T V_T` over agents.
pub fn initial_discounted_utility(trajs: &[Trajectory], gamma: f64) -> f64 {
    mean_over(trajs, |t| {
        let mut g = t.terminal_value;
        for y in t.years.iter().rev() {
            g = y.reward + gamma * g;
        }
        g
    })
}

/// Mean over agents of the average, over start times `s`, of the return
/// discounted back to `s` (terminal value included).
pub fn time_avg_discounted_utility(trajs: &[Trajectory], gamma: f64) -> f64 {
    mean_over(trajs, |t| {
        let mut g = t.terminal_value;
        let mut total = 0.0;
        for y in t.years.iter().rev() {
            g = y.reward + gamma * g;
            total += g;
        }
        total / t.years.len() as f64
    })
}

/// Mean over agents of `sum_t beta^t u_t` with unscaled utilities, terminal
/// value excluded.
pub fn discounted_unscaled_utility(trajs: &[Trajectory], beta: f64) -> f64 {
    mean_over(trajs, |t| {
        let mut g = 0.0;
        for y in t.years.iter().rev() {
            g = y.utility + beta * g;
        }
        g
    })
}

/// `D = sum_{t=1}^{T} beta^(t-1)`.
pub fn discount_sum(beta: f64, horizon: usize) -> f64 {
    (0..horizon).map(|t| beta.powi(t as i32)).sum()
}

/// Closed form of the compensating consumption, as a fraction:
/// `exp((U_ref - U_alt) / D) - 1` for per-agent mean discounted utilities.
pub fn compensating_consumption_closed(u_ref: f64, u_alt: f64, d: f64) -> f64 {
    ((u_ref - u_alt) / d).exp_m1()
}

/// Compensating consumption by bisection on `U_alt + D ln(1 + x) = U_ref`.
pub fn compensating_consumption_bisect(u_ref: f64, u_alt: f64, d: f64) -> Result<f64> {
    let f = |x: f64| u_alt + d * x.ln_1p() - u_ref;
    let (mut lo, mut hi) = CC_BRACKET;
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::NoRoot { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * mid.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Percent by which the alternative population's consumption must rise in
/// every period to match the reference population's discounted utility.
pub fn compensating_consumption(reference: &[Trajectory], alternative: &[Trajectory], beta: f64) -> Result<f64> {
    let horizon = reference.first().map_or(0, |t| t.years.len());
    if alternative.first().map_or(0, |t| t.years.len()) != horizon {
        return Err(Error::Horizon("populations have different horizons".into()));
    }
    let d = discount_sum(beta, horizon);
    let x = compensating_consumption_bisect(
        discounted_unscaled_utility(reference, beta),
        discounted_unscaled_utility(alternative, beta),
        d,
    )?;
    Ok(100.0 * x)
}

/// Compensating consumption in percent from per-agent mean discounted
/// utilities, as stored in run summaries.
pub fn compensating_consumption_from_means(u_ref: f64, u_alt: f64, beta: f64, horizon: usize) -> Result<f64> {
    Ok(100.0 * compensating_consumption_bisect(u_ref, u_alt, discount_sum(beta, horizon))?)
}

/// Mean over agents and years of `exp(u_t) = n_t exp(-kappa 1[employed])`.
pub fn equivalent_net_income(trajs: &[Trajectory]) -> f64 {
    mean_over(trajs, |t| t.years.iter().map(|y| y.utility.exp()).sum::<f64>() / t.years.len() as f64)
}

/// Employed person-years, rescaled from the simulated population to
/// `scale_to` agents.
pub fn employment_person_years(trajs: &[Trajectory], scale_to: usize) -> f64 {
    let count: usize = trajs
        .iter()
        .map(|t| t.years.iter().filter(|y| y.year_employment == Employment::Employed).count())
        .sum();
    count as f64 * scale_to as f64 / trajs.len() as f64
}
