use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    /// Utility cost of lost free time while employed.
    pub kappa: f64,
    /// Yearly discount factor.
    pub gamma: f64,
    /// Divisor applied to utilities fed to the solvers.
    pub reward_scale: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            kappa: 0.75,
            gamma: 0.92,
            reward_scale: 10.0,
        }
    }
}

/// Mean log wage by age: `ln(base_wage) + slope*(a-origin) + curvature*(a-origin)^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgeProfile {
    pub base_wage: f64,
    pub origin_age: u32,
    pub slope: f64,
    pub curvature: f64,
}

impl Default for AgeProfile {
    fn default() -> Self {
        AgeProfile {
            base_wage: 28_000.0,
            origin_age: 18,
            slope: 0.035,
            curvature: -0.0006,
        }
    }
}

impl AgeProfile {
    pub fn mean_log_wage(&self, age: u32) -> f64 {
        let x = age as f64 - self.origin_age as f64;
        self.base_wage.ln() + self.slope * x + self.curvature * x * x
    }
}

/// AR(1) process in log wages around the age profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WageProcessParams {
    pub rho: f64,
    pub sigma: f64,
    pub age_profile: AgeProfile,
    /// Multiplicative factor applied to the wage after an unemployed year.
    pub unemployment_penalty: f64,
    pub wage_floor: f64,
    pub wage_cap: f64,
}

impl Default for WageProcessParams {
    fn default() -> Self {
        WageProcessParams {
            rho: 0.89,
            sigma: 0.20,
            age_profile: AgeProfile::default(),
            unemployment_penalty: 0.95,
            wage_floor: 1_000.0,
            wage_cap: 350_000.0,
        }
    }
}

/// Post-horizon mortality. Survival `S_k` is the probability of living `k`
/// years past the horizon, `k = 0..=max_age-70`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerminalParams {
    pub max_age: u32,
    /// Gompertz hazard `h(a) = hazard_base * exp(hazard_growth * (a - 70))`.
    pub hazard_base: f64,
    pub hazard_growth: f64,
    /// Explicit survival curve; overrides the Gompertz hazard when present.
    pub survival: Option<Vec<f64>>,
}

impl Default for TerminalParams {
    fn default() -> Self {
        TerminalParams {
            max_age: 100,
            hazard_base: 0.0009,
            hazard_growth: 0.085,
            survival: None,
        }
    }
}

impl TerminalParams {
    pub fn survival_curve(&self) -> Vec<f64> {
        if let Some(s) = &self.survival {
            return s.clone();
        }
        let n = (self.max_age.saturating_sub(70) + 1) as usize;
        let mut out = Vec::with_capacity(n);
        let mut cumulative = 0.0f64;
        for k in 0..n {
            out.push((-cumulative).exp());
            cumulative += self.hazard_base * (self.hazard_growth * k as f64).exp();
        }
        out
    }

    /// `sum_k S_k * gamma^k`.
    pub fn annuity_factor(&self, gamma: f64) -> f64 {
        self.survival_curve()
            .iter()
            .enumerate()
            .map(|(k, s)| s * gamma.powi(k as i32))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub first_age: u32,
    /// Last decision age; the terminal value is credited after this year.
    pub last_age: u32,
    pub min_retirement_age: f64,
    pub tis_cap: u32,
    pub reward: RewardParams,
    pub wage: WageProcessParams,
    pub terminal: TerminalParams,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            first_age: 18,
            last_age: 70,
            min_retirement_age: 63.5,
            tis_cap: 10,
            reward: RewardParams::default(),
            wage: WageProcessParams::default(),
            terminal: TerminalParams::default(),
        }
    }
}

impl ModelParams {
    pub fn retirement_age(&self) -> u32 {
        self.min_retirement_age.ceil().max(0.0) as u32
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, msg: &str| if ok { Ok(()) } else { Err(Error::config(key, msg)) };
        check(self.first_age <= self.last_age, "model.last_age", "must be >= first_age")?;
        check(self.min_retirement_age.is_finite(), "model.min_retirement_age", "must be finite")?;
        let r = &self.reward;
        check(r.kappa >= 0.0 && r.kappa.is_finite(), "model.reward.kappa", "must be >= 0")?;
        check(r.gamma >= 0.0 && r.gamma < 1.0, "model.reward.gamma", "must be in [0, 1)")?;
        check(r.reward_scale > 0.0 && r.reward_scale.is_finite(), "model.reward.reward_scale", "must be > 0")?;
        let w = &self.wage;
        check((0.0..=1.0).contains(&w.rho), "model.wage.rho", "must be in [0, 1]")?;
        check(w.sigma >= 0.0 && w.sigma.is_finite(), "model.wage.sigma", "must be >= 0")?;
        check(
            w.unemployment_penalty > 0.0 && w.unemployment_penalty <= 1.0,
            "model.wage.unemployment_penalty",
            "must be in (0, 1]",
        )?;
        check(w.wage_floor > 0.0, "model.wage.wage_floor", "must be > 0")?;
        check(w.wage_floor < w.wage_cap, "model.wage.wage_cap", "must exceed wage_floor")?;
        check(w.age_profile.base_wage > 0.0, "model.wage.age_profile.base_wage", "must be > 0")?;
        let t = &self.terminal;
        check(t.max_age >= 70, "model.terminal.max_age", "must be >= 70")?;
        check(t.hazard_base >= 0.0, "model.terminal.hazard_base", "must be >= 0")?;
        if let Some(s) = &t.survival {
            check(!s.is_empty() && s[0] == 1.0, "model.terminal.survival", "first entry must be 1")?;
            check(s.iter().all(|v| (0.0..=1.0).contains(v)), "model.terminal.survival", "values must lie in [0, 1]")?;
            check(s.windows(2).all(|w| w[1] <= w[0]), "model.terminal.survival", "must be non-increasing")?;
        }
        Ok(())
    }
}
