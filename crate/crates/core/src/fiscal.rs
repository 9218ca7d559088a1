//! Gross-to-net income and pension accrual under the baseline benefit/tax
//! schedule and under the basic-income reform.
//!
//! The schedule is a parameterized approximation: one progressive income tax
//! applied to wages and benefits alike, social-security contributions on
//! wages only, a two-tier unemployment benefit, a guarantee pension, and a net
//! income floor standing in for housing and supplementary benefits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AgentState, Employment};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiscalRules {
    pub ss_contribution_rate: f64,
    /// `(threshold, marginal rate)` pairs, thresholds strictly increasing.
    pub tax_brackets: Vec<(f64, f64)>,
    pub basic_ui_benefit: f64,
    pub er_replacement_rate: f64,
    pub er_cap_fraction: f64,
    pub guarantee_pension: f64,
    pub net_floor: f64,
    pub accrual_employed: f64,
    pub accrual_unemployed: f64,
    pub ubi_enabled: bool,
    pub ubi_amount: f64,
    pub flat_tax_rate: f64,
    /// Keep the net floor (housing and supplementary benefits) in basic-income
    /// mode. The basic income then replaces only the minimum benefits.
    pub ubi_keeps_net_floor: bool,
}

impl Default for FiscalRules {
    fn default() -> Self {
        FiscalRules {
            ss_contribution_rate: 0.08,
            tax_brackets: vec![(0.0, 0.0), (12_000.0, 0.20), (30_000.0, 0.35), (60_000.0, 0.45)],
            basic_ui_benefit: 8_400.0,
            er_replacement_rate: 0.45,
            er_cap_fraction: 0.90,
            guarantee_pension: 8_000.0,
            net_floor: 7_200.0,
            accrual_employed: 0.015,
            accrual_unemployed: 0.01125,
            ubi_enabled: false,
            ubi_amount: 6_000.0,
            flat_tax_rate: 0.40,
            ubi_keeps_net_floor: false,
        }
    }
}

impl FiscalRules {
    pub fn validate(&self) -> Result<()> {
        let rate = |v: f64, key: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(format!("fiscal.{key}"), "rate must lie in [0, 1]"))
            }
        };
        let non_negative = |v: f64, key: &str| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("fiscal.{key}"), "must be >= 0"))
            }
        };
        rate(self.ss_contribution_rate, "ss_contribution_rate")?;
        rate(self.er_replacement_rate, "er_replacement_rate")?;
        rate(self.er_cap_fraction, "er_cap_fraction")?;
        rate(self.accrual_employed, "accrual_employed")?;
        rate(self.accrual_unemployed, "accrual_unemployed")?;
        rate(self.flat_tax_rate, "flat_tax_rate")?;
        for &(_, r) in &self.tax_brackets {
            rate(r, "tax_brackets")?;
        }
        if self.tax_brackets.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::config("fiscal.tax_brackets", "thresholds must be strictly increasing"));
        }
        if self.tax_brackets.first().is_some_and(|b| b.0 < 0.0) {
            return Err(Error::config("fiscal.tax_brackets", "thresholds must be >= 0"));
        }
        non_negative(self.basic_ui_benefit, "basic_ui_benefit")?;
        non_negative(self.guarantee_pension, "guarantee_pension")?;
        non_negative(self.net_floor, "net_floor")?;
        non_negative(self.ubi_amount, "ubi_amount")?;
        Ok(())
    }

    fn floor_applies(&self) -> bool {
        !self.ubi_enabled || self.ubi_keeps_net_floor
    }

    /// `(income tax, social-security contribution)` due on `gross`.
    pub fn tax(&self, gross: f64, is_wage: bool) -> Result<(f64, f64)> {
        if gross < 0.0 || gross.is_nan() {
            return Err(Error::NegativeGross(gross));
        }
        let ss = if is_wage { self.ss_contribution_rate * gross } else { 0.0 };
        if self.ubi_enabled {
            return Ok((self.flat_tax_rate * gross, ss));
        }
        let mut tax = 0.0;
        for (i, &(threshold, rate)) in self.tax_brackets.iter().enumerate() {
            if gross <= threshold {
                break;
            }
            let upper = self.tax_brackets.get(i + 1).map_or(f64::INFINITY, |b| b.0);
            tax += rate * (gross.min(upper) - threshold);
        }
        Ok((tax, ss))
    }

    /// Earnings-related benefit before the basic-income substitution.
    fn earnings_related(&self, prev_wage: f64) -> f64 {
        let uncapped = self.basic_ui_benefit + self.er_replacement_rate * (prev_wage - self.basic_ui_benefit).max(0.0);
        uncapped.min(self.er_cap_fraction * prev_wage)
    }

    /// Gross unemployment benefit for a year with the given `time_in_state`.
    /// The earnings-related tier is paid only in the first unemployed year
    /// after an employment spell.
    pub fn unemployment_benefit(&self, prev_wage: f64, time_in_state: u32) -> f64 {
        let eligible = time_in_state == 0 && prev_wage > 0.0;
        if self.ubi_enabled {
            // basic tier replaced by the basic income; only the excess remains
            if eligible {
                (self.earnings_related(prev_wage) - self.basic_ui_benefit).max(0.0)
            } else {
                0.0
            }
        } else if eligible {
            self.earnings_related(prev_wage)
        } else {
            self.basic_ui_benefit
        }
    }

    pub fn pension_benefit(&self, pension_accrued: f64) -> f64 {
        if self.ubi_enabled {
            pension_accrued.max((self.guarantee_pension - self.ubi_amount).max(0.0))
        } else {
            pension_accrued.max(self.guarantee_pension)
        }
    }

    /// Pension accrued during the year lived in state `s`.
    pub fn accrue_pension(&self, s: &AgentState) -> f64 {
        match s.employment {
            Employment::Employed => self.accrual_employed * s.wage,
            Employment::Unemployed if s.time_in_state == 0 => self.accrual_unemployed * s.prev_wage,
            _ => 0.0,
        }
    }

    /// Gross income for the year lived in state `s`.
    pub fn gross_income(&self, s: &AgentState) -> f64 {
        match s.employment {
            Employment::Employed => s.wage,
            Employment::Unemployed => self.unemployment_benefit(s.prev_wage, s.time_in_state),
            Employment::Retired => self.pension_benefit(s.pension_accrued),
        }
    }

    /// Net income for the year lived in state `s`.
    pub fn net_income(&self, s: &AgentState) -> Result<f64> {
        let gross = self.gross_income(s);
        let (tax, ss) = self.tax(gross, s.employment == Employment::Employed)?;
        let mut net = gross - tax - ss;
        if self.ubi_enabled {
            net += self.ubi_amount;
        }
        if self.floor_applies() {
            net = net.max(self.net_floor);
        }
        if !(net > 0.0) {
            return Err(Error::NonPositiveIncome {
                net_income: net,
                state: s.to_string(),
            });
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ubi() -> FiscalRules {
        FiscalRules {
            ubi_enabled: true,
            ..FiscalRules::default()
        }
    }

    fn year(employment: Employment, wage: f64, prev_wage: f64, tis: u32, pension: f64) -> AgentState {
        AgentState {
            employment,
            age: 40,
            pension_accrued: pension,
            prev_wage,
            time_in_state: tis,
            wage,
        }
    }

    #[test]
    fn baseline_tax_examples() {
        let f = FiscalRules::default();
        assert_eq!(f.tax(20_000.0, true).unwrap(), (1_600.0, 1_600.0));
        assert_eq!(f.tax(0.0, true).unwrap(), (0.0, 0.0));
        // 0.2*18,000 + 0.35*30,000 + 0.45*10,000
        let (tax, _) = f.tax(70_000.0, true).unwrap();
        assert!((tax - 18_600.0).abs() < 1e-9);
        assert!(matches!(f.tax(-1.0, true), Err(Error::NegativeGross(_))));
    }

    #[test]
    fn ubi_tax_is_flat() {
        assert_eq!(ubi().tax(20_000.0, true).unwrap(), (8_000.0, 1_600.0));
        assert_eq!(ubi().tax(20_000.0, false).unwrap(), (8_000.0, 0.0));
    }

    #[test]
    fn unemployment_benefit_tiers() {
        let f = FiscalRules::default();
        assert!((f.unemployment_benefit(24_000.0, 0) - 15_420.0).abs() < 1e-9);
        assert_eq!(f.unemployment_benefit(0.0, 0), 8_400.0);
        assert_eq!(f.unemployment_benefit(24_000.0, 2), 8_400.0);
        // cap binds: 8,400 + 0.45*(200,000-8,400) > 0.9 * 200,000? no; use a low cap
        let capped = FiscalRules {
            er_cap_fraction: 0.5,
            ..f.clone()
        };
        assert!((capped.unemployment_benefit(24_000.0, 0) - 12_000.0).abs() < 1e-9);
    }

    #[test]
    fn ubi_unemployment_benefit_pays_only_the_excess() {
        let f = ubi();
        assert!((f.unemployment_benefit(24_000.0, 0) - 7_020.0).abs() < 1e-9);
        assert_eq!(f.unemployment_benefit(24_000.0, 1), 0.0);
        assert_eq!(f.unemployment_benefit(5_000.0, 0), 0.0);
    }

    #[test]
    fn pension_benefit_floor() {
        let f = FiscalRules::default();
        assert_eq!(f.pension_benefit(10_000.0), 10_000.0);
        assert_eq!(f.pension_benefit(0.0), 8_000.0);
        assert_eq!(f.pension_benefit(8_000.0), 8_000.0);
        assert_eq!(ubi().pension_benefit(0.0), 2_000.0);
    }

    #[test]
    fn accrual_rules() {
        let f = FiscalRules::default();
        assert!((f.accrue_pension(&year(Employment::Employed, 30_000.0, 0.0, 5, 0.0)) - 450.0).abs() < 1e-9);
        assert!((f.accrue_pension(&year(Employment::Unemployed, 30_000.0, 24_000.0, 0, 0.0)) - 270.0).abs() < 1e-9);
        assert_eq!(f.accrue_pension(&year(Employment::Unemployed, 30_000.0, 24_000.0, 1, 0.0)), 0.0);
        assert_eq!(f.accrue_pension(&year(Employment::Retired, 30_000.0, 24_000.0, 0, 9_000.0)), 0.0);
    }

    #[test]
    fn net_income_examples() {
        let f = FiscalRules::default();
        assert!((f.net_income(&year(Employment::Employed, 20_000.0, 0.0, 3, 0.0)).unwrap() - 16_800.0).abs() < 1e-9);
        assert!((f.net_income(&year(Employment::Unemployed, 20_000.0, 0.0, 3, 0.0)).unwrap() - 8_400.0).abs() < 1e-9);
        assert!((ubi().net_income(&year(Employment::Employed, 20_000.0, 0.0, 3, 0.0)).unwrap() - 16_400.0).abs() < 1e-9);
    }

    #[test]
    fn ubi_identity_for_zero_gross() {
        let f = ubi();
        let idle = year(Employment::Unemployed, 20_000.0, 0.0, 3, 0.0);
        assert_eq!(f.gross_income(&idle), 0.0);
        assert_eq!(f.net_income(&idle).unwrap(), f.ubi_amount);
        // with the floor retained the identity becomes max(ubi, floor)
        let kept = FiscalRules {
            ubi_keeps_net_floor: true,
            net_floor: 10_200.0,
            ..f
        };
        assert_eq!(kept.net_income(&idle).unwrap(), 10_200.0);
    }

    #[test]
    fn non_positive_net_is_an_error() {
        let f = FiscalRules {
            ubi_enabled: true,
            ubi_amount: 0.0,
            ..FiscalRules::default()
        };
        let idle = year(Employment::Unemployed, 20_000.0, 0.0, 3, 0.0);
        assert!(matches!(f.net_income(&idle), Err(Error::NonPositiveIncome { .. })));
    }

    #[test]
    fn net_income_monotone_in_wage_sweep() {
        for rules in [FiscalRules::default(), ubi()] {
            let mut last = f64::NEG_INFINITY;
            for i in 0..1_000 {
                let w = 1_000.0 + i as f64 * 250.0;
                let n = rules.net_income(&year(Employment::Employed, w, 0.0, 1, 0.0)).unwrap();
                assert!(n >= last, "net income fell at wage {w}");
                last = n;
            }
        }
    }

    proptest! {
        #[test]
        fn baseline_floor_holds(
            e in 0usize..3,
            wage in 0.0f64..400_000.0,
            prev in 0.0f64..400_000.0,
            tis in 0u32..11,
            pension in 0.0f64..100_000.0,
        ) {
            let f = FiscalRules::default();
            let s = year(Employment::from_index(e).unwrap(), wage.max(1.0), prev, tis, pension);
            prop_assert!(f.net_income(&s).unwrap() >= f.net_floor);
        }

        #[test]
        fn earnings_related_benefit_is_capped(prev in 1.0f64..400_000.0) {
            let f = FiscalRules::default();
            prop_assert!(f.unemployment_benefit(prev, 0) <= f.er_cap_fraction * prev + 1e-9);
        }

        #[test]
        fn accrual_zero_outside_work_and_first_unemployed_year(
            wage in 1_000.0f64..400_000.0,
            prev in 0.0f64..400_000.0,
            tis in 1u32..11,
        ) {
            let f = FiscalRules::default();
            prop_assert_eq!(f.accrue_pension(&year(Employment::Unemployed, wage, prev, tis, 0.0)), 0.0);
            prop_assert_eq!(f.accrue_pension(&year(Employment::Retired, wage, prev, 0, 0.0)), 0.0);
        }
    }
}
