use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knot layout of the value grid. Spacings and origins are given in
/// euros/month, knots are produced in euros/year.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n_pension: usize,
    pub n_prev_wage: usize,
    pub n_wage: usize,
    pub n_tis: usize,
    pub pension_origin: f64,
    pub pension_step: f64,
    pub prev_wage_origin: f64,
    pub prev_wage_step: f64,
    pub wage_origin: f64,
    pub wage_step: f64,
    pub quadrature_nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_pension: 20,
            n_prev_wage: 20,
            n_wage: 25,
            n_tis: 5,
            pension_origin: 0.0,
            pension_step: 417.0,
            prev_wage_origin: 0.0,
            prev_wage_step: 890.0,
            wage_origin: 83.0,
            wage_step: 701.0,
            quadrature_nodes: 5,
        }
    }
}

fn knots(origin: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| 12.0 * (origin + step * i as f64)).collect()
}

impl GridSpec {
    /// Reduced grid used for desk-scale runs. It covers the same hull as the
    /// default grid with fewer knots.
    pub fn desk() -> Self {
        let full = GridSpec::default();
        GridSpec {
            n_pension: 12,
            n_prev_wage: 10,
            n_wage: 15,
            n_tis: 2,
            ..full
        }
        .with_hull_of(&full)
    }

    /// Same knot counts, spacing rescaled so the hull matches `other`.
    fn with_hull_of(mut self, other: &GridSpec) -> Self {
        let span = |n_other: usize, step: f64, n: usize| step * (n_other - 1) as f64 / (n - 1) as f64;
        self.pension_step = span(other.n_pension, other.pension_step, self.n_pension);
        self.prev_wage_step = span(other.n_prev_wage, other.prev_wage_step, self.n_prev_wage);
        self.wage_step = span(other.n_wage, other.wage_step, self.n_wage);
        self
    }

    /// Multiply the knot counts on the pension and wage axes by `factor`,
    /// keeping the hull fixed.
    pub fn refined(&self, factor: usize) -> Self {
        GridSpec {
            n_pension: self.n_pension * factor,
            n_wage: self.n_wage * factor,
            ..self.clone()
        }
        .with_hull_of(self)
    }

    pub fn pension_knots(&self) -> Vec<f64> {
        knots(self.pension_origin, self.pension_step, self.n_pension)
    }

    pub fn prev_wage_knots(&self) -> Vec<f64> {
        knots(self.prev_wage_origin, self.prev_wage_step, self.n_prev_wage)
    }

    pub fn wage_knots(&self) -> Vec<f64> {
        knots(self.wage_origin, self.wage_step, self.n_wage)
    }

    /// Nearest tis knot; the top knot absorbs all longer durations.
    pub fn tis_knot(&self, time_in_state: u32) -> usize {
        (time_in_state as usize).min(self.n_tis - 1)
    }

    /// Knots per (employment, tis) slab.
    pub fn slab_len(&self) -> usize {
        self.n_pension * self.n_prev_wage * self.n_wage
    }

    /// Knots per age layer.
    pub fn layer_len(&self) -> usize {
        3 * self.n_tis * self.slab_len()
    }

    pub fn validate(&self) -> Result<()> {
        for (n, key) in [
            (self.n_pension, "grid.n_pension"),
            (self.n_prev_wage, "grid.n_prev_wage"),
            (self.n_wage, "grid.n_wage"),
        ] {
            if n < 2 {
                return Err(Error::config(key, "at least 2 knots required"));
            }
        }
        if self.n_tis < 1 {
            return Err(Error::config("grid.n_tis", "at least 1 knot required"));
        }
        for (v, key) in [
            (self.pension_step, "grid.pension_step"),
            (self.prev_wage_step, "grid.prev_wage_step"),
            (self.wage_step, "grid.wage_step"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "step must be > 0"));
            }
        }
        for (v, key) in [
            (self.pension_origin, "grid.pension_origin"),
            (self.prev_wage_origin, "grid.prev_wage_origin"),
            (self.wage_origin, "grid.wage_origin"),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, "origin must be >= 0"));
            }
        }
        if self.quadrature_nodes < 1 {
            return Err(Error::config("grid.quadrature_nodes", "must be >= 1"));
        }
        Ok(())
    }
}
