use rand::Rng;
use rand_distr::StandardNormal;

use super::params::WageProcessParams;

/// Clamped log-normal wage offer: `ln w = mu_log + sigma * z`, `z ~ N(0,1)`,
/// then clamped to `[floor, cap]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WageDistribution {
    pub mu_log: f64,
    pub sigma: f64,
    pub floor: f64,
    pub cap: f64,
}

impl WageDistribution {
    /// Next-year offer: `ln w' = (1-rho) * profile(next_age) + rho * ln(w * penalty) + eps`.
    pub fn next(p: &WageProcessParams, wage: f64, unemployed: bool, next_age: u32) -> Self {
        let penalty = if unemployed { p.unemployment_penalty } else { 1.0 };
        let mu_log = (1.0 - p.rho) * p.age_profile.mean_log_wage(next_age) + p.rho * (wage * penalty).ln();
        WageDistribution {
            mu_log,
            sigma: p.sigma,
            floor: p.wage_floor,
            cap: p.wage_cap,
        }
    }

    /// Offer distribution centred on the age profile.
    pub fn at_age(p: &WageProcessParams, age: u32) -> Self {
        WageDistribution {
            mu_log: p.age_profile.mean_log_wage(age),
            sigma: p.sigma,
            floor: p.wage_floor,
            cap: p.wage_cap,
        }
    }

    pub fn clamp(&self, w: f64) -> f64 {
        w.clamp(self.floor, self.cap)
    }

    /// Wage at standard-normal shock `z`.
    pub fn at_shock(&self, z: f64) -> f64 {
        self.clamp((self.mu_log + self.sigma * z).exp())
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma == 0.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.is_degenerate() {
            return self.at_shock(0.0);
        }
        let z: f64 = rng.sample(StandardNormal);
        self.at_shock(z)
    }

    /// Quantile function of the clamped distribution.
    pub fn quantile(&self, prob: f64) -> f64 {
        if self.is_degenerate() {
            return self.at_shock(0.0);
        }
        self.at_shock(standard_normal_quantile(prob))
    }
}

/// Inverse standard-normal CDF (Acklam's rational approximation, relative
/// error about 1e-9).
pub(crate) fn standard_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let low = 0.02425;
    if p < low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn degenerate() -> WageProcessParams {
        WageProcessParams {
            rho: 1.0,
            sigma: 0.0,
            ..WageProcessParams::default()
        }
    }

    #[test]
    fn degenerate_employed_is_a_point_mass() {
        let d = WageDistribution::next(&degenerate(), 30_000.0, false, 41);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert!((d.sample(&mut rng) - 30_000.0).abs() < 1e-9);
        }
        assert!((d.quantile(0.1) - 30_000.0).abs() < 1e-9);
    }

    #[test]
    fn unemployment_penalty_applies() {
        let d = WageDistribution::next(&degenerate(), 30_000.0, true, 41);
        assert!((d.quantile(0.5) - 28_500.0).abs() < 1e-9);
    }

    #[test]
    fn clamps_to_floor() {
        let p = degenerate();
        let d = WageDistribution::next(&p, 500.0, false, 41);
        assert_eq!(d.quantile(0.5), p.wage_floor);
    }

    #[test]
    fn quantile_matches_known_values() {
        assert!(standard_normal_quantile(0.5).abs() < 1e-12);
        assert!((standard_normal_quantile(0.975) - 1.959963984540054).abs() < 1e-7);
        assert!((standard_normal_quantile(0.001) + 3.090232306167813).abs() < 1e-7);
    }

    #[test]
    fn samples_are_lognormal() {
        let p = WageProcessParams::default();
        let d = WageDistribution::at_age(&p, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20_000;
        let logs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng).ln()).collect();
        let mean = logs.iter().sum::<f64>() / n as f64;
        let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - d.mu_log).abs() < 4.0 * p.sigma / (n as f64).sqrt());
        assert!((var.sqrt() - p.sigma).abs() < 0.01);
    }
}
