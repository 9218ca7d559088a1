//! Gauss–Hermite rules for expectations over the log-wage shock.

use crate::model::WageDistribution;

/// Nodes and weights for `E[f(Z)]`, `Z ~ N(0, 1)`; weights sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// `n`-point rule from Newton iteration on the orthonormal Hermite
    /// recurrence, rescaled from `exp(-x^2)` to the standard normal.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * (n as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let mut nodes: Vec<f64> = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
        let mut weights: Vec<f64> = w.iter().map(|v| v / sqrt_pi).collect();
        nodes.reverse();
        weights.reverse();
        GaussHermite { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Wage nodes `(wage, weight)` for a clamped log-normal offer. A
    /// degenerate distribution collapses to one node of weight one.
    pub fn wage_nodes(&self, dist: &WageDistribution, out: &mut Vec<(f64, f64)>) {
        out.clear();
        if dist.is_degenerate() {
            out.push((dist.at_shock(0.0), 1.0));
            return;
        }
        let total: f64 = self.weights.iter().sum();
        out.extend(self.nodes.iter().zip(&self.weights).map(|(&z, &wt)| (dist.at_shock(z), wt / total)));
    }
}

/// Convenience wrapper returning a fresh node list.
pub fn wage_quadrature(dist: &WageDistribution, nodes: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(nodes);
    GaussHermite::new(nodes).wage_nodes(dist, &mut out);
    out
}
