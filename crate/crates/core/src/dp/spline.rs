//! Natural cubic splines on a 1-D axis and their tensor product on a 3-D
//! `(pension, prev_wage, wage)` block.
//!
//! A natural spline on interval `[x_i, x_{i+1}]` is
//! `A y_i + B y_{i+1} + C M_i + D M_{i+1}`, where `M` are the knot second
//! derivatives (zero at both ends). The tensor product of three such splines
//! is evaluated from eight knot tensors: the values and every mixed
//! second-derivative combination `M_w, M_q, M_qw, M_p, M_pw, M_pq, M_pqw`.
//! Evaluating the 64 local terms gives the same number as nesting 1-D passes
//! along wage, prev_wage and pension, because each pass is linear in its data.

/// One interpolation axis with a pre-factorized natural-spline system.
#[derive(Clone, Debug)]
pub struct SplineAxis {
    knots: Vec<f64>,
    h: Vec<f64>,
    // Thomas-algorithm factors for interior rows 1..n-1
    c_prime: Vec<f64>,
    denom: Vec<f64>,
}

/// Interval index and basis weights `[A, B, C, D]` of a query point.
#[derive(Clone, Copy, Debug)]
pub struct AxisWeights {
    pub index: usize,
    pub basis: [f64; 4],
}

impl AxisWeights {
    /// Weight of corner `c` (0 = left, 1 = right) for data type `t`
    /// (0 = value, 1 = second derivative).
    #[inline]
    fn get(&self, c: usize, t: usize) -> f64 {
        // [A, B, C, D] laid out as value(left, right), curvature(left, right)
        self.basis[c + 2 * t]
    }
}

impl SplineAxis {
    pub fn new(knots: Vec<f64>) -> Self {
        assert!(knots.len() >= 2, "spline axis needs at least two knots");
        assert!(knots.windows(2).all(|w| w[1] > w[0]), "knots must be strictly increasing");
        let n = knots.len();
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let mut c_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        for i in 1..n.saturating_sub(1) {
            let a = h[i - 1];
            let b = 2.0 * (h[i - 1] + h[i]);
            let c = h[i];
            let prev = if i > 1 { c_prime[i - 1] } else { 0.0 };
            denom[i] = b - a * prev;
            c_prime[i] = c / denom[i];
        }
        SplineAxis { knots, h, c_prime, denom }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Natural-spline second derivatives of the line
    /// `y[offset + k*stride]`, written to `out` at the same positions.
    pub fn second_derivatives_strided(&self, y: &[f64], offset: usize, stride: usize, out: &mut [f64]) {
        let n = self.knots.len();
        let at = |k: usize| offset + k * stride;
        out[at(0)] = 0.0;
        out[at(n - 1)] = 0.0;
        if n < 3 {
            return;
        }
        // forward sweep, d' stored in out
        for i in 1..n - 1 {
            let d = 6.0 * ((y[at(i + 1)] - y[at(i)]) / self.h[i] - (y[at(i)] - y[at(i - 1)]) / self.h[i - 1]);
            let prev = if i > 1 { out[at(i - 1)] } else { 0.0 };
            out[at(i)] = (d - self.h[i - 1] * prev) / self.denom[i];
        }
        for i in (1..n - 2).rev() {
            out[at(i)] -= self.c_prime[i] * out[at(i + 1)];
        }
    }

    pub fn second_derivatives(&self, y: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; y.len()];
        self.second_derivatives_strided(y, 0, 1, &mut m);
        m
    }

    /// Interval and basis weights at `x`, clamped to the knot hull.
    #[inline]
    pub fn weights(&self, x: f64) -> AxisWeights {
        let n = self.knots.len();
        let x = x.clamp(self.knots[0], self.knots[n - 1]);
        // partition_point gives the first knot > x
        let i = self.knots.partition_point(|&k| k <= x).clamp(1, n - 1) - 1;
        let h = self.h[i];
        let b = (x - self.knots[i]) / h;
        let a = 1.0 - b;
        let h2 = h * h / 6.0;
        AxisWeights {
            index: i,
            basis: [a, b, (a * a * a - a) * h2, (b * b * b - b) * h2],
        }
    }

    /// 1-D evaluation from values and second derivatives.
    pub fn eval(&self, y: &[f64], m: &[f64], x: f64) -> f64 {
        let w = self.weights(x);
        let i = w.index;
        let [a, b, c, d] = w.basis;
        a * y[i] + b * y[i + 1] + c * m[i] + d * m[i + 1]
    }
}

/// Tensor-product natural spline on `(pension, prev_wage, wage)`.
#[derive(Clone, Debug)]
pub struct Spline3 {
    pub axes: [SplineAxis; 3],
}

/// Precomputed coefficient block: 8 interleaved tensors per knot.
#[derive(Clone, Debug, Default)]
pub struct SplineCoeffs {
    pub data: Vec<f64>,
}

impl Spline3 {
    pub fn new(pension: Vec<f64>, prev_wage: Vec<f64>, wage: Vec<f64>) -> Self {
        Spline3 {
            axes: [SplineAxis::new(pension), SplineAxis::new(prev_wage), SplineAxis::new(wage)],
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.axes[0].len(), self.axes[1].len(), self.axes[2].len()]
    }

    pub fn len(&self) -> usize {
        let [a, b, c] = self.shape();
        a * b * c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Applies the second-derivative operator of `axis` to every line of `src`.
    fn apply(&self, axis: usize, src: &[f64], dst: &mut [f64]) {
        let [np, nq, nw] = self.shape();
        match axis {
            0 => {
                let stride = nq * nw;
                for off in 0..stride {
                    self.axes[0].second_derivatives_strided(src, off, stride, dst);
                }
            }
            1 => {
                for p in 0..np {
                    for w in 0..nw {
                        self.axes[1].second_derivatives_strided(src, p * nq * nw + w, nw, dst);
                    }
                }
            }
            _ => {
                for line in 0..np * nq {
                    self.axes[2].second_derivatives_strided(src, line * nw, 1, dst);
                }
            }
        }
    }

    /// Builds the coefficient block for `values` laid out `[p][q][w]`.
    pub fn fit(&self, values: &[f64]) -> SplineCoeffs {
        let n = self.len();
        assert_eq!(values.len(), n);
        let mut t: [Vec<f64>; 8] = Default::default();
        t[0] = values.to_vec();
        for (target, source, axis) in [(1, 0, 2), (2, 0, 1), (3, 1, 1), (4, 0, 0), (5, 1, 0), (6, 2, 0), (7, 3, 0)] {
            let mut out = vec![0.0; n];
            self.apply(axis, &t[source], &mut out);
            t[target] = out;
        }
        let mut data = vec![0.0; n * 8];
        for k in 0..n {
            for (ty, tensor) in t.iter().enumerate() {
                data[k * 8 + ty] = tensor[k];
            }
        }
        SplineCoeffs { data }
    }

    #[inline]
    fn pq_weights(&self, p: f64, q: f64) -> (usize, usize, [f64; 16]) {
        let wp = self.axes[0].weights(p);
        let wq = self.axes[1].weights(q);
        // index: cp*8 + cq*4 + tp*2 + tq
        let mut f = [0.0; 16];
        for cp in 0..2 {
            for cq in 0..2 {
                for tp in 0..2 {
                    for tq in 0..2 {
                        f[cp * 8 + cq * 4 + tp * 2 + tq] = wp.get(cp, tp) * wq.get(cq, tq);
                    }
                }
            }
        }
        (wp.index, wq.index, f)
    }

    #[inline]
    fn eval_with(&self, coeffs: &SplineCoeffs, ip: usize, iq: usize, fpq: &[f64; 16], w: f64) -> f64 {
        let [_, nq, nw] = self.shape();
        let ww = self.axes[2].weights(w);
        let iw = ww.index;
        let mut sum = 0.0;
        for cp in 0..2 {
            for cq in 0..2 {
                let row = ((ip + cp) * nq + (iq + cq)) * nw + iw;
                for cw in 0..2 {
                    let base = (row + cw) * 8;
                    let c = &coeffs.data[base..base + 8];
                    for tp in 0..2 {
                        for tq in 0..2 {
                            let f = fpq[cp * 8 + cq * 4 + tp * 2 + tq];
                            let ty = (tp << 2) | (tq << 1);
                            sum += f * (c[ty] * ww.get(cw, 0) + c[ty | 1] * ww.get(cw, 1));
                        }
                    }
                }
            }
        }
        sum
    }

    /// Interpolated value at `(p, q, w)`, each coordinate clamped to its hull.
    pub fn eval(&self, coeffs: &SplineCoeffs, p: f64, q: f64, w: f64) -> f64 {
        let (ip, iq, f) = self.pq_weights(p, q);
        self.eval_with(coeffs, ip, iq, &f, w)
    }

    /// `sum_i weight_i * s(p, q, w_i)` over quadrature nodes `(w_i, weight_i)`.
    pub fn expect(&self, coeffs: &SplineCoeffs, p: f64, q: f64, nodes: &[(f64, f64)]) -> f64 {
        let (ip, iq, f) = self.pq_weights(p, q);
        nodes.iter().map(|&(w, wt)| wt * self.eval_with(coeffs, ip, iq, &f, w)).sum()
    }
}
