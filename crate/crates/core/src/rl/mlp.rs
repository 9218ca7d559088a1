//! Fully connected networks with leaky-ReLU hidden layers and a linear
//! output, with hand-written backpropagation.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `fan_in x fan_out`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub leaky_slope: f64,
}

/// Activations kept by [`Mlp::forward_cached`] for the backward pass.
pub struct Cache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation output of each hidden layer.
    pre: Vec<Array2<f64>>,
}

impl Mlp {
    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], leaky_slope: f64, rng: &mut R) -> Self {
        let layers = sizes
            .windows(2)
            .map(|s| {
                let bound = 1.0 / (s[0] as f64).sqrt();
                Dense {
                    w: Array2::from_shape_simple_fn((s[0], s[1]), || rng.random_range(-bound..bound)),
                    b: Array1::from_shape_simple_fn(s[1], || rng.random_range(-bound..bound)),
                }
            })
            .collect();
        Mlp { layers, leaky_slope }
    }

    pub fn zeros(sizes: &[usize], leaky_slope: f64) -> Self {
        let layers = sizes
            .windows(2)
            .map(|s| Dense {
                w: Array2::zeros((s[0], s[1])),
                b: Array1::zeros(s[1]),
            })
            .collect();
        Mlp { layers, leaky_slope }
    }

    /// Layer widths, input first.
    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![self.layers[0].w.nrows()];
        out.extend(self.layers.iter().map(|l| l.w.ncols()));
        out
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().expect("at least one layer").w.ncols()
    }

    fn activate(&self, z: &mut Array2<f64>) {
        let a = self.leaky_slope;
        z.mapv_inplace(|v| if v > 0.0 { v } else { a * v });
    }

    /// Forward pass over a batch (`rows x n_inputs`).
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            h = h.dot(&l.w) + &l.b;
            if i < last {
                self.activate(&mut h);
            }
        }
        h
    }

    pub fn forward_cached(&self, x: &Array2<f64>) -> (Array2<f64>, Cache) {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let z = h.dot(&l.w) + &l.b;
            inputs.push(h);
            if i < last {
                pre.push(z.clone());
                h = z;
                self.activate(&mut h);
            } else {
                h = z;
            }
        }
        (h, Cache { inputs, pre })
    }

    /// Gradient of a loss with respect to every parameter, given the loss
    /// gradient `dout` at the outputs. Returned in [`Mlp::to_flat`] order.
    pub fn backward(&self, cache: &Cache, dout: &Array2<f64>) -> Vec<f64> {
        let mut grads: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(self.layers.len());
        let mut d = dout.clone();
        for i in (0..self.layers.len()).rev() {
            let gw = cache.inputs[i].t().dot(&d);
            let gb = d.sum_axis(Axis(0));
            if i > 0 {
                let mut dh = d.dot(&self.layers[i].w.t());
                let a = self.leaky_slope;
                ndarray::Zip::from(&mut dh).and(&cache.pre[i - 1]).for_each(|g, &z| {
                    if z <= 0.0 {
                        *g *= a;
                    }
                });
                d = dh;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        let mut flat = Vec::with_capacity(self.n_params());
        for (gw, gb) in grads {
            flat.extend(gw.iter());
            flat.extend(gb.iter());
        }
        flat
    }

    /// Forward pass for one input vector without intermediate allocations
    /// beyond two scratch buffers.
    pub fn forward_one(&self, x: &[f64], out: &mut Vec<f64>) {
        let last = self.layers.len() - 1;
        let mut h: Vec<f64> = x.to_vec();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = l.b.to_vec();
            for (r, &hv) in h.iter().enumerate() {
                if hv == 0.0 {
                    continue;
                }
                for (zv, &wv) in z.iter_mut().zip(l.w.row(r)) {
                    *zv += hv * wv;
                }
            }
            if i < last {
                for v in z.iter_mut() {
                    if *v <= 0.0 {
                        *v *= self.leaky_slope;
                    }
                }
            }
            h = z;
        }
        *out = h;
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Parameters flattened layer by layer: weights row-major
    /// (`fan_in x fan_out`), then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "parameter vector length");
        let mut k = 0;
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = flat[k];
                k += 1;
            }
        }
    }
}
