//! Periodic tanh multilayer perceptron.
//!
//! Input features are `sin(x + b_i)`, so every network is 2π-periodic in `x`.
//! Each neuron carries the jet `(v, ∂ₓv, ∂ₓₓv)` through the forward pass;
//! parameter derivatives of each jet component come from a reverse sweep
//! over that jet computation.
//!
//! Flat parameter layout (weight matrices row-major, `W_j[row][col]` with
//! `row` the output neuron):
//!
//! ```text
//! b_in (n_in) | W_1 (w × n_in), b_1 (w) | W_2 (w × w), b_2 (w) | ... | w_out (w) | b_out
//! ```

use nalgebra::{DMatrix, DVector};

use super::{JacobianBatch, JetBatch, JetOrder, ParamVector, Parametrization};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MlpArchitecture {
    pub input_width: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
}

impl Default for MlpArchitecture {
    /// Five sine features, four tanh layers of five neurons: 131 parameters.
    fn default() -> Self {
        Self {
            input_width: 5,
            hidden_layers: 4,
            hidden_width: 5,
        }
    }
}

/// Offsets of one hidden layer inside the flat parameter vector.
#[derive(Clone, Copy, Debug)]
struct LayerOffsets {
    weights: usize,
    bias: usize,
    fan_in: usize,
}

/// Forward jets of one point, kept for the reverse sweep.
struct Tape {
    phases: Vec<f64>,
    /// `acts[0]` are the input features, `acts[j + 1]` the output of hidden layer `j`.
    acts: Vec<[Vec<f64>; 3]>,
    /// Pre-activation derivative jets `(z₁, z₂)` per hidden layer.
    pre: Vec<[Vec<f64>; 2]>,
    out: [f64; 3],
}

impl MlpArchitecture {
    pub fn new(input_width: usize, hidden_layers: usize, hidden_width: usize) -> Result<Self> {
        if input_width == 0 || hidden_layers == 0 || hidden_width == 0 {
            return Err(Error::Config("network dimensions must be positive".into()));
        }
        Ok(Self {
            input_width,
            hidden_layers,
            hidden_width,
        })
    }

    fn layer_offsets(&self) -> Vec<LayerOffsets> {
        let mut off = self.input_width;
        let mut fan_in = self.input_width;
        (0..self.hidden_layers)
            .map(|_| {
                let l = LayerOffsets {
                    weights: off,
                    bias: off + self.hidden_width * fan_in,
                    fan_in,
                };
                off = l.bias + self.hidden_width;
                fan_in = self.hidden_width;
                l
            })
            .collect()
    }

    /// Offset of `w_out`; `b_out` follows it.
    pub fn output_offset(&self) -> usize {
        self.param_count() - self.hidden_width - 1
    }

    /// Offset of the scalar output bias.
    pub fn output_bias_index(&self) -> usize {
        self.param_count() - 1
    }

    /// Index ranges `(start, fan_in)` of the weight matrices, used by the
    /// initializer.
    pub fn weight_blocks(&self) -> Vec<(std::ops::Range<usize>, usize)> {
        let mut blocks: Vec<_> = self
            .layer_offsets()
            .into_iter()
            .map(|l| (l.weights..l.bias, l.fan_in))
            .collect();
        let o = self.output_offset();
        blocks.push((o..o + self.hidden_width, self.hidden_width));
        blocks
    }

    fn forward(&self, theta: &[f64], x: f64, layers: &[LayerOffsets]) -> Tape {
        let w = self.hidden_width;
        let phases: Vec<f64> = theta[..self.input_width].iter().map(|b| x + b).collect();
        let (s, c): (Vec<f64>, Vec<f64>) = phases.iter().map(|p| p.sin_cos()).unzip();
        let neg_s = s.iter().map(|v| -v).collect();
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push([s, c, neg_s]);
        let mut pre = Vec::with_capacity(layers.len());
        for l in layers {
            let y = acts.last().unwrap();
            let mut a = [vec![0.0; w], vec![0.0; w], vec![0.0; w]];
            let mut z12 = [vec![0.0; w], vec![0.0; w]];
            for r in 0..w {
                let row = &theta[l.weights + r * l.fan_in..l.weights + (r + 1) * l.fan_in];
                let mut z = [theta[l.bias + r], 0.0, 0.0];
                for (col, wrc) in row.iter().enumerate() {
                    z[0] += wrc * y[0][col];
                    z[1] += wrc * y[1][col];
                    z[2] += wrc * y[2][col];
                }
                let t = z[0].tanh();
                let sech2 = 1.0 - t * t;
                let dsech2 = -2.0 * t * sech2;
                a[0][r] = t;
                a[1][r] = sech2 * z[1];
                a[2][r] = dsech2 * z[1] * z[1] + sech2 * z[2];
                z12[0][r] = z[1];
                z12[1][r] = z[2];
            }
            acts.push(a);
            pre.push(z12);
        }
        let o = self.output_offset();
        let last = acts.last().unwrap();
        let mut out = [theta[o + w], 0.0, 0.0];
        for i in 0..w {
            for (k, ok) in out.iter_mut().enumerate() {
                *ok += theta[o + i] * last[k][i];
            }
        }
        Tape {
            phases,
            acts,
            pre,
            out,
        }
    }

    /// Reverse sweep for the output adjoint `seed` over `(u, ∂ₓu, ∂ₓₓu)`;
    /// writes `∂(seed·jet)/∂θ` into `grad`.
    fn backward(
        &self,
        theta: &[f64],
        tape: &Tape,
        layers: &[LayerOffsets],
        seed: [f64; 3],
        grad: &mut [f64],
    ) {
        let w = self.hidden_width;
        let o = self.output_offset();
        let last = tape.acts.last().unwrap();
        let mut adj: [Vec<f64>; 3] = [vec![0.0; w], vec![0.0; w], vec![0.0; w]];
        for i in 0..w {
            grad[o + i] = (0..3).map(|k| seed[k] * last[k][i]).sum();
            for k in 0..3 {
                adj[k][i] = seed[k] * theta[o + i];
            }
        }
        grad[o + w] = seed[0];

        for (j, l) in layers.iter().enumerate().rev() {
            let a = &tape.acts[j + 1];
            let y = &tape.acts[j];
            let [z1, z2] = &tape.pre[j];
            let mut zbar = [vec![0.0; w], vec![0.0; w], vec![0.0; w]];
            for r in 0..w {
                let t = a[0][r];
                let s = 1.0 - t * t;
                let ds = -2.0 * t * s;
                let dds = -2.0 * s * s + 4.0 * t * t * s;
                let (a0, a1, a2) = (adj[0][r], adj[1][r], adj[2][r]);
                zbar[0][r] = a0 * s + a1 * ds * z1[r] + a2 * (dds * z1[r] * z1[r] + ds * z2[r]);
                zbar[1][r] = a1 * s + 2.0 * a2 * ds * z1[r];
                zbar[2][r] = a2 * s;
            }
            let mut ybar = [
                vec![0.0; l.fan_in],
                vec![0.0; l.fan_in],
                vec![0.0; l.fan_in],
            ];
            for r in 0..w {
                grad[l.bias + r] = zbar[0][r];
                let base = l.weights + r * l.fan_in;
                for col in 0..l.fan_in {
                    grad[base + col] =
                        zbar[0][r] * y[0][col] + zbar[1][r] * y[1][col] + zbar[2][r] * y[2][col];
                    let wrc = theta[base + col];
                    for k in 0..3 {
                        ybar[k][col] += wrc * zbar[k][r];
                    }
                }
            }
            adj = ybar;
        }

        for (i, phase) in tape.phases.iter().enumerate() {
            let (s, c) = phase.sin_cos();
            grad[i] = adj[0][i] * c - adj[1][i] * s - adj[2][i] * c;
        }
    }
}

impl Parametrization for MlpArchitecture {
    fn param_count(&self) -> usize {
        let w = self.hidden_width;
        self.input_width
            + (w * self.input_width + w)
            + (self.hidden_layers - 1) * (w * w + w)
            + (w + 1)
    }

    fn eval(&self, theta: &ParamVector, points: &[f64], order: JetOrder) -> Result<JetBatch> {
        self.check_theta(theta)?;
        let layers = self.layer_offsets();
        let th = theta.as_slice();
        let m = points.len();
        let mut comps = [DVector::zeros(m), DVector::zeros(m), DVector::zeros(m)];
        for (i, &x) in points.iter().enumerate() {
            let tape = self.forward(th, x, &layers);
            for (c, v) in comps.iter_mut().zip(tape.out) {
                c[i] = v;
            }
        }
        let [values, d1, d2] = comps;
        Ok(JetBatch {
            values,
            d1: (order >= JetOrder::First).then_some(d1),
            d2: (order >= JetOrder::Second).then_some(d2),
        })
    }

    fn jacobian(
        &self,
        theta: &ParamVector,
        points: &[f64],
        order: JetOrder,
    ) -> Result<JacobianBatch> {
        Ok(self.eval_with_jacobian(theta, points, order)?.1)
    }

    fn eval_with_jacobian(
        &self,
        theta: &ParamVector,
        points: &[f64],
        order: JetOrder,
    ) -> Result<(JetBatch, JacobianBatch)> {
        self.check_theta(theta)?;
        let layers = self.layer_offsets();
        let th = theta.as_slice();
        let q = self.param_count();
        let m = points.len();
        let kmax = order.as_usize();
        let mut comps = [DVector::zeros(m), DVector::zeros(m), DVector::zeros(m)];
        // Row-major scratch, transposed into column-major matrices at the end.
        let mut rows: Vec<Vec<f64>> = (0..=kmax).map(|_| vec![0.0; m * q]).collect();
        for (i, &x) in points.iter().enumerate() {
            let tape = self.forward(th, x, &layers);
            for (c, v) in comps.iter_mut().zip(tape.out) {
                c[i] = v;
            }
            for (k, buf) in rows.iter_mut().enumerate() {
                let mut seed = [0.0; 3];
                seed[k] = 1.0;
                self.backward(th, &tape, &layers, seed, &mut buf[i * q..(i + 1) * q]);
            }
        }
        let mut mats = rows
            .into_iter()
            .map(|buf| DMatrix::from_row_slice(m, q, &buf));
        let jac = JacobianBatch {
            j0: mats.next().unwrap(),
            j1: mats.next(),
            j2: mats.next(),
        };
        let [values, d1, d2] = comps;
        let jets = JetBatch {
            values,
            d1: (order >= JetOrder::First).then_some(d1),
            d2: (order >= JetOrder::Second).then_some(d2),
        };
        Ok((jets, jac))
    }
}
