//! A single LSTM cell (with forget gate) and its exact
//! backpropagation-through-time gradients.
//!
//! Gate convention, for input `x`, previous hidden state `h` and previous
//! cell state `c`:
//!
//! ```text
//! i = sigmoid(W_i x + U_i h + b_i)      input gate
//! f = sigmoid(W_f x + U_f h + b_f)      forget gate
//! o = sigmoid(W_o x + U_o h + b_o)      output gate
//! g = tanh   (W_g x + U_g h + b_g)      cell candidate
//! c' = f * c + i * g
//! h' = o * tanh(c')
//! ```

use rand::Rng;

use super::linalg::{xavier_from_rng, Matrix};

/// Number of gates and their fixed order in the parameter arrays.
pub const NUM_GATES: usize = 4;
pub const GATE_NAMES: [&str; NUM_GATES] = ["i", "f", "o", "g"];

/// Weights of one LSTM cell: per gate, an input matrix (`hidden x input`),
/// a recurrent matrix (`hidden x hidden`) and a bias vector.
///
/// Also used as the accumulator type for cell gradients, which have the
/// same shape as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub w: [Matrix; NUM_GATES],
    pub u: [Matrix; NUM_GATES],
    pub b: [Vec<f64>; NUM_GATES],
}

impl LstmCellParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_dim,
            hidden,
            w: std::array::from_fn(|_| Matrix::zeros(hidden, input_dim)),
            u: std::array::from_fn(|_| Matrix::zeros(hidden, hidden)),
            b: std::array::from_fn(|_| vec![0.0; hidden]),
        }
    }

    /// Xavier-initialized weight matrices, zero biases.
    pub fn xavier<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            input_dim,
            hidden,
            w: std::array::from_fn(|_| xavier_from_rng(hidden, input_dim, rng)),
            u: std::array::from_fn(|_| xavier_from_rng(hidden, hidden, rng)),
            b: std::array::from_fn(|_| vec![0.0; hidden]),
        }
    }

    /// One recurrence step; returns the new `(hidden, cell)` state.
    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut act = self.gate_activations(x, h_prev);
        let (i, rest) = act.split_at_mut(self.hidden);
        let (f, rest) = rest.split_at_mut(self.hidden);
        let (o, g) = rest.split_at_mut(self.hidden);
        let mut c = vec![0.0; self.hidden];
        let mut h = vec![0.0; self.hidden];
        for k in 0..self.hidden {
            c[k] = f[k] * c_prev[k] + i[k] * g[k];
            h[k] = o[k] * c[k].tanh();
        }
        (h, c)
    }

    /// Pre-activation sums pushed through their nonlinearities, laid out as
    /// `[i | f | o | g]`, each `hidden` wide.
    fn gate_activations(&self, x: &[f64], h_prev: &[f64]) -> Vec<f64> {
        let h = self.hidden;
        let mut act = vec![0.0; NUM_GATES * h];
        for gate in 0..NUM_GATES {
            let out = &mut act[gate * h..(gate + 1) * h];
            out.copy_from_slice(&self.b[gate]);
            self.w[gate].matvec_add(x, out);
            self.u[gate].matvec_add(h_prev, out);
            if gate == 3 {
                for v in out.iter_mut() {
                    *v = v.tanh();
                }
            } else {
                for v in out.iter_mut() {
                    *v = sigmoid(*v);
                }
            }
        }
        act
    }

    /// Run the cell over a full input sequence from zero initial state,
    /// recording the activations needed for backpropagation.
    pub fn run(&self, inputs: &[&[f64]]) -> LstmTrace {
        let h = self.hidden;
        let mut trace = LstmTrace {
            gates: Vec::with_capacity(inputs.len()),
            cell: Vec::with_capacity(inputs.len()),
            cell_tanh: Vec::with_capacity(inputs.len()),
            hidden: Vec::with_capacity(inputs.len()),
        };
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        for &x in inputs {
            let act = self.gate_activations(x, &h_prev);
            let mut c = vec![0.0; h];
            let mut c_tanh = vec![0.0; h];
            let mut h_new = vec![0.0; h];
            for k in 0..h {
                let (i, f, o, g) = (act[k], act[h + k], act[2 * h + k], act[3 * h + k]);
                c[k] = f * c_prev[k] + i * g;
                c_tanh[k] = c[k].tanh();
                h_new[k] = o * c_tanh[k];
            }
            trace.gates.push(act);
            c_prev.clone_from(&c);
            h_prev.clone_from(&h_new);
            trace.cell.push(c);
            trace.cell_tanh.push(c_tanh);
            trace.hidden.push(h_new);
        }
        trace
    }

    /// Backpropagate through time over a recorded run.
    ///
    /// `dh_ext[t]` is the loss gradient arriving at hidden state `t` from
    /// outside the recurrence; parameter gradients are accumulated into
    /// `grads` (same shape as the cell).
    pub fn backprop(
        &self,
        inputs: &[&[f64]],
        trace: &LstmTrace,
        dh_ext: &[Vec<f64>],
        grads: &mut LstmCellParams,
    ) {
        let h = self.hidden;
        let steps = inputs.len();
        debug_assert_eq!(trace.hidden.len(), steps);
        debug_assert_eq!(dh_ext.len(), steps);

        let zero = vec![0.0; h];
        let mut dh_rec = vec![0.0; h];
        let mut dc_rec = vec![0.0; h];
        let mut d_raw = vec![0.0; NUM_GATES * h];
        for t in (0..steps).rev() {
            let act = &trace.gates[t];
            let c_tanh = &trace.cell_tanh[t];
            let c_prev = if t == 0 { &zero } else { &trace.cell[t - 1] };
            let h_prev = if t == 0 { &zero } else { &trace.hidden[t - 1] };

            for k in 0..h {
                let dh = dh_ext[t][k] + dh_rec[k];
                let (i, f, o, g) = (act[k], act[h + k], act[2 * h + k], act[3 * h + k]);
                let dc = dh * o * (1.0 - c_tanh[k] * c_tanh[k]) + dc_rec[k];
                d_raw[k] = dc * g * i * (1.0 - i);
                d_raw[h + k] = dc * c_prev[k] * f * (1.0 - f);
                d_raw[2 * h + k] = dh * c_tanh[k] * o * (1.0 - o);
                d_raw[3 * h + k] = dc * i * (1.0 - g * g);
                dc_rec[k] = dc * f;
            }

            dh_rec.iter_mut().for_each(|v| *v = 0.0);
            for gate in 0..NUM_GATES {
                let dg = &d_raw[gate * h..(gate + 1) * h];
                grads.w[gate].add_outer(dg, inputs[t]);
                grads.u[gate].add_outer(dg, h_prev);
                for (b, d) in grads.b[gate].iter_mut().zip(dg) {
                    *b += d;
                }
                self.u[gate].tr_matvec_add(dg, &mut dh_rec);
            }
        }
    }

    /// `self += other`, elementwise over every parameter tensor.
    pub fn add_assign(&mut self, other: &LstmCellParams) {
        for gate in 0..NUM_GATES {
            self.w[gate].add_assign(&other.w[gate]);
            self.u[gate].add_assign(&other.u[gate]);
            for (a, b) in self.b[gate].iter_mut().zip(&other.b[gate]) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for gate in 0..NUM_GATES {
            self.w[gate].scale(factor);
            self.u[gate].scale(factor);
            for v in &mut self.b[gate] {
                *v *= factor;
            }
        }
    }
}

/// Per-timestep activations recorded by [`LstmCellParams::run`]. The raw
/// gate order inside `gates` is `[i | f | o | g]`.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    pub gates: Vec<Vec<f64>>,
    pub cell: Vec<Vec<f64>>,
    pub cell_tanh: Vec<Vec<f64>>,
    pub hidden: Vec<Vec<f64>>,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_zero_cell_state() {
        let cell = LstmCellParams::zeros(2, 3);
        let (h, c) = cell.step(&[1.0, -1.0], &[0.0; 3], &[0.0; 3]);
        assert_eq!(h, vec![0.0; 3]);
        assert_eq!(c, vec![0.0; 3]);
    }

    #[test]
    fn zero_params_halve_previous_cell() {
        // With all parameters zero: f = i = o = 0.5, g = 0, so the new cell
        // is half the old one and h = 0.5 * tanh(0.5 * c_prev).
        let cell = LstmCellParams::zeros(1, 2);
        let c_prev = [0.8, -1.2];
        let (h, c) = cell.step(&[0.3], &[0.0; 2], &c_prev);
        for k in 0..2 {
            assert!((c[k] - 0.5 * c_prev[k]).abs() < 1e-15);
            assert!((h[k] - 0.5 * (0.5 * c_prev[k]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn step_matches_scalar_recomputation() {
        // h = 2, input dim 1: recompute the six equations scalar by scalar.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cell = LstmCellParams::xavier(1, 2, &mut rng);
        let x = [0.7];
        let h_prev = [0.2, -0.4];
        let c_prev = [0.1, 0.9];
        let (h, c) = cell.step(&x, &h_prev, &c_prev);

        for k in 0..2 {
            let pre = |gate: usize| {
                cell.w[gate].get(k, 0) * x[0]
                    + cell.u[gate].get(k, 0) * h_prev[0]
                    + cell.u[gate].get(k, 1) * h_prev[1]
                    + cell.b[gate][k]
            };
            let i = sigmoid(pre(0));
            let f = sigmoid(pre(1));
            let o = sigmoid(pre(2));
            let g = pre(3).tanh();
            let c_ref = f * c_prev[k] + i * g;
            let h_ref = o * c_ref.tanh();
            assert!((c[k] - c_ref).abs() < 1e-14);
            assert!((h[k] - h_ref).abs() < 1e-14);
        }
    }

    #[test]
    fn run_matches_repeated_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cell = LstmCellParams::xavier(3, 4, &mut rng);
        let steps: Vec<Vec<f64>> = (0..5)
            .map(|t| (0..3).map(|k| ((t * 3 + k) as f64 * 0.37).sin()).collect())
            .collect();
        let refs: Vec<&[f64]> = steps.iter().map(Vec::as_slice).collect();
        let trace = cell.run(&refs);

        let mut h = vec![0.0; 4];
        let mut c = vec![0.0; 4];
        for (t, x) in refs.iter().enumerate() {
            let (h2, c2) = cell.step(x, &h, &c);
            h = h2;
            c = c2;
            for k in 0..4 {
                assert!((trace.hidden[t][k] - h[k]).abs() < 1e-15);
                assert!((trace.cell[t][k] - c[k]).abs() < 1e-15);
            }
        }
    }
}
