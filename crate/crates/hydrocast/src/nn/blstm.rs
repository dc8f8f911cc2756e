//! Bidirectional LSTM forecaster.
//!
//! One cell consumes the input window forwards, a second consumes it
//! backwards, and the two hidden states at each position are concatenated.
//! The prediction for output step `j` (of `O`) is a shared affine projection
//! of the concatenated state at input position `I - O + j`, so the last `O`
//! positions each drive one output step while seeing the whole window.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::linalg::{xavier_from_rng, Matrix};
use super::lstm::{LstmCellParams, NUM_GATES};

/// Samples per work unit when batch gradients are computed in parallel.
/// Fixed (rather than derived from the thread count) so gradient summation
/// order, and therefore every trained model, is reproducible.
const GRAD_CHUNK: usize = 32;

/// Shape of a [`BlstmModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlstmConfig {
    pub num_predictors: usize,
    pub hidden: usize,
    pub input_steps: usize,
    pub output_steps: usize,
    pub num_responses: usize,
}

impl BlstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_predictors == 0
            || self.hidden == 0
            || self.num_responses == 0
            || self.output_steps == 0
        {
            return Err(Error::InvalidConfig(
                "model dimensions must all be at least 1".into(),
            ));
        }
        if self.output_steps > self.input_steps {
            return Err(Error::InvalidConfig(format!(
                "output steps {} exceed input steps {}",
                self.output_steps, self.input_steps
            )));
        }
        Ok(())
    }
}

/// Trainable bidirectional LSTM with a shared output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct BlstmModel {
    pub config: BlstmConfig,
    pub forward_cell: LstmCellParams,
    pub backward_cell: LstmCellParams,
    /// `num_responses x 2*hidden`: applied to [forward ; backward] states.
    pub output_weights: Matrix,
    pub output_bias: Vec<f64>,
}

/// Gradients of every parameter of a [`BlstmModel`], same shapes as the model.
#[derive(Debug, Clone)]
pub struct BlstmGradients {
    pub forward_cell: LstmCellParams,
    pub backward_cell: LstmCellParams,
    pub output_weights: Matrix,
    pub output_bias: Vec<f64>,
}

impl BlstmGradients {
    fn zeros(config: &BlstmConfig) -> Self {
        Self {
            forward_cell: LstmCellParams::zeros(config.num_predictors, config.hidden),
            backward_cell: LstmCellParams::zeros(config.num_predictors, config.hidden),
            output_weights: Matrix::zeros(config.num_responses, 2 * config.hidden),
            output_bias: vec![0.0; config.num_responses],
        }
    }

    fn add_assign(&mut self, other: &BlstmGradients) {
        self.forward_cell.add_assign(&other.forward_cell);
        self.backward_cell.add_assign(&other.backward_cell);
        self.output_weights.add_assign(&other.output_weights);
        for (a, b) in self.output_bias.iter_mut().zip(&other.output_bias) {
            *a += b;
        }
    }

    fn scale(&mut self, factor: f64) {
        self.forward_cell.scale(factor);
        self.backward_cell.scale(factor);
        self.output_weights.scale(factor);
        for v in &mut self.output_bias {
            *v *= factor;
        }
    }

    /// Parameter tensors in the same order as [`BlstmModel::param_entries`].
    pub fn param_entries(&self) -> Vec<ParamEntry<'_>> {
        entries(&self.forward_cell, &self.backward_cell, &self.output_weights, &self.output_bias)
    }
}

/// A named view of one parameter tensor.
pub struct ParamEntry<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: &'a [f64],
    pub is_bias: bool,
}

/// A named mutable view of one parameter tensor.
pub struct ParamEntryMut<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: &'a mut [f64],
    pub is_bias: bool,
}

fn cell_entries<'a>(prefix: &str, cell: &'a LstmCellParams, out: &mut Vec<ParamEntry<'a>>) {
    for gate in 0..NUM_GATES {
        let g = super::lstm::GATE_NAMES[gate];
        out.push(ParamEntry {
            name: format!("{prefix}.w_{g}"),
            rows: cell.w[gate].rows(),
            cols: cell.w[gate].cols(),
            values: cell.w[gate].as_slice(),
            is_bias: false,
        });
    }
    for gate in 0..NUM_GATES {
        let g = super::lstm::GATE_NAMES[gate];
        out.push(ParamEntry {
            name: format!("{prefix}.u_{g}"),
            rows: cell.u[gate].rows(),
            cols: cell.u[gate].cols(),
            values: cell.u[gate].as_slice(),
            is_bias: false,
        });
    }
    for gate in 0..NUM_GATES {
        let g = super::lstm::GATE_NAMES[gate];
        out.push(ParamEntry {
            name: format!("{prefix}.b_{g}"),
            rows: cell.b[gate].len(),
            cols: 1,
            values: &cell.b[gate],
            is_bias: true,
        });
    }
}

fn cell_entries_mut<'a>(
    prefix: &str,
    cell: &'a mut LstmCellParams,
    out: &mut Vec<ParamEntryMut<'a>>,
) {
    let LstmCellParams { w, u, b, .. } = cell;
    for (gate, m) in w.iter_mut().enumerate() {
        let g = super::lstm::GATE_NAMES[gate];
        let (rows, cols) = (m.rows(), m.cols());
        out.push(ParamEntryMut {
            name: format!("{prefix}.w_{g}"),
            rows,
            cols,
            values: m.as_mut_slice(),
            is_bias: false,
        });
    }
    for (gate, m) in u.iter_mut().enumerate() {
        let g = super::lstm::GATE_NAMES[gate];
        let (rows, cols) = (m.rows(), m.cols());
        out.push(ParamEntryMut {
            name: format!("{prefix}.u_{g}"),
            rows,
            cols,
            values: m.as_mut_slice(),
            is_bias: false,
        });
    }
    for (gate, v) in b.iter_mut().enumerate() {
        let g = super::lstm::GATE_NAMES[gate];
        let rows = v.len();
        out.push(ParamEntryMut {
            name: format!("{prefix}.b_{g}"),
            rows,
            cols: 1,
            values: v,
            is_bias: true,
        });
    }
}

fn entries<'a>(
    forward: &'a LstmCellParams,
    backward: &'a LstmCellParams,
    output_weights: &'a Matrix,
    output_bias: &'a [f64],
) -> Vec<ParamEntry<'a>> {
    let mut out = Vec::with_capacity(2 * 3 * NUM_GATES + 2);
    cell_entries("forward", forward, &mut out);
    cell_entries("backward", backward, &mut out);
    out.push(ParamEntry {
        name: "out.weight".into(),
        rows: output_weights.rows(),
        cols: output_weights.cols(),
        values: output_weights.as_slice(),
        is_bias: false,
    });
    out.push(ParamEntry {
        name: "out.bias".into(),
        rows: output_bias.len(),
        cols: 1,
        values: output_bias,
        is_bias: true,
    });
    out
}

impl BlstmModel {
    /// Xavier-initialized model; biases start at zero. Deterministic in the
    /// seed.
    pub fn init(config: BlstmConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let forward_cell = LstmCellParams::xavier(config.num_predictors, config.hidden, &mut rng);
        let backward_cell = LstmCellParams::xavier(config.num_predictors, config.hidden, &mut rng);
        let output_weights = xavier_from_rng(config.num_responses, 2 * config.hidden, &mut rng);
        let output_bias = vec![0.0; config.num_responses];
        Ok(Self { config, forward_cell, backward_cell, output_weights, output_bias })
    }

    /// Parameter tensors in a fixed, documented order.
    pub fn param_entries(&self) -> Vec<ParamEntry<'_>> {
        entries(&self.forward_cell, &self.backward_cell, &self.output_weights, &self.output_bias)
    }

    pub fn param_entries_mut(&mut self) -> Vec<ParamEntryMut<'_>> {
        let mut out = Vec::with_capacity(2 * 3 * NUM_GATES + 2);
        cell_entries_mut("forward", &mut self.forward_cell, &mut out);
        cell_entries_mut("backward", &mut self.backward_cell, &mut out);
        let (rows, cols) = (self.output_weights.rows(), self.output_weights.cols());
        out.push(ParamEntryMut {
            name: "out.weight".into(),
            rows,
            cols,
            values: self.output_weights.as_mut_slice(),
            is_bias: false,
        });
        let rows = self.output_bias.len();
        out.push(ParamEntryMut {
            name: "out.bias".into(),
            rows,
            cols: 1,
            values: &mut self.output_bias,
            is_bias: true,
        });
        out
    }

    fn check_window(&self, window: &[f64]) -> Result<()> {
        let expect = self.config.input_steps * self.config.num_predictors;
        if window.len() != expect {
            return Err(Error::DimensionMismatch(format!(
                "window has {} values, model expects {} ({} steps x {} predictors)",
                window.len(),
                expect,
                self.config.input_steps,
                self.config.num_predictors
            )));
        }
        Ok(())
    }

    /// Predict an `O x R` output (flat, row-major) from one `I x P` window.
    pub fn forward(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.check_window(window)?;
        Ok(self.forward_unchecked(window).2)
    }

    /// Forward pass returning the traces needed for backpropagation. The
    /// backward trace is indexed in reversed time: entry `u` of its hidden
    /// states corresponds to input position `I - 1 - u`.
    fn forward_unchecked(
        &self,
        window: &[f64],
    ) -> (super::lstm::LstmTrace, super::lstm::LstmTrace, Vec<f64>) {
        let p = self.config.num_predictors;
        let steps: Vec<&[f64]> = window.chunks(p).collect();
        let rev_steps: Vec<&[f64]> = steps.iter().rev().copied().collect();
        let fwd = self.forward_cell.run(&steps);
        let bwd = self.backward_cell.run(&rev_steps);

        let (i_steps, o_steps) = (self.config.input_steps, self.config.output_steps);
        let (h, r) = (self.config.hidden, self.config.num_responses);
        let mut preds = vec![0.0; o_steps * r];
        let mut concat = vec![0.0; 2 * h];
        for j in 0..o_steps {
            let t = i_steps - o_steps + j;
            concat[..h].copy_from_slice(&fwd.hidden[t]);
            concat[h..].copy_from_slice(&bwd.hidden[i_steps - 1 - t]);
            let out = &mut preds[j * r..(j + 1) * r];
            out.copy_from_slice(&self.output_bias);
            self.output_weights.matvec_add(&concat, out);
        }
        (fwd, bwd, preds)
    }

    /// Mean squared error of the model over a set of samples.
    pub fn batch_loss(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> Result<f64> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(Error::LengthMismatch(format!(
                "{} inputs vs {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let total: f64 = inputs
            .par_chunks(GRAD_CHUNK)
            .zip(targets.par_chunks(GRAD_CHUNK))
            .map(|(ic, tc)| {
                let mut acc = 0.0;
                for (x, t) in ic.iter().zip(tc) {
                    let pred = self.forward_unchecked(x).2;
                    acc += mse_loss_unchecked(&pred, t);
                }
                acc
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .sum();
        Ok(total / inputs.len() as f64)
    }

    /// Exact gradients of the batch-mean MSE loss with respect to every
    /// parameter, together with the loss itself.
    ///
    /// Samples are processed in fixed-size chunks (possibly in parallel) and
    /// the chunk results summed in a fixed order, so the result does not
    /// depend on thread scheduling.
    pub fn backward(
        &self,
        inputs: &[&[f64]],
        targets: &[&[f64]],
    ) -> Result<(BlstmGradients, f64)> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(Error::LengthMismatch(format!(
                "{} inputs vs {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        self.check_window(inputs[0])?;
        let out_len = self.config.output_steps * self.config.num_responses;
        if targets[0].len() != out_len {
            return Err(Error::DimensionMismatch(format!(
                "target has {} values, model produces {out_len}",
                targets[0].len()
            )));
        }

        let chunk_results: Vec<(BlstmGradients, f64)> = inputs
            .par_chunks(GRAD_CHUNK)
            .zip(targets.par_chunks(GRAD_CHUNK))
            .map(|(ic, tc)| self.backward_chunk(ic, tc))
            .collect();

        let mut grads = BlstmGradients::zeros(&self.config);
        let mut loss_sum = 0.0;
        for (g, l) in &chunk_results {
            grads.add_assign(g);
            loss_sum += l;
        }
        let n = inputs.len() as f64;
        grads.scale(1.0 / n);
        let loss = loss_sum / n;
        if !loss.is_finite() {
            return Err(Error::NonFinite("batch loss".into()));
        }
        Ok((grads, loss))
    }

    /// Gradient and loss sums (not yet averaged) over one chunk of samples.
    fn backward_chunk(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> (BlstmGradients, f64) {
        let cfg = &self.config;
        let (i_steps, o_steps) = (cfg.input_steps, cfg.output_steps);
        let (h, r, p) = (cfg.hidden, cfg.num_responses, cfg.num_predictors);
        let mut grads = BlstmGradients::zeros(cfg);
        let mut loss_sum = 0.0;

        for (window, target) in inputs.iter().zip(targets) {
            let (fwd, bwd, preds) = self.forward_unchecked(window);
            loss_sum += mse_loss_unchecked(&preds, target);

            // d(sample MSE)/d(pred):
            let scale = 2.0 / (o_steps * r) as f64;
            let mut dh_fwd = vec![vec![0.0; h]; i_steps];
            let mut dh_bwd = vec![vec![0.0; h]; i_steps];
            let mut concat = vec![0.0; 2 * h];
            let mut dconcat = vec![0.0; 2 * h];
            for j in 0..o_steps {
                let t = i_steps - o_steps + j;
                let dy: Vec<f64> = (0..r)
                    .map(|k| scale * (preds[j * r + k] - target[j * r + k]))
                    .collect();
                concat[..h].copy_from_slice(&fwd.hidden[t]);
                concat[h..].copy_from_slice(&bwd.hidden[i_steps - 1 - t]);
                grads.output_weights.add_outer(&dy, &concat);
                for (b, d) in grads.output_bias.iter_mut().zip(&dy) {
                    *b += d;
                }
                dconcat.iter_mut().for_each(|v| *v = 0.0);
                self.output_weights.tr_matvec_add(&dy, &mut dconcat);
                for k in 0..h {
                    dh_fwd[t][k] += dconcat[k];
                    dh_bwd[i_steps - 1 - t][k] += dconcat[h + k];
                }
            }

            let steps: Vec<&[f64]> = window.chunks(p).collect();
            self.forward_cell.backprop(&steps, &fwd, &dh_fwd, &mut grads.forward_cell);
            let rev_steps: Vec<&[f64]> = steps.iter().rev().copied().collect();
            self.backward_cell.backprop(&rev_steps, &bwd, &dh_bwd, &mut grads.backward_cell);
        }
        (grads, loss_sum)
    }

    /// Predictions for every sample of a dataset, flattened `N x O x R`.
    pub fn predict_dataset(&self, dataset: &crate::window::WindowDataset) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(
            dataset.len() * self.config.output_steps * self.config.num_responses,
        );
        for n in 0..dataset.len() {
            out.extend(self.forward(dataset.input(n))?);
        }
        Ok(out)
    }
}

/// Mean over all `O x R` elements of the squared prediction error.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::LengthMismatch(format!(
            "prediction has {} values, target {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(mse_loss_unchecked(pred, target))
}

#[inline]
fn mse_loss_unchecked(pred: &[f64], target: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (p, t) in pred.iter().zip(target) {
        let d = p - t;
        acc += d * d;
    }
    acc / pred.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(p: usize, h: usize, i: usize, o: usize, r: usize) -> BlstmConfig {
        BlstmConfig {
            num_predictors: p,
            hidden: h,
            input_steps: i,
            output_steps: o,
            num_responses: r,
        }
    }

    fn window(cfg: &BlstmConfig, seed: u64) -> Vec<f64> {
        (0..cfg.input_steps * cfg.num_predictors)
            .map(|k| ((k as f64 + seed as f64) * 0.73).sin())
            .collect()
    }

    #[test]
    fn zero_projection_returns_bias() {
        let cfg = config(3, 4, 6, 2, 2);
        let mut model = BlstmModel::init(cfg, 1).unwrap();
        model.output_weights = Matrix::zeros(2, 8);
        model.output_bias = vec![0.25, -1.5];
        let preds = model.forward(&window(&cfg, 0)).unwrap();
        assert_eq!(preds, vec![0.25, -1.5, 0.25, -1.5]);
    }

    #[test]
    fn hand_unrolled_tiny_model() {
        // h = 1, I = 2, O = 1, P = 1 with hand-set weights, fully unrolled by
        // hand using the gate equations.
        let cfg = config(1, 1, 2, 1, 1);
        let mut model = BlstmModel::init(cfg, 0).unwrap();
        for (gate, (wv, uv, bv)) in [(0.3, 0.1, 0.0), (0.2, -0.1, 0.1), (0.5, 0.2, -0.1), (0.7, 0.4, 0.2)]
            .iter()
            .enumerate()
        {
            model.forward_cell.w[gate].set(0, 0, *wv);
            model.forward_cell.u[gate].set(0, 0, *uv);
            model.forward_cell.b[gate][0] = *bv;
            model.backward_cell.w[gate].set(0, 0, *wv * 0.5);
            model.backward_cell.u[gate].set(0, 0, *uv * 0.5);
            model.backward_cell.b[gate][0] = *bv * 0.5;
        }
        model.output_weights = Matrix::from_vec(1, 2, vec![1.25, -0.75]);
        model.output_bias = vec![0.05];
        let x = [0.4, -0.6];

        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let cell = |wb: f64, x: f64, h: f64, c: f64, w: [f64; 4], u: [f64; 4], b: [f64; 4]| {
            let i = sig(w[0] * wb * x + u[0] * wb * h + b[0] * wb);
            let f = sig(w[1] * wb * x + u[1] * wb * h + b[1] * wb);
            let o = sig(w[2] * wb * x + u[2] * wb * h + b[2] * wb);
            let g = (w[3] * wb * x + u[3] * wb * h + b[3] * wb).tanh();
            let c2 = f * c + i * g;
            (o * c2.tanh(), c2)
        };
        let w = [0.3, 0.2, 0.5, 0.7];
        let u = [0.1, -0.1, 0.2, 0.4];
        let b = [0.0, 0.1, -0.1, 0.2];
        // Forward direction over x1 then x2.
        let (hf1, cf1) = cell(1.0, x[0], 0.0, 0.0, w, u, b);
        let (hf2, _) = cell(1.0, x[1], hf1, cf1, w, u, b);
        // Backward direction (half-scaled weights) over x2 then x1; position
        // t=1 is its first step.
        let (hb_at_t1, _) = cell(0.5, x[1], 0.0, 0.0, w, u, b);
        let expected = 1.25 * hf2 + -0.75 * hb_at_t1 + 0.05;

        let got = model.forward(&x).unwrap()[0];
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn mirror_symmetry_with_swapped_cells() {
        // With O = I, reversing the input and swapping the two cells (and the
        // two halves of the projection) reverses the prediction rows.
        let cfg = config(3, 5, 4, 4, 2);
        let model = BlstmModel::init(cfg, 9).unwrap();
        let x = window(&cfg, 5);

        let mut mirrored = model.clone();
        std::mem::swap(&mut mirrored.forward_cell, &mut mirrored.backward_cell);
        let h = cfg.hidden;
        for row in 0..cfg.num_responses {
            for k in 0..h {
                let a = model.output_weights.get(row, k);
                let b = model.output_weights.get(row, h + k);
                mirrored.output_weights.set(row, k, b);
                mirrored.output_weights.set(row, h + k, a);
            }
        }
        let mut x_rev = Vec::with_capacity(x.len());
        for chunk in x.chunks(cfg.num_predictors).rev() {
            x_rev.extend_from_slice(chunk);
        }

        let orig = model.forward(&x).unwrap();
        let mirror = mirrored.forward(&x_rev).unwrap();
        let r = cfg.num_responses;
        for j in 0..cfg.output_steps {
            let mirrored_row = &mirror[(cfg.output_steps - 1 - j) * r..(cfg.output_steps - j) * r];
            for k in 0..r {
                assert!((orig[j * r + k] - mirrored_row[k]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn every_input_step_influences_output() {
        let cfg = config(2, 6, 8, 3, 1);
        let model = BlstmModel::init(cfg, 21).unwrap();
        let x = window(&cfg, 2);
        let base = model.forward(&x).unwrap();
        for t in 0..cfg.input_steps {
            let mut perturbed = x.clone();
            perturbed[t * cfg.num_predictors] += 0.1;
            let out = model.forward(&perturbed).unwrap();
            let moved = out.iter().zip(&base).any(|(a, b)| (a - b).abs() > 1e-12);
            assert!(moved, "perturbing step {t} left every output unchanged");
        }
    }

    #[test]
    fn mse_loss_values() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[3.0, 3.0], &[1.0, 1.0]).unwrap(), 4.0);
        assert_eq!(mse_loss(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 2.5);
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn perfect_prediction_zeroes_bias_gradient() {
        let cfg = config(2, 3, 4, 2, 1);
        let model = BlstmModel::init(cfg, 4).unwrap();
        let x = window(&cfg, 1);
        let target = model.forward(&x).unwrap();
        let (grads, loss) = model.backward(&[&x], &[&target]).unwrap();
        assert_eq!(loss, 0.0);
        for g in &grads.output_bias {
            assert_eq!(*g, 0.0);
        }
    }

    #[test]
    fn duplicating_batch_keeps_mean_gradient() {
        let cfg = config(2, 3, 5, 2, 2);
        let model = BlstmModel::init(cfg, 14).unwrap();
        let x1 = window(&cfg, 1);
        let x2 = window(&cfg, 2);
        let t1 = vec![0.3; 4];
        let t2 = vec![-0.2; 4];

        let (g1, l1) = model.backward(&[&x1, &x2], &[&t1, &t2]).unwrap();
        let (g2, l2) = model
            .backward(&[&x1, &x2, &x1, &x2], &[&t1, &t2, &t1, &t2])
            .unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (a, b) in g1.param_entries().iter().zip(g2.param_entries().iter()) {
            for (x, y) in a.values.iter().zip(b.values) {
                assert!((x - y).abs() < 1e-14, "{}", a.name);
            }
        }
    }
}
