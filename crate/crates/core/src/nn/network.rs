//! Forward evaluation and exact backpropagation of the mean-squared-error loss.

use super::kernels::{add_a_b, add_a_bt, add_at_b};
use super::params::{Architecture, Batch, ParamSet};
use crate::error::{Error, Result};

fn check_input(arch: &Architecture, x: &Batch) -> Result<()> {
    if x.cols() != arch.input_width() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} input columns", arch.input_width()),
            got: format!("{} columns", x.cols()),
        });
    }
    Ok(())
}

/// Rows processed per block; keeps a 1024-wide hidden layer inside L2 cache.
const ROW_BLOCK: usize = 32;

/// Reusable buffers for repeated forward/backward passes.
///
/// Batches are processed in blocks of rows; gradients are accumulated over
/// blocks in a fixed order, so results do not depend on anything but the inputs.
#[derive(Debug, Default)]
pub struct Workspace {
    /// Post-activation outputs of each hidden layer for the current block.
    hidden: Vec<Vec<f64>>,
    /// Activation derivatives at each hidden layer's pre-activation.
    derivs: Vec<Vec<f64>>,
    output: Vec<f64>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    full_output: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, arch: &Architecture) {
        let hidden_widths = &arch.widths()[1..arch.widths().len() - 1];
        let fits = self.hidden.len() == hidden_widths.len()
            && self
                .hidden
                .iter()
                .zip(hidden_widths)
                .all(|(h, &w)| h.len() == ROW_BLOCK * w)
            && self.output.len() == ROW_BLOCK * arch.output_width();
        if fits {
            return;
        }
        self.hidden = hidden_widths.iter().map(|&w| vec![0.0; ROW_BLOCK * w]).collect();
        self.derivs = hidden_widths.iter().map(|&w| vec![0.0; ROW_BLOCK * w]).collect();
        self.output = vec![0.0; ROW_BLOCK * arch.output_width()];
    }

    fn affine(layer: &super::DenseLayer, input: &[f64], rows: usize, out: &mut [f64]) {
        let (n_in, n_out) = (layer.inputs, layer.outputs);
        for row in out[..rows * n_out].chunks_exact_mut(n_out) {
            row.copy_from_slice(&layer.biases);
        }
        add_a_bt(
            &input[..rows * n_in],
            &layer.weights,
            &mut out[..rows * n_out],
            rows,
            n_in,
            n_out,
        );
    }

    /// Runs one block of at most `ROW_BLOCK` rows; results land in `self.output`.
    fn run_block(&mut self, params: &ParamSet, arch: &Architecture, x: &[f64], rows: usize, keep_grad: bool) {
        let activation = arch.activation();
        let n_layers = params.layers.len();
        for (l, layer) in params.layers.iter().enumerate() {
            if l + 1 == n_layers {
                let input: &[f64] = if l == 0 { x } else { &self.hidden[l - 1] };
                Self::affine(layer, input, rows, &mut self.output);
                continue;
            }
            // Pre-activation is computed in place, then overwritten by the activation.
            let (before, rest) = self.hidden.split_at_mut(l);
            let input: &[f64] = if l == 0 { x } else { &before[l - 1] };
            let used = rows * layer.outputs;
            let buf = &mut rest[0][..used];
            Self::affine(layer, input, rows, buf);
            if keep_grad {
                activation.apply_with_grad(buf, &mut self.derivs[l][..used]);
            } else {
                activation.apply(buf);
            }
        }
    }

    pub fn forward(&mut self, params: &ParamSet, arch: &Architecture, x: &Batch) -> Result<&[f64]> {
        check_input(arch, x)?;
        params.check_shape(arch)?;
        self.prepare(arch);
        let (n_in, n_out) = (arch.input_width(), arch.output_width());
        self.full_output.clear();
        for block in x.data().chunks(ROW_BLOCK * n_in) {
            let rows = block.len() / n_in;
            self.run_block(params, arch, block, rows, false);
            self.full_output.extend_from_slice(&self.output[..rows * n_out]);
        }
        Ok(&self.full_output)
    }

    /// Activations of the last hidden layer, one row per sample. For a net
    /// without hidden layers the inputs themselves are returned.
    pub fn last_hidden(&mut self, params: &ParamSet, arch: &Architecture, x: &Batch) -> Result<Batch> {
        check_input(arch, x)?;
        params.check_shape(arch)?;
        let n_hidden = arch.widths().len() - 2;
        if n_hidden == 0 {
            return Ok(x.clone());
        }
        self.prepare(arch);
        let n_in = arch.input_width();
        let width = arch.widths()[n_hidden];
        let mut data = Vec::with_capacity(x.rows() * width);
        for block in x.data().chunks(ROW_BLOCK * n_in) {
            let rows = block.len() / n_in;
            self.run_block(params, arch, block, rows, false);
            data.extend_from_slice(&self.hidden[n_hidden - 1][..rows * width]);
        }
        Batch::new(x.rows(), width, data)
    }

    /// Mean squared error over all outputs and its gradient, written into `grads`.
    pub fn loss_and_gradient(
        &mut self,
        params: &ParamSet,
        arch: &Architecture,
        x: &Batch,
        y: &[f64],
        grads: &mut ParamSet,
    ) -> Result<f64> {
        check_input(arch, x)?;
        params.check_shape(arch)?;
        grads.check_shape(arch)?;
        let total_rows = x.rows();
        let (n_in, out_w) = (arch.input_width(), arch.output_width());
        if y.len() != total_rows * out_w {
            return Err(Error::ShapeMismatch {
                expected: format!("{} targets", total_rows * out_w),
                got: format!("{} targets", y.len()),
            });
        }
        if total_rows == 0 {
            return Err(Error::ShapeMismatch {
                expected: "a nonempty batch".into(),
                got: "0 rows".into(),
            });
        }
        self.prepare(arch);
        grads.iter_mut().for_each(|g| *g = 0.0);
        let count = (total_rows * out_w) as f64;
        let scale = 2.0 / count;
        let mut sse = 0.0;

        for (block, targets) in x.data().chunks(ROW_BLOCK * n_in).zip(y.chunks(ROW_BLOCK * out_w)) {
            let rows = block.len() / n_in;
            self.run_block(params, arch, block, rows, true);

            self.delta.clear();
            for (&o, &t) in self.output[..rows * out_w].iter().zip(targets) {
                let r = o - t;
                sse += r * r;
                self.delta.push(scale * r);
            }

            for l in (0..params.layers.len()).rev() {
                let layer = &params.layers[l];
                let (li, lo) = (layer.inputs, layer.outputs);
                let input: &[f64] = if l == 0 {
                    block
                } else {
                    &self.hidden[l - 1][..rows * li]
                };
                let g = &mut grads.layers[l];
                // dW (lo x li) += delta^T (lo x rows) * input (rows x li)
                add_at_b(&self.delta, input, &mut g.weights, rows, lo, li);
                for row in self.delta.chunks_exact(lo) {
                    for (b, d) in g.biases.iter_mut().zip(row) {
                        *b += d;
                    }
                }
                if l > 0 {
                    self.delta_prev.clear();
                    self.delta_prev.resize(rows * li, 0.0);
                    // delta_prev (rows x li) = delta (rows x lo) * W (lo x li), then chain rule
                    add_a_b(&self.delta, &layer.weights, &mut self.delta_prev, rows, lo, li);
                    for (d, s) in self.delta_prev.iter_mut().zip(&self.derivs[l - 1][..rows * li]) {
                        *d *= s;
                    }
                    std::mem::swap(&mut self.delta, &mut self.delta_prev);
                }
            }
        }
        Ok(sse / count)
    }
}

/// Evaluates the network on every row of `x`. Output is row-major `rows x output_width`.
pub fn forward(params: &ParamSet, arch: &Architecture, x: &Batch) -> Result<Batch> {
    let mut ws = Workspace::new();
    let out = ws.forward(params, arch, x)?.to_vec();
    Batch::new(x.rows(), arch.output_width(), out)
}

/// Exact gradient of the MSE loss `mean((net(x) - y)^2)` with respect to every parameter.
pub fn gradient(params: &ParamSet, arch: &Architecture, x: &Batch, y: &[f64]) -> Result<ParamSet> {
    Ok(loss_and_gradient(params, arch, x, y)?.1)
}

pub fn loss_and_gradient(params: &ParamSet, arch: &Architecture, x: &Batch, y: &[f64]) -> Result<(f64, ParamSet)> {
    let mut grads = ParamSet::zeros(arch);
    let loss = Workspace::new().loss_and_gradient(params, arch, x, y, &mut grads)?;
    Ok((loss, grads))
}

/// Training loss only.
pub fn loss(params: &ParamSet, arch: &Architecture, x: &Batch, y: &[f64]) -> Result<f64> {
    let out = forward(params, arch, x)?;
    if out.data().len() != y.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} targets", out.data().len()),
            got: format!("{} targets", y.len()),
        });
    }
    let sse: f64 = out.data().iter().zip(y).map(|(o, t)| (o - t) * (o - t)).sum();
    Ok(sse / y.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, ActivationKind, DenseLayer, InitKind, InitStrategy};

    #[test]
    fn zero_params_give_zero_output() {
        let arch = Architecture::new(vec![2, 5, 3, 1], ActivationKind::Sigmoid).unwrap();
        let params = ParamSet::zeros(&arch);
        let x = Batch::new(3, 2, vec![1.0, -2.0, 0.5, 7.0, -3.0, 0.0]).unwrap();
        let y = forward(&params, &arch, &x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_chain() {
        let arch = Architecture::new(vec![1, 1, 1], ActivationKind::Relu).unwrap();
        let layer = DenseLayer {
            inputs: 1,
            outputs: 1,
            weights: vec![1.0],
            biases: vec![0.0],
        };
        let params = ParamSet {
            layers: vec![layer.clone(), layer],
        };
        let y = forward(&params, &arch, &Batch::from_column(&[2.0])).unwrap();
        assert_eq!(y.data(), &[2.0]);
    }

    #[test]
    fn hand_built_tanh_net() {
        let arch = Architecture::new(vec![1, 2, 1], ActivationKind::Tanh).unwrap();
        let params = ParamSet {
            layers: vec![
                DenseLayer {
                    inputs: 1,
                    outputs: 2,
                    weights: vec![0.5, -1.5],
                    biases: vec![0.1, 0.2],
                },
                DenseLayer {
                    inputs: 2,
                    outputs: 1,
                    weights: vec![2.0, 0.75],
                    biases: vec![-0.3],
                },
            ],
        };
        let x = 0.8_f64;
        // independent scalar evaluation
        let h1 = (0.5 * x + 0.1).tanh();
        let h2 = (-1.5 * x + 0.2).tanh();
        let expected = 2.0 * h1 + 0.75 * h2 - 0.3;
        let y = forward(&params, &arch, &Batch::from_column(&[x])).unwrap();
        assert!((y.data()[0] - expected).abs() < 1e-15);
        // tanh(0.5) * 2 + tanh(-1.0) * 0.75 - 0.3
        assert!((y.data()[0] - 0.053_038_698).abs() < 1e-8);
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let arch = Architecture::new(vec![1, 6, 1], ActivationKind::Gelu).unwrap();
        let params = init_params(&arch, &InitStrategy::new(InitKind::Xavier, 1.0, 5)).unwrap();
        let x = Batch::from_column(&[-0.4, 0.1, 0.9]);
        let y = forward(&params, &arch, &x).unwrap();
        let g = gradient(&params, &arch, &x, y.data()).unwrap();
        assert!(g.iter().all(|v| v == 0.0));
    }

    #[test]
    fn single_linear_neuron_by_hand() {
        // Net [1,1] is y = w x + b. With b = 0, x = 2, y = 0:
        // L = (2w)^2, dL/dw = 2 * (2w) * 2, dL/db = 2 * (2w).
        let arch = Architecture::new(vec![1, 1], ActivationKind::Relu).unwrap();
        let w = 0.7;
        let params = ParamSet {
            layers: vec![DenseLayer {
                inputs: 1,
                outputs: 1,
                weights: vec![w],
                biases: vec![0.0],
            }],
        };
        let g = gradient(&params, &arch, &Batch::from_column(&[2.0]), &[0.0]).unwrap();
        assert!((g.layers[0].weights[0] - 2.0 * (2.0 * w) * 2.0).abs() < 1e-15);
        assert!((g.layers[0].biases[0] - 2.0 * (2.0 * w)).abs() < 1e-15);
    }

    #[test]
    fn rejects_wrong_input_width() {
        let arch = Architecture::new(vec![2, 3, 1], ActivationKind::Relu).unwrap();
        let params = ParamSet::zeros(&arch);
        let err = forward(&params, &arch, &Batch::from_column(&[1.0])).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
        let bad = ParamSet::zeros(&Architecture::new(vec![2, 4, 1], ActivationKind::Relu).unwrap());
        assert!(forward(&bad, &arch, &Batch::from_points(&[[0.0, 0.0]])).is_err());
    }
}
