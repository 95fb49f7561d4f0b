//! Dense rectifier networks with hand-written reverse pass.
//!
//! Inputs are row-major `(rows, in_dim)` batches. `forward_batch` returns a
//! trace holding each layer's input; `backward_batch` consumes it, adds
//! parameter gradients into the layers' `grad` buffers and returns the
//! gradient with respect to the input batch.

use rand::Rng;

use crate::error::{contract, Result};
use crate::linalg::{matmul_ab_acc, matmul_abt_acc, matmul_atb_acc};
use crate::real::Real;
use crate::tensor::{ParamTensor, Parameters};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    /// Shape `(out, in)`.
    pub weight: ParamTensor<F>,
    /// Shape `(out)`.
    pub bias: ParamTensor<F>,
}

impl<F: Real> Dense<F> {
    pub fn in_dim(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    pub layers: Vec<Dense<F>>,
}

/// Per-layer inputs recorded by a forward pass.
#[derive(Debug, Clone, Default)]
pub struct MlpTrace<F> {
    rows: usize,
    inputs: Vec<Vec<F>>,
}

impl<F> MlpTrace<F> {
    pub fn rows(&self) -> usize {
        self.rows
    }
}

impl<F: Real> Mlp<F> {
    /// Builds a network with layer widths `dims = [in, h1, ..., out]`.
    /// Weights are Glorot-uniform, biases zero.
    pub fn new<R: Rng + ?Sized>(name: &str, dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "an mlp needs at least one layer");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Dense {
                    weight: ParamTensor::uniform(
                        format!("{name}.l{k}.weight"),
                        &[fan_out, fan_in],
                        bound,
                        rng,
                    ),
                    bias: ParamTensor::zeros(format!("{name}.l{k}.bias"), &[fan_out]),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    /// Multiplies the output layer's weights by `scale`.
    pub fn scale_output_layer(&mut self, scale: F) {
        let last = self.layers.last_mut().expect("non-empty");
        last.weight.values.iter_mut().for_each(|w| *w *= scale);
    }

    pub fn forward(&self, input: &[F]) -> Result<Vec<F>> {
        Ok(self.forward_batch(input, 1)?.0)
    }

    pub fn forward_batch(&self, input: &[F], rows: usize) -> Result<(Vec<F>, MlpTrace<F>)> {
        if input.len() != rows * self.in_dim() {
            return Err(contract(format!(
                "mlp input has {} values, expected {} rows x {}",
                input.len(),
                rows,
                self.in_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let out = layer.out_dim();
            let mut y = Vec::with_capacity(rows * out);
            for _ in 0..rows {
                y.extend_from_slice(&layer.bias.values);
            }
            matmul_abt_acc(&x, &layer.weight.values, &mut y, rows, layer.in_dim(), out);
            if k != last {
                y.iter_mut().for_each(|v| {
                    if *v < F::zero() {
                        *v = F::zero()
                    }
                });
            }
            inputs.push(x);
            x = y;
        }
        Ok((x, MlpTrace { rows, inputs }))
    }

    /// Reverse pass for a recorded forward. Accumulates parameter gradients
    /// and returns the input gradient, `(rows, in_dim)`.
    pub fn backward_batch(&mut self, trace: &MlpTrace<F>, out_grad: &[F]) -> Result<Vec<F>> {
        if trace.inputs.len() != self.layers.len() {
            return Err(contract("mlp backward called without a matching forward trace"));
        }
        let rows = trace.rows;
        if out_grad.len() != rows * self.out_dim() {
            return Err(contract(format!(
                "mlp output gradient has {} values, expected {}",
                out_grad.len(),
                rows * self.out_dim()
            )));
        }
        let mut g = out_grad.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &mut self.layers[k];
            let (out, inp) = (layer.out_dim(), layer.in_dim());
            let x = &trace.inputs[k];
            if x.len() != rows * inp {
                return Err(contract("mlp trace does not match network shape"));
            }
            matmul_atb_acc(&g, x, &mut layer.weight.grad, out, rows, inp);
            for r in 0..rows {
                for (gb, gv) in layer.bias.grad.iter_mut().zip(&g[r * out..(r + 1) * out]) {
                    *gb += *gv;
                }
            }
            let mut gin = vec![F::zero(); rows * inp];
            matmul_ab_acc(&g, &layer.weight.values, &mut gin, rows, out, inp);
            if k > 0 {
                // x is the rectified output of layer k-1
                for (gi, xi) in gin.iter_mut().zip(x) {
                    if *xi <= F::zero() {
                        *gi = F::zero();
                    }
                }
            }
            g = gin;
        }
        Ok(g)
    }

    pub fn backward(&mut self, trace: &MlpTrace<F>, out_grad: &[F]) -> Result<Vec<F>> {
        self.backward_batch(trace, out_grad)
    }

    pub fn cast<G: Real>(&self) -> Mlp<G> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weight: l.weight.cast(),
                    bias: l.bias.cast(),
                })
                .collect(),
        }
    }
}

impl<F> Parameters<F> for Mlp<F> {
    fn params(&self) -> Vec<&ParamTensor<F>> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor<F>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_layer() -> Mlp<f64> {
        // 2 -> 2 -> 1
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Mlp::<f64>::new("t", &[2, 2, 1], &mut rng);
        net.layers[0].weight.values = vec![1.0, 2.0, -1.0, 0.5];
        net.layers[0].bias.values = vec![0.5, 0.0];
        net.layers[1].weight.values = vec![2.0, -3.0];
        net.layers[1].bias.values = vec![0.25];
        net
    }

    #[test]
    fn zero_weights_return_last_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::<f64>::new("z", &[3, 4, 2], &mut rng);
        for p in net.params_mut() {
            p.values.iter_mut().for_each(|v| *v = 0.0);
        }
        net.layers[1].bias.values = vec![0.7, -1.3];
        for input in [[0.0, 0.0, 0.0], [5.0, -2.0, 1.0]] {
            assert_eq!(net.forward(&input).unwrap(), vec![0.7, -1.3]);
        }
    }

    #[test]
    fn identity_single_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Mlp::<f64>::new("id", &[3, 3], &mut rng);
        net.layers[0].weight.values = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let v = [0.3, -2.0, 4.5];
        assert_eq!(net.forward(&v).unwrap(), v.to_vec());
    }

    #[test]
    fn hand_evaluated_two_layer() {
        // hidden = relu([1*1 + 2*-1 + 0.5, -1*1 + 0.5*-1 + 0]) = relu([-0.5, -1.5]) = [0, 0]
        // out = 0.25
        let net = two_layer();
        assert_eq!(net.forward(&[1.0, -1.0]).unwrap(), vec![0.25]);
        // input [1, 1]: hidden = relu([3.5, -0.5]) = [3.5, 0]; out = 7.25
        assert_eq!(net.forward(&[1.0, 1.0]).unwrap(), vec![7.25]);
    }

    #[test]
    fn dimension_mismatch_is_contract_error() {
        let net = two_layer();
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn backward_without_forward_errors() {
        let mut net = two_layer();
        let empty = MlpTrace::default();
        assert!(net.backward(&empty, &[1.0]).is_err());
    }

    #[test]
    fn zero_output_grad_leaves_grads_unchanged() {
        let mut net = two_layer();
        let (_, trace) = net.forward_batch(&[1.0, 1.0], 1).unwrap();
        net.backward(&trace, &[0.0]).unwrap();
        assert!(net.params().iter().all(|p| p.grad.iter().all(|g| *g == 0.0)));
    }

    #[test]
    fn linear_input_grad_is_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Mlp::<f64>::new("lin", &[3, 2], &mut rng);
        let w = net.layers[0].weight.values.clone();
        let (_, trace) = net.forward_batch(&[0.1, 0.2, 0.3], 1).unwrap();
        let g = [0.7, -1.1];
        let gin = net.backward(&trace, &g).unwrap();
        for i in 0..3 {
            let want = w[i] * g[0] + w[3 + i] * g[1];
            assert!((gin[i] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::<f64>::new("g", &[10, 6], &mut rng);
        let b = (6.0f64 / 16.0).sqrt();
        assert!(net.layers[0].weight.values.iter().all(|w| w.abs() <= b));
        assert!(net.layers[0].bias.values.iter().all(|w| *w == 0.0));
    }
}
