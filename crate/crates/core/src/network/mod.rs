//! Fully-connected networks (FNNs) and parallel-connected networks (PNNs).
//!
//! A PNN is a set of FNN sub-networks that share the input layer and the output layer but
//! have no connections between their hidden layers. The weighted input to the shared output
//! layer is `z = Σ_i w_i · x_i + b`, where `x_i` is sub-network `i`'s last hidden activation
//! and `b` the shared output bias.

mod fnn;
mod pnn;

pub use fnn::FnnModel;
pub use pnn::{connect, BiasMode, MaskedOutputs, PnnForward, PnnModel, SubNetwork};

use crate::activation::ActivationKind;
use crate::error::{PnnError, Result};
use crate::linalg::{Matrix, Vector};
use crate::rng::Rng;

/// One dense affine map `z = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vector,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vector) -> Result<Self> {
        if weights.rows() != bias.len() {
            return Err(PnnError::DimensionMismatch {
                op: "layer",
                left: weights.shape(),
                right: (bias.len(), 1),
            });
        }
        Ok(Layer { weights, bias })
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            weights: Matrix::zeros(outputs, inputs),
            bias: Vector::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn weighted_input(&self, x: &[f64]) -> Vector {
        let mut z = Vector::zeros(self.outputs());
        self.weights.matvec_into(x, &mut z);
        crate::linalg::add_assign(&mut z, &self.bias);
        z
    }
}

/// Whether a parameter slice is subject to L2 weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
}

/// Uniform access to trainable parameters, in a fixed order shared by a model and its gradient.
pub trait Parameterized {
    fn params(&self) -> Vec<(ParamKind, &[f64])>;
    fn params_mut(&mut self) -> Vec<(ParamKind, &mut [f64])>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }
}

/// Per-layer weighted inputs and activations; `activations[0]` is the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub zs: Vec<Vector>,
    pub activations: Vec<Vector>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Vector {
        self.activations.last().expect("trace holds at least the input")
    }

    pub fn output_z(&self) -> &Vector {
        self.zs.last().expect("trace holds at least one layer")
    }
}

/// Runs `input` through a stack of layers with the same activation on every layer.
pub(crate) fn forward_stack(layers: &[Layer], activation: ActivationKind, input: &[f64]) -> ForwardTrace {
    let mut zs = Vec::with_capacity(layers.len());
    let mut activations = Vec::with_capacity(layers.len() + 1);
    activations.push(Vector::from(input));
    for layer in layers {
        let z = layer.weighted_input(activations.last().unwrap());
        let mut a = Vector::zeros(z.len());
        activation.apply_slice(&z, &mut a);
        zs.push(z);
        activations.push(a);
    }
    ForwardTrace { zs, activations }
}

/// Index of the largest activation; ties go to the lowest index and NaN never wins.
pub fn classify(output: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &v) in output.iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

pub(crate) fn validate_arch(arch: &[usize]) -> Result<()> {
    if arch.len() < 3 {
        return Err(PnnError::InvalidArchitecture(format!(
            "{arch:?}: need an input layer, at least one hidden layer and an output layer"
        )));
    }
    if arch.contains(&0) {
        return Err(PnnError::InvalidArchitecture(format!("{arch:?}: zero-width layer")));
    }
    Ok(())
}

/// Fan-in-scaled Gaussian layers for `arch`: biases ~ N(0, 1), weights into a neuron with
/// fan-in `k` ~ N(0, 1/k). All biases are drawn first (layer order), then all weights
/// (layer order, row-major).
pub(crate) fn init_layers(arch: &[usize], rng: &mut Rng) -> Vec<Layer> {
    let biases: Vec<Vector> = arch[1..]
        .iter()
        .map(|&n| (0..n).map(|_| gauss(rng, 1.0)).collect::<Vec<_>>().into())
        .collect();
    biases
        .into_iter()
        .zip(arch.windows(2))
        .map(|(bias, w)| {
            let (fan_in, n) = (w[0], w[1]);
            let sd = 1.0 / (fan_in as f64).sqrt();
            let data = (0..n * fan_in).map(|_| gauss(rng, sd)).collect();
            Layer {
                weights: Matrix::from_vec(n, fan_in, data).expect("validated arch"),
                bias,
            }
        })
        .collect()
}

fn gauss(rng: &mut Rng, sd: f64) -> f64 {
    rng.gaussian(0.0, sd).expect("positive stddev")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        let mut e7 = vec![0.0; 10];
        e7[7] = 1.0;
        assert_eq!(classify(&e7), 7);
        assert_eq!(classify(&[0.5; 10]), 0);
        let mut v = vec![0.1; 10];
        v[1] = 0.9;
        assert_eq!(classify(&v), 1);
        assert_eq!(classify(&[f64::NAN, 0.2, 0.3]), 2);
    }

    #[test]
    fn arch_validation() {
        assert!(validate_arch(&[2, 1]).is_err());
        assert!(validate_arch(&[2, 0, 1]).is_err());
        assert!(validate_arch(&[2, 3, 1]).is_ok());
    }
}
