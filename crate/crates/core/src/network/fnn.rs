use super::{forward_stack, init_layers, validate_arch, ForwardTrace, Layer, ParamKind, Parameterized};
use crate::activation::ActivationKind;
use crate::error::{PnnError, Result};
use crate::linalg::Vector;
use crate::rng::Rng;

/// An `[n_0, ..., n_m]` fully-connected network. Hidden layers use `activation`; the output
/// layer uses `head` (sigmoid unless overridden).
#[derive(Debug, Clone, PartialEq)]
pub struct FnnModel {
    arch: Vec<usize>,
    layers: Vec<Layer>,
    activation: ActivationKind,
    head: ActivationKind,
}

impl FnnModel {
    pub fn init(arch: &[usize], activation: ActivationKind, rng: &mut Rng) -> Result<Self> {
        validate_arch(arch)?;
        Ok(FnnModel {
            arch: arch.to_vec(),
            layers: init_layers(arch, rng),
            activation,
            head: ActivationKind::Sigmoid,
        })
    }

    pub fn from_layers(layers: Vec<Layer>, activation: ActivationKind, head: ActivationKind) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| PnnError::InvalidArchitecture("no layers".into()))?;
        let mut arch = vec![first.inputs()];
        for layer in &layers {
            if layer.inputs() != *arch.last().unwrap() {
                return Err(PnnError::DimensionMismatch {
                    op: "fnn layers",
                    left: (*arch.last().unwrap(), 1),
                    right: layer.weights.shape(),
                });
            }
            arch.push(layer.outputs());
        }
        validate_arch(&arch)?;
        Ok(FnnModel {
            arch,
            layers,
            activation,
            head,
        })
    }

    pub fn with_head(mut self, head: ActivationKind) -> Self {
        self.head = head;
        self
    }

    pub fn arch(&self) -> &[usize] {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn head(&self) -> ActivationKind {
        self.head
    }

    pub fn input_width(&self) -> usize {
        self.arch[0]
    }

    pub fn output_width(&self) -> usize {
        *self.arch.last().unwrap()
    }

    pub fn hidden(&self) -> &[Layer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn output_layer(&self) -> &Layer {
        self.layers.last().unwrap()
    }

    /// All weighted inputs and activations, input layer included.
    pub fn forward(&self, input: &[f64]) -> Result<ForwardTrace> {
        if input.len() != self.input_width() {
            return Err(PnnError::DimensionMismatch {
                op: "forward_fnn",
                left: (self.input_width(), 1),
                right: (input.len(), 1),
            });
        }
        let mut trace = forward_stack(self.hidden(), self.activation, input);
        let z = self.output_layer().weighted_input(trace.output());
        let mut a = Vector::zeros(z.len());
        self.head.apply_slice(&z, &mut a);
        trace.zs.push(z);
        trace.activations.push(a);
        Ok(trace)
    }
}

impl Parameterized for FnnModel {
    fn params(&self) -> Vec<(ParamKind, &[f64])> {
        self.layers
            .iter()
            .flat_map(|l| [(ParamKind::Weight, l.weights.as_slice()), (ParamKind::Bias, l.bias.as_slice())])
            .collect()
    }

    fn params_mut(&mut self) -> Vec<(ParamKind, &mut [f64])> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    (ParamKind::Weight, l.weights.as_mut_slice()),
                    (ParamKind::Bias, l.bias.as_mut_slice()),
                ]
            })
            .collect()
    }
}
