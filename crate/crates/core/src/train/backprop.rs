//! Backpropagation for the cross-entropy cost.
//!
//! With a sigmoid head the output-layer error simplifies to `δ = a − y`. Any other head
//! falls back to `δ = (a − y) / (a(1 − a)) · f'(z)` with `a` clamped as in [`cost`].
//! In a PNN the output error feeds each sub-network's hidden stack through its own
//! output block only; there are no parameters linking hidden layers of different
//! sub-networks.

use crate::activation::ActivationKind;
use crate::data::{target_vector, Example};
use crate::error::{PnnError, Result};
use crate::linalg::{add_assign, Matrix, Vector};
use crate::network::{FnnModel, ForwardTrace, Layer, ParamKind, Parameterized, PnnModel};

use super::cost::CLAMP;

/// A model that can be trained by [`super::sgd_epoch`].
pub trait Trainable: Parameterized + Clone + Send + Sync {
    type Gradient: Parameterized;

    fn zero_gradient(&self) -> Self::Gradient;

    /// Adds the gradient of the unregularized cost at one example into `grad`.
    fn accumulate_gradient(&self, input: &[f64], target: &[f64], grad: &mut Self::Gradient) -> Result<()>;

    /// Output-layer activation.
    fn predict(&self, input: &[f64]) -> Result<Vector>;

    fn output_width(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnnGradient {
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubnetGradient {
    pub hidden: Vec<Layer>,
    pub output_weights: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnnGradient {
    pub subnets: Vec<SubnetGradient>,
    pub shared_bias: Vector,
}

impl Parameterized for FnnGradient {
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

impl Parameterized for PnnGradient {
    fn params(&self) -> Vec<(ParamKind, &[f64])> {
        let mut out = Vec::new();
        for s in &self.subnets {
            for l in &s.hidden {
                out.push((ParamKind::Weight, l.weights.as_slice()));
                out.push((ParamKind::Bias, l.bias.as_slice()));
            }
            out.push((ParamKind::Weight, s.output_weights.as_slice()));
        }
        out.push((ParamKind::Bias, self.shared_bias.as_slice()));
        out
    }

    fn params_mut(&mut self) -> Vec<(ParamKind, &mut [f64])> {
        let mut out = Vec::new();
        for s in &mut self.subnets {
            for l in &mut s.hidden {
                out.push((ParamKind::Weight, l.weights.as_mut_slice()));
                out.push((ParamKind::Bias, l.bias.as_mut_slice()));
            }
            out.push((ParamKind::Weight, s.output_weights.as_mut_slice()));
        }
        out.push((ParamKind::Bias, self.shared_bias.as_mut_slice()));
        out
    }
}

fn output_delta(head: ActivationKind, a: &[f64], y: &[f64]) -> Vector {
    let delta: Vec<f64> = match head {
        ActivationKind::Sigmoid => a.iter().zip(y).map(|(a, y)| a - y).collect(),
        other => a
            .iter()
            .zip(y)
            .map(|(&a, &y)| {
                let ac = a.clamp(CLAMP, 1.0 - CLAMP);
                (ac - y) / (ac * (1.0 - ac)) * other.derivative_from_output(a)
            })
            .collect(),
    };
    delta.into()
}

/// Propagates `d_out` (∂C/∂a of the stack's last layer) down through `layers`.
fn backprop_stack(
    layers: &[Layer],
    activation: ActivationKind,
    trace: &ForwardTrace,
    mut delta: Vector,
    grads: &mut [Layer],
) {
    for l in (0..layers.len()).rev() {
        for (d, &a) in delta.iter_mut().zip(trace.activations[l + 1].iter()) {
            *d *= activation.derivative_from_output(a);
        }
        grads[l].weights.add_outer_assign(&delta, &trace.activations[l]);
        add_assign(&mut grads[l].bias, &delta);
        if l > 0 {
            let mut prev = Vector::zeros(layers[l].inputs());
            layers[l].weights.transpose_matvec_into(&delta, &mut prev);
            delta = prev;
        }
    }
}

fn check_widths(op: &'static str, input: (usize, usize), target: (usize, usize)) -> Result<()> {
    if input.0 != input.1 {
        return Err(PnnError::DimensionMismatch {
            op,
            left: (input.0, 1),
            right: (input.1, 1),
        });
    }
    if target.0 != target.1 {
        return Err(PnnError::DimensionMismatch {
            op,
            left: (target.0, 1),
            right: (target.1, 1),
        });
    }
    Ok(())
}

impl Trainable for FnnModel {
    type Gradient = FnnGradient;

    fn zero_gradient(&self) -> FnnGradient {
        FnnGradient {
            layers: self.layers().iter().map(|l| Layer::zeros(l.inputs(), l.outputs())).collect(),
        }
    }

    fn accumulate_gradient(&self, input: &[f64], target: &[f64], grad: &mut FnnGradient) -> Result<()> {
        check_widths(
            "backprop",
            (self.input_width(), input.len()),
            (self.output_width(), target.len()),
        )?;
        let trace = self.forward(input)?;
        let delta = output_delta(self.head(), trace.output(), target);
        let last = self.layers().len() - 1;
        let (hidden_grads, out_grad) = grad.layers.split_at_mut(last);
        let out_grad = &mut out_grad[0];
        out_grad.weights.add_outer_assign(&delta, &trace.activations[last]);
        add_assign(&mut out_grad.bias, &delta);

        let mut d_hidden = Vector::zeros(self.output_layer().inputs());
        self.output_layer().weights.transpose_matvec_into(&delta, &mut d_hidden);
        backprop_stack(self.hidden(), self.activation(), &trace, d_hidden, hidden_grads);
        Ok(())
    }

    fn predict(&self, input: &[f64]) -> Result<Vector> {
        Ok(self.forward(input)?.activations.pop().unwrap())
    }

    fn output_width(&self) -> usize {
        FnnModel::output_width(self)
    }
}

impl Trainable for PnnModel {
    type Gradient = PnnGradient;

    fn zero_gradient(&self) -> PnnGradient {
        PnnGradient {
            subnets: self
                .subnets()
                .iter()
                .map(|s| SubnetGradient {
                    hidden: s.hidden.iter().map(|l| Layer::zeros(l.inputs(), l.outputs())).collect(),
                    output_weights: Matrix::zeros(s.output_weights.rows(), s.output_weights.cols()),
                })
                .collect(),
            shared_bias: Vector::zeros(self.output_width()),
        }
    }

    fn accumulate_gradient(&self, input: &[f64], target: &[f64], grad: &mut PnnGradient) -> Result<()> {
        check_widths(
            "backprop",
            (self.input_width(), input.len()),
            (self.output_width(), target.len()),
        )?;
        let traces: Vec<ForwardTrace> = self
            .subnets()
            .iter()
            .map(|s| s.trace(self.activation(), input))
            .collect();
        let mut z = Vector::zeros(self.output_width());
        for (s, t) in self.subnets().iter().zip(&traces) {
            let mut c = Vector::zeros(self.output_width());
            s.output_weights.matvec_into(t.output(), &mut c);
            add_assign(&mut z, &c);
        }
        add_assign(&mut z, self.shared_bias());
        let a = self.head_activation(&z);
        let delta = output_delta(self.head(), &a, target);

        add_assign(&mut grad.shared_bias, &delta);
        for ((s, t), g) in self.subnets().iter().zip(&traces).zip(&mut grad.subnets) {
            g.output_weights.add_outer_assign(&delta, t.output());
            let mut d_hidden = Vector::zeros(s.last_hidden_width());
            s.output_weights.transpose_matvec_into(&delta, &mut d_hidden);
            backprop_stack(&s.hidden, self.activation(), t, d_hidden, &mut g.hidden);
        }
        Ok(())
    }

    fn predict(&self, input: &[f64]) -> Result<Vector> {
        Ok(self.forward(input)?.activation)
    }

    fn output_width(&self) -> usize {
        PnnModel::output_width(self)
    }
}

/// Gradient of the unregularized per-example cost.
pub fn backprop<M: Trainable>(model: &M, example: &Example) -> Result<M::Gradient> {
    let target = target_vector(example.label, model.output_width())?;
    let mut grad = model.zero_gradient();
    model.accumulate_gradient(&example.pixels, &target, &mut grad)?;
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::connect;
    use crate::rng::Rng;
    use crate::train::cost;

    /// Central differences over every parameter, through `predict` + `cost` only.
    fn numeric_gradient<M: Trainable>(model: &M, x: &[f64], y: &[f64], h: f64) -> Vec<f64> {
        let mut probe = model.clone();
        let sizes: Vec<usize> = probe.params().iter().map(|(_, p)| p.len()).collect();
        let mut out = Vec::new();
        for (slot, &len) in sizes.iter().enumerate() {
            for k in 0..len {
                let orig = probe.params()[slot].1[k];
                probe.params_mut()[slot].1[k] = orig + h;
                let plus = cost(&probe.predict(x).unwrap(), y);
                probe.params_mut()[slot].1[k] = orig - h;
                let minus = cost(&probe.predict(x).unwrap(), y);
                probe.params_mut()[slot].1[k] = orig;
                out.push((plus - minus) / (2.0 * h));
            }
        }
        out
    }

    fn flat<P: Parameterized>(p: &P) -> Vec<f64> {
        p.params().iter().flat_map(|(_, s)| s.iter().copied()).collect()
    }

    fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    #[test]
    fn fnn_gradient_matches_finite_differences() {
        for act in ActivationKind::ALL {
            let model = FnnModel::init(&[4, 3, 2], act, &mut Rng::new(3)).unwrap();
            let x = [0.1, 0.7, 0.3, 0.9];
            let y = [0.0, 1.0];
            let mut g = model.zero_gradient();
            model.accumulate_gradient(&x, &y, &mut g).unwrap();
            let err = max_rel_err(&flat(&g), &numeric_gradient(&model, &x, &y, 1e-5));
            assert!(err < 1e-6, "{act}: {err}");
        }
    }

    #[test]
    fn pnn_gradient_matches_finite_differences() {
        for act in ActivationKind::ALL {
            let mut rng = Rng::new(4);
            let a = FnnModel::init(&[4, 3, 2], act, &mut rng).unwrap();
            let b = FnnModel::init(&[4, 2, 2], act, &mut rng).unwrap();
            let model = connect(&[a, b]).unwrap();
            let x = [0.5, 0.2, 0.8, 0.4];
            let y = [1.0, 0.0];
            let mut g = model.zero_gradient();
            model.accumulate_gradient(&x, &y, &mut g).unwrap();
            let err = max_rel_err(&flat(&g), &numeric_gradient(&model, &x, &y, 1e-5));
            assert!(err < 1e-6, "{act}: {err}");
        }
    }

    #[test]
    fn tanh_head_gradient_matches_finite_differences() {
        let model = FnnModel::init(&[3, 4, 2], ActivationKind::Sigmoid, &mut Rng::new(9))
            .unwrap()
            .with_head(ActivationKind::Tanh);
        // Keep outputs inside (0, 1) so the clamp is inactive.
        let x = [0.2, 0.1, 0.3];
        let out = model.predict(&x).unwrap();
        if out.iter().all(|&a| a > 0.01 && a < 0.99) {
            let y = [1.0, 0.0];
            let mut g = model.zero_gradient();
            model.accumulate_gradient(&x, &y, &mut g).unwrap();
            let err = max_rel_err(&flat(&g), &numeric_gradient(&model, &x, &y, 1e-6));
            assert!(err < 1e-5, "{err}");
        }
    }

    #[test]
    fn zero_input_kills_first_layer_weight_gradient() {
        let mut model = FnnModel::init(&[4, 3, 3, 2], ActivationKind::Sigmoid, &mut Rng::new(1)).unwrap();
        for l in model.layers_mut() {
            l.weights.as_mut_slice().fill(0.0);
        }
        let ex = Example::new(vec![0.0; 4], 1).unwrap();
        let g = backprop(&model, &ex).unwrap();
        assert!(g.layers[0].weights.as_slice().iter().all(|&w| w == 0.0));
        assert!(g.layers[2].bias.iter().any(|&b| b != 0.0));
    }

    #[test]
    fn gradient_shapes_mirror_the_model() {
        let mut rng = Rng::new(2);
        let a = FnnModel::init(&[5, 4, 3, 2], ActivationKind::Sigmoid, &mut rng).unwrap();
        let b = FnnModel::init(&[5, 6, 2], ActivationKind::Sigmoid, &mut rng).unwrap();
        let p = connect(&[a, b]).unwrap();
        let g = p.zero_gradient();
        let ps: Vec<usize> = p.params().iter().map(|(_, s)| s.len()).collect();
        let gs: Vec<usize> = g.params().iter().map(|(_, s)| s.len()).collect();
        assert_eq!(ps, gs);
        // no parameter spans two sub-networks' hidden layers
        assert_eq!(g.subnets[0].hidden[1].weights.shape(), (3, 4));
        assert_eq!(g.subnets[1].hidden[0].weights.shape(), (6, 5));
    }

    #[test]
    fn backprop_checks_widths() {
        let m = FnnModel::init(&[4, 3, 2], ActivationKind::Sigmoid, &mut Rng::new(3)).unwrap();
        let mut g = m.zero_gradient();
        assert!(m.accumulate_gradient(&[0.0; 3], &[0.0, 1.0], &mut g).is_err());
        assert!(m.accumulate_gradient(&[0.0; 4], &[0.0; 3], &mut g).is_err());
    }
}
