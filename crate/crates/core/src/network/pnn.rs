use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{forward_stack, validate_arch, FnnModel, ForwardTrace, Layer, ParamKind, Parameterized};
use crate::activation::ActivationKind;
use crate::error::{PnnError, Result};
use crate::linalg::{add, add_assign, Matrix, Vector};

/// Which output bias a masked sub-network evaluation uses.
///
/// `Own` uses the sub-network's bias `b_i` frozen at connection time: `z = w_i·x_i + b_i`.
/// `Shared` uses the jointly trained bias: `z = w_i·x_i + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasMode {
    Own,
    Shared,
}

impl fmt::Display for BiasMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BiasMode::Own => "own",
            BiasMode::Shared => "shared",
        })
    }
}

impl FromStr for BiasMode {
    type Err = PnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "own" => Ok(BiasMode::Own),
            "shared" => Ok(BiasMode::Shared),
            other => Err(PnnError::InvalidArgument(format!(
                "unknown mask mode '{other}' (expected own|shared)"
            ))),
        }
    }
}

/// A sub-network's private hidden stack plus its block `w_i` of the shared output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SubNetwork {
    arch: Vec<usize>,
    pub hidden: Vec<Layer>,
    pub output_weights: Matrix,
}

impl SubNetwork {
    pub fn new(hidden: Vec<Layer>, output_weights: Matrix) -> Result<Self> {
        let first = hidden
            .first()
            .ok_or_else(|| PnnError::InvalidArchitecture("sub-network without hidden layers".into()))?;
        let mut arch = vec![first.inputs()];
        for layer in &hidden {
            if layer.inputs() != *arch.last().unwrap() {
                return Err(PnnError::DimensionMismatch {
                    op: "sub-network layers",
                    left: (*arch.last().unwrap(), 1),
                    right: layer.weights.shape(),
                });
            }
            arch.push(layer.outputs());
        }
        if output_weights.cols() != *arch.last().unwrap() {
            return Err(PnnError::DimensionMismatch {
                op: "sub-network output block",
                left: (*arch.last().unwrap(), 1),
                right: output_weights.shape(),
            });
        }
        arch.push(output_weights.rows());
        validate_arch(&arch)?;
        Ok(SubNetwork {
            arch,
            hidden,
            output_weights,
        })
    }

    /// The `[n_0, ..., n_m]` label of this sub-network.
    pub fn arch(&self) -> &[usize] {
        &self.arch
    }

    pub fn last_hidden_width(&self) -> usize {
        self.output_weights.cols()
    }

    pub(crate) fn trace(&self, activation: ActivationKind, input: &[f64]) -> ForwardTrace {
        forward_stack(&self.hidden, activation, input)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnnModel {
    subnets: Vec<SubNetwork>,
    shared_bias: Vector,
    sub_biases: Vec<Vector>,
    activation: ActivationKind,
    head: ActivationKind,
}

/// Result of a full PNN forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PnnForward {
    /// `z = Σ_i w_i·x_i + b`
    pub z: Vector,
    pub activation: Vector,
    /// `x_i`, the last hidden activation of each sub-network.
    pub last_hidden: Vec<Vector>,
    /// `w_i·x_i` for each sub-network.
    pub contributions: Vec<Vector>,
}

/// Output weighted inputs of the whole PNN and of every masked sub-network, from one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedOutputs {
    pub para: Vector,
    pub own: Vec<Vector>,
    pub shared: Vec<Vector>,
}

impl PnnModel {
    pub fn from_parts(
        subnets: Vec<SubNetwork>,
        shared_bias: Vector,
        sub_biases: Vec<Vector>,
        activation: ActivationKind,
        head: ActivationKind,
    ) -> Result<Self> {
        if subnets.len() < 2 {
            return Err(PnnError::InvalidArchitecture(format!(
                "a PNN needs at least 2 sub-networks, got {}",
                subnets.len()
            )));
        }
        if sub_biases.len() != subnets.len() {
            return Err(PnnError::InvalidArgument(format!(
                "{} sub-networks but {} frozen sub-biases",
                subnets.len(),
                sub_biases.len()
            )));
        }
        let n0 = subnets[0].arch()[0];
        let nm = *subnets[0].arch().last().unwrap();
        for s in &subnets {
            if s.arch()[0] != n0 || *s.arch().last().unwrap() != nm {
                return Err(PnnError::InvalidArchitecture(format!(
                    "sub-networks must share input/output widths: {:?} vs {:?}",
                    subnets[0].arch(),
                    s.arch()
                )));
            }
        }
        if shared_bias.len() != nm || sub_biases.iter().any(|b| b.len() != nm) {
            return Err(PnnError::InvalidArgument(format!(
                "output biases must have length {nm}"
            )));
        }
        Ok(PnnModel {
            subnets,
            shared_bias,
            sub_biases,
            activation,
            head,
        })
    }

    pub fn subnets(&self) -> &[SubNetwork] {
        &self.subnets
    }

    pub fn subnets_mut(&mut self) -> &mut [SubNetwork] {
        &mut self.subnets
    }

    pub fn subnet_count(&self) -> usize {
        self.subnets.len()
    }

    pub fn archs(&self) -> Vec<Vec<usize>> {
        self.subnets.iter().map(|s| s.arch().to_vec()).collect()
    }

    pub fn shared_bias(&self) -> &Vector {
        &self.shared_bias
    }

    pub fn shared_bias_mut(&mut self) -> &mut Vector {
        &mut self.shared_bias
    }

    /// The `b_i` copies frozen at connection; never trained.
    pub fn sub_biases(&self) -> &[Vector] {
        &self.sub_biases
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn head(&self) -> ActivationKind {
        self.head
    }

    pub fn input_width(&self) -> usize {
        self.subnets[0].arch()[0]
    }

    pub fn output_width(&self) -> usize {
        self.shared_bias.len()
    }

    fn check_input(&self, input: &[f64], op: &'static str) -> Result<()> {
        if input.len() != self.input_width() {
            return Err(PnnError::DimensionMismatch {
                op,
                left: (self.input_width(), 1),
                right: (input.len(), 1),
            });
        }
        Ok(())
    }

    fn check_subnet(&self, index: usize) -> Result<()> {
        if index >= self.subnets.len() {
            return Err(PnnError::InvalidArgument(format!(
                "sub-network index {index} out of range (PNN has {})",
                self.subnets.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn head_activation(&self, z: &[f64]) -> Vector {
        let mut a = Vector::zeros(z.len());
        self.head.apply_slice(z, &mut a);
        a
    }

    fn contributions(&self, input: &[f64]) -> (Vec<Vector>, Vec<Vector>) {
        let mut last_hidden = Vec::with_capacity(self.subnets.len());
        let mut contributions = Vec::with_capacity(self.subnets.len());
        for s in &self.subnets {
            let x = s.trace(self.activation, input).activations.pop().unwrap();
            let mut c = Vector::zeros(self.output_width());
            s.output_weights.matvec_into(&x, &mut c);
            last_hidden.push(x);
            contributions.push(c);
        }
        (last_hidden, contributions)
    }

    /// `Σ_i c_i` accumulated from zero in sub-network order, then `+ b`.
    fn combine(&self, contributions: &[Vector]) -> Vector {
        let mut z = Vector::zeros(self.output_width());
        for c in contributions {
            add_assign(&mut z, c);
        }
        add_assign(&mut z, &self.shared_bias);
        z
    }

    pub fn forward(&self, input: &[f64]) -> Result<PnnForward> {
        self.check_input(input, "forward_pnn")?;
        let (last_hidden, contributions) = self.contributions(input);
        let z = self.combine(&contributions);
        let activation = self.head_activation(&z);
        Ok(PnnForward {
            z,
            activation,
            last_hidden,
            contributions,
        })
    }

    /// Output of sub-network `keep` alone, every other output block treated as zero.
    pub fn forward_masked(&self, input: &[f64], keep: usize, mode: BiasMode) -> Result<(Vector, Vector)> {
        self.check_input(input, "forward_masked")?;
        self.check_subnet(keep)?;
        let s = &self.subnets[keep];
        let x = s.trace(self.activation, input).activations.pop().unwrap();
        let mut c = Vector::zeros(self.output_width());
        s.output_weights.matvec_into(&x, &mut c);
        let z = self.masked_z(&c, keep, mode);
        let a = self.head_activation(&z);
        Ok((z, a))
    }

    fn masked_z(&self, contribution: &[f64], keep: usize, mode: BiasMode) -> Vector {
        let bias = match mode {
            BiasMode::Own => &self.sub_biases[keep],
            BiasMode::Shared => &self.shared_bias,
        };
        add(contribution, bias).expect("widths validated at construction")
    }

    /// Whole-PNN and all masked weighted inputs, sharing one hidden pass per sub-network.
    pub fn masked_outputs(&self, input: &[f64]) -> Result<MaskedOutputs> {
        self.check_input(input, "masked_outputs")?;
        let (_, contributions) = self.contributions(input);
        let para = self.combine(&contributions);
        let own = (0..self.subnets.len())
            .map(|i| self.masked_z(&contributions[i], i, BiasMode::Own))
            .collect();
        let shared = (0..self.subnets.len())
            .map(|i| self.masked_z(&contributions[i], i, BiasMode::Shared))
            .collect();
        Ok(MaskedOutputs { para, own, shared })
    }

    /// Sub-network `i` as a standalone FNN with its frozen bias `b_i` as output bias.
    pub fn standalone(&self, index: usize) -> Result<FnnModel> {
        self.check_subnet(index)?;
        let s = &self.subnets[index];
        let mut layers = s.hidden.clone();
        layers.push(Layer::new(s.output_weights.clone(), self.sub_biases[index].clone())?);
        FnnModel::from_layers(layers, self.activation, self.head)
    }
}

/// Connects trained (or fresh) FNNs in parallel.
///
/// Hidden stacks are copied verbatim, each FNN's final-layer weights become its output
/// block `w_i`, and the shared output bias is `b = Σ_i b_i`. The `b_i` are kept, frozen,
/// for `BiasMode::Own` evaluation.
pub fn connect(models: &[FnnModel]) -> Result<PnnModel> {
    let first = models
        .first()
        .ok_or_else(|| PnnError::InvalidArchitecture("connect() needs at least 2 FNNs".into()))?;
    for m in models {
        if m.input_width() != first.input_width() || m.output_width() != first.output_width() {
            return Err(PnnError::InvalidArchitecture(format!(
                "cannot connect {:?} with {:?}: input and output widths must match",
                first.arch(),
                m.arch()
            )));
        }
        if m.activation() != first.activation() || m.head() != first.head() {
            return Err(PnnError::InvalidArgument(format!(
                "cannot connect networks with different activations ({}/{} vs {}/{})",
                first.activation(),
                first.head(),
                m.activation(),
                m.head()
            )));
        }
    }
    let mut shared_bias = Vector::zeros(first.output_width());
    let mut sub_biases = Vec::with_capacity(models.len());
    let mut subnets = Vec::with_capacity(models.len());
    for m in models {
        let out = m.output_layer();
        add_assign(&mut shared_bias, &out.bias);
        sub_biases.push(out.bias.clone());
        subnets.push(SubNetwork::new(m.hidden().to_vec(), out.weights.clone())?);
    }
    PnnModel::from_parts(subnets, shared_bias, sub_biases, first.activation(), first.head())
}

impl Parameterized for PnnModel {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::classify;
    use crate::rng::Rng;

    fn fnn(arch: &[usize], seed: u64) -> FnnModel {
        FnnModel::init(arch, ActivationKind::Sigmoid, &mut Rng::new(seed)).unwrap()
    }

    fn random_input(rng: &mut Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.next_f64()).collect()
    }

    #[test]
    fn connect_sums_output_biases() {
        let a = fnn(&[784, 50, 10], 1);
        let b = fnn(&[784, 50, 10], 2);
        let p = connect(&[a.clone(), b.clone()]).unwrap();
        for j in 0..10 {
            assert_eq!(p.shared_bias()[j], a.output_layer().bias[j] + b.output_layer().bias[j]);
        }
        assert_eq!(p.sub_biases()[0], a.output_layer().bias);
        assert_eq!(p.sub_biases()[1], b.output_layer().bias);
        assert_eq!(p.param_count(), 2 * 39760 - 10);
    }

    #[test]
    fn connect_rejects_incompatible_networks() {
        let a = fnn(&[784, 50, 10], 1);
        assert!(connect(&[a.clone(), fnn(&[784, 30, 8], 2)]).is_err());
        assert!(connect(&[a.clone(), fnn(&[783, 30, 10], 2)]).is_err());
        let relu = FnnModel::init(&[784, 20, 10], ActivationKind::Relu, &mut Rng::new(3)).unwrap();
        assert!(connect(&[a.clone(), relu]).is_err());
        assert!(connect(&[a]).is_err());
        assert!(connect(&[]).is_err());
    }

    #[test]
    fn identical_zero_weight_networks_double_the_output() {
        let mut m = fnn(&[4, 3, 2, 3], 5);
        for l in m.layers_mut() {
            l.weights.as_mut_slice().fill(0.0);
        }
        let p = connect(&[m.clone(), m.clone()]).unwrap();
        let x = [0.2, 0.4, 0.6, 0.8];
        let single = m.forward(&x).unwrap();
        let both = p.forward(&x).unwrap();
        for (zp, zs) in both.z.iter().zip(single.output_z().iter()) {
            assert_eq!(*zp, 2.0 * zs);
        }
    }

    #[test]
    fn zero_output_blocks_give_shared_bias() {
        let mut p = connect(&[fnn(&[4, 3, 3], 1), fnn(&[4, 2, 2, 3], 2)]).unwrap();
        for s in p.subnets_mut() {
            s.output_weights.as_mut_slice().fill(0.0);
        }
        let out = p.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(out.z, *p.shared_bias());
        let (own, _) = p.forward_masked(&[0.1, 0.2, 0.3, 0.4], 1, BiasMode::Own).unwrap();
        assert_eq!(own, p.sub_biases()[1]);
        let (shared, _) = p.forward_masked(&[0.1, 0.2, 0.3, 0.4], 1, BiasMode::Shared).unwrap();
        assert_eq!(shared, *p.shared_bias());
    }

    #[test]
    fn forward_after_connect_is_sum_of_standalone_outputs() {
        let a = fnn(&[6, 5, 4, 3], 8);
        let b = fnn(&[6, 7, 3], 9);
        let p = connect(&[a.clone(), b.clone()]).unwrap();
        let mut rng = Rng::new(10);
        for _ in 0..20 {
            let x = random_input(&mut rng, 6);
            let za = a.forward(&x).unwrap();
            let zb = b.forward(&x).unwrap();
            let z = p.forward(&x).unwrap().z;
            for j in 0..3 {
                let expected = za.output_z()[j] + zb.output_z()[j];
                assert!((z[j] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn own_mode_after_connect_reproduces_standalone_bitwise() {
        let a = fnn(&[6, 5, 4, 3], 8);
        let b = fnn(&[6, 7, 3], 9);
        let p = connect(&[a.clone(), b.clone()]).unwrap();
        let mut rng = Rng::new(12);
        for _ in 0..50 {
            let x = random_input(&mut rng, 6);
            for (i, m) in [&a, &b].into_iter().enumerate() {
                let t = m.forward(&x).unwrap();
                let (z, act) = p.forward_masked(&x, i, BiasMode::Own).unwrap();
                assert_eq!(&z, t.output_z());
                assert_eq!(&act, t.output());
            }
        }
        assert_eq!(p.standalone(0).unwrap(), a);
    }

    #[test]
    fn own_and_shared_agree_when_shared_bias_is_the_sub_bias() {
        let mut b = fnn(&[5, 3, 3, 4], 2);
        let last = b.layers_mut().len() - 1;
        b.layers_mut()[last].bias.as_mut_slice().fill(0.0);
        let p = connect(&[fnn(&[5, 4, 4], 1), b]).unwrap();
        let x = [0.5; 5];
        assert_eq!(
            p.forward_masked(&x, 0, BiasMode::Own).unwrap(),
            p.forward_masked(&x, 0, BiasMode::Shared).unwrap()
        );
    }

    #[test]
    fn masked_outputs_match_individual_calls() {
        let p = connect(&[fnn(&[5, 3, 3, 4], 3), fnn(&[5, 6, 4], 4), fnn(&[5, 2, 4], 5)]).unwrap();
        let x = [0.9, 0.1, 0.0, 0.3, 0.7];
        let all = p.masked_outputs(&x).unwrap();
        assert_eq!(all.para, p.forward(&x).unwrap().z);
        for i in 0..3 {
            assert_eq!(all.own[i], p.forward_masked(&x, i, BiasMode::Own).unwrap().0);
            assert_eq!(all.shared[i], p.forward_masked(&x, i, BiasMode::Shared).unwrap().0);
        }
    }

    #[test]
    fn masked_forward_errors() {
        let p = connect(&[fnn(&[5, 3, 3, 4], 3), fnn(&[5, 6, 4], 4)]).unwrap();
        assert!(p.forward_masked(&[0.0; 5], 2, BiasMode::Own).is_err());
        assert!(p.forward_masked(&[0.0; 4], 0, BiasMode::Own).is_err());
        assert!(p.forward(&[0.0; 6]).is_err());
    }

    #[test]
    fn shared_mode_equals_forward_of_masked_clone() {
        let p = connect(&[fnn(&[5, 3, 3, 4], 3), fnn(&[5, 6, 4], 4)]).unwrap();
        let mut rng = Rng::new(77);
        for keep in 0..2 {
            let mut clone = p.clone();
            for (i, s) in clone.subnets_mut().iter_mut().enumerate() {
                if i != keep {
                    s.output_weights.as_mut_slice().fill(0.0);
                }
            }
            for _ in 0..20 {
                let x = random_input(&mut rng, 5);
                let (z, a) = p.forward_masked(&x, keep, BiasMode::Shared).unwrap();
                let full = clone.forward(&x).unwrap();
                assert_eq!(z, full.z);
                assert_eq!(classify(&a), classify(&full.activation));
            }
        }
    }

    #[test]
    fn bias_mode_parsing() {
        assert_eq!("own".parse::<BiasMode>().unwrap(), BiasMode::Own);
        assert_eq!("Shared".parse::<BiasMode>().unwrap(), BiasMode::Shared);
        assert!("both".parse::<BiasMode>().is_err());
    }
}
