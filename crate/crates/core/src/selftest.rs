//! Built-in numerical checks that need no dataset: backprop against central finite
//! differences, and a PNN of single-hidden-layer FNNs against the equivalent merged FNN.

use std::fmt;

use crate::activation::ActivationKind;
use crate::data::{target_vector, Example};
use crate::error::{PnnError, Result};
use crate::linalg::Matrix;
use crate::network::{connect, FnnModel, Layer, Parameterized, PnnModel};
use crate::rng::Rng;
use crate::train::{cost, Trainable};

pub const FD_STEP: f64 = 1e-5;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// Relative error `|a − b| / max(|a|, |b|, 1e-8)`; the floor keeps vanishing entries from
/// turning roundoff into huge ratios.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Largest relative error between backprop and central differences over every parameter.
pub fn gradient_error<M: Trainable>(model: &M, example: &Example, h: f64) -> Result<f64>
where
    M::Gradient: Parameterized,
{
    let target = target_vector(example.label, model.output_width())?;
    let analytic: Vec<f64> = {
        let mut g = model.zero_gradient();
        model.accumulate_gradient(&example.pixels, &target, &mut g)?;
        g.params().iter().flat_map(|(_, s)| s.iter().copied()).collect()
    };
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut flat = 0;
    let groups = model.params().len();
    for gi in 0..groups {
        let len = model.params()[gi].1.len();
        for j in 0..len {
            let orig = probe.params()[gi].1[j];
            probe.params_mut()[gi].1[j] = orig + h;
            let plus = cost(&probe.predict(&example.pixels)?, &target);
            probe.params_mut()[gi].1[j] = orig - h;
            let minus = cost(&probe.predict(&example.pixels)?, &target);
            probe.params_mut()[gi].1[j] = orig;
            worst = worst.max(relative_error(analytic[flat], (plus - minus) / (2.0 * h)));
            flat += 1;
        }
    }
    Ok(worst)
}

/// Assembles the single FNN that a PNN of single-hidden-layer sub-networks is equivalent to:
/// stacked hidden layers, side-by-side output blocks, shared output bias.
pub fn merged_fnn(pnn: &PnnModel) -> Result<FnnModel> {
    if pnn.subnets().iter().any(|s| s.hidden.len() != 1) {
        return Err(PnnError::InvalidArchitecture(
            "only PNNs whose sub-networks all have exactly one hidden layer can be merged".into(),
        ));
    }
    let n0 = pnn.input_width();
    let nm = pnn.output_width();
    let widths: Vec<usize> = pnn.subnets().iter().map(|s| s.last_hidden_width()).collect();
    let total: usize = widths.iter().sum();
    let mut w1 = Matrix::zeros(total, n0);
    let mut b1 = Vec::with_capacity(total);
    let mut w2 = Matrix::zeros(nm, total);
    let mut offset = 0;
    for (s, &w) in pnn.subnets().iter().zip(&widths) {
        let h = &s.hidden[0];
        for r in 0..w {
            for c in 0..n0 {
                w1.set(offset + r, c, h.weights.get(r, c));
            }
            b1.push(h.bias[r]);
        }
        for d in 0..nm {
            for r in 0..w {
                w2.set(d, offset + r, s.output_weights.get(d, r));
            }
        }
        offset += w;
    }
    FnnModel::from_layers(
        vec![Layer::new(w1, b1.into())?, Layer::new(w2, pnn.shared_bias().clone())?],
        pnn.activation(),
        pnn.head(),
    )
}

fn random_example(width: usize, classes: usize, rng: &mut Rng) -> Example {
    Example::new((0..width).map(|_| rng.next_f64()).collect(), rng.below(classes as u64) as u8).unwrap()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value < self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.3e} (< {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance
        )
    }
}

/// Gradient checks on a `[6,4,3]` FNN and a `[6,3,3]+[6,2,4,3]` PNN for every activation,
/// plus the merge check on `[4,3,3]+[4,2,3]` over 100 random inputs.
pub fn run_selftest(seed: u64) -> Result<Vec<Check>> {
    let mut rng = Rng::new(seed);
    let mut checks = Vec::new();
    for act in ActivationKind::ALL {
        let fnn = FnnModel::init(&[6, 4, 3], act, &mut rng)?;
        let ex = random_example(6, 3, &mut rng);
        checks.push(Check {
            name: format!("gradient fnn [6,4,3] {act}"),
            value: gradient_error(&fnn, &ex, FD_STEP)?,
            tolerance: GRADIENT_TOLERANCE,
        });
        let a = FnnModel::init(&[6, 3, 3], act, &mut rng)?;
        let b = FnnModel::init(&[6, 2, 4, 3], act, &mut rng)?;
        let pnn = connect(&[a, b])?;
        let ex = random_example(6, 3, &mut rng);
        checks.push(Check {
            name: format!("gradient pnn [6,3,3]+[6,2,4,3] {act}"),
            value: gradient_error(&pnn, &ex, FD_STEP)?,
            tolerance: GRADIENT_TOLERANCE,
        });
    }
    let a = FnnModel::init(&[4, 3, 3], ActivationKind::Sigmoid, &mut rng)?;
    let b = FnnModel::init(&[4, 2, 3], ActivationKind::Sigmoid, &mut rng)?;
    let pnn = connect(&[a, b])?;
    let merged = merged_fnn(&pnn)?;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..4).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        let zp = pnn.forward(&x)?.z;
        let zm = merged.forward(&x)?;
        for (p, m) in zp.iter().zip(zm.output_z().iter()) {
            worst = worst.max((p - m).abs());
        }
    }
    checks.push(Check {
        name: "merge [4,3,3]+[4,2,3] vs [4,5,3]".into(),
        value: worst,
        tolerance: MERGE_TOLERANCE,
    });
    Ok(checks)
}
