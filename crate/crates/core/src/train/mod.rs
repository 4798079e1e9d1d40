//! Mini-batch SGD with L2 weight decay over FNNs and PNNs, and the two training schedules.

mod backprop;
mod cost;
mod schedule;

pub use backprop::{backprop, FnnGradient, PnnGradient, SubnetGradient, Trainable};
pub use cost::{cost, CLAMP};
pub use schedule::{
    run, run_method_a, run_method_b, CheckpointEvent, CheckpointReason, TrainingRun, INIT_STREAM,
    JOINT_SHUFFLE_STREAM, SEPARATE_SHUFFLE_STREAM,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::data::{target_vector, Example};
use crate::error::{PnnError, Result};
use crate::network::{ParamKind, Parameterized};
use crate::rng::Rng;

/// A: sub-networks trained alone, then connected and trained jointly.
/// B: connected before any training and trained jointly throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    A,
    B,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::A => "A",
            Method::B => "B",
        })
    }
}

impl FromStr for Method {
    type Err = PnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Method::A),
            "B" | "b" => Ok(Method::B),
            other => Err(PnnError::InvalidArgument(format!("unknown training method '{other}' (expected A|B)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    /// Method A only.
    pub epochs_separate: usize,
    pub epochs_joint: usize,
    pub eta: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub activation: ActivationKind,
    pub head: ActivationKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::A,
            epochs_separate: 60,
            epochs_joint: 40,
            eta: 0.1,
            lambda: 5.0,
            batch_size: 10,
            seed: 1,
            activation: ActivationKind::Sigmoid,
            head: ActivationKind::Sigmoid,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.eta.is_finite() || self.eta <= 0.0 {
            return Err(PnnError::InvalidArgument(format!("eta must be > 0, got {}", self.eta)));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(PnnError::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.batch_size == 0 {
            return Err(PnnError::InvalidArgument("batch size must be >= 1".into()));
        }
        match self.method {
            Method::A if self.epochs_separate == 0 => Err(PnnError::InvalidArgument(
                "method A needs at least one separate-training epoch".into(),
            )),
            Method::B if self.epochs_joint == 0 => {
                Err(PnnError::InvalidArgument("method B needs at least one joint epoch".into()))
            }
            _ => Ok(()),
        }
    }

    /// Separate-phase epochs actually run: always 0 for method B.
    pub fn effective_epochs_separate(&self) -> usize {
        match self.method {
            Method::A => self.epochs_separate,
            Method::B => 0,
        }
    }

    pub fn total_epochs(&self) -> usize {
        self.effective_epochs_separate() + self.epochs_joint
    }
}

/// One pass over `data` in a fresh shuffled order.
///
/// Each mini-batch (the trailing partial one included) applies
/// `w ← (1 − η·λ/n)·w − (η/|batch|)·Σ∇w` and `b ← b − (η/|batch|)·Σ∇b`, with `n = data.len()`.
pub fn sgd_epoch<M: Trainable>(model: &mut M, data: &[Example], cfg: &TrainConfig, rng: &mut Rng) -> Result<()> {
    if data.is_empty() {
        return Err(PnnError::InvalidArgument("sgd_epoch on empty data".into()));
    }
    if cfg.batch_size == 0 || cfg.batch_size > data.len() {
        return Err(PnnError::InvalidArgument(format!(
            "batch size {} must be in 1..={}",
            cfg.batch_size,
            data.len()
        )));
    }
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);

    let width = model.output_width();
    let decay = 1.0 - cfg.eta * cfg.lambda / n as f64;
    let mut grad = model.zero_gradient();
    for batch in order.chunks(cfg.batch_size) {
        for (_, g) in grad.params_mut() {
            g.fill(0.0);
        }
        for &i in batch {
            let ex = &data[i];
            let target = target_vector(ex.label, width)?;
            model.accumulate_gradient(&ex.pixels, &target, &mut grad)?;
        }
        apply_update(model, &grad, decay, cfg.eta / batch.len() as f64);
    }
    Ok(())
}

fn apply_update<M: Trainable>(model: &mut M, grad: &M::Gradient, decay: f64, step: f64) {
    for ((kind, p), (_, g)) in model.params_mut().into_iter().zip(grad.params()) {
        match kind {
            ParamKind::Weight => {
                for (w, dw) in p.iter_mut().zip(g) {
                    *w = decay * *w - step * dw;
                }
            }
            ParamKind::Bias => {
                for (b, db) in p.iter_mut().zip(g) {
                    *b -= step * db;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::network::{connect, FnnModel, Layer};

    fn small_data(n: usize, width: usize, seed: u64) -> Vec<Example> {
        let mut rng = Rng::new(seed);
        (0..n)
            .map(|i| Example::new((0..width).map(|_| rng.next_f64()).collect(), (i % 3) as u8).unwrap())
            .collect()
    }

    fn cfg(eta: f64, lambda: f64, batch_size: usize) -> TrainConfig {
        TrainConfig {
            eta,
            lambda,
            batch_size,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_leaves_model_unchanged() {
        let data = small_data(25, 4, 1);
        let mut model = FnnModel::init(&[4, 5, 3], ActivationKind::Sigmoid, &mut Rng::new(2)).unwrap();
        let before = model.clone();
        sgd_epoch(&mut model, &data, &cfg(0.0, 5.0, 10), &mut Rng::new(3)).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn single_example_step_matches_hand_update() {
        let data = small_data(1, 4, 5);
        let model = FnnModel::init(&[4, 3, 3], ActivationKind::Sigmoid, &mut Rng::new(6)).unwrap();
        let grad = backprop(&model, &data[0]).unwrap();
        let eta = 0.5;
        let mut expected = model.clone();
        for ((_, p), (_, g)) in expected.params_mut().into_iter().zip(grad.params()) {
            for (x, dx) in p.iter_mut().zip(g) {
                *x -= eta * dx;
            }
        }
        let mut trained = model.clone();
        sgd_epoch(&mut trained, &data, &cfg(eta, 0.0, 1), &mut Rng::new(7)).unwrap();
        for ((_, a), (_, b)) in trained.params().into_iter().zip(expected.params()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-15 * y.abs().max(1.0));
            }
        }
    }

    /// Saturate the sigmoid head so `a − y` underflows to exactly zero.
    fn saturated_model() -> FnnModel {
        let hidden = Layer::new(Matrix::from_vec(2, 3, vec![0.3, -0.2, 0.1, 0.5, 0.4, -0.6]).unwrap(), vec![0.0; 2].into()).unwrap();
        let out = Layer::new(Matrix::from_vec(3, 2, vec![0.2, -0.1, 0.3, 0.4, -0.5, 0.6]).unwrap(), vec![-1e3, 1e3, -1e3].into()).unwrap();
        FnnModel::from_layers(vec![hidden, out], ActivationKind::Sigmoid, ActivationKind::Sigmoid).unwrap()
    }

    #[test]
    fn zero_gradient_means_pure_weight_decay() {
        // Every example has label 1 and the head outputs exactly (0, 1, 0): all gradients vanish.
        let data: Vec<Example> = (0..20).map(|i| Example::new(vec![0.05 * i as f64, 0.5, 1.0], 1).unwrap()).collect();
        let mut model = saturated_model();
        let g = backprop(&model, &data[0]).unwrap();
        assert!(g.params().iter().all(|(_, s)| s.iter().all(|&x| x == 0.0)));

        let before = model.clone();
        let (eta, lambda) = (0.1, 5.0);
        let factor = 1.0 - eta * lambda / 20.0;

        // One full batch: a single decay step.
        sgd_epoch(&mut model, &data, &cfg(eta, lambda, 20), &mut Rng::new(1)).unwrap();
        for ((kind, a), (_, b)) in model.params().into_iter().zip(before.params()) {
            for (x, y) in a.iter().zip(b) {
                match kind {
                    ParamKind::Weight => assert_eq!(*x, factor * y),
                    ParamKind::Bias => assert_eq!(x, y),
                }
            }
        }

        // Two batches of 10: decay is applied once per batch.
        let mut model = before.clone();
        sgd_epoch(&mut model, &data, &cfg(eta, lambda, 10), &mut Rng::new(1)).unwrap();
        for ((kind, a), (_, b)) in model.params().into_iter().zip(before.params()) {
            for (x, y) in a.iter().zip(b) {
                match kind {
                    ParamKind::Weight => assert_eq!(*x, factor * (factor * y)),
                    ParamKind::Bias => assert_eq!(x, y),
                }
            }
        }
    }

    #[test]
    fn sgd_epoch_errors() {
        let mut model = FnnModel::init(&[4, 3, 3], ActivationKind::Sigmoid, &mut Rng::new(6)).unwrap();
        assert!(sgd_epoch(&mut model, &[], &cfg(0.1, 0.0, 1), &mut Rng::new(1)).is_err());
        let data = small_data(5, 4, 1);
        assert!(sgd_epoch(&mut model, &data, &cfg(0.1, 0.0, 6), &mut Rng::new(1)).is_err());
    }

    #[test]
    fn training_reduces_cost_on_a_pnn() {
        let data = small_data(60, 4, 11);
        let mut rng = Rng::new(12);
        let a = FnnModel::init(&[4, 6, 5, 3], ActivationKind::Sigmoid, &mut rng).unwrap();
        let b = FnnModel::init(&[4, 6, 3], ActivationKind::Sigmoid, &mut rng).unwrap();
        let mut p = connect(&[a, b]).unwrap();
        let total = |p: &crate::network::PnnModel| -> f64 {
            data.iter()
                .map(|e| cost(&p.predict(&e.pixels).unwrap(), &target_vector(e.label, 3).unwrap()))
                .sum()
        };
        let before = total(&p);
        let frozen = p.sub_biases().to_vec();
        for _ in 0..30 {
            sgd_epoch(&mut p, &data, &cfg(0.5, 0.0, 5), &mut rng).unwrap();
        }
        assert!(total(&p) < before);
        assert_eq!(p.sub_biases(), frozen.as_slice());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { eta: 0.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { lambda: -1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { epochs_separate: 0, ..TrainConfig::default() }.validate().is_err());
        let b = TrainConfig { method: Method::B, epochs_separate: 60, epochs_joint: 100, ..TrainConfig::default() };
        assert!(b.validate().is_ok());
        assert_eq!(b.total_epochs(), 100);
        assert!(TrainConfig { epochs_joint: 0, ..b }.validate().is_err());
        assert_eq!("b".parse::<Method>().unwrap(), Method::B);
        assert!("C".parse::<Method>().is_err());
    }
}
