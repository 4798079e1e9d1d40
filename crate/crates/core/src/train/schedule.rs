//! Training schedules.
//!
//! Method A trains every FNN alone for `epochs_separate` epochs, connects them, then trains
//! the PNN for `epochs_joint` epochs. Method B connects freshly initialized FNNs and trains
//! the PNN for `epochs_joint` epochs.
//!
//! Randomness comes from child streams of the caller's generator: FNN `i` is initialized
//! from `INIT_STREAM + i` and shuffles its separate-phase data with
//! `SEPARATE_SHUFFLE_STREAM + i`; the joint phase shuffles with `JOINT_SHUFFLE_STREAM`.

use log::info;
use rayon::prelude::*;

use super::{sgd_epoch, Method, TrainConfig};
use crate::data::Dataset;
use crate::error::{PnnError, Result};
use crate::metrics::{epoch_metrics, EpochMetrics};
use crate::network::{connect, FnnModel, PnnModel};
use crate::rng::Rng;

pub const INIT_STREAM: u64 = 0x1000;
pub const SEPARATE_SHUFFLE_STREAM: u64 = 0x2000;
pub const JOINT_SHUFFLE_STREAM: u64 = 0x3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointReason {
    /// Method A, right after the FNNs were connected.
    Connection,
    /// α_para reached a new maximum.
    Improved,
}

/// Handed to the checkpoint sink whenever the schedule wants a model persisted.
#[derive(Debug, Clone, Copy)]
pub struct CheckpointEvent<'a> {
    pub epoch: usize,
    pub reason: CheckpointReason,
    pub model: &'a PnnModel,
    pub metrics: &'a EpochMetrics,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    /// One row per epoch.
    pub metrics: Vec<EpochMetrics>,
    pub final_model: PnnModel,
    /// Epoch with the highest α_para among connected-model epochs (earliest on ties).
    pub best_epoch: usize,
    pub best_model: PnnModel,
    pub trail: Vec<(usize, CheckpointReason)>,
}

impl TrainingRun {
    pub fn best_metrics(&self) -> &EpochMetrics {
        &self.metrics[self.best_epoch]
    }
}

fn init_fnns(archs: &[Vec<usize>], cfg: &TrainConfig, rng: &Rng) -> Result<Vec<FnnModel>> {
    archs
        .iter()
        .enumerate()
        .map(|(i, arch)| {
            let mut stream = rng.derive(INIT_STREAM + i as u64);
            Ok(FnnModel::init(arch, cfg.activation, &mut stream)?.with_head(cfg.head))
        })
        .collect()
}

fn check_inputs(archs: &[Vec<usize>], data: &Dataset) -> Result<()> {
    if archs.len() < 2 {
        return Err(PnnError::InvalidArchitecture(format!(
            "a PNN needs at least 2 sub-networks, got {}",
            archs.len()
        )));
    }
    if data.train.is_empty() || data.eval.is_empty() {
        return Err(PnnError::InvalidArgument(format!(
            "training needs non-empty data (train {}, eval {})",
            data.train.len(),
            data.eval.len()
        )));
    }
    Ok(())
}

/// Tracks the best connected model and forwards checkpoints to the sink.
struct Tracker<'s> {
    sink: &'s mut dyn FnMut(CheckpointEvent) -> Result<()>,
    metrics: Vec<EpochMetrics>,
    best: Option<(usize, f64, PnnModel)>,
    trail: Vec<(usize, CheckpointReason)>,
}

impl<'s> Tracker<'s> {
    fn new(sink: &'s mut dyn FnMut(CheckpointEvent) -> Result<()>) -> Self {
        Tracker {
            sink,
            metrics: Vec::new(),
            best: None,
            trail: Vec::new(),
        }
    }

    fn log(m: &EpochMetrics, phase: &str) {
        info!(
            "epoch {:>3} [{phase}] alpha_para {:.4} alpha {:?} alpha' {:?}",
            m.epoch,
            m.alpha_para,
            m.alpha.iter().map(|a| format!("{a:.4}")).collect::<Vec<_>>(),
            m.alpha_prime.iter().map(|a| format!("{a:.4}")).collect::<Vec<_>>()
        );
    }

    fn record_separate(&mut self, m: EpochMetrics) {
        Self::log(&m, "separate");
        self.metrics.push(m);
    }

    /// Records a connected-model epoch; `connection` forces a checkpoint.
    fn record_connected(&mut self, model: &PnnModel, m: EpochMetrics, connection: bool) -> Result<()> {
        Self::log(&m, "joint");
        let (epoch, alpha_para) = (m.epoch, m.alpha_para);
        let improved = self.best.as_ref().map_or(true, |(_, best, _)| alpha_para > *best);
        self.metrics.push(m);
        if connection {
            self.emit(epoch, CheckpointReason::Connection, model)?;
        }
        if improved {
            self.best = Some((epoch, alpha_para, model.clone()));
            if !connection {
                self.emit(epoch, CheckpointReason::Improved, model)?;
            }
        }
        Ok(())
    }

    fn emit(&mut self, epoch: usize, reason: CheckpointReason, model: &PnnModel) -> Result<()> {
        self.trail.push((epoch, reason));
        (self.sink)(CheckpointEvent {
            epoch,
            reason,
            model,
            metrics: self.metrics.last().unwrap(),
        })
    }

    fn finish(self, final_model: PnnModel) -> TrainingRun {
        let (best_epoch, _, best_model) = self.best.expect("at least one connected epoch");
        TrainingRun {
            metrics: self.metrics,
            final_model,
            best_epoch,
            best_model,
            trail: self.trail,
        }
    }
}

fn joint_phase(
    mut pnn: PnnModel,
    first_epoch: usize,
    cfg: &TrainConfig,
    rng: &Rng,
    data: &Dataset,
    tracker: &mut Tracker,
) -> Result<PnnModel> {
    let mut shuffle = rng.derive(JOINT_SHUFFLE_STREAM);
    for e in 0..cfg.epochs_joint {
        sgd_epoch(&mut pnn, &data.train, cfg, &mut shuffle)?;
        let m = epoch_metrics(&pnn, &data.eval, first_epoch + e)?;
        tracker.record_connected(&pnn, m, false)?;
    }
    Ok(pnn)
}

/// Method A. Pre-connection rows hold each FNN's own accuracy in `alpha`; `alpha_para` and
/// `alpha_prime` there are what the connected model would score, and carry no meaning for
/// the separate phase. The boundary epoch (last separate epoch) emits the connection
/// checkpoint and starts best-model tracking.
pub fn run_method_a(
    archs: &[Vec<usize>],
    cfg: &TrainConfig,
    rng: &Rng,
    data: &Dataset,
    sink: &mut dyn FnMut(CheckpointEvent) -> Result<()>,
) -> Result<TrainingRun> {
    if cfg.method != Method::A {
        return Err(PnnError::InvalidArgument("run_method_a called with a method B config".into()));
    }
    cfg.validate()?;
    check_inputs(archs, data)?;
    let mut fnns = init_fnns(archs, cfg, rng)?;
    let mut shuffles: Vec<Rng> = (0..fnns.len())
        .map(|i| rng.derive(SEPARATE_SHUFFLE_STREAM + i as u64))
        .collect();
    let mut tracker = Tracker::new(sink);

    for e in 0..cfg.epochs_separate {
        // Each FNN owns its model and shuffle stream, so the order of execution is irrelevant.
        fnns.par_iter_mut()
            .zip(shuffles.par_iter_mut())
            .try_for_each(|(m, s)| sgd_epoch(m, &data.train, cfg, s))?;
        let pnn = connect(&fnns)?;
        let m = epoch_metrics(&pnn, &data.eval, e)?;
        if e + 1 == cfg.epochs_separate {
            tracker.record_connected(&pnn, m, true)?;
        } else {
            tracker.record_separate(m);
        }
    }

    let pnn = connect(&fnns)?;
    let pnn = joint_phase(pnn, cfg.epochs_separate, cfg, rng, data, &mut tracker)?;
    Ok(tracker.finish(pnn))
}

/// Method B: connect before any training, then train jointly for `epochs_joint` epochs.
pub fn run_method_b(
    archs: &[Vec<usize>],
    cfg: &TrainConfig,
    rng: &Rng,
    data: &Dataset,
    sink: &mut dyn FnMut(CheckpointEvent) -> Result<()>,
) -> Result<TrainingRun> {
    if cfg.method != Method::B {
        return Err(PnnError::InvalidArgument("run_method_b called with a method A config".into()));
    }
    cfg.validate()?;
    check_inputs(archs, data)?;
    let pnn = connect(&init_fnns(archs, cfg, rng)?)?;
    let mut tracker = Tracker::new(sink);
    let pnn = joint_phase(pnn, 0, cfg, rng, data, &mut tracker)?;
    Ok(tracker.finish(pnn))
}

/// Runs whichever method `cfg` selects.
pub fn run(
    archs: &[Vec<usize>],
    cfg: &TrainConfig,
    rng: &Rng,
    data: &Dataset,
    sink: &mut dyn FnMut(CheckpointEvent) -> Result<()>,
) -> Result<TrainingRun> {
    match cfg.method {
        Method::A => run_method_a(archs, cfg, rng, data, sink),
        Method::B => run_method_b(archs, cfg, rng, data, sink),
    }
}
