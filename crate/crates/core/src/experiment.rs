//! Multi-trial experiment runner and its on-disk artifacts.
//!
//! Run `idx` (0-based) uses seed `base_seed + idx` and writes into `out_dir/run_{idx}/`:
//!
//! * `metrics.csv`: one row per epoch
//! * `checkpoint_epoch_{e}.pnn`: the checkpoint trail (connection boundary and every new
//!   best α_para), listed in `trail.csv`
//! * `best.pnn`, `final.pnn`
//! * `taxonomy.json` and `weights.csv` for the best model
//!
//! `out_dir/summary.csv` and `summary.json` hold one [`TrialSummary`] per run. The run whose
//! best α_para is the median (lower middle for an even count) is labelled trial 1; the others
//! are labelled 2, 3, … in run order.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::arch::format_arch;
use crate::checkpoint::save_checkpoint;
use crate::data::Dataset;
use crate::error::{PnnError, Result};
use crate::metrics::{categorize, weight_snapshot, ResultTaxonomy, TypeCounts};
use crate::network::BiasMode;
use crate::report::{write_metrics_csv, write_taxonomy_json, write_weights_csv};
use crate::rng::Rng;
use crate::train::{run, CheckpointEvent, CheckpointReason, TrainConfig, TrainingRun};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub archs: Vec<Vec<usize>>,
    /// `config.seed` is the base seed.
    pub config: TrainConfig,
    pub trials: usize,
    pub mask_mode: BiasMode,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    /// Presentation label; 1 is the median run.
    pub trial: usize,
    pub run_index: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub max_alpha_para: f64,
    pub alpha_at_best: Vec<f64>,
    pub alpha_prime_at_best: Vec<f64>,
    pub n_iv: usize,
    pub type_counts: TypeCounts,
    pub total_correct: usize,
}

/// Everything one trial produced, kept in memory for callers that want more than the summary.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub summary: TrialSummary,
    pub run: TrainingRun,
    pub taxonomy: ResultTaxonomy,
    pub dir: PathBuf,
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| PnnError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| PnnError::io(path, e))
}

/// Trains one run and writes its artifacts into `dir`.
pub fn run_trial(
    archs: &[Vec<usize>],
    cfg: &TrainConfig,
    data: &Dataset,
    mask_mode: BiasMode,
    run_index: usize,
    dir: &Path,
) -> Result<TrialOutcome> {
    mkdir(dir)?;
    let mut trail_csv = String::from("epoch,reason,file\n");
    let mut sink = |ev: CheckpointEvent| -> Result<()> {
        let file = format!("checkpoint_epoch_{:03}.pnn", ev.epoch);
        save_checkpoint(ev.model, dir.join(&file))?;
        let reason = match ev.reason {
            CheckpointReason::Connection => "connection",
            CheckpointReason::Improved => "improved",
        };
        writeln!(trail_csv, "{},{reason},{file}", ev.epoch).unwrap();
        Ok(())
    };
    let rng = Rng::new(cfg.seed);
    let run = run(archs, cfg, &rng, data, &mut sink)?;
    write_text(&dir.join("trail.csv"), &trail_csv)?;
    write_metrics_csv(dir.join("metrics.csv"), &run.metrics)?;
    save_checkpoint(&run.best_model, dir.join("best.pnn"))?;
    save_checkpoint(&run.final_model, dir.join("final.pnn"))?;
    let taxonomy = categorize(&run.best_model, &data.eval, mask_mode)?;
    write_taxonomy_json(dir.join("taxonomy.json"), &taxonomy)?;
    write_weights_csv(dir.join("weights.csv"), &weight_snapshot(&run.best_model))?;
    let config = serde_json::json!({ "arch": format_arch(archs), "config": cfg, "mask_mode": mask_mode });
    write_text(&dir.join("config.json"), &format!("{config:#}\n"))?;

    let best = run.best_metrics();
    let summary = TrialSummary {
        trial: 0,
        run_index,
        seed: cfg.seed,
        best_epoch: run.best_epoch,
        max_alpha_para: best.alpha_para,
        alpha_at_best: best.alpha.clone(),
        alpha_prime_at_best: best.alpha_prime.clone(),
        n_iv: taxonomy.type_counts.iv,
        type_counts: taxonomy.type_counts,
        total_correct: taxonomy.total_correct,
    };
    info!(
        "run {run_index} (seed {}): max alpha_para {:.4} at epoch {}, n_IV {}",
        cfg.seed, summary.max_alpha_para, summary.best_epoch, summary.n_iv
    );
    Ok(TrialOutcome {
        summary,
        run,
        taxonomy,
        dir: dir.to_path_buf(),
    })
}

/// Assigns presentation labels in place: the median run by `max_alpha_para` becomes trial 1,
/// the rest follow in run order. Only `trial` fields change.
pub fn label_trials(summaries: &mut [TrialSummary]) {
    if summaries.is_empty() {
        return;
    }
    let mut order: Vec<usize> = (0..summaries.len()).collect();
    order.sort_by(|&a, &b| {
        summaries[a]
            .max_alpha_para
            .total_cmp(&summaries[b].max_alpha_para)
            .then(summaries[a].run_index.cmp(&summaries[b].run_index))
    });
    let median = order[(order.len() - 1) / 2];
    let mut next = 2;
    for (i, s) in summaries.iter_mut().enumerate() {
        if i == median {
            s.trial = 1;
        } else {
            s.trial = next;
            next += 1;
        }
    }
}

/// Runs every trial (concurrently), labels them and writes the summary files. Summaries are
/// returned in run order.
pub fn run_experiment(spec: &ExperimentSpec, data: &Dataset) -> Result<Vec<TrialOutcome>> {
    if spec.trials == 0 {
        return Err(PnnError::InvalidArgument("trials must be >= 1".into()));
    }
    spec.config.validate()?;
    crate::arch::validate_archs(&spec.archs)?;
    mkdir(&spec.out_dir)?;
    info!("experiment '{}': {} x {} trial(s)", spec.name, format_arch(&spec.archs), spec.trials);
    let mut outcomes: Vec<TrialOutcome> = (0..spec.trials)
        .into_par_iter()
        .map(|idx| {
            let cfg = TrainConfig {
                seed: spec.config.seed.wrapping_add(idx as u64),
                ..spec.config.clone()
            };
            run_trial(&spec.archs, &cfg, data, spec.mask_mode, idx, &spec.out_dir.join(format!("run_{idx}")))
        })
        .collect::<Result<_>>()?;
    let mut summaries: Vec<TrialSummary> = outcomes.iter().map(|o| o.summary.clone()).collect();
    label_trials(&mut summaries);
    for (o, s) in outcomes.iter_mut().zip(summaries) {
        o.summary = s;
    }
    let summaries: Vec<&TrialSummary> = outcomes.iter().map(|o| &o.summary).collect();
    write_summary(&spec.out_dir, &summaries)?;
    Ok(outcomes)
}

fn write_summary(dir: &Path, summaries: &[&TrialSummary]) -> Result<()> {
    let mut csv = String::from("trial,run_index,seed,best_epoch,max_alpha_para,n_I,n_II,n_III,n_IV,total_correct\n");
    let mut sorted = summaries.to_vec();
    sorted.sort_by_key(|s| s.trial);
    for s in &sorted {
        let c = &s.type_counts;
        writeln!(
            csv,
            "{},{},{},{},{:.6},{},{},{},{},{}",
            s.trial, s.run_index, s.seed, s.best_epoch, s.max_alpha_para, c.i, c.ii, c.iii, c.iv, s.total_correct
        )
        .unwrap();
    }
    write_text(&dir.join("summary.csv"), &csv)?;
    let json = serde_json::to_string_pretty(&sorted).map_err(|e| PnnError::ReportFormat(e.to_string()))?;
    write_text(&dir.join("summary.json"), &(json + "\n"))
}

/// One table column group: an activation and its labelled trial summaries.
pub type ComparisonColumn = (ActivationKind, Vec<TrialSummary>);

/// Renders trials side by side per activation: `n_IV` and `max α_para` (%) for each labelled
/// trial, then the column averages.
pub fn format_comparison_table(columns: &[ComparisonColumn]) -> String {
    let rows = columns.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    let mut out = String::new();
    let mut header = String::from("| Trial |");
    let mut rule = String::from("|---|");
    for (act, _) in columns {
        write!(header, " {act} n_IV | {act} alpha (%) |").unwrap();
        rule.push_str("---|---|");
    }
    writeln!(out, "{header}\n{rule}").unwrap();
    for t in 1..=rows {
        write!(out, "| {t} |").unwrap();
        for (_, s) in columns {
            match s.iter().find(|s| s.trial == t) {
                Some(s) => write!(out, " {} | {:.2} |", s.n_iv, 100.0 * s.max_alpha_para).unwrap(),
                None => out.push_str(" | |"),
            }
        }
        out.push('\n');
    }
    out.push_str("| Average |");
    for (_, s) in columns {
        let n = s.len().max(1) as f64;
        let n_iv = s.iter().map(|s| s.n_iv as f64).sum::<f64>() / n;
        let alpha = s.iter().map(|s| s.max_alpha_para).sum::<f64>() / n;
        write!(out, " {n_iv:.1} | {:.2} |", 100.0 * alpha).unwrap();
    }
    out.push('\n');
    out
}

/// Runs the same experiment once per activation, each under `out_dir/<activation>/`, and
/// writes `comparison.md` with the side-by-side table.
pub fn run_comparison(
    spec: &ExperimentSpec,
    activations: &[ActivationKind],
    data: &Dataset,
) -> Result<Vec<ComparisonColumn>> {
    let columns: Vec<ComparisonColumn> = activations
        .par_iter()
        .map(|&act| {
            let sub = ExperimentSpec {
                name: format!("{}-{act}", spec.name),
                config: TrainConfig {
                    activation: act,
                    ..spec.config.clone()
                },
                out_dir: spec.out_dir.join(act.name()),
                ..spec.clone()
            };
            let outcomes = run_experiment(&sub, data)?;
            Ok((act, outcomes.into_iter().map(|o| o.summary).collect()))
        })
        .collect::<Result<_>>()?;
    mkdir(&spec.out_dir)?;
    let table = format_comparison_table(&columns);
    let path = spec.out_dir.join("comparison.md");
    let mut f = fs::File::create(&path).map_err(|e| PnnError::io(&path, e))?;
    f.write_all(table.as_bytes()).map_err(|e| PnnError::io(&path, e))?;
    Ok(columns)
}
