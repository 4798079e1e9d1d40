//! Accuracy curves, the Type I–IV taxonomy of correct results, and output-layer weight
//! snapshots.
//!
//! All accuracies are fractions of the evaluation set. Classification is the argmax of the
//! output activation (lowest index on ties). Evaluation fans out over examples with rayon;
//! only integer counts are aggregated, so results do not depend on thread scheduling.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::error::{PnnError, Result};
use crate::linalg::Matrix;
use crate::network::{classify, BiasMode, PnnModel};

/// Accuracies recorded after one training epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub alpha_para: f64,
    /// Per sub-network, own frozen bias `b_i`.
    pub alpha: Vec<f64>,
    /// Per sub-network, shared bias `b`.
    pub alpha_prime: Vec<f64>,
}

fn fraction(correct: usize, total: usize) -> f64 {
    correct as f64 / total as f64
}

fn nonempty(eval: &[Example]) -> Result<()> {
    if eval.is_empty() {
        return Err(PnnError::InvalidArgument("evaluation set is empty".into()));
    }
    Ok(())
}

/// Predictions of the whole PNN and of every masked sub-network for one example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predictions {
    pub para: usize,
    pub own: Vec<usize>,
    pub shared: Vec<usize>,
}

pub fn predict_all(model: &PnnModel, input: &[f64]) -> Result<Predictions> {
    let out = model.masked_outputs(input)?;
    let cls = |z: &[f64]| classify(&model.head_activation(z));
    Ok(Predictions {
        para: cls(&out.para),
        own: out.own.iter().map(|z| cls(z)).collect(),
        shared: out.shared.iter().map(|z| cls(z)).collect(),
    })
}

/// All accuracy curves at once, one hidden pass per sub-network and example.
pub fn epoch_metrics(model: &PnnModel, eval: &[Example], epoch: usize) -> Result<EpochMetrics> {
    nonempty(eval)?;
    let k = model.subnet_count();
    let zero = || (0usize, vec![0usize; k], vec![0usize; k]);
    let (para, own, shared) = eval
        .par_iter()
        .map(|ex| -> Result<_> {
            let p = predict_all(model, &ex.pixels)?;
            let y = usize::from(ex.label);
            Ok((
                usize::from(p.para == y),
                p.own.iter().map(|&r| usize::from(r == y)).collect::<Vec<_>>(),
                p.shared.iter().map(|&r| usize::from(r == y)).collect::<Vec<_>>(),
            ))
        })
        .try_reduce(zero, |mut acc, x| {
            acc.0 += x.0;
            for i in 0..k {
                acc.1[i] += x.1[i];
                acc.2[i] += x.2[i];
            }
            Ok(acc)
        })?;
    let n = eval.len();
    Ok(EpochMetrics {
        epoch,
        alpha_para: fraction(para, n),
        alpha: own.into_iter().map(|c| fraction(c, n)).collect(),
        alpha_prime: shared.into_iter().map(|c| fraction(c, n)).collect(),
    })
}

fn count_correct<F>(eval: &[Example], predict: F) -> Result<usize>
where
    F: Fn(&[f64]) -> Result<usize> + Sync,
{
    eval.par_iter()
        .map(|ex| predict(&ex.pixels).map(|r| usize::from(r == usize::from(ex.label))))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

pub fn accuracy_para(model: &PnnModel, eval: &[Example]) -> Result<f64> {
    nonempty(eval)?;
    let c = count_correct(eval, |x| Ok(classify(&model.forward(x)?.activation)))?;
    Ok(fraction(c, eval.len()))
}

pub fn accuracy_masked(model: &PnnModel, eval: &[Example], subnet: usize, mode: BiasMode) -> Result<f64> {
    nonempty(eval)?;
    if subnet >= model.subnet_count() {
        return Err(PnnError::InvalidArgument(format!(
            "sub-network index {subnet} out of range (PNN has {})",
            model.subnet_count()
        )));
    }
    let c = count_correct(eval, |x| Ok(classify(&model.forward_masked(x, subnet, mode)?.1)))?;
    Ok(fraction(c, eval.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResultType {
    /// Both sub-networks right.
    I,
    /// Only sub-network 1 wrong.
    II,
    /// Only sub-network 2 wrong.
    III,
    /// Both sub-networks wrong, PNN right.
    IV,
}

impl ResultType {
    pub fn of(r1: usize, r2: usize, y: usize) -> ResultType {
        match (r1 == y, r2 == y) {
            (true, true) => ResultType::I,
            (false, true) => ResultType::II,
            (true, false) => ResultType::III,
            (false, false) => ResultType::IV,
        }
    }
}

impl fmt::Display for ResultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeCounts {
    #[serde(rename = "I")]
    pub i: usize,
    #[serde(rename = "II")]
    pub ii: usize,
    #[serde(rename = "III")]
    pub iii: usize,
    #[serde(rename = "IV")]
    pub iv: usize,
}

impl TypeCounts {
    pub fn total(&self) -> usize {
        self.i + self.ii + self.iii + self.iv
    }

    fn bump(&mut self, t: ResultType) {
        match t {
            ResultType::I => self.i += 1,
            ResultType::II => self.ii += 1,
            ResultType::III => self.iii += 1,
            ResultType::IV => self.iv += 1,
        }
    }
}

/// One evaluation example the whole PNN classified correctly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyRecord {
    /// Position in the evaluation set.
    pub index: usize,
    pub r1: usize,
    pub r2: usize,
    pub rp: usize,
    pub y: usize,
    #[serde(rename = "type")]
    pub kind: ResultType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTaxonomy {
    pub mask_mode: BiasMode,
    pub eval_size: usize,
    pub total_correct: usize,
    pub type_counts: TypeCounts,
    pub records: Vec<TaxonomyRecord>,
}

impl ResultTaxonomy {
    /// Records grouped by `(r1, r2)`; every record lands in exactly one group.
    pub fn group_by_pair(&self) -> BTreeMap<(usize, usize), Vec<TaxonomyRecord>> {
        let mut groups: BTreeMap<(usize, usize), Vec<TaxonomyRecord>> = BTreeMap::new();
        for r in &self.records {
            groups.entry((r.r1, r.r2)).or_default().push(*r);
        }
        groups
    }

    pub fn of_type(&self, kind: ResultType) -> impl Iterator<Item = &TaxonomyRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }
}

/// Sorts every PNN-correct evaluation result into Types I–IV. Needs exactly 2 sub-networks.
pub fn categorize(model: &PnnModel, eval: &[Example], mode: BiasMode) -> Result<ResultTaxonomy> {
    nonempty(eval)?;
    if model.subnet_count() != 2 {
        return Err(PnnError::InvalidArgument(format!(
            "the Type I-IV taxonomy is defined for 2 sub-networks, this PNN has {}",
            model.subnet_count()
        )));
    }
    let preds: Vec<Predictions> = eval
        .par_iter()
        .map(|ex| predict_all(model, &ex.pixels))
        .collect::<Result<_>>()?;

    let mut type_counts = TypeCounts::default();
    let mut records = Vec::new();
    for (index, (p, ex)) in preds.iter().zip(eval).enumerate() {
        let y = usize::from(ex.label);
        if p.para != y {
            continue;
        }
        let masked = match mode {
            BiasMode::Own => &p.own,
            BiasMode::Shared => &p.shared,
        };
        let kind = ResultType::of(masked[0], masked[1], y);
        type_counts.bump(kind);
        records.push(TaxonomyRecord {
            index,
            r1: masked[0],
            r2: masked[1],
            rp: p.para,
            y,
            kind,
        });
    }
    Ok(ResultTaxonomy {
        mask_mode: mode,
        eval_size: eval.len(),
        total_correct: records.len(),
        type_counts,
        records,
    })
}

/// Output-layer weights from every last-hidden neuron (columns, sub-network 1 first) to every
/// output neuron (rows).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSnapshot {
    pub subnet_widths: Vec<usize>,
    pub weights: Matrix,
}

/// One weight in a snapshot, with 1-based neuron and sub-network labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightEntry {
    pub neuron_index: usize,
    pub subnet: usize,
    pub output_digit: usize,
    pub weight: f64,
}

impl WeightSnapshot {
    pub fn neuron_count(&self) -> usize {
        self.weights.cols()
    }

    /// 0-based sub-network owning 0-based column `j`.
    pub fn owner(&self, j: usize) -> usize {
        let mut end = 0;
        for (s, w) in self.subnet_widths.iter().enumerate() {
            end += w;
            if j < end {
                return s;
            }
        }
        panic!("neuron column {j} out of range");
    }

    /// Entries ordered by neuron, then output digit.
    pub fn entries(&self) -> Vec<WeightEntry> {
        let mut out = Vec::with_capacity(self.weights.rows() * self.weights.cols());
        for j in 0..self.weights.cols() {
            let subnet = self.owner(j) + 1;
            for d in 0..self.weights.rows() {
                out.push(WeightEntry {
                    neuron_index: j + 1,
                    subnet,
                    output_digit: d,
                    weight: self.weights.get(d, j),
                });
            }
        }
        out
    }

    pub fn from_entries(entries: &[WeightEntry]) -> Result<Self> {
        let neurons = entries.iter().map(|e| e.neuron_index).max().unwrap_or(0);
        let outputs = entries.iter().map(|e| e.output_digit + 1).max().unwrap_or(0);
        if neurons == 0 || outputs == 0 || entries.len() != neurons * outputs {
            return Err(PnnError::ReportFormat(format!(
                "weight snapshot needs {neurons}x{outputs} entries, got {}",
                entries.len()
            )));
        }
        let mut weights = Matrix::zeros(outputs, neurons);
        let mut owners = vec![0usize; neurons];
        for e in entries {
            if e.neuron_index == 0 || e.subnet == 0 {
                return Err(PnnError::ReportFormat("weight snapshot labels are 1-based".into()));
            }
            weights.set(e.output_digit, e.neuron_index - 1, e.weight);
            owners[e.neuron_index - 1] = e.subnet;
        }
        let mut subnet_widths = Vec::new();
        for (j, &s) in owners.iter().enumerate() {
            match s.cmp(&subnet_widths.len()) {
                std::cmp::Ordering::Equal => *subnet_widths.last_mut().unwrap() += 1,
                std::cmp::Ordering::Greater if s == subnet_widths.len() + 1 => subnet_widths.push(1),
                _ => {
                    return Err(PnnError::ReportFormat(format!(
                        "neuron {} has owner {s}; owners must be contiguous and ascending",
                        j + 1
                    )))
                }
            }
        }
        Ok(WeightSnapshot { subnet_widths, weights })
    }

    /// Writes the snapshot back into the model's output blocks.
    pub fn apply_to(&self, model: &mut PnnModel) -> Result<()> {
        let widths: Vec<usize> = model.subnets().iter().map(|s| s.last_hidden_width()).collect();
        if widths != self.subnet_widths || self.weights.rows() != model.output_width() {
            return Err(PnnError::InvalidArgument(format!(
                "snapshot layout {:?}x{} does not match model {:?}x{}",
                self.subnet_widths,
                self.weights.rows(),
                widths,
                model.output_width()
            )));
        }
        let mut offset = 0;
        for s in model.subnets_mut() {
            let w = s.last_hidden_width();
            for d in 0..self.weights.rows() {
                for j in 0..w {
                    s.output_weights.set(d, j, self.weights.get(d, offset + j));
                }
            }
            offset += w;
        }
        Ok(())
    }
}

pub fn weight_snapshot(model: &PnnModel) -> WeightSnapshot {
    let subnet_widths: Vec<usize> = model.subnets().iter().map(|s| s.last_hidden_width()).collect();
    let total: usize = subnet_widths.iter().sum();
    let mut weights = Matrix::zeros(model.output_width(), total);
    let mut offset = 0;
    for s in model.subnets() {
        for d in 0..model.output_width() {
            for j in 0..s.last_hidden_width() {
                weights.set(d, offset + j, s.output_weights.get(d, j));
            }
        }
        offset += s.last_hidden_width();
    }
    WeightSnapshot { subnet_widths, weights }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSummary {
    /// 1-based.
    pub subnet: usize,
    pub mean_abs: f64,
    pub max_abs: f64,
    pub rms: f64,
}

/// Per sub-network magnitude statistics over its snapshot columns.
pub fn weight_balance(ws: &WeightSnapshot) -> Vec<WeightSummary> {
    let mut offset = 0;
    ws.subnet_widths
        .iter()
        .enumerate()
        .map(|(s, &width)| {
            let mut sum_abs = 0.0;
            let mut sum_sq = 0.0;
            let mut max_abs: f64 = 0.0;
            for d in 0..ws.weights.rows() {
                for j in offset..offset + width {
                    let w = ws.weights.get(d, j);
                    sum_abs += w.abs();
                    sum_sq += w * w;
                    max_abs = max_abs.max(w.abs());
                }
            }
            offset += width;
            let n = (width * ws.weights.rows()) as f64;
            WeightSummary {
                subnet: s + 1,
                mean_abs: sum_abs / n,
                max_abs,
                rms: (sum_sq / n).sqrt(),
            }
        })
        .collect()
}
