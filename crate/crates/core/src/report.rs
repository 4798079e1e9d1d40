//! Result artifacts and their readers.
//!
//! * Metrics CSV: `epoch,alpha_para,alpha_1,alpha_1_prime,alpha_2,alpha_2_prime[,…]` with six
//!   decimals, followed by one `*_bits` column per fraction holding its IEEE-754 bit pattern
//!   in hex, which the reader uses for a lossless round trip.
//! * Taxonomy JSON: mask mode, counts and the full `(r1, r2, rp, y)` record list.
//! * Weights CSV: `neuron_index,subnet,output_digit,weight`, shortest round-trip decimals.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{PnnError, Result};
use crate::metrics::{EpochMetrics, ResultTaxonomy, WeightEntry, WeightSnapshot};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| PnnError::io(path, e))
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| PnnError::io(path, e))?;
    Ok(s)
}

fn csv_err(path: &Path, e: csv::Error) -> PnnError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => PnnError::io(path, io),
        other => PnnError::ReportFormat(format!("{}: {other:?}", path.display())),
    }
}

fn bad(path: &Path, line: usize, msg: impl std::fmt::Display) -> PnnError {
    PnnError::ReportFormat(format!("{}:{line}: {msg}", path.display()))
}

/// Column names for `k` sub-networks, without the bits columns.
pub fn metrics_columns(k: usize) -> Vec<String> {
    let mut cols = vec!["epoch".to_string(), "alpha_para".to_string()];
    for i in 1..=k {
        cols.push(format!("alpha_{i}"));
        cols.push(format!("alpha_{i}_prime"));
    }
    cols
}

fn fractions(m: &EpochMetrics) -> Vec<f64> {
    let mut v = vec![m.alpha_para];
    for (a, ap) in m.alpha.iter().zip(&m.alpha_prime) {
        v.push(*a);
        v.push(*ap);
    }
    v
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[EpochMetrics]) -> Result<()> {
    let path = path.as_ref();
    let k = rows.first().map_or(2, |m| m.alpha.len());
    let mut w = csv::Writer::from_writer(create(path)?);
    let cols = metrics_columns(k);
    let header: Vec<String> = cols.iter().cloned().chain(cols[1..].iter().map(|c| format!("{c}_bits"))).collect();
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for m in rows {
        if m.alpha.len() != k || m.alpha_prime.len() != k {
            return Err(PnnError::InvalidArgument(format!("epoch {} has a different sub-network count", m.epoch)));
        }
        let f = fractions(m);
        let record: Vec<String> = std::iter::once(m.epoch.to_string())
            .chain(f.iter().map(|x| format!("{x:.6}")))
            .chain(f.iter().map(|x| format!("{:#018x}", x.to_bits())))
            .collect();
        w.write_record(&record).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| PnnError::io(path, e))
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<EpochMetrics>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
    let n = header.len();
    // epoch + (1 + 2k) fractions + (1 + 2k) bits
    if n < 8 || (n - 1) % 2 != 0 || ((n - 1) / 2 - 1) % 2 != 0 {
        return Err(bad(path, 1, format!("unexpected column count {n}")));
    }
    let width = (n - 1) / 2;
    let k = (width - 1) / 2;
    let cols = metrics_columns(k);
    let expected: Vec<String> = cols.iter().cloned().chain(cols[1..].iter().map(|c| format!("{c}_bits"))).collect();
    if header != expected {
        return Err(bad(path, 1, format!("header {header:?} does not match {expected:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let epoch: usize = rec[0].parse().map_err(|_| bad(path, line, "bad epoch"))?;
        let mut vals = Vec::with_capacity(width);
        for c in 0..width {
            let shown: f64 = rec[1 + c].parse().map_err(|_| bad(path, line, format!("bad {}", cols[1 + c])))?;
            let hex = rec[1 + width + c].trim_start_matches("0x");
            let x = u64::from_str_radix(hex, 16)
                .map(f64::from_bits)
                .map_err(|_| bad(path, line, format!("bad bits for {}", cols[1 + c])))?;
            if (x - shown).abs() > 5e-7 {
                return Err(bad(path, line, format!("{} bits {x} disagree with {shown}", cols[1 + c])));
            }
            vals.push(x);
        }
        rows.push(EpochMetrics {
            epoch,
            alpha_para: vals[0],
            alpha: (0..k).map(|i| vals[1 + 2 * i]).collect(),
            alpha_prime: (0..k).map(|i| vals[2 + 2 * i]).collect(),
        });
    }
    Ok(rows)
}

pub fn write_taxonomy_json(path: impl AsRef<Path>, t: &ResultTaxonomy) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, t).map_err(|e| PnnError::ReportFormat(e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| PnnError::io(path, e))
}

/// Reads a taxonomy report and checks its partition invariants.
pub fn read_taxonomy_json(path: impl AsRef<Path>) -> Result<ResultTaxonomy> {
    let path = path.as_ref();
    let t: ResultTaxonomy = serde_json::from_str(&read_to_string(path)?)
        .map_err(|e| PnnError::ReportFormat(format!("{}: {e}", path.display())))?;
    let c = &t.type_counts;
    if c.total() != t.total_correct || t.records.len() != t.total_correct {
        return Err(PnnError::ReportFormat(format!(
            "{}: type counts {} + {} + {} + {} and {} records disagree with total_correct {}",
            path.display(),
            c.i,
            c.ii,
            c.iii,
            c.iv,
            t.records.len(),
            t.total_correct
        )));
    }
    if let Some(r) = t.records.iter().find(|r| r.rp != r.y) {
        return Err(PnnError::ReportFormat(format!(
            "{}: record for example {} has rp {} != y {}",
            path.display(),
            r.index,
            r.rp,
            r.y
        )));
    }
    Ok(t)
}

pub fn write_weights_csv(path: impl AsRef<Path>, ws: &WeightSnapshot) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["neuron_index", "subnet", "output_digit", "weight"])
        .map_err(|e| csv_err(path, e))?;
    for e in ws.entries() {
        w.write_record([
            e.neuron_index.to_string(),
            e.subnet.to_string(),
            e.output_digit.to_string(),
            // `{}` on f64 prints the shortest string that parses back to the same bits
            e.weight.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| PnnError::io(path, e))
}

pub fn read_weights_csv(path: impl AsRef<Path>) -> Result<WeightSnapshot> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
    if header != ["neuron_index", "subnet", "output_digit", "weight"] {
        return Err(bad(path, 1, format!("unexpected header {header:?}")));
    }
    let mut entries = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let int = |c: usize| rec[c].parse::<usize>().map_err(|_| bad(path, line, format!("bad integer '{}'", &rec[c])));
        entries.push(WeightEntry {
            neuron_index: int(0)?,
            subnet: int(1)?,
            output_digit: int(2)?,
            weight: rec[3].parse().map_err(|_| bad(path, line, format!("bad weight '{}'", &rec[3])))?,
        });
    }
    WeightSnapshot::from_entries(&entries).map_err(|e| match e {
        PnnError::ReportFormat(m) => PnnError::ReportFormat(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::data::Example;
    use crate::metrics::{categorize, weight_snapshot};
    use crate::network::{connect, BiasMode, FnnModel};
    use crate::rng::Rng;

    fn rows(n: usize) -> Vec<EpochMetrics> {
        let mut rng = Rng::new(3);
        (0..n)
            .map(|epoch| EpochMetrics {
                epoch,
                alpha_para: rng.below(10001) as f64 / 10000.0,
                alpha: vec![rng.next_f64(), 1.0 / 3.0],
                alpha_prime: vec![0.0, 1.0],
            })
            .collect()
    }

    #[test]
    fn metrics_csv_round_trip_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("metrics.csv");
        let r = rows(7);
        write_metrics_csv(&p, &r).unwrap();
        assert_eq!(read_metrics_csv(&p).unwrap(), r);
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 8);
        assert!(lines[0].starts_with("epoch,alpha_para,alpha_1,alpha_1_prime,alpha_2,alpha_2_prime,alpha_para_bits,"));
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[3], "0.000000");
        assert_eq!(fields[4], "0.333333");
        assert_eq!(fields[5], "1.000000");
        assert_eq!(fields[9], "0x3fd5555555555555");
    }

    #[test]
    fn metrics_csv_rejects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("metrics.csv");
        write_metrics_csv(&p, &rows(2)).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        std::fs::write(&p, text.replacen("alpha_1_prime", "alpha_x", 1)).unwrap();
        assert!(matches!(read_metrics_csv(&p), Err(PnnError::ReportFormat(_))));
        assert!(matches!(read_metrics_csv(dir.path().join("nope.csv")), Err(PnnError::Io { .. })));
    }

    fn model_and_eval() -> (crate::network::PnnModel, Vec<Example>) {
        let mut rng = Rng::new(17);
        let a = FnnModel::init(&[4, 6, 5, 10], ActivationKind::Sigmoid, &mut rng).unwrap();
        let b = FnnModel::init(&[4, 3, 10], ActivationKind::Sigmoid, &mut rng).unwrap();
        let eval = (0..500)
            .map(|_| Example::new((0..4).map(|_| rng.next_f64()).collect(), rng.below(10) as u8).unwrap())
            .collect();
        (connect(&[a, b]).unwrap(), eval)
    }

    #[test]
    fn taxonomy_json_round_trip() {
        let (m, eval) = model_and_eval();
        let t = categorize(&m, &eval, BiasMode::Shared).unwrap();
        assert!(t.total_correct > 0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("taxonomy.json");
        write_taxonomy_json(&p, &t).unwrap();
        assert_eq!(read_taxonomy_json(&p).unwrap(), t);
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(json["mask_mode"], "shared");
        let counts = &json["type_counts"];
        let sum: u64 = ["I", "II", "III", "IV"].iter().map(|k| counts[k].as_u64().unwrap()).sum();
        assert_eq!(sum, json["total_correct"].as_u64().unwrap());
        assert!(json["records"][0]["type"].is_string());

        let mut broken = t.clone();
        broken.type_counts.iv += 1;
        write_taxonomy_json(&p, &broken).unwrap();
        assert!(matches!(read_taxonomy_json(&p), Err(PnnError::ReportFormat(_))));
    }

    #[test]
    fn weights_csv_round_trip_is_bit_exact() {
        let (m, _) = model_and_eval();
        let mut ws = weight_snapshot(&m);
        ws.weights.set(0, 0, -0.0);
        ws.weights.set(1, 0, 1e-310);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("weights.csv");
        write_weights_csv(&p, &ws).unwrap();
        let back = read_weights_csv(&p).unwrap();
        assert_eq!(back.subnet_widths, vec![5, 3]);
        let bits = |w: &WeightSnapshot| w.weights.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&ws));
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "neuron_index,subnet,output_digit,weight");
        assert_eq!(text.lines().count(), 1 + 8 * 10);
        assert!(text.lines().nth(1).unwrap().starts_with("1,1,0,"));
        assert!(text.lines().last().unwrap().starts_with("8,2,9,"));
    }
}
