use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::metrics::{ConfusionMatrix, Metrics};
use crate::corpus::LabeledCorpus;
use crate::error::{Error, Result};
use crate::network::{decide, ModelParams};
use crate::numerics::{argmax, Mat, Scalar};

fn rows<'a>(corpus: &'a LabeledCorpus, indices: &[usize]) -> Vec<&'a [u32]> {
    indices.iter().map(|&i| corpus.samples[i].ids.as_slice()).collect()
}

fn probabilities<T: Scalar>(model: &ModelParams<T>, corpus: &LabeledCorpus, indices: &[usize]) -> Result<Mat<T>> {
    if indices.is_empty() {
        return Err(Error::usage("cannot evaluate an empty split"));
    }
    if model.config.num_classes != corpus.num_classes() {
        return Err(Error::usage(format!(
            "model has {} classes but the corpus task has {}",
            model.config.num_classes,
            corpus.num_classes()
        )));
    }
    model.predict_proba(&rows(corpus, indices))
}

/// Binary decisions at `threshold` on the stego probability.
pub fn predict_binary<T: Scalar>(probs: &Mat<T>, threshold: f64) -> Vec<usize> {
    (0..probs.rows())
        .map(|r| decide(probs.get(r, 1).to_f64_lossy(), threshold))
        .collect()
}

/// Argmax decisions; ties go to the lowest class id.
pub fn predict_argmax<T: Scalar>(probs: &Mat<T>) -> Vec<usize> {
    (0..probs.rows()).map(|r| argmax(probs.row(r))).collect()
}

/// Cover-vs-stego metrics with the stego class as the positive class.
pub fn evaluate_binary<T: Scalar>(
    model: &ModelParams<T>,
    corpus: &LabeledCorpus,
    indices: &[usize],
    threshold: f64,
) -> Result<Metrics> {
    if model.config.num_classes != 2 {
        return Err(Error::usage(format!(
            "binary evaluation needs a 2-class model, got {} classes",
            model.config.num_classes
        )));
    }
    let probs = probabilities(model, corpus, indices)?;
    let truth: Vec<usize> = indices.iter().map(|&i| corpus.samples[i].label).collect();
    let cm = ConfusionMatrix::from_pairs(2, &truth, &predict_binary(&probs, threshold));
    Ok(Metrics::from_confusion(cm, Some(1)))
}

/// Argmax metrics with macro-averaged P/R/F1.
pub fn evaluate_multiclass<T: Scalar>(
    model: &ModelParams<T>,
    corpus: &LabeledCorpus,
    indices: &[usize],
) -> Result<Metrics> {
    let probs = probabilities(model, corpus, indices)?;
    let truth: Vec<usize> = indices.iter().map(|&i| corpus.samples[i].label).collect();
    let cm = ConfusionMatrix::from_pairs(model.config.num_classes, &truth, &predict_argmax(&probs));
    Ok(Metrics::from_confusion(cm, None))
}

/// Binary models use the threshold rule, anything wider uses argmax.
pub fn evaluate<T: Scalar>(model: &ModelParams<T>, corpus: &LabeledCorpus, indices: &[usize]) -> Result<Metrics> {
    if model.config.num_classes == 2 {
        evaluate_binary(model, corpus, indices, model.config.threshold)
    } else {
        evaluate_multiclass(model, corpus, indices)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub bpw: u8,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Detection performance across embedding rates.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Adjacent pairs where accuracy drops as bpw rises.
    pub inversions: usize,
}

impl SweepReport {
    /// `bpw<TAB>acc<TAB>p<TAB>r` lines under a header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("bpw\tacc\tp\tr\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.6}\n",
                r.bpw, r.accuracy, r.precision, r.recall
            ));
        }
        out
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>4} {:>8} {:>8} {:>8}", "bpw", "Acc", "P", "R")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>4} {:>8.4} {:>8.4} {:>8.4}",
                r.bpw, r.accuracy, r.precision, r.recall
            )?;
        }
        write!(f, "inversions: {}", self.inversions)
    }
}

pub fn count_inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] < w[0]).count()
}

/// Tabulates per-bpw metrics in the order of `bpw_list`.
pub fn sweep_bpw(metrics: &BTreeMap<u8, Metrics>, bpw_list: &[u8]) -> Result<SweepReport> {
    let rows = bpw_list
        .iter()
        .map(|&bpw| {
            let m = metrics
                .get(&bpw)
                .ok_or_else(|| Error::usage(format!("no model evaluated for bpw {bpw}")))?;
            Ok(SweepRow {
                bpw,
                accuracy: m.accuracy,
                precision: m.precision(),
                recall: m.recall(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
    Ok(SweepReport {
        inversions: count_inversions(&acc),
        rows,
    })
}

/// Formats a value with 9 significant digits.
pub fn format_feature(v: f64) -> String {
    format!("{v:.8e}")
}

/// Writes one record per sample: label, bpw, then the fused features.
pub fn write_features<T: Scalar, W: Write>(
    model: &ModelParams<T>,
    corpus: &LabeledCorpus,
    indices: &[usize],
    out: &mut W,
) -> Result<usize> {
    let width = model.config.fused_dim;
    let io_err = |e| Error::io("<feature output>", e);
    let mut header = String::from("label\tbpw");
    for j in 1..=width {
        header.push_str(&format!("\tf{j}"));
    }
    writeln!(out, "{header}").map_err(io_err)?;
    if indices.is_empty() {
        return Ok(0);
    }
    let features = model.fused_features(&rows(corpus, indices))?;
    for (r, &i) in indices.iter().enumerate() {
        let s = &corpus.samples[i];
        let mut line = format!("{}\t{}", s.label, s.bpw);
        for &v in features.row(r) {
            line.push('\t');
            line.push_str(&format_feature(v.to_f64_lossy()));
        }
        writeln!(out, "{line}").map_err(io_err)?;
    }
    Ok(indices.len())
}

/// [`write_features`] into a file.
pub fn export_features<T: Scalar>(
    model: &ModelParams<T>,
    corpus: &LabeledCorpus,
    indices: &[usize],
    path: &Path,
) -> Result<usize> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let n = write_features(model, corpus, indices, &mut w).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics_with_acc(acc: f64) -> Metrics {
        let mut m = Metrics::from_confusion(ConfusionMatrix::from_pairs(2, &[0, 1], &[0, 1]), Some(1));
        m.accuracy = acc;
        m
    }

    #[test]
    fn inversions() {
        assert_eq!(count_inversions(&[0.8; 5]), 0);
        assert_eq!(count_inversions(&[0.7, 0.8, 0.85, 0.9, 0.99]), 0);
        assert_eq!(count_inversions(&[0.7, 0.9, 0.85, 0.95, 0.9]), 2);
    }

    #[test]
    fn sweep_rows_follow_request_order() {
        let map: BTreeMap<u8, Metrics> = (1..=5).map(|b| (b, metrics_with_acc(0.7 + 0.05 * b as f64))).collect();
        let report = sweep_bpw(&map, &[1, 2, 3, 4, 5]).unwrap();
        assert_eq!(report.inversions, 0);
        assert_eq!(report.rows[4].bpw, 5);
        let tsv = report.to_tsv();
        assert_eq!(tsv.lines().count(), 6);
        assert!(
            tsv.starts_with("bpw\tacc\tp\tr\n1\t0.750000\t1.000000\t1.000000\n"),
            "{tsv}"
        );
        assert!(sweep_bpw(&map, &[1, 6]).is_err());
    }

    #[test]
    fn nine_significant_digits_round_trip_f32() {
        for v in [0.1f32, -3.3333333, 1.0e-7, 12345.678, 0.0] {
            let text = format_feature(v as f64);
            assert_eq!(text.parse::<f32>().unwrap(), v, "{text}");
        }
    }
}
