//! Late fusion of per-stream classifier scores and Top-1 evaluation.
//!
//! Streams are fused as a weighted arithmetic mean of raw score rows
//! (argmax-equivalent to a weighted sum); an optional per-row softmax can
//! be applied first for probability-space fusion. Prediction is the
//! per-row argmax with lowest-index tie-breaking.

use serde::Serialize;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::ClassId;

/// Per-sample class-score rows, row-major `S x num_classes`, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub sample_ids: Vec<String>,
    num_classes: usize,
    scores: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(
        sample_ids: Vec<String>,
        num_classes: usize,
        scores: Vec<f64>,
    ) -> Result<Self, FusionError> {
        if num_classes == 0 {
            return Err(FusionError::NoClasses);
        }
        if scores.len() != sample_ids.len() * num_classes {
            return Err(FusionError::LengthMismatch {
                what: "score rows",
                expected: sample_ids.len() * num_classes,
                actual: scores.len(),
            });
        }
        if let Some(pos) = scores.iter().position(|v| !v.is_finite()) {
            return Err(FusionError::NonFiniteScore {
                sample_id: sample_ids[pos / num_classes].clone(),
                class: pos % num_classes,
            });
        }
        Ok(Self { sample_ids, num_classes, scores })
    }

    pub fn num_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.num_classes..(i + 1) * self.num_classes]
    }
}

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("score matrix must have at least one class column")]
    NoClasses,
    #[error("no streams to fuse")]
    NoStreams,
    #[error("{what}: expected {expected}, got {actual}")]
    LengthMismatch { what: &'static str, expected: usize, actual: usize },
    #[error("non-finite score for sample `{sample_id}`, class {class}")]
    NonFiniteScore { sample_id: String, class: usize },
    #[error("stream {stream} diverges at row {row}: `{left}` vs `{right}`")]
    SampleIdMismatch { stream: usize, row: usize, left: String, right: String },
    #[error("stream {stream} has {actual} classes, expected {expected}")]
    ClassCountMismatch { stream: usize, expected: usize, actual: usize },
    #[error("stream weights must be non-negative, got {0}")]
    NegativeWeight(f64),
    #[error("at least one stream weight must be positive")]
    AllZeroWeights,
    #[error("label for sample `{0}` is missing")]
    MissingLabel(String),
    #[error("label {label} out of range for {num_classes} classes (sample `{sample_id}`)")]
    LabelOutOfRange { sample_id: String, label: usize, num_classes: usize },
    #[error("cannot evaluate an empty score matrix")]
    Empty,
    #[error("score file line {line}: {msg}")]
    ScoreFile { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FuseOptions {
    /// Apply a per-row softmax to each stream before weighting.
    pub softmax: bool,
}

fn softmax_row(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Weighted arithmetic mean of the streams' rows:
/// `fused = sum_i w_i * row_i / sum_i w_i`. All streams must carry the
/// same sample ids in the same order and the same class count.
pub fn fuse_scores(streams: &[(&ScoreMatrix, f64)]) -> Result<ScoreMatrix, FusionError> {
    fuse_scores_with(streams, FuseOptions::default())
}

pub fn fuse_scores_with(
    streams: &[(&ScoreMatrix, f64)],
    opts: FuseOptions,
) -> Result<ScoreMatrix, FusionError> {
    let Some(((first, _), rest)) = streams.split_first() else {
        return Err(FusionError::NoStreams);
    };
    for (k, (m, _)) in rest.iter().enumerate() {
        if m.num_classes != first.num_classes {
            return Err(FusionError::ClassCountMismatch {
                stream: k + 1,
                expected: first.num_classes,
                actual: m.num_classes,
            });
        }
        if m.sample_ids.len() != first.sample_ids.len() {
            return Err(FusionError::LengthMismatch {
                what: "stream sample count",
                expected: first.sample_ids.len(),
                actual: m.sample_ids.len(),
            });
        }
        if let Some(row) = (0..m.sample_ids.len())
            .find(|&i| m.sample_ids[i] != first.sample_ids[i])
        {
            return Err(FusionError::SampleIdMismatch {
                stream: k + 1,
                row,
                left: first.sample_ids[row].clone(),
                right: m.sample_ids[row].clone(),
            });
        }
    }
    let mut weight_sum = 0.0;
    for &(_, w) in streams {
        if w < 0.0 || !w.is_finite() {
            return Err(FusionError::NegativeWeight(w));
        }
        weight_sum += w;
    }
    if weight_sum <= 0.0 {
        return Err(FusionError::AllZeroWeights);
    }

    let cols = first.num_classes;
    let mut fused = vec![0.0f64; first.num_samples() * cols];
    for &(m, w) in streams {
        if w == 0.0 {
            continue;
        }
        for i in 0..m.num_samples() {
            let mut row = m.row(i).to_vec();
            if opts.softmax {
                softmax_row(&mut row);
            }
            for (c, v) in row.iter().enumerate() {
                fused[i * cols + c] += w * v;
            }
        }
    }
    for v in fused.iter_mut() {
        *v /= weight_sum;
    }
    ScoreMatrix::new(first.sample_ids.clone(), cols, fused)
}

/// Per-row argmax; ties break toward the lowest class index.
pub fn predict(scores: &ScoreMatrix) -> Vec<ClassId> {
    (0..scores.num_samples())
        .map(|i| {
            let row = scores.row(i);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            ClassId(best)
        })
        .collect()
}

fn check_labels(scores: &ScoreMatrix, labels: &[ClassId]) -> Result<(), FusionError> {
    if labels.len() != scores.num_samples() {
        return Err(FusionError::LengthMismatch {
            what: "labels",
            expected: scores.num_samples(),
            actual: labels.len(),
        });
    }
    for (i, label) in labels.iter().enumerate() {
        if label.0 >= scores.num_classes() {
            return Err(FusionError::LabelOutOfRange {
                sample_id: scores.sample_ids[i].clone(),
                label: label.0,
                num_classes: scores.num_classes(),
            });
        }
    }
    Ok(())
}

/// Fraction of samples whose argmax prediction equals the label.
pub fn top1_accuracy(scores: &ScoreMatrix, labels: &[ClassId]) -> Result<f64, FusionError> {
    if scores.num_samples() == 0 {
        return Err(FusionError::Empty);
    }
    check_labels(scores, labels)?;
    let correct = predict(scores)
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(correct as f64 / scores.num_samples() as f64)
}

/// Square count matrix indexed `(true class, predicted class)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub num_classes: usize,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn at(&self, true_class: ClassId, predicted: ClassId) -> usize {
        self.counts[true_class.0 * self.num_classes + predicted.0]
    }

    pub fn row(&self, true_class: ClassId) -> &[usize] {
        &self.counts[true_class.0 * self.num_classes..(true_class.0 + 1) * self.num_classes]
    }

    pub fn trace(&self) -> usize {
        (0..self.num_classes)
            .map(|i| self.counts[i * self.num_classes + i])
            .sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

pub fn confusion_matrix(
    scores: &ScoreMatrix,
    labels: &[ClassId],
) -> Result<ConfusionMatrix, FusionError> {
    check_labels(scores, labels)?;
    let n = scores.num_classes();
    let mut counts = vec![0usize; n * n];
    for (pred, label) in predict(scores).iter().zip(labels) {
        counts[label.0 * n + pred.0] += 1;
    }
    Ok(ConfusionMatrix { num_classes: n, counts })
}

/// Evaluation summary: Top-1 accuracy plus the confusion matrix.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub num_samples: usize,
    pub num_classes: usize,
    pub top1_accuracy: f64,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn new(scores: &ScoreMatrix, labels: &[ClassId]) -> Result<Self, FusionError> {
        let confusion = confusion_matrix(scores, labels)?;
        Ok(Self {
            num_samples: scores.num_samples(),
            num_classes: scores.num_classes(),
            top1_accuracy: top1_accuracy(scores, labels)?,
            confusion,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text rendering: the accuracy line plus one confusion row per
    /// class with any samples.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "samples {}", self.num_samples);
        let _ = writeln!(out, "top1_accuracy {:.6}", self.top1_accuracy);
        for t in 0..self.num_classes {
            let row = self.confusion.row(ClassId(t));
            if row.iter().all(|&c| c == 0) {
                continue;
            }
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(p, &c)| format!("{p}:{c}"))
                .collect();
            let _ = writeln!(out, "confusion {t} {}", cells.join(" "));
        }
        out
    }
}

/// Parses a score file: header `sample_id,c0,...,cK`, one comma-separated
/// row of floats per sample.
pub fn parse_score_file(text: &str) -> Result<ScoreMatrix, FusionError> {
    let err = |line: usize, msg: String| FusionError::ScoreFile { line: line + 1, msg };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((hline, header)) = lines.next() else {
        return Err(err(0, "missing header row".into()));
    };
    let header_fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if header_fields.first() != Some(&"sample_id") || header_fields.len() < 2 {
        return Err(err(
            hline,
            "header must be `sample_id,c0,...` naming at least one class".into(),
        ));
    }
    let num_classes = header_fields.len() - 1;
    let mut sample_ids = Vec::new();
    let mut scores = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != num_classes + 1 {
            return Err(err(
                i,
                format!("expected {} fields, got {}", num_classes + 1, fields.len()),
            ));
        }
        sample_ids.push(fields[0].to_string());
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| err(i, format!("invalid score `{f}`")))?;
            scores.push(v);
        }
    }
    ScoreMatrix::new(sample_ids, num_classes, scores)
}

/// Formats a score matrix in the file layout accepted by
/// [`parse_score_file`].
pub fn format_score_file(scores: &ScoreMatrix) -> String {
    let mut out = String::from("sample_id");
    for c in 0..scores.num_classes() {
        let _ = write!(out, ",c{c}");
    }
    out.push('\n');
    for (i, id) in scores.sample_ids.iter().enumerate() {
        out.push_str(id);
        for v in scores.row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Parses a label file of `sample_id,label` rows; a `sample_id,label`
/// header row is optional.
pub fn parse_label_file(text: &str) -> Result<Vec<(String, ClassId)>, FusionError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if i == 0 && line.starts_with("sample_id") {
            continue;
        }
        let err = |msg: String| FusionError::ScoreFile { line: i + 1, msg };
        let Some((id, label)) = line.split_once(',') else {
            return Err(err("expected `sample_id,label`".into()));
        };
        let label: usize = label
            .trim()
            .parse()
            .map_err(|_| err(format!("invalid label `{}`", label.trim())))?;
        out.push((id.trim().to_string(), ClassId(label)));
    }
    Ok(out)
}
