//! Shared domain types: keypoints, frames, sequences, class labels.
//!
//! Everything here is an immutable value object; construction never
//! validates, [`validate_sequence`] reports problems as data instead.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::topology::TopologySpec;

/// Number of classes in the iMiGUE label set: 32 micro-gesture classes
/// plus one non-MG class.
pub const IMIGUE_CLASS_COUNT: usize = 33;

/// A single 2D keypoint: pixel coordinates plus a detection confidence
/// in `[0, 1]`. Confidence exactly 0 marks the keypoint as missing, and
/// its coordinates are ignored by all geometry.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Keypoint {
    pub x: f32,
    pub y: f32,
    pub confidence: f32,
}

impl Keypoint {
    pub fn new(x: f32, y: f32, confidence: f32) -> Self {
        Self { x, y, confidence }
    }

    /// The canonical missing keypoint, `(0, 0, 0)`, as emitted by OpenPose
    /// for undetected joints.
    pub fn missing() -> Self {
        Self::default()
    }

    pub fn is_missing(&self) -> bool {
        self.confidence == 0.0
    }
}

/// One frame: an ordered list of keypoints, one per topology joint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frame {
    pub keypoints: Vec<Keypoint>,
}

impl Frame {
    pub fn new(keypoints: Vec<Keypoint>) -> Self {
        Self { keypoints }
    }

    /// A frame of `num_joints` missing keypoints.
    pub fn zeros(num_joints: usize) -> Self {
        Self { keypoints: vec![Keypoint::missing(); num_joints] }
    }

    pub fn joint_count(&self) -> usize {
        self.keypoints.len()
    }
}

/// A timed sequence of frames with an optional class label.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub sample_id: String,
    pub frames: Vec<Frame>,
    pub label: Option<ClassId>,
    pub fps: Option<f32>,
}

impl SkeletonSequence {
    pub fn new(sample_id: impl Into<String>, frames: Vec<Frame>) -> Self {
        Self { sample_id: sample_id.into(), frames, label: None, fps: None }
    }

    pub fn with_label(mut self, label: ClassId) -> Self {
        self.label = Some(label);
        self
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Joint count of the first frame (0 for an empty sequence).
    pub fn joint_count(&self) -> usize {
        self.frames.first().map_or(0, Frame::joint_count)
    }
}

/// Index of a class in a [`LabelMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(pub usize);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bijection between class ids `0..n` and class names.
#[derive(Debug, Clone)]
pub struct LabelMap {
    names: Vec<String>,
    by_name: HashMap<String, ClassId>,
}

impl LabelMap {
    pub fn new(names: Vec<String>) -> Result<Self, ModelError> {
        let mut by_name = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if by_name.insert(name.clone(), ClassId(i)).is_some() {
                return Err(ModelError::DuplicateClassName(name.clone()));
            }
        }
        Ok(Self { names, by_name })
    }

    /// Built-in iMiGUE label map: classes 0..=31 are micro-gestures, class 32
    /// is the non-MG class. The dataset does not ship class names, so the
    /// defaults are positional (`mg_00`..`mg_31`, `non_mg`); build a custom
    /// map with [`LabelMap::new`] to override them.
    pub fn imigue() -> Self {
        let mut names: Vec<String> = (0..IMIGUE_CLASS_COUNT - 1)
            .map(|i| format!("mg_{i:02}"))
            .collect();
        names.push("non_mg".to_string());
        Self::new(names).expect("built-in names are unique")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, id: ClassId) -> bool {
        id.0 < self.names.len()
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.names.get(id.0).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.by_name.get(name).copied()
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("duplicate class name `{0}`")]
    DuplicateClassName(String),
    #[error("sample `{sample_id}` has unknown class id {class}")]
    UnknownClass { sample_id: String, class: ClassId },
}

/// One invariant violation found by [`validate_sequence`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub frame: Option<usize>,
    pub joint: Option<usize>,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    EmptySequence,
    JointCountMismatch { expected: usize, actual: usize },
    NonFiniteCoordinate,
    ConfidenceOutOfRange { value: f32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(t) = self.frame {
            write!(f, "frame {t}")?;
            if let Some(j) = self.joint {
                write!(f, " joint {j}")?;
            }
            write!(f, ": ")?;
        }
        match &self.kind {
            ViolationKind::EmptySequence => write!(f, "sequence has no frames"),
            ViolationKind::JointCountMismatch { expected, actual } => {
                write!(f, "joint count {actual} does not match topology ({expected})")
            }
            ViolationKind::NonFiniteCoordinate => {
                write!(f, "non-finite coordinate with positive confidence")
            }
            ViolationKind::ConfidenceOutOfRange { value } => {
                write!(f, "confidence {value} outside [0, 1]")
            }
        }
    }
}

/// Diagnostics for one sequence. Valid iff no violations were found.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a sequence against the shared shape and range invariants:
/// per-frame joint count, finite coordinates wherever confidence is
/// positive, confidences in `[0, 1]`, and non-emptiness.
pub fn validate_sequence(seq: &SkeletonSequence, topo: &TopologySpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    if seq.frames.is_empty() {
        report.violations.push(Violation {
            frame: None,
            joint: None,
            kind: ViolationKind::EmptySequence,
        });
        return report;
    }
    for (t, frame) in seq.frames.iter().enumerate() {
        if frame.joint_count() != topo.num_joints {
            report.violations.push(Violation {
                frame: Some(t),
                joint: None,
                kind: ViolationKind::JointCountMismatch {
                    expected: topo.num_joints,
                    actual: frame.joint_count(),
                },
            });
        }
        for (j, kp) in frame.keypoints.iter().enumerate() {
            if !(0.0..=1.0).contains(&kp.confidence) || kp.confidence.is_nan() {
                report.violations.push(Violation {
                    frame: Some(t),
                    joint: Some(j),
                    kind: ViolationKind::ConfidenceOutOfRange { value: kp.confidence },
                });
            } else if kp.confidence > 0.0 && (!kp.x.is_finite() || !kp.y.is_finite()) {
                report.violations.push(Violation {
                    frame: Some(t),
                    joint: Some(j),
                    kind: ViolationKind::NonFiniteCoordinate,
                });
            }
        }
    }
    report
}

/// Per-class sample counts over a label map, with zero-count classes
/// represented explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassHistogram {
    counts: Vec<usize>,
    unlabeled: usize,
}

impl ClassHistogram {
    /// Tallies `(sample_id, label)` pairs. Labels must exist in `labels`.
    pub fn tally<'a, I>(items: I, labels: &LabelMap) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (&'a str, Option<ClassId>)>,
    {
        let mut counts = vec![0usize; labels.len()];
        let mut unlabeled = 0usize;
        for (sample_id, label) in items {
            match label {
                Some(class) if labels.contains(class) => counts[class.0] += 1,
                Some(class) => {
                    return Err(ModelError::UnknownClass {
                        sample_id: sample_id.to_string(),
                        class,
                    })
                }
                None => unlabeled += 1,
            }
        }
        Ok(Self { counts, unlabeled })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn count(&self, id: ClassId) -> usize {
        self.counts.get(id.0).copied().unwrap_or(0)
    }

    pub fn unlabeled(&self) -> usize {
        self.unlabeled
    }

    pub fn total_labeled(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Classes with zero samples.
    pub fn empty_classes(&self) -> Vec<ClassId> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(i, _)| ClassId(i))
            .collect()
    }

    /// Max count over min nonzero count; 1.0 by convention when no class
    /// has any samples.
    pub fn imbalance_ratio(&self) -> f64 {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        if max == 0 {
            return 1.0;
        }
        let min_nonzero = self
            .counts
            .iter()
            .copied()
            .filter(|&c| c > 0)
            .min()
            .unwrap_or(1)
            .max(1);
        max as f64 / min_nonzero as f64
    }
}

/// Histogram of sequence labels. Unlabeled sequences are counted separately.
pub fn summarize_labels(
    seqs: &[SkeletonSequence],
    labels: &LabelMap,
) -> Result<ClassHistogram, ModelError> {
    ClassHistogram::tally(
        seqs.iter().map(|s| (s.sample_id.as_str(), s.label)),
        labels,
    )
}
