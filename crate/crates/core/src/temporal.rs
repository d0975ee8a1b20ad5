//! Temporal alignment of skeleton sequences to a fixed clip length.
//!
//! Two groups of strategies:
//!
//! * proposed: uniform interval sampling when the source is too long and
//!   linear interpolation when it is too short. Both keep the first and
//!   last source frames, so the output always spans the full gesture.
//! * baseline: random contiguous crop when too long, zero padding when
//!   too short. Kept for comparison runs.
//!
//! Every operation is pure; the crop's randomness comes from an explicit
//! per-call seed, never global state.

use thiserror::Error;

use crate::model::{Frame, Keypoint, SkeletonSequence};
use crate::util::SplitMix64;

/// How a sequence is brought to the target length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Uniform interval sampling / linear interpolation.
    Proposed,
    /// Random crop / zero padding.
    Baseline,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(Strategy::Proposed),
            "baseline" => Ok(Strategy::Baseline),
            other => Err(format!("unknown strategy `{other}` (proposed|baseline)")),
        }
    }
}

/// How confidence values are combined when interpolating between frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConfidenceInterp {
    /// Same convex combination as the coordinates.
    #[default]
    Linear,
    /// Minimum of the two bracketing confidences.
    MinEndpoints,
}

#[derive(Debug, Clone)]
pub struct AlignmentPolicy {
    pub target_length: usize,
    pub strategy: Strategy,
    /// Consumed only by the baseline random crop.
    pub seed: u64,
    pub confidence: ConfidenceInterp,
}

impl AlignmentPolicy {
    pub fn proposed(target_length: usize) -> Self {
        Self {
            target_length,
            strategy: Strategy::Proposed,
            seed: 0,
            confidence: ConfidenceInterp::Linear,
        }
    }

    pub fn baseline(target_length: usize, seed: u64) -> Self {
        Self {
            target_length,
            strategy: Strategy::Baseline,
            seed,
            confidence: ConfidenceInterp::Linear,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("target length must be at least 1")]
    ZeroTarget,
    #[error("source length must be at least 1")]
    ZeroSource,
    #[error("cannot crop {n} frames to {t}: source shorter than target, use zero_pad")]
    CropTooShort { n: usize, t: usize },
    #[error("cannot zero-pad {n} frames to {t}: source longer than target, use random_crop")]
    PadTooLong { n: usize, t: usize },
}

/// floor(num/den + 1/2) in exact integer arithmetic.
fn round_half_up_ratio(num: u64, den: u64) -> u64 {
    (2 * num + den) / (2 * den)
}

/// Source indices for uniform interval sampling of `n` frames down (or up)
/// to `t`. `index_k = round_half_up(k * (n-1) / (t-1))`, so index 0 is
/// always 0 and the last index is always `n - 1`: both endpoint frames are
/// retained and the samples span the full range. Indices are
/// non-decreasing, strictly increasing when `t <= n`.
pub fn sample_indices_uniform(n: usize, t: usize) -> Result<Vec<usize>, AlignError> {
    if t == 0 {
        return Err(AlignError::ZeroTarget);
    }
    if n == 0 {
        return Err(AlignError::ZeroSource);
    }
    if t == 1 {
        return Ok(vec![0]);
    }
    if n == 1 {
        return Ok(vec![0; t]);
    }
    Ok((0..t)
        .map(|k| round_half_up_ratio(k as u64 * (n as u64 - 1), t as u64 - 1) as usize)
        .collect())
}

/// Gathers frames at [`sample_indices_uniform`] positions. Copied frames
/// are bit-identical to their sources; label and metadata are preserved.
pub fn resample_uniform(
    seq: &SkeletonSequence,
    target_length: usize,
) -> Result<SkeletonSequence, AlignError> {
    let indices = sample_indices_uniform(seq.len(), target_length)?;
    Ok(SkeletonSequence {
        sample_id: seq.sample_id.clone(),
        frames: indices.iter().map(|&i| seq.frames[i].clone()).collect(),
        label: seq.label,
        fps: seq.fps,
    })
}

/// One interpolated component. The convex combination is evaluated in f64
/// and clamped to the closed interval of its endpoints, so interpolated
/// values never overshoot the bracketing source values.
fn lerp(a: f32, b: f32, alpha: f64) -> f32 {
    let v = ((1.0 - alpha) * a as f64 + alpha * b as f64) as f32;
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    v.clamp(lo, hi)
}

/// Expands (or contracts) a sequence to `target_length` frames by linear
/// interpolation at positions `k * (n-1) / (t-1)`. Endpoint frames are
/// reproduced exactly; intermediate frames are per-component convex
/// combinations of their two bracketing source frames.
pub fn interpolate_linear(
    seq: &SkeletonSequence,
    target_length: usize,
) -> Result<SkeletonSequence, AlignError> {
    interpolate_linear_with(seq, target_length, ConfidenceInterp::Linear)
}

pub fn interpolate_linear_with(
    seq: &SkeletonSequence,
    target_length: usize,
    confidence: ConfidenceInterp,
) -> Result<SkeletonSequence, AlignError> {
    let n = seq.len();
    let t = target_length;
    if t == 0 {
        return Err(AlignError::ZeroTarget);
    }
    if n == 0 {
        return Err(AlignError::ZeroSource);
    }
    let frames = if t == 1 {
        vec![seq.frames[0].clone()]
    } else if n == 1 {
        vec![seq.frames[0].clone(); t]
    } else {
        (0..t)
            .map(|k| {
                let pos = k as f64 * (n as f64 - 1.0) / (t as f64 - 1.0);
                let i = pos.floor() as usize;
                let alpha = pos - i as f64;
                let lo = &seq.frames[i];
                let hi = &seq.frames[(i + 1).min(n - 1)];
                let keypoints = lo
                    .keypoints
                    .iter()
                    .zip(&hi.keypoints)
                    .map(|(a, b)| Keypoint {
                        x: lerp(a.x, b.x, alpha),
                        y: lerp(a.y, b.y, alpha),
                        confidence: match confidence {
                            ConfidenceInterp::Linear => {
                                lerp(a.confidence, b.confidence, alpha)
                            }
                            ConfidenceInterp::MinEndpoints => {
                                a.confidence.min(b.confidence)
                            }
                        },
                    })
                    .collect();
                Frame::new(keypoints)
            })
            .collect()
    };
    Ok(SkeletonSequence {
        sample_id: seq.sample_id.clone(),
        frames,
        label: seq.label,
        fps: seq.fps,
    })
}

/// Contiguous window of `target_length` frames at a seeded uniform offset.
/// A pure function of `(seq, target_length, seed)`.
pub fn random_crop(
    seq: &SkeletonSequence,
    target_length: usize,
    seed: u64,
) -> Result<SkeletonSequence, AlignError> {
    let n = seq.len();
    let t = target_length;
    if t == 0 {
        return Err(AlignError::ZeroTarget);
    }
    if n == 0 {
        return Err(AlignError::ZeroSource);
    }
    if n < t {
        return Err(AlignError::CropTooShort { n, t });
    }
    let offset = SplitMix64::new(seed).next_below((n - t + 1) as u64) as usize;
    Ok(SkeletonSequence {
        sample_id: seq.sample_id.clone(),
        frames: seq.frames[offset..offset + t].to_vec(),
        label: seq.label,
        fps: seq.fps,
    })
}

/// Appends all-zero frames (every keypoint `(0, 0, 0)`) up to the target.
pub fn zero_pad(
    seq: &SkeletonSequence,
    target_length: usize,
) -> Result<SkeletonSequence, AlignError> {
    let n = seq.len();
    let t = target_length;
    if t == 0 {
        return Err(AlignError::ZeroTarget);
    }
    if n == 0 {
        return Err(AlignError::ZeroSource);
    }
    if n > t {
        return Err(AlignError::PadTooLong { n, t });
    }
    let mut frames = seq.frames.clone();
    frames.resize(t, Frame::zeros(seq.joint_count()));
    Ok(SkeletonSequence {
        sample_id: seq.sample_id.clone(),
        frames,
        label: seq.label,
        fps: seq.fps,
    })
}

/// Dispatches on strategy and source length. The output always has exactly
/// `policy.target_length` frames; a source already at the target length is
/// returned unchanged under either strategy.
pub fn align(
    seq: &SkeletonSequence,
    policy: &AlignmentPolicy,
) -> Result<SkeletonSequence, AlignError> {
    let n = seq.len();
    let t = policy.target_length;
    if t == 0 {
        return Err(AlignError::ZeroTarget);
    }
    if n == 0 {
        return Err(AlignError::ZeroSource);
    }
    if n == t {
        return Ok(seq.clone());
    }
    match policy.strategy {
        Strategy::Proposed => {
            if n > t {
                resample_uniform(seq, t)
            } else {
                interpolate_linear_with(seq, t, policy.confidence)
            }
        }
        Strategy::Baseline => {
            if n > t {
                random_crop(seq, t, policy.seed)
            } else {
                zero_pad(seq, t)
            }
        }
    }
}
