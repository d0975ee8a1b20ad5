//! Gaussian heatmap volumes from aligned skeleton sequences.
//!
//! Each sequence is normalized into a shared square crop box (one box per
//! sequence, so the subject does not jitter across frames), then every
//! frame is rendered into per-joint or per-limb channels: a joint channel
//! holds a confidence-scaled Gaussian around the keypoint, a limb channel
//! a Gaussian over the point-to-segment distance. Stacking frames yields
//! a `T x C x H x W` volume, the input representation consumed by 3D-CNN
//! pose backbones.

use std::fmt;

use thiserror::Error;

use crate::io::TensorBlob;
use crate::model::{Frame, SkeletonSequence};
use crate::topology::{limbs, TopologySpec};
use crate::util::fnv1a64;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub height: usize,
    pub width: usize,
    /// Gaussian std in output-grid pixels.
    pub sigma: f64,
    /// Crop-box expansion factor about its center.
    pub padding_ratio: f64,
    /// Keypoints (and limb endpoints) must exceed this confidence to
    /// contribute; the default 0 admits any positive confidence.
    pub confidence_floor: f32,
    /// Smallest crop-box side in source units, used when the subject
    /// degenerates to (almost) a single point.
    pub min_box_side: f64,
    /// Truncate contributions beyond 3 sigma of a channel's support.
    /// Disable for exact evaluation over the full grid.
    pub truncate: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            height: 56,
            width: 56,
            sigma: 0.6,
            padding_ratio: 1.25,
            confidence_floor: 0.0,
            min_box_side: 1.0,
            truncate: true,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.height < 8 || self.width < 8 {
            return Err(RenderError::BadConfig(format!(
                "grid {}x{} too small, both sides must be >= 8",
                self.height, self.width
            )));
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(RenderError::BadConfig(format!("sigma {} must be > 0", self.sigma)));
        }
        if self.padding_ratio.is_nan() || self.padding_ratio < 1.0 {
            return Err(RenderError::BadConfig(format!(
                "padding_ratio {} must be >= 1",
                self.padding_ratio
            )));
        }
        if self.min_box_side.is_nan() || self.min_box_side <= 0.0 {
            return Err(RenderError::BadConfig(format!(
                "min_box_side {} must be > 0",
                self.min_box_side
            )));
        }
        Ok(())
    }

    /// Stable digest of the rendering parameters, recorded in volume
    /// provenance and output manifests.
    pub fn digest(&self) -> String {
        let canon = format!(
            "h={};w={};sigma={};pad={};floor={};min_side={};trunc={}",
            self.height,
            self.width,
            self.sigma,
            self.padding_ratio,
            self.confidence_floor,
            self.min_box_side,
            self.truncate
        );
        format!("{:016x}", fnv1a64(canon.as_bytes()))
    }
}

/// Square subject region in source coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropBox {
    pub x_min: f64,
    pub y_min: f64,
    pub side: f64,
}

/// Which channel set a volume holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Joint,
    Limb,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Joint => "joint",
            Modality::Limb => "limb",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "joint" => Ok(Modality::Joint),
            "limb" => Ok(Modality::Limb),
            other => Err(format!("unknown modality `{other}` (joint|limb)")),
        }
    }
}

/// Where a volume came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub sample_id: String,
    pub config_digest: String,
}

/// A rendered `T x C x H x W` volume of f32 responses in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapVolume {
    pub dims: [usize; 4],
    pub data: Vec<f32>,
    pub modality: Modality,
    pub provenance: Provenance,
}

impl HeatmapVolume {
    pub fn into_blob(self) -> TensorBlob {
        TensorBlob::new(self.dims.iter().map(|&d| d as u64).collect(), self.data)
            .expect("volume dims always match payload")
    }
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid render config: {0}")]
    BadConfig(String),
    #[error("sample `{sample_id}` has no keypoint above the confidence floor")]
    EmptySubject { sample_id: String },
    #[error("frame {frame} has {actual} joints, topology `{topology}` has {expected}")]
    JointCountMismatch { frame: usize, topology: String, expected: usize, actual: usize },
}

/// Tight bounding box over every contributing keypoint of the sequence,
/// expanded about its center by the padding ratio and squared. One box per
/// sequence keeps the rendered subject temporally stable.
pub fn compute_crop_box(
    seq: &SkeletonSequence,
    cfg: &RenderConfig,
) -> Result<CropBox, RenderError> {
    cfg.validate()?;
    let mut bounds: Option<(f64, f64, f64, f64)> = None;
    for frame in &seq.frames {
        for kp in &frame.keypoints {
            if kp.confidence <= cfg.confidence_floor {
                continue;
            }
            let (x, y) = (kp.x as f64, kp.y as f64);
            bounds = Some(match bounds {
                None => (x, x, y, y),
                Some((x0, x1, y0, y1)) => (x0.min(x), x1.max(x), y0.min(y), y1.max(y)),
            });
        }
    }
    let Some((x0, x1, y0, y1)) = bounds else {
        return Err(RenderError::EmptySubject { sample_id: seq.sample_id.clone() });
    };
    let cx = (x0 + x1) / 2.0;
    let cy = (y0 + y1) / 2.0;
    let side = ((x1 - x0).max(y1 - y0) * cfg.padding_ratio).max(cfg.min_box_side);
    Ok(CropBox { x_min: cx - side / 2.0, y_min: cy - side / 2.0, side })
}

/// Source-to-grid transform: the crop box is stretched onto the full
/// `[0, W-1] x [0, H-1]` pixel grid.
struct GridMap {
    x_min: f64,
    y_min: f64,
    sx: f64,
    sy: f64,
}

impl GridMap {
    fn new(b: &CropBox, cfg: &RenderConfig) -> Self {
        Self {
            x_min: b.x_min,
            y_min: b.y_min,
            sx: (cfg.width - 1) as f64 / b.side,
            sy: (cfg.height - 1) as f64 / b.side,
        }
    }

    fn map(&self, x: f32, y: f32) -> (f64, f64) {
        ((x as f64 - self.x_min) * self.sx, (y as f64 - self.y_min) * self.sy)
    }
}

/// Pixel window `[lo, hi]` covering `[center - r, center + r]`, clamped to
/// the grid; `None` when the window misses the grid entirely.
fn window(lo: f64, hi: f64, r: f64, len: usize) -> Option<(usize, usize)> {
    let a = (lo - r).ceil() as i64;
    let b = (hi + r).floor() as i64;
    let a = a.max(0) as usize;
    if b < 0 {
        return None;
    }
    let b = (b as usize).min(len - 1);
    if a > b {
        return None;
    }
    Some((a, b))
}

fn gaussian(dist2: f64, sigma: f64) -> f64 {
    (-dist2 / (2.0 * sigma * sigma)).exp()
}

fn render_point_channel(
    u: f64,
    v: f64,
    confidence: f32,
    cfg: &RenderConfig,
    out: &mut [f32],
) {
    let (u_range, v_range) = if cfg.truncate {
        let r = 3.0 * cfg.sigma;
        let Some(ur) = window(u, u, r, cfg.width) else { return };
        let Some(vr) = window(v, v, r, cfg.height) else { return };
        (ur, vr)
    } else {
        ((0, cfg.width - 1), (0, cfg.height - 1))
    };
    let c = confidence as f64;
    for py in v_range.0..=v_range.1 {
        let dy = py as f64 - v;
        for px in u_range.0..=u_range.1 {
            let dx = px as f64 - u;
            out[py * cfg.width + px] = (c * gaussian(dx * dx + dy * dy, cfg.sigma)) as f32;
        }
    }
}

/// Squared Euclidean distance from a point to a segment; a zero-length
/// segment degrades to point distance.
fn dist2_point_segment(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let dx = bx - ax;
    let dy = by - ay;
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    };
    let cx = ax + t * dx;
    let cy = ay + t * dy;
    (px - cx) * (px - cx) + (py - cy) * (py - cy)
}

/// Renders one frame into per-joint channels (`C = joint count`). Channel
/// `j` holds `c_j * exp(-((u - u_j)^2 + (v - v_j)^2) / (2 sigma^2))` on the
/// grid; gated keypoints leave their channel exactly zero.
pub fn render_joint_frame(frame: &Frame, crop: &CropBox, cfg: &RenderConfig) -> Vec<f32> {
    let grid = GridMap::new(crop, cfg);
    let plane = cfg.height * cfg.width;
    let mut out = vec![0.0f32; frame.joint_count() * plane];
    for (j, kp) in frame.keypoints.iter().enumerate() {
        if kp.confidence <= cfg.confidence_floor {
            continue;
        }
        let (u, v) = grid.map(kp.x, kp.y);
        render_point_channel(u, v, kp.confidence, cfg, &mut out[j * plane..(j + 1) * plane]);
    }
    out
}

/// Renders one frame into per-limb channels (`C = limb count`, ordered as
/// [`limbs`]). Channel `(a, b)` holds
/// `min(c_a, c_b) * exp(-dist(px, segment)^2 / (2 sigma^2))`.
pub fn render_limb_frame(
    frame: &Frame,
    limb_list: &[(usize, usize)],
    crop: &CropBox,
    cfg: &RenderConfig,
) -> Vec<f32> {
    let grid = GridMap::new(crop, cfg);
    let plane = cfg.height * cfg.width;
    let mut out = vec![0.0f32; limb_list.len() * plane];
    for (e, &(a, b)) in limb_list.iter().enumerate() {
        let (ka, kb) = (&frame.keypoints[a], &frame.keypoints[b]);
        let c = ka.confidence.min(kb.confidence);
        if c <= cfg.confidence_floor {
            continue;
        }
        let (ua, va) = grid.map(ka.x, ka.y);
        let (ub, vb) = grid.map(kb.x, kb.y);
        let channel = &mut out[e * plane..(e + 1) * plane];
        let (u_range, v_range) = if cfg.truncate {
            let r = 3.0 * cfg.sigma;
            let Some(ur) = window(ua.min(ub), ua.max(ub), r, cfg.width) else { continue };
            let Some(vr) = window(va.min(vb), va.max(vb), r, cfg.height) else { continue };
            (ur, vr)
        } else {
            ((0, cfg.width - 1), (0, cfg.height - 1))
        };
        for py in v_range.0..=v_range.1 {
            for px in u_range.0..=u_range.1 {
                let d2 = dist2_point_segment(px as f64, py as f64, ua, va, ub, vb);
                channel[py * cfg.width + px] = (c as f64 * gaussian(d2, cfg.sigma)) as f32;
            }
        }
    }
    out
}

/// Renders a whole (already temporally aligned) sequence into a
/// `T x C x H x W` volume with a single shared crop box.
pub fn render_volume(
    seq: &SkeletonSequence,
    topo: &TopologySpec,
    modality: Modality,
    cfg: &RenderConfig,
) -> Result<HeatmapVolume, RenderError> {
    cfg.validate()?;
    for (t, frame) in seq.frames.iter().enumerate() {
        if frame.joint_count() != topo.num_joints {
            return Err(RenderError::JointCountMismatch {
                frame: t,
                topology: topo.name.clone(),
                expected: topo.num_joints,
                actual: frame.joint_count(),
            });
        }
    }
    let crop = compute_crop_box(seq, cfg)?;
    let limb_list = limbs(topo);
    let channels = match modality {
        Modality::Joint => topo.num_joints,
        Modality::Limb => limb_list.len(),
    };
    let mut data = Vec::with_capacity(seq.len() * channels * cfg.height * cfg.width);
    for frame in &seq.frames {
        let slice = match modality {
            Modality::Joint => render_joint_frame(frame, &crop, cfg),
            Modality::Limb => render_limb_frame(frame, &limb_list, &crop, cfg),
        };
        data.extend_from_slice(&slice);
    }
    Ok(HeatmapVolume {
        dims: [seq.len(), channels, cfg.height, cfg.width],
        data,
        modality,
        provenance: Provenance {
            sample_id: seq.sample_id.clone(),
            config_digest: cfg.digest(),
        },
    })
}
