//! Preprocessing and evaluation toolkit for skeleton-based micro-gesture
//! recognition.
//!
//! The library turns raw 2D OpenPose keypoint streams into training-ready
//! representations and scores multi-stream classifier outputs:
//!
//! * [`model`] — keypoints, frames, sequences, labels, validation.
//! * [`io`] — OpenPose document parsing, the binary tensor container,
//!   dataset manifests.
//! * [`topology`] — joint layouts (22-joint base, 41-joint face-augmented),
//!   partitioned normalized adjacency, reference spatial aggregation.
//! * [`temporal`] — alignment to a fixed clip length: uniform interval
//!   sampling and linear interpolation, plus crop/pad baselines.
//! * [`heatmap`] — joint and limb Gaussian heatmap volumes.
//! * [`fusion`] — weighted score fusion, Top-1 accuracy, confusion
//!   matrices.
//!
//! All types are immutable value objects and every operation is a pure
//! function, so sequences can be processed concurrently without shared
//! state.

pub mod fusion;
pub mod heatmap;
pub mod io;
pub mod model;
pub mod temporal;
pub mod topology;
pub mod util;

pub use model::{ClassId, Frame, Keypoint, LabelMap, SkeletonSequence};
pub use topology::TopologySpec;
