//! Ingestion and serialization: OpenPose keypoint documents, the binary
//! tensor container, and dataset manifests.

mod manifest;
mod openpose;
mod tensor;

pub use manifest::{format_manifest, parse_manifest, ManifestEntry, ManifestError};
pub use openpose::{
    load_sample, load_sequence, parse_frame_documents, parse_pose_frame, read_frame_documents,
    select_person, JointIndexMap, LoadError, LoadOptions, ParseError, RawPerson, RawPoseFrame,
    BODY_POINT_COUNT, FACE_POINT_COUNT,
};
pub use tensor::{
    read_tensor, read_tensor_file, write_tensor, write_tensor_file, DType, TensorBlob,
    TensorError, TENSOR_FORMAT_VERSION, TENSOR_MAGIC,
};
