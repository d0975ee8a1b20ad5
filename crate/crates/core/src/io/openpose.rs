//! Parsing of OpenPose per-frame keypoint documents and assembly of
//! [`SkeletonSequence`] values from them.
//!
//! A frame document is a JSON object with a top-level `people` array; each
//! person carries `pose_keypoints_2d` (75 numbers, 25 body points) and
//! optionally `face_keypoints_2d` (210 numbers, 70 face points). Extra
//! keys are ignored. Press-conference clips regularly contain several
//! people or none at all, so one subject is selected per frame by total
//! body confidence and undetected frames become all-zero (missing) frames
//! rather than being dropped, keeping temporal indices aligned.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::model::{Frame, Keypoint, SkeletonSequence};
use crate::topology::{JointSource, TopologySpec};

/// Body points per person in the OpenPose BODY_25 layout.
pub const BODY_POINT_COUNT: usize = 25;
/// Face points per person in the OpenPose face layout.
pub const FACE_POINT_COUNT: usize = 70;

/// One detected person: 25 body keypoints, optionally 70 face keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPerson {
    pub body: Vec<Keypoint>,
    pub face: Option<Vec<Keypoint>>,
}

impl RawPerson {
    /// Sum of body confidences; the person-selection score.
    pub fn body_confidence_total(&self) -> f32 {
        self.body.iter().map(|k| k.confidence).sum()
    }
}

/// All detections in one frame document. An empty `people` list is legal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawPoseFrame {
    pub people: Vec<RawPerson>,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("invalid pose document at byte {offset}: {message}")]
    Json { offset: usize, message: String },
    #[error("{field} has {len} values, expected {expected} ({points} (x, y, c) triples)")]
    Schema { field: &'static str, len: usize, expected: usize, points: usize },
}

#[derive(Deserialize)]
struct DocRepr {
    people: Vec<PersonRepr>,
}

#[derive(Deserialize)]
struct PersonRepr {
    pose_keypoints_2d: Vec<f32>,
    #[serde(default)]
    face_keypoints_2d: Option<Vec<f32>>,
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    // serde_json reports 1-based line/column.
    let mut offset = 0;
    for (i, l) in text.split('\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(text.len());
        }
        offset += l.len() + 1;
    }
    text.len()
}

fn triples(
    field: &'static str,
    values: &[f32],
    points: usize,
) -> Result<Vec<Keypoint>, ParseError> {
    if values.len() != points * 3 {
        return Err(ParseError::Schema {
            field,
            len: values.len(),
            expected: points * 3,
            points,
        });
    }
    Ok(values
        .chunks_exact(3)
        .map(|c| Keypoint::new(c[0], c[1], c[2]))
        .collect())
}

/// Parses one OpenPose frame document.
pub fn parse_pose_frame(text: &str) -> Result<RawPoseFrame, ParseError> {
    let doc: DocRepr = serde_json::from_str(text).map_err(|e| ParseError::Json {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let mut people = Vec::with_capacity(doc.people.len());
    for person in doc.people {
        let body = triples("pose_keypoints_2d", &person.pose_keypoints_2d, BODY_POINT_COUNT)?;
        let face = match &person.face_keypoints_2d {
            Some(values) => Some(triples("face_keypoints_2d", values, FACE_POINT_COUNT)?),
            None => None,
        };
        people.push(RawPerson { body, face });
    }
    Ok(RawPoseFrame { people })
}

/// Index of the person with the highest total body confidence; ties go to
/// the lowest index, no detection gives `None`.
pub fn select_person(raw: &RawPoseFrame) -> Option<usize> {
    let mut best: Option<(usize, f32)> = None;
    for (i, person) in raw.people.iter().enumerate() {
        let total = person.body_confidence_total();
        if best.is_none_or(|(_, t)| total > t) {
            best = Some((i, total));
        }
    }
    best.map(|(i, _)| i)
}

/// Maps each topology joint to its source keypoint in the raw arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct JointIndexMap {
    sources: Vec<JointSource>,
}

impl JointIndexMap {
    pub fn new(sources: Vec<JointSource>) -> Self {
        Self { sources }
    }

    /// The first `n` body points, in order.
    pub fn body_prefix(n: usize) -> Self {
        Self { sources: (0..n).map(JointSource::Body).collect() }
    }

    /// Uses the topology's own per-joint sources when it carries them,
    /// otherwise falls back to the body-prefix default.
    pub fn from_topology(topo: &TopologySpec) -> Self {
        match &topo.sources {
            Some(sources) => Self { sources: sources.clone() },
            None => Self::body_prefix(topo.num_joints),
        }
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn sources(&self) -> &[JointSource] {
        &self.sources
    }

    /// Checks coverage and source ranges against a topology. Runs before
    /// any frame is processed.
    pub fn validate(&self, topo: &TopologySpec) -> Result<(), LoadError> {
        if self.sources.len() != topo.num_joints {
            return Err(LoadError::MappingLength {
                topology: topo.name.clone(),
                expected: topo.num_joints,
                actual: self.sources.len(),
            });
        }
        for (joint, source) in self.sources.iter().enumerate() {
            let (array, index, max) = match source {
                JointSource::Body(i) => ("body", *i, BODY_POINT_COUNT),
                JointSource::Face(i) => ("face", *i, FACE_POINT_COUNT),
            };
            if index >= max {
                return Err(LoadError::MappingOutOfRange { joint, array, index, max });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Detections whose total body confidence falls below this are treated
    /// as missing (the frame becomes all-zero keypoints).
    pub min_person_confidence: f32,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { min_person_confidence: 0.0 }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("joint map covers {actual} joints, topology `{topology}` has {expected}")]
    MappingLength { topology: String, expected: usize, actual: usize },
    #[error("joint {joint} maps to {array} index {index}, out of range (< {max})")]
    MappingOutOfRange { joint: usize, array: &'static str, index: usize, max: usize },
    #[error("frame document {index}: {source}")]
    Doc {
        index: usize,
        #[source]
        source: ParseError,
    },
    #[error("reading `{path}`: {message}")]
    Read { path: String, message: String },
}

/// Parses a list of frame documents, tagging errors with the document index.
pub fn parse_frame_documents(texts: &[String]) -> Result<Vec<RawPoseFrame>, LoadError> {
    texts
        .iter()
        .enumerate()
        .map(|(index, text)| {
            parse_pose_frame(text).map_err(|source| LoadError::Doc { index, source })
        })
        .collect()
}

/// Assembles a sequence from parsed frame documents: one frame per
/// document, joints ordered by the mapping, undetected or sub-threshold
/// frames filled with missing keypoints.
pub fn load_sequence(
    sample_id: &str,
    docs: &[RawPoseFrame],
    topo: &TopologySpec,
    map: &JointIndexMap,
    opts: &LoadOptions,
) -> Result<SkeletonSequence, LoadError> {
    map.validate(topo)?;
    let frames = docs
        .iter()
        .map(|doc| {
            let person = select_person(doc)
                .map(|i| &doc.people[i])
                .filter(|p| p.body_confidence_total() >= opts.min_person_confidence);
            match person {
                None => Frame::zeros(map.len()),
                Some(person) => Frame::new(
                    map.sources()
                        .iter()
                        .map(|source| match source {
                            JointSource::Body(i) => person.body[*i],
                            JointSource::Face(i) => person
                                .face
                                .as_ref()
                                .map_or_else(Keypoint::missing, |face| face[*i]),
                        })
                        .collect(),
                ),
            }
        })
        .collect();
    Ok(SkeletonSequence::new(sample_id, frames))
}

/// Reads the frame documents of one sample from disk.
///
/// Accepts either a directory of per-frame `*.json` files (ordered by
/// file name), a `.jsonl` file with one document per line, or a single
/// `.json` file holding a one-frame sample.
pub fn read_frame_documents(path: &Path) -> Result<Vec<String>, LoadError> {
    let read_err = |e: std::io::Error| LoadError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)
            .map_err(read_err)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(read_err)?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(LoadError::Read {
                path: path.display().to_string(),
                message: "directory contains no .json frame documents".into(),
            });
        }
        files
            .iter()
            .map(|f| fs::read_to_string(f).map_err(read_err))
            .collect()
    } else if path.extension().is_some_and(|ext| ext == "jsonl") {
        let text = fs::read_to_string(path).map_err(read_err)?;
        Ok(text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_string)
            .collect())
    } else {
        Ok(vec![fs::read_to_string(path).map_err(read_err)?])
    }
}

/// Reads, parses, and assembles one sample in a single call.
pub fn load_sample(
    path: &Path,
    sample_id: &str,
    topo: &TopologySpec,
    map: &JointIndexMap,
    opts: &LoadOptions,
) -> Result<SkeletonSequence, LoadError> {
    let texts = read_frame_documents(path)?;
    let docs = parse_frame_documents(&texts)?;
    load_sequence(sample_id, &docs, topo, map, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::builtin_topology;

    fn doc_with_floats(body: &[f32], face: Option<&[f32]>) -> String {
        let body_json = serde_json::to_string(body).unwrap();
        match face {
            Some(face) => format!(
                r#"{{"version":1.3,"people":[{{"pose_keypoints_2d":{},"face_keypoints_2d":{}}}]}}"#,
                body_json,
                serde_json::to_string(face).unwrap()
            ),
            None => format!(
                r#"{{"version":1.3,"people":[{{"pose_keypoints_2d":{}}}]}}"#,
                body_json
            ),
        }
    }

    fn uniform_body(confidence: f32) -> Vec<f32> {
        (0..BODY_POINT_COUNT)
            .flat_map(|i| [i as f32, i as f32 + 100.0, confidence])
            .collect()
    }

    #[test]
    fn parses_single_person_document() {
        let raw = parse_pose_frame(&doc_with_floats(&uniform_body(0.9), None)).unwrap();
        assert_eq!(raw.people.len(), 1);
        assert_eq!(raw.people[0].body.len(), 25);
        assert_eq!(raw.people[0].body[3], Keypoint::new(3.0, 103.0, 0.9));
        assert!(raw.people[0].face.is_none());
    }

    #[test]
    fn parses_empty_people_list() {
        let raw = parse_pose_frame(r#"{"people":[]}"#).unwrap();
        assert!(raw.people.is_empty());
    }

    #[test]
    fn rejects_wrong_triple_count_with_schema_error() {
        let body: Vec<f32> = vec![0.0; 74];
        let err = parse_pose_frame(&doc_with_floats(&body, None)).unwrap_err();
        match err {
            ParseError::Schema { field, len, expected, points } => {
                assert_eq!(field, "pose_keypoints_2d");
                assert_eq!(len, 74);
                assert_eq!(expected, 75);
                assert_eq!(points, 25);
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_json_with_byte_offset() {
        let text = "{\"people\": [}";
        let err = parse_pose_frame(text).unwrap_err();
        match err {
            ParseError::Json { offset, .. } => assert_eq!(offset, text.find('}').unwrap()),
            other => panic!("expected json error, got {other:?}"),
        }
    }

    #[test]
    fn selects_person_with_highest_confidence_sum() {
        let strong = RawPerson { body: vec![Keypoint::new(0.0, 0.0, 0.408); 25], face: None };
        let weak = RawPerson { body: vec![Keypoint::new(0.0, 0.0, 0.124); 25], face: None };
        let raw = RawPoseFrame { people: vec![strong.clone(), weak.clone()] };
        assert_eq!(select_person(&raw), Some(0));
        let raw = RawPoseFrame { people: vec![weak, strong.clone()] };
        assert_eq!(select_person(&raw), Some(1));
        assert_eq!(select_person(&RawPoseFrame::default()), None);
        // Exact tie: lowest index wins.
        let raw = RawPoseFrame { people: vec![strong.clone(), strong] };
        assert_eq!(select_person(&raw), Some(0));
    }

    #[test]
    fn load_sequence_has_expected_shape() {
        let topo = builtin_topology("base22").unwrap();
        let map = JointIndexMap::from_topology(&topo);
        let docs: Vec<RawPoseFrame> = (0..5)
            .map(|_| parse_pose_frame(&doc_with_floats(&uniform_body(0.8), None)).unwrap())
            .collect();
        let seq =
            load_sequence("s", &docs, &topo, &map, &LoadOptions::default()).unwrap();
        assert_eq!(seq.len(), 5);
        assert!(seq.frames.iter().all(|f| f.joint_count() == 22));
    }

    #[test]
    fn undetected_frames_become_missing() {
        let topo = builtin_topology("base22").unwrap();
        let map = JointIndexMap::from_topology(&topo);
        let docs = vec![parse_pose_frame(r#"{"people":[]}"#).unwrap()];
        let seq =
            load_sequence("s", &docs, &topo, &map, &LoadOptions::default()).unwrap();
        assert_eq!(seq.frames[0], Frame::zeros(22));
    }

    #[test]
    fn face_mapping_passes_sentinel_triples_through() {
        // Distinct sentinel coordinates per face point: x = 1000 + index.
        let topo = builtin_topology("face41").unwrap();
        let map = JointIndexMap::from_topology(&topo);
        let face: Vec<f32> = (0..FACE_POINT_COUNT)
            .flat_map(|i| [1000.0 + i as f32, 2000.0 + i as f32, 0.5])
            .collect();
        let doc = parse_pose_frame(&doc_with_floats(&uniform_body(0.9), Some(&face))).unwrap();
        let seq =
            load_sequence("s", &[doc], &topo, &map, &LoadOptions::default()).unwrap();
        let frame = &seq.frames[0];
        assert_eq!(frame.joint_count(), 41);
        for (joint, source) in map.sources().iter().enumerate().skip(22) {
            let JointSource::Face(i) = source else {
                panic!("face41 joints 22.. must map to face points")
            };
            assert_eq!(frame.keypoints[joint].x, 1000.0 + *i as f32);
            assert_eq!(frame.keypoints[joint].y, 2000.0 + *i as f32);
        }
    }

    #[test]
    fn mapping_out_of_range_fails_before_processing() {
        let topo = builtin_topology("base22").unwrap();
        let mut sources = JointIndexMap::from_topology(&topo).sources().to_vec();
        sources[3] = JointSource::Body(25);
        let map = JointIndexMap::new(sources);
        let err = load_sequence("s", &[], &topo, &map, &LoadOptions::default()).unwrap_err();
        match err {
            LoadError::MappingOutOfRange { joint, array, index, max } => {
                assert_eq!((joint, array, index, max), (3, "body", 25, 25));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn low_confidence_detections_are_dropped() {
        let topo = builtin_topology("base22").unwrap();
        let map = JointIndexMap::from_topology(&topo);
        let docs = vec![parse_pose_frame(&doc_with_floats(&uniform_body(0.01), None)).unwrap()];
        let opts = LoadOptions { min_person_confidence: 5.0 };
        let seq = load_sequence("s", &docs, &topo, &map, &opts).unwrap();
        assert_eq!(seq.frames[0], Frame::zeros(22));
    }
}
