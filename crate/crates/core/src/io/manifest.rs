//! Dataset manifest: one comma-separated row per sample,
//! `sample_id,relative_path,label_id,frame_count`, with label `-1`
//! meaning unlabeled. Blank lines and `#` comments are skipped.

use thiserror::Error;

use crate::model::ClassId;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub path: String,
    pub label: Option<ClassId>,
    pub frame_count: usize,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, ManifestError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err =
            |msg: String| ManifestError::Parse { line: i + 1, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [sample_id, path, label, frame_count] = fields.as_slice() else {
            return Err(err(format!("expected 4 fields, got {}", fields.len())));
        };
        if sample_id.is_empty() {
            return Err(err("empty sample_id".into()));
        }
        let label: i64 = label
            .parse()
            .map_err(|_| err(format!("invalid label id `{label}`")))?;
        let label = match label {
            -1 => None,
            l if l >= 0 => Some(ClassId(l as usize)),
            l => return Err(err(format!("invalid label id {l}"))),
        };
        let frame_count = frame_count
            .parse()
            .map_err(|_| err(format!("invalid frame count `{frame_count}`")))?;
        entries.push(ManifestEntry {
            sample_id: sample_id.to_string(),
            path: path.to_string(),
            label,
            frame_count,
        });
    }
    Ok(entries)
}

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        let label = e.label.map_or(-1, |c| c.0 as i64);
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.sample_id, e.path, label, e.frame_count
        ));
    }
    out
}
