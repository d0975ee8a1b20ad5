//! The batch preprocess pipeline: manifest in, heatmap volume tensors and
//! a sidecar volumes manifest out.
//!
//! Samples are processed by a bounded worker pool; each worker handles
//! whole samples and writes only that sample's tensor files, and results
//! are collected back in manifest order, so outputs are byte-identical
//! regardless of worker count. Per-sample failures do not abort the
//! batch; they are reported together at the end and drive the exit code.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;

use skelpipe_core::heatmap::render_volume;
use skelpipe_core::io::{
    load_sample, parse_manifest, write_tensor_file, JointIndexMap, LoadOptions, ManifestEntry,
};
use skelpipe_core::temporal::{align, AlignmentPolicy, ConfidenceInterp};
use skelpipe_core::util::fnv1a64;

use crate::config::PipelineSettings;
use crate::load_topology;

/// One row of the output volumes manifest.
struct VolumeRow {
    sample_id: String,
    modality: &'static str,
    file_name: String,
    label: i64,
    dims: [usize; 4],
}

struct SampleFailure {
    sample_id: String,
    message: String,
}

fn process_sample(
    entry: &ManifestEntry,
    base_dir: &Path,
    topo: &skelpipe_core::TopologySpec,
    map: &JointIndexMap,
    settings: &PipelineSettings,
) -> Result<Vec<VolumeRow>, String> {
    let path = base_dir.join(&entry.path);
    let opts = LoadOptions { min_person_confidence: settings.min_person_confidence };
    let mut seq =
        load_sample(&path, &entry.sample_id, topo, map, &opts).map_err(|e| e.to_string())?;
    seq.label = entry.label;
    if seq.len() != entry.frame_count {
        return Err(format!(
            "manifest declares {} frames, found {}",
            entry.frame_count,
            seq.len()
        ));
    }

    let policy = AlignmentPolicy {
        target_length: settings.target_length,
        strategy: settings.strategy,
        // Independent crop offsets per sample, still a pure function of
        // the run seed and the sample id.
        seed: settings.seed ^ fnv1a64(entry.sample_id.as_bytes()),
        confidence: ConfidenceInterp::Linear,
    };
    let aligned = align(&seq, &policy).map_err(|e| e.to_string())?;

    let mut rows = Vec::with_capacity(settings.modalities.len());
    for &modality in &settings.modalities {
        let volume =
            render_volume(&aligned, topo, modality, &settings.render).map_err(|e| e.to_string())?;
        let dims = volume.dims;
        let file_name = format!("{}.{}.skt", entry.sample_id, modality);
        write_tensor_file(&volume.into_blob(), &settings.out_dir.join(&file_name))
            .map_err(|e| format!("writing {file_name}: {e}"))?;
        rows.push(VolumeRow {
            sample_id: entry.sample_id.clone(),
            modality: modality.name(),
            file_name,
            label: entry.label.map_or(-1, |c| c.0 as i64),
            dims,
        });
    }
    Ok(rows)
}

/// Runs the preprocess command. Returns the number of failed samples.
pub fn run(settings: &PipelineSettings) -> Result<usize> {
    let topo = load_topology(&settings.topology)?;
    let map = JointIndexMap::from_topology(&topo);
    map.validate(&topo)?;

    let manifest_text = fs::read_to_string(&settings.manifest)
        .with_context(|| format!("reading manifest `{}`", settings.manifest.display()))?;
    let entries = parse_manifest(&manifest_text)?;
    let base_dir = settings
        .manifest
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    fs::create_dir_all(&settings.out_dir)
        .with_context(|| format!("creating `{}`", settings.out_dir.display()))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers)
        .build()
        .context("building worker pool")?;
    let results: Vec<Result<Vec<VolumeRow>, SampleFailure>> = pool.install(|| {
        entries
            .par_iter()
            .map(|entry| {
                process_sample(entry, &base_dir, &topo, &map, settings).map_err(|message| {
                    SampleFailure { sample_id: entry.sample_id.clone(), message }
                })
            })
            .collect()
    });

    // Assemble outputs in manifest order.
    let digest = settings.render.digest();
    let mut manifest_out =
        String::from("# sample_id,modality,path,label,topology,config_digest,dims\n");
    let mut volumes = 0usize;
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok(rows) => {
                for row in rows {
                    let dims = row
                        .dims
                        .iter()
                        .map(ToString::to_string)
                        .collect::<Vec<_>>()
                        .join("x");
                    manifest_out.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        row.sample_id,
                        row.modality,
                        row.file_name,
                        row.label,
                        topo.name,
                        digest,
                        dims
                    ));
                    volumes += 1;
                }
            }
            Err(failure) => failures.push(failure),
        }
    }
    fs::write(settings.out_dir.join("volumes.csv"), manifest_out)
        .context("writing volumes.csv")?;

    println!(
        "processed {} samples, wrote {} volumes, {} failures",
        entries.len(),
        volumes,
        failures.len()
    );
    for failure in &failures {
        eprintln!("sample `{}` failed: {}", failure.sample_id, failure.message);
    }
    Ok(failures.len())
}
