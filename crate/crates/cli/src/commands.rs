//! The non-batch subcommands: fuse-eval, stats, topology-dump, validate.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use skelpipe_core::fusion::{
    fuse_scores_with, parse_label_file, parse_score_file, EvalReport, FuseOptions, ScoreMatrix,
};
use skelpipe_core::io::{load_sample, parse_manifest, JointIndexMap, LoadOptions};
use skelpipe_core::model::{validate_sequence, ClassHistogram, ClassId, LabelMap};
use skelpipe_core::topology::{hop_distances, partition_adjacency, Partition};

use crate::{load_topology, FuseEvalArgs, StatsArgs, TopologyDumpArgs, ValidateArgs};

pub fn fuse_eval(args: &FuseEvalArgs) -> Result<()> {
    let mut streams: Vec<ScoreMatrix> = Vec::with_capacity(args.scores.len());
    for path in &args.scores {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading score file `{}`", path.display()))?;
        streams.push(
            parse_score_file(&text)
                .with_context(|| format!("parsing score file `{}`", path.display()))?,
        );
    }
    let weights: Vec<f64> = match &args.weights {
        None => vec![1.0; streams.len()],
        Some(raw) => raw
            .split(',')
            .map(|w| {
                w.trim()
                    .parse::<f64>()
                    .with_context(|| format!("invalid weight `{w}`"))
            })
            .collect::<Result<_>>()?,
    };
    if weights.len() != streams.len() {
        bail!(
            "{} weights given for {} score files",
            weights.len(),
            streams.len()
        );
    }

    let pairs: Vec<(&ScoreMatrix, f64)> =
        streams.iter().zip(weights.iter().copied()).collect();
    let fused = fuse_scores_with(&pairs, FuseOptions { softmax: args.softmax })?;

    let label_text = fs::read_to_string(&args.labels)
        .with_context(|| format!("reading label file `{}`", args.labels.display()))?;
    let by_id: HashMap<String, ClassId> = parse_label_file(&label_text)?.into_iter().collect();
    let labels: Vec<ClassId> = fused
        .sample_ids
        .iter()
        .map(|id| {
            by_id
                .get(id)
                .copied()
                .with_context(|| format!("no label for sample `{id}`"))
        })
        .collect::<Result<_>>()?;

    let report = EvalReport::new(&fused, &labels)?;
    println!("streams {}", streams.len());
    print!("{}", report.to_text());
    fs::write(&args.report, report.to_json())
        .with_context(|| format!("writing report `{}`", args.report.display()))?;
    println!("report {}", args.report.display());
    Ok(())
}

pub fn stats(args: &StatsArgs) -> Result<()> {
    let text = fs::read_to_string(&args.manifest)
        .with_context(|| format!("reading manifest `{}`", args.manifest.display()))?;
    let entries = parse_manifest(&text)?;
    let labels = LabelMap::imigue();
    let hist = ClassHistogram::tally(
        entries.iter().map(|e| (e.sample_id.as_str(), e.label)),
        &labels,
    )?;

    println!("samples {}", entries.len());
    println!("labeled {}", hist.total_labeled());
    println!("unlabeled {}", hist.unlabeled());
    for (i, count) in hist.counts().iter().enumerate() {
        let id = ClassId(i);
        println!("class {} {} {}", i, labels.name(id).unwrap_or("?"), count);
    }
    println!("imbalance_ratio {:.6}", hist.imbalance_ratio());

    if !entries.is_empty() {
        let mut lengths: Vec<usize> = entries.iter().map(|e| e.frame_count).collect();
        lengths.sort_unstable();
        let median = if lengths.len() % 2 == 1 {
            lengths[lengths.len() / 2] as f64
        } else {
            (lengths[lengths.len() / 2 - 1] + lengths[lengths.len() / 2]) as f64 / 2.0
        };
        println!("frames_min {}", lengths[0]);
        println!("frames_median {median}");
        println!("frames_max {}", lengths[lengths.len() - 1]);
    }
    Ok(())
}

pub fn topology_dump(args: &TopologyDumpArgs) -> Result<()> {
    let topo = load_topology(&args.topology)?;
    print!("{}", topo.to_config_string());

    // Derived annotations; the config parser skips these lines, so the
    // dump reparses as the topology it was produced from.
    let hops = hop_distances(&topo)?;
    for (joint, hop) in hops.iter().enumerate() {
        println!("hop {joint} {hop}");
    }
    let pa = partition_adjacency(&topo)?;
    for p in Partition::ALL {
        let m = pa.matrix(p);
        for (i, j) in m.support() {
            println!("partition {} {} {} {}", p.name(), i, j, m.at(i, j));
        }
    }
    Ok(())
}

/// Returns the number of invalid samples.
pub fn validate(args: &ValidateArgs) -> Result<usize> {
    let topo = load_topology(&args.topology)?;
    let map = JointIndexMap::from_topology(&topo);
    let text = fs::read_to_string(&args.manifest)
        .with_context(|| format!("reading manifest `{}`", args.manifest.display()))?;
    let entries = parse_manifest(&text)?;
    let base_dir = args.manifest.parent().unwrap_or_else(|| Path::new("."));

    let mut invalid = 0usize;
    for entry in &entries {
        let path = base_dir.join(&entry.path);
        match load_sample(&path, &entry.sample_id, &topo, &map, &LoadOptions::default()) {
            Err(e) => {
                invalid += 1;
                println!("{} UNREADABLE: {e}", entry.sample_id);
            }
            Ok(seq) => {
                let report = validate_sequence(&seq, &topo);
                if report.is_valid() {
                    println!("{} ok ({} frames)", entry.sample_id, seq.len());
                } else {
                    invalid += 1;
                    println!(
                        "{} INVALID ({} violations)",
                        entry.sample_id,
                        report.violations.len()
                    );
                    for v in report.violations.iter().take(5) {
                        println!("  {v}");
                    }
                }
            }
        }
    }
    println!("checked {} samples, {} invalid", entries.len(), invalid);
    Ok(invalid)
}
