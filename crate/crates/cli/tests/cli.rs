//! Integration tests driving the `skelpipe` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use skelpipe_core::fusion::{format_score_file, fuse_scores, predict, ScoreMatrix};
use skelpipe_core::model::ClassId;
use skelpipe_core::topology::{builtin_topology, TopologySpec};
use skelpipe_core::util::SplitMix64;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_skelpipe"))
}

fn mini_manifest() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata/mini/manifest.csv")
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A minimal one-person frame document with constant confidence.
fn tiny_doc(confidence: f32) -> String {
    let floats: Vec<String> = (0..25)
        .flat_map(|i| {
            vec![
                format!("{}.0", 100 + i),
                format!("{}.0", 200 + i),
                format!("{confidence}"),
            ]
        })
        .collect();
    format!(
        r#"{{"people":[{{"pose_keypoints_2d":[{}]}}]}}"#,
        floats.join(",")
    )
}

#[test]
fn preprocess_reports_missing_samples_and_keeps_going() {
    let dir = tempfile::tempdir().unwrap();
    let clip = dir.path().join("good.jsonl");
    fs::write(&clip, format!("{}\n{}\n", tiny_doc(0.9), tiny_doc(0.8))).unwrap();
    let manifest = dir.path().join("manifest.csv");
    fs::write(
        &manifest,
        "good,good.jsonl,0,2\nghost,missing.jsonl,1,5\n",
    )
    .unwrap();

    let out_dir = dir.path().join("out");
    let out = run(bin()
        .arg("preprocess")
        .arg("--manifest")
        .arg(&manifest)
        .arg("--topology")
        .arg("base22")
        .arg("--target-length")
        .arg("8")
        .arg("--out-dir")
        .arg(&out_dir));
    assert!(!out.status.success(), "missing sample must fail the run");
    assert!(stderr(&out).contains("ghost"), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("wrote 2 volumes, 1 failures"));
    // The good sample still produced both modalities.
    assert!(out_dir.join("good.joint.skt").is_file());
    assert!(out_dir.join("good.limb.skt").is_file());
}

#[test]
fn preprocess_rejects_frame_count_drift() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.jsonl"), format!("{}\n", tiny_doc(0.9))).unwrap();
    let manifest = dir.path().join("manifest.csv");
    fs::write(&manifest, "c,c.jsonl,0,7\n").unwrap();
    let out = run(bin()
        .arg("preprocess")
        .arg("--manifest")
        .arg(&manifest)
        .arg("--topology")
        .arg("base22")
        .arg("--out-dir")
        .arg(dir.path().join("out")));
    assert!(!out.status.success());
    assert!(stderr(&out).contains("declares 7 frames"));
}

#[test]
fn fuse_eval_identical_streams_perfect_labels() {
    let dir = tempfile::tempdir().unwrap();
    let scores = "sample_id,c0,c1,c2\na,0.9,0.05,0.05\nb,0.1,0.8,0.1\n";
    fs::write(dir.path().join("s1.csv"), scores).unwrap();
    fs::write(dir.path().join("s2.csv"), scores).unwrap();
    fs::write(dir.path().join("labels.csv"), "a,0\nb,1\n").unwrap();
    let out = run(bin()
        .arg("fuse-eval")
        .arg(dir.path().join("s1.csv"))
        .arg(dir.path().join("s2.csv"))
        .arg("--weights")
        .arg("1,1")
        .arg("--labels")
        .arg(dir.path().join("labels.csv"))
        .arg("--report")
        .arg(dir.path().join("report.json")));
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("top1_accuracy 1.000000"));
    let report = fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(report.contains("\"top1_accuracy\": 1.0"));
}

#[test]
fn fuse_eval_single_stream_matches_standalone_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    // Stream predicts [1, 0, 1]; labels [1, 1, 1] -> 2/3.
    let scores = "sample_id,c0,c1\na,0.1,0.9\nb,0.7,0.3\nc,0.2,0.8\n";
    fs::write(dir.path().join("s.csv"), scores).unwrap();
    fs::write(dir.path().join("labels.csv"), "a,1\nb,1\nc,1\n").unwrap();
    let out = run(bin()
        .arg("fuse-eval")
        .arg(dir.path().join("s.csv"))
        .arg("--labels")
        .arg(dir.path().join("labels.csv"))
        .arg("--report")
        .arg(dir.path().join("report.json")));
    assert!(out.status.success());
    assert!(stdout(&out).contains("top1_accuracy 0.666667"));
}

#[test]
fn fuse_eval_three_streams_match_library_fusion() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SplitMix64::new(404);
    let ids: Vec<String> = (0..40).map(|i| format!("s{i:02}")).collect();
    let mut streams = Vec::new();
    for k in 0..3 {
        let rows: Vec<f64> = (0..40 * 33).map(|_| rng.next_f64() * 4.0 - 2.0).collect();
        let m = ScoreMatrix::new(ids.clone(), 33, rows).unwrap();
        fs::write(dir.path().join(format!("s{k}.csv")), format_score_file(&m)).unwrap();
        streams.push(m);
    }
    let labels: Vec<ClassId> = (0..40).map(|_| ClassId(rng.next_below(33) as usize)).collect();
    let label_text: String = ids
        .iter()
        .zip(&labels)
        .map(|(id, l)| format!("{id},{l}\n"))
        .collect();
    fs::write(dir.path().join("labels.csv"), label_text).unwrap();

    // Library-level oracle for the same weights.
    let pairs: Vec<(&ScoreMatrix, f64)> =
        streams.iter().zip([2.0, 1.0, 1.0]).collect();
    let fused = fuse_scores(&pairs).unwrap();
    let expected = predict(&fused)
        .iter()
        .zip(&labels)
        .filter(|(p, l)| p == l)
        .count() as f64
        / 40.0;

    let out = run(bin()
        .arg("fuse-eval")
        .arg(dir.path().join("s0.csv"))
        .arg(dir.path().join("s1.csv"))
        .arg(dir.path().join("s2.csv"))
        .arg("--weights")
        .arg("2,1,1")
        .arg("--labels")
        .arg(dir.path().join("labels.csv"))
        .arg("--report")
        .arg(dir.path().join("report.json")));
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(
        stdout(&out).contains(&format!("top1_accuracy {expected:.6}")),
        "stdout: {} expected {expected:.6}",
        stdout(&out)
    );
}

#[test]
fn fuse_eval_rejects_misaligned_streams() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s1.csv"), "sample_id,c0\na,1.0\n").unwrap();
    fs::write(dir.path().join("s2.csv"), "sample_id,c0\nb,1.0\n").unwrap();
    fs::write(dir.path().join("labels.csv"), "a,0\n").unwrap();
    let out = run(bin()
        .arg("fuse-eval")
        .arg(dir.path().join("s1.csv"))
        .arg(dir.path().join("s2.csv"))
        .arg("--labels")
        .arg(dir.path().join("labels.csv"))
        .arg("--report")
        .arg(dir.path().join("r.json")));
    assert!(!out.status.success());
}

#[test]
fn stats_counts_classes_and_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.csv");
    let mut rows = String::new();
    for i in 0..12 {
        rows.push_str(&format!("s{i},clip{i},{},{}\n", i % 3, 10 + i));
    }
    fs::write(&manifest, rows).unwrap();
    let out = run(bin().arg("stats").arg("--manifest").arg(&manifest));
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("samples 12"));
    assert!(text.contains("class 0 mg_00 4"));
    assert!(text.contains("class 1 mg_01 4"));
    assert!(text.contains("class 2 mg_02 4"));
    assert!(text.contains("imbalance_ratio 1.000000"));
    assert!(text.contains("frames_min 10"));
    assert!(text.contains("frames_max 21"));
}

#[test]
fn stats_on_empty_manifest_is_ok() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("empty.csv");
    fs::write(&manifest, "").unwrap();
    let out = run(bin().arg("stats").arg("--manifest").arg(&manifest));
    assert!(out.status.success());
    assert!(stdout(&out).contains("samples 0"));
}

#[test]
fn stats_totals_match_independent_count() {
    // Oracle: recount the random manifest with a plain loop.
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SplitMix64::new(777);
    let mut rows = String::new();
    let mut oracle = [0usize; 33];
    for i in 0..1000 {
        let label = rng.next_below(33) as usize;
        oracle[label] += 1;
        rows.push_str(&format!("s{i},c{i},{label},5\n"));
    }
    let manifest = dir.path().join("m.csv");
    fs::write(&manifest, rows).unwrap();
    let out = run(bin().arg("stats").arg("--manifest").arg(&manifest));
    assert!(out.status.success());
    let text = stdout(&out);
    for (class, &count) in oracle.iter().enumerate() {
        assert!(
            text.contains(&format!("class {class} mg_{class:02} {count}"))
                || (class == 32 && text.contains(&format!("class 32 non_mg {count}"))),
            "class {class} count {count} missing in:\n{text}"
        );
    }
}

#[test]
fn topology_dump_round_trips_through_the_loader() {
    for name in ["base22", "face41"] {
        let out = run(bin().arg("topology-dump").arg("--topology").arg(name));
        assert!(out.status.success());
        let text = stdout(&out);
        let reparsed = TopologySpec::parse_config(&text).unwrap();
        assert_eq!(reparsed, builtin_topology(name).unwrap());
        assert!(text.contains("hop 0 1"), "nose is one hop from the neck");
        assert!(text.contains("partition root 0 0 "));
    }
}

#[test]
fn topology_dump_unknown_name_fails() {
    let out = run(bin().arg("topology-dump").arg("--topology").arg("nope"));
    assert!(!out.status.success());
    assert!(stderr(&out).contains("base22"));
}

#[test]
fn validate_accepts_the_mini_dataset() {
    let out = run(bin()
        .arg("validate")
        .arg("--manifest")
        .arg(mini_manifest())
        .arg("--topology")
        .arg("face41"));
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("checked 12 samples, 0 invalid"));
}

#[test]
fn validate_flags_out_of_range_confidence() {
    let dir = tempfile::tempdir().unwrap();
    let doc = tiny_doc(1.5);
    fs::write(dir.path().join("bad.jsonl"), format!("{doc}\n")).unwrap();
    let manifest = dir.path().join("m.csv");
    fs::write(&manifest, "bad,bad.jsonl,0,1\n").unwrap();
    let out = run(bin()
        .arg("validate")
        .arg("--manifest")
        .arg(&manifest)
        .arg("--topology")
        .arg("base22"));
    assert!(!out.status.success());
    assert!(stdout(&out).contains("bad INVALID"));
}
