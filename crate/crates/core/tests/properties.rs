//! Property tests over the public API: invariants that must hold for all
//! inputs, not just the worked examples.

use proptest::prelude::*;

use skelpipe_core::fusion::{fuse_scores, predict, top1_accuracy, ScoreMatrix};
use skelpipe_core::heatmap::{
    compute_crop_box, render_joint_frame, render_volume, CropBox, Modality, RenderConfig,
};
use skelpipe_core::io::{read_tensor, select_person, write_tensor, RawPoseFrame, TensorBlob};
use skelpipe_core::model::{ClassId, Frame, Keypoint, SkeletonSequence};
use skelpipe_core::temporal::{
    align, interpolate_linear, sample_indices_uniform, AlignmentPolicy,
};
use skelpipe_core::topology::builtin_topology;

fn keypoint_strategy() -> impl Strategy<Value = Keypoint> {
    (
        -500.0f32..500.0,
        -500.0f32..500.0,
        prop_oneof![Just(0.0f32), 0.0f32..=1.0],
    )
        .prop_map(|(x, y, confidence)| Keypoint { x, y, confidence })
}

fn sequence_strategy(
    max_frames: usize,
    max_joints: usize,
) -> impl Strategy<Value = SkeletonSequence> {
    (1..=max_joints, 1..=max_frames)
        .prop_flat_map(|(joints, frames)| {
            proptest::collection::vec(
                proptest::collection::vec(keypoint_strategy(), joints).prop_map(Frame::new),
                frames,
            )
        })
        .prop_map(|frames| SkeletonSequence::new("prop", frames))
}

proptest! {
    // -- tensor container ---------------------------------------------------

    #[test]
    fn tensor_round_trip_is_bit_exact(
        dims in proptest::collection::vec(0u64..6, 0..=4),
        seed in any::<u32>(),
    ) {
        let count: u64 = dims.iter().product();
        let data: Vec<f32> = (0..count).map(|i| (i as f32 + seed as f32) * 0.37 - 3.0).collect();
        let blob = TensorBlob::new(dims, data).unwrap();
        let mut bytes = Vec::new();
        write_tensor(&blob, &mut bytes).unwrap();
        let back = read_tensor(bytes.as_slice()).unwrap();
        prop_assert_eq!(&back.dims, &blob.dims);
        prop_assert_eq!(back.data.len(), blob.data.len());
        for (a, b) in back.data.iter().zip(&blob.data) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    // -- temporal alignment --------------------------------------------------

    #[test]
    fn alignment_always_hits_target_length(
        seq in sequence_strategy(40, 8),
        t in 1usize..100,
        baseline in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let policy = if baseline {
            AlignmentPolicy::baseline(t, seed)
        } else {
            AlignmentPolicy::proposed(t)
        };
        let out = align(&seq, &policy).unwrap();
        prop_assert_eq!(out.len(), t);
        prop_assert_eq!(out.joint_count(), seq.joint_count());
    }

    #[test]
    fn proposed_alignment_retains_endpoints(
        seq in sequence_strategy(40, 4),
        t in 2usize..100,
    ) {
        prop_assume!(seq.len() >= 2);
        let out = align(&seq, &AlignmentPolicy::proposed(t)).unwrap();
        prop_assert_eq!(&out.frames[0], &seq.frames[0]);
        prop_assert_eq!(&out.frames[t - 1], &seq.frames[seq.len() - 1]);
    }

    #[test]
    fn proposed_alignment_is_identity_at_equal_length(seq in sequence_strategy(30, 4)) {
        let out = align(&seq, &AlignmentPolicy::proposed(seq.len())).unwrap();
        prop_assert_eq!(out, seq);
    }

    #[test]
    fn sample_indices_are_monotone(n in 1usize..500, t in 1usize..128) {
        let indices = sample_indices_uniform(n, t).unwrap();
        prop_assert_eq!(indices.len(), t);
        prop_assert!(indices.windows(2).all(|w| w[0] <= w[1]));
        if t <= n {
            prop_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        }
        prop_assert!(indices.iter().all(|&i| i < n));
    }

    #[test]
    fn interpolation_stays_within_brackets(
        seq in sequence_strategy(20, 3),
        t in 1usize..64,
    ) {
        let out = interpolate_linear(&seq, t).unwrap();
        let n = seq.len();
        for (k, frame) in out.frames.iter().enumerate() {
            // Recompute the bracketing source frames.
            let (i, j) = if t == 1 || n == 1 {
                (0, 0)
            } else {
                let pos = k as f64 * (n as f64 - 1.0) / (t as f64 - 1.0);
                let i = pos.floor() as usize;
                (i, (i + 1).min(n - 1))
            };
            for (joint, kp) in frame.keypoints.iter().enumerate() {
                let a = seq.frames[i].keypoints[joint];
                let b = seq.frames[j].keypoints[joint];
                prop_assert!(kp.x >= a.x.min(b.x) && kp.x <= a.x.max(b.x));
                prop_assert!(kp.y >= a.y.min(b.y) && kp.y <= a.y.max(b.y));
                prop_assert!(
                    kp.confidence >= a.confidence.min(b.confidence)
                        && kp.confidence <= a.confidence.max(b.confidence)
                );
            }
        }
    }

    // -- ingestion ------------------------------------------------------------

    #[test]
    fn person_selection_is_permutation_covariant(
        sums in proptest::collection::vec(0.0f32..10.0, 1..6),
        rotate in 0usize..6,
    ) {
        let people: Vec<_> = sums
            .iter()
            .map(|&s| skelpipe_core::io::RawPerson {
                body: vec![Keypoint::new(0.0, 0.0, s / 25.0); 25],
                face: None,
            })
            .collect();
        let raw = RawPoseFrame { people: people.clone() };
        let picked = select_person(&raw).unwrap();

        let r = rotate % people.len();
        let mut rotated = people;
        rotated.rotate_left(r);
        let picked_rotated = select_person(&RawPoseFrame { people: rotated }).unwrap();
        // Modulo tie-breaks: the selected scores must match.
        let score = sums[picked];
        let rotated_score = sums[(picked_rotated + r) % sums.len()];
        prop_assert_eq!(score, rotated_score);
    }

    // -- heatmaps --------------------------------------------------------------

    #[test]
    fn rendered_values_stay_in_unit_range(
        seq in sequence_strategy(6, 8),
        limb_modality in any::<bool>(),
    ) {
        let cfg = RenderConfig::default();
        if let Ok(crop) = compute_crop_box(&seq, &cfg) {
            for frame in &seq.frames {
                let values = if limb_modality {
                    let limb_list = vec![(0, seq.joint_count() - 1)];
                    skelpipe_core::heatmap::render_limb_frame(frame, &limb_list, &crop, &cfg)
                } else {
                    render_joint_frame(frame, &crop, &cfg)
                };
                prop_assert!(values.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }

    #[test]
    fn joint_channels_decay_along_grid_rays(
        px in 5usize..50,
        py in 5usize..50,
        confidence in 0.05f32..1.0,
        sigma in 0.4f64..3.0,
    ) {
        let cfg = RenderConfig { sigma, truncate: false, ..RenderConfig::default() };
        let crop = CropBox { x_min: 0.0, y_min: 0.0, side: (cfg.width - 1) as f64 };
        let frame = Frame::new(vec![Keypoint::new(px as f32, py as f32, confidence)]);
        let out = render_joint_frame(&frame, &crop, &cfg);
        let at = |x: usize, y: usize| out[y * cfg.width + x];
        // Peak at the mapped pixel.
        prop_assert!((at(px, py) - confidence).abs() < 1e-6);
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1)] {
            let mut prev = at(px, py);
            for step in 1..8 {
                let x = px as i64 + dx * step;
                let y = py as i64 + dy * step;
                if x < 0 || y < 0 || x >= cfg.width as i64 || y >= cfg.height as i64 {
                    break;
                }
                let v = at(x as usize, y as usize);
                prop_assert!(v <= prev);
                prev = v;
            }
        }
    }

    // -- fusion -----------------------------------------------------------------

    #[test]
    fn argmax_is_invariant_under_weight_scaling(
        rows_a in proptest::collection::vec(-10.0f64..10.0, 132),
        rows_b in proptest::collection::vec(-10.0f64..10.0, 132),
        w1 in 0.1f64..5.0,
        w2 in 0.1f64..5.0,
        scale in 0.01f64..100.0,
    ) {
        let ids: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
        let a = ScoreMatrix::new(ids.clone(), 33, rows_a).unwrap();
        let b = ScoreMatrix::new(ids, 33, rows_b).unwrap();
        let base = fuse_scores(&[(&a, w1), (&b, w2)]).unwrap();
        let scaled = fuse_scores(&[(&a, w1 * scale), (&b, w2 * scale)]).unwrap();
        prop_assert_eq!(predict(&base), predict(&scaled));
    }

    #[test]
    fn self_fusion_is_idempotent(
        rows in proptest::collection::vec(-5.0f64..5.0, 66),
        w1 in 0.1f64..4.0,
        w2 in 0.1f64..4.0,
    ) {
        let ids: Vec<String> = (0..2).map(|i| format!("s{i}")).collect();
        let m = ScoreMatrix::new(ids, 33, rows).unwrap();
        let fused = fuse_scores(&[(&m, w1), (&m, w2)]).unwrap();
        for i in 0..2 {
            for (u, v) in fused.row(i).iter().zip(m.row(i)) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn equal_weight_fusion_commutes(
        rows_a in proptest::collection::vec(-5.0f64..5.0, 66),
        rows_b in proptest::collection::vec(-5.0f64..5.0, 66),
    ) {
        let ids: Vec<String> = (0..2).map(|i| format!("s{i}")).collect();
        let a = ScoreMatrix::new(ids.clone(), 33, rows_a).unwrap();
        let b = ScoreMatrix::new(ids, 33, rows_b).unwrap();
        let ab = fuse_scores(&[(&a, 1.0), (&b, 1.0)]).unwrap();
        let ba = fuse_scores(&[(&b, 1.0), (&a, 1.0)]).unwrap();
        for i in 0..2 {
            for (u, v) in ab.row(i).iter().zip(ba.row(i)) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn row_permutation_preserves_accuracy(
        rows in proptest::collection::vec(-5.0f64..5.0, 5 * 33),
        labels in proptest::collection::vec(0usize..33, 5),
        rotate in 0usize..5,
    ) {
        let ids: Vec<String> = (0..5).map(|i| format!("s{i}")).collect();
        let m = ScoreMatrix::new(ids.clone(), 33, rows.clone()).unwrap();
        let labels: Vec<ClassId> = labels.into_iter().map(ClassId).collect();

        let mut perm: Vec<usize> = (0..5).collect();
        perm.rotate_left(rotate);
        let mut p_rows = Vec::with_capacity(rows.len());
        let mut p_ids = Vec::with_capacity(5);
        let mut p_labels = Vec::with_capacity(5);
        for &i in &perm {
            p_rows.extend_from_slice(&rows[i * 33..(i + 1) * 33]);
            p_ids.push(ids[i].clone());
            p_labels.push(labels[i]);
        }
        let pm = ScoreMatrix::new(p_ids, 33, p_rows).unwrap();

        let preds = predict(&m);
        let p_preds = predict(&pm);
        for (k, &i) in perm.iter().enumerate() {
            prop_assert_eq!(p_preds[k], preds[i]);
        }
        prop_assert_eq!(
            top1_accuracy(&m, &labels).unwrap(),
            top1_accuracy(&pm, &p_labels).unwrap()
        );
    }

    // -- cross-module: valid sequences flow through the whole pipeline ----------

    #[test]
    fn valid_base22_sequences_never_hit_shape_errors(
        seed in any::<u64>(),
        frames in 1usize..30,
        t in 1usize..64,
    ) {
        use skelpipe_core::util::SplitMix64;
        let topo = builtin_topology("base22").unwrap();
        let mut rng = SplitMix64::new(seed);
        let seq = SkeletonSequence::new(
            "fuzz",
            (0..frames)
                .map(|_| {
                    Frame::new(
                        (0..22)
                            .map(|_| {
                                Keypoint::new(
                                    rng.next_f64() as f32 * 640.0,
                                    rng.next_f64() as f32 * 480.0,
                                    0.05 + 0.95 * rng.next_f64() as f32,
                                )
                            })
                            .collect(),
                    )
                })
                .collect(),
        );
        prop_assert!(skelpipe_core::model::validate_sequence(&seq, &topo).is_valid());
        let aligned = align(&seq, &AlignmentPolicy::proposed(t)).unwrap();
        let vol = render_volume(&aligned, &topo, Modality::Joint, &RenderConfig::default());
        prop_assert!(vol.is_ok());
        let vol = render_volume(&aligned, &topo, Modality::Limb, &RenderConfig::default());
        prop_assert!(vol.is_ok());
    }
}
