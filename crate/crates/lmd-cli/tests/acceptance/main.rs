//! Acceptance suite: one test per criterion, each printing a pass line with
//! the measured numbers (visible with `--nocapture`). Run with
//! `cargo test -p lmd-cli --test acceptance`.

mod util;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lmd_core::fitting::{fit_cubic, CandidatePoint};
use lmd_core::graph::{build_lmd, forward};
use lmd_core::grouping::{
    connected_components, connection_cost, normalize_directional, pair_distances, BinaryMask,
    Connectivity, PairDistances,
};
use lmd_core::metrics::ConfusionMatrix;
use lmd_core::netpbm;
use lmd_core::tensor::{BatchNormParams, ConvParams, Tensor};
use lmd_core::weights::WeightStore;
use lmd_core::{ops, LabelMap};

use util::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tensor(r: &mut ChaCha8Rng, n: usize, c: usize, h: usize, w: usize) -> Tensor {
    let data = (0..n * c * h * w).map(|_| r.gen_range(-1.0f32..1.0)).collect();
    Tensor::from_vec(n, c, h, w, data).unwrap()
}

#[test]
fn criterion_01_model_size_brackets_the_reference_66_mb() {
    let start = Instant::now();
    let net = build_lmd(12).unwrap();
    let bytes = net.param_count() * 4;
    assert!(
        (55_000_000..=72_000_000).contains(&bytes),
        "parameter bytes {bytes} outside [55 MB, 72 MB]"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    println!(
        "criterion 01 PASS: {} params -> {bytes} bytes ({:.1} MB) in {elapsed:?}",
        net.param_count(),
        bytes as f64 / 1e6
    );
}

#[test]
fn criterion_02_operator_oracles_on_100_random_shapes_each() {
    let start = Instant::now();
    let mut r = rng(0x5eed);

    // conv2d, dilation 1 and 2, strides 1 and 2
    for i in 0..100 {
        let (n, c, oc) = (r.gen_range(1..=2), r.gen_range(1..=4), r.gen_range(1..=4));
        let (h, w) = (r.gen_range(5..=12), r.gen_range(5..=12));
        let (dil, pad) = [(1, 0), (1, 1), (1, 2), (2, 1), (2, 2)][r.gen_range(0..5)];
        let stride = r.gen_range(1..=2);
        let input = random_tensor(&mut r, n, c, h, w);
        let kernel = random_tensor(&mut r, oc, c, 3, 3);
        let bias: Vec<f32> = (0..oc).map(|_| r.gen_range(-1.0f32..1.0)).collect();
        let p = ConvParams::new(kernel.clone(), bias.clone(), stride, pad, dil).unwrap();
        let out = ops::conv2d(&input, &p).unwrap();
        let (oh, ow, expected) = lmd_testkit::naive::conv2d(
            input.shape(),
            input.data(),
            (oc, 3, 3),
            kernel.data(),
            &bias,
            stride,
            pad,
            dil,
        );
        assert_eq!(out.shape(), (n, oc, oh, ow));
        assert_close(out.data(), &expected, 1e-5, &format!("conv2d case {i}"));
    }

    // batchnorm_infer
    for i in 0..100 {
        let (n, c) = (r.gen_range(1..=2), r.gen_range(1..=5));
        let (h, w) = (r.gen_range(1..=9), r.gen_range(1..=9));
        let input = random_tensor(&mut r, n, c, h, w);
        let p = BatchNormParams::new(
            (0..c).map(|_| r.gen_range(0.2f32..2.0)).collect(),
            (0..c).map(|_| r.gen_range(-1.0f32..1.0)).collect(),
            (0..c).map(|_| r.gen_range(-1.0f32..1.0)).collect(),
            (0..c).map(|_| r.gen_range(0.05f32..2.0)).collect(),
            1e-5,
        )
        .unwrap();
        let out = ops::batchnorm_infer(&input, &p).unwrap();
        let expected = lmd_testkit::naive::batchnorm(
            input.shape(),
            input.data(),
            &p.gamma,
            &p.beta,
            &p.running_mean,
            &p.running_var,
            p.epsilon,
        );
        assert_close(out.data(), &expected, 1e-5, &format!("batchnorm case {i}"));
    }

    // maxpool2x2: values and captured indices
    for i in 0..100 {
        let (n, c) = (r.gen_range(1..=2), r.gen_range(1..=4));
        let (h, w) = (2 * r.gen_range(1..=6), 2 * r.gen_range(1..=6));
        let input = random_tensor(&mut r, n, c, h, w);
        let (vals, idx) = ops::maxpool2x2(&input).unwrap();
        let (evals, eidx) = lmd_testkit::naive::maxpool2x2(input.shape(), input.data());
        assert_eq!(vals.data(), &evals[..], "maxpool case {i}");
        assert_eq!(idx.data(), &eidx[..], "maxpool indices case {i}");
    }

    // maxunpool2x2 against the naive scatter on the same indices
    for i in 0..100 {
        let (n, c) = (r.gen_range(1..=2), r.gen_range(1..=4));
        let (h, w) = (2 * r.gen_range(1..=6), 2 * r.gen_range(1..=6));
        let input = random_tensor(&mut r, n, c, h, w);
        let (pooled, idx) = ops::maxpool2x2(&input).unwrap();
        let up = ops::maxunpool2x2(&pooled, &idx, h, w).unwrap();
        let expected =
            lmd_testkit::naive::maxunpool2x2(pooled.shape(), pooled.data(), idx.data(), h, w);
        assert_eq!(up.data(), &expected[..], "maxunpool case {i}");
    }

    // softmax_channels
    for i in 0..100 {
        let (n, c) = (r.gen_range(1..=2), r.gen_range(2..=6));
        let (h, w) = (r.gen_range(1..=8), r.gen_range(1..=8));
        let input = random_tensor(&mut r, n, c, h, w);
        let out = ops::softmax_channels(&input);
        let expected = lmd_testkit::naive::softmax_channels(input.shape(), input.data());
        assert_close(out.data(), &expected, 1e-5, &format!("softmax case {i}"));
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30 s");
    println!(
        "criterion 02 PASS: 5 operators x 100 random shapes vs naive oracles (1e-5) in {elapsed:?}"
    );
}

#[test]
fn criterion_03_scores_keep_the_input_resolution() {
    let net = build_lmd(3).unwrap();
    let weights = WeightStore::random_init(&net, 2024);
    let mut r = rng(3);
    for (h, w) in [(32usize, 32usize), (64, 96)] {
        let image = random_tensor(&mut r, 1, 3, h, w);
        let out = forward(&net, &weights, &image).unwrap();
        assert_eq!(out.scores.shape(), (1, 3, h, w));
    }
    let image = random_tensor(&mut r, 1, 3, 360, 480);
    let start = Instant::now();
    let out = forward(&net, &weights, &image).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(out.scores.shape(), (1, 3, 360, 480));
    assert_eq!((out.labels.height(), out.labels.width()), (360, 480));
    assert!(elapsed.as_secs_f64() < 60.0, "360x480 took {elapsed:?}, budget 60 s");
    println!(
        "criterion 03 PASS: 32x32, 64x96, 360x480 all full-resolution; 360x480 in {elapsed:?}"
    );
}

#[test]
fn criterion_04_renormalization_reproduces_the_geometric_moments() {
    let mut r = rng(41);
    for i in 0..1000 {
        let dist_r: [f64; 4] = std::array::from_fn(|_| r.gen_range(0.0..100.0));
        let dist_g: [f64; 4] = std::array::from_fn(|_| r.gen_range(0.0..1000.0));
        let out = normalize_directional(dist_r, dist_g);
        let mean_geo = dist_g.iter().sum::<f64>() / 4.0;
        let var_geo = dist_g.iter().map(|v| (v - mean_geo).powi(2)).sum::<f64>() / 4.0;
        let mean_out = out.iter().sum::<f64>() / 4.0;
        let var_out = out.iter().map(|v| (v - mean_out).powi(2)).sum::<f64>() / 4.0;
        assert!((mean_out - mean_geo).abs() < 1e-6, "case {i}: mean {mean_out} vs {mean_geo}");
        assert!((var_out - var_geo).abs() < 1e-6, "case {i}: var {var_out} vs {var_geo}");
    }
    for i in 0..100 {
        let v = r.gen_range(0.0..50.0);
        let dist_g: [f64; 4] = std::array::from_fn(|_| r.gen_range(0.0..100.0));
        let mean_geo = dist_g.iter().sum::<f64>() / 4.0;
        let out = normalize_directional([v; 4], dist_g);
        assert_eq!(out, [mean_geo; 4], "degenerate case {i} must be exact");
    }
    println!("criterion 04 PASS: 1000 quadruples within 1e-6, 100 degenerate cases exact");
}

#[test]
fn criterion_05_connection_cost_arithmetic_symmetry_translation() {
    let worked = PairDistances {
        geometric: [10.0, 10.0, 20.0, 20.0],
        directional: [1.0, 2.0, 3.0, 4.0],
        directional_norm: normalize_directional([1.0, 2.0, 3.0, 4.0], [10.0, 10.0, 20.0, 20.0]),
    };
    let cost = connection_cost(&worked);
    assert!((cost - 15.0).abs() < 1e-9, "worked example cost {cost}");

    let mut r = rng(5);
    for i in 0..1000 {
        let mut random_segment = || {
            let top = (r.gen_range(0.0..300.0), r.gen_range(0.0..400.0));
            let angle = r.gen_range(0.0..std::f64::consts::PI);
            let len = r.gen_range(3.0..40.0);
            segment(top, (top.0 + len * angle.sin(), top.1 + len * angle.cos()))
        };
        let a = random_segment();
        let b = random_segment();
        let ab = connection_cost(&pair_distances(&a, &b));
        let ba = connection_cost(&pair_distances(&b, &a));
        assert!((ab - ba).abs() < 1e-9, "case {i}: {ab} vs {ba}");

        let (dy, dx) = (r.gen_range(-50.0..50.0), r.gen_range(-50.0..50.0));
        let shift = |s: &lmd_core::grouping::Supermarking| {
            let mut t = s.clone();
            t.centroid = (t.centroid.0 + dy, t.centroid.1 + dx);
            t.top = (t.top.0 + dy, t.top.1 + dx);
            t.bottom = (t.bottom.0 + dy, t.bottom.1 + dx);
            t
        };
        let moved = connection_cost(&pair_distances(&shift(&a), &shift(&b)));
        assert!((ab - moved).abs() < 1e-9, "case {i}: translation changed cost {ab} -> {moved}");
    }
    println!("criterion 05 PASS: worked cost 15 within 1e-9; symmetry and translation over 1000 pairs within 1e-9");
}

#[test]
fn criterion_06_ccl_equals_flood_fill_on_500_random_masks() {
    let mut r = rng(6);
    for trial in 0..500 {
        let h = r.gen_range(1..=128);
        let w = r.gen_range(1..=128);
        let density = r.gen_range(0.05..0.7);
        let mut mask = BinaryMask::new(h, w);
        let mut dense = vec![false; h * w];
        for (p, cell) in dense.iter_mut().enumerate() {
            if r.gen_bool(density) {
                mask.set(p / w, p % w, true);
                *cell = true;
            }
        }
        let conn = if trial % 2 == 0 { Connectivity::Four } else { Connectivity::Eight };
        let (labels, marks) = connected_components(&mask, conn, 1);
        let oracle = lmd_testkit::floodfill::components(&dense, h, w, conn == Connectivity::Eight);
        assert_eq!(labels, oracle, "trial {trial} ({h}x{w}, {conn:?})");
        let distinct = labels.iter().filter(|l| **l != 0).collect::<std::collections::HashSet<_>>();
        assert_eq!(marks.len(), distinct.len());
    }
    println!("criterion 06 PASS: 500 random masks up to 128x128, exact partition match for both connectivities");
}

#[test]
fn criterion_07_cubic_fit_recovery_and_oracle_match() {
    let mut r = rng(7);

    // exact candidates: planted coefficients come back within 1e-6
    for trial in 0..20 {
        let planted = [
            r.gen_range(50.0..300.0),
            r.gen_range(-1.0..1.0),
            r.gen_range(-0.02..0.02),
            r.gen_range(-4e-4..4e-4),
        ];
        let n = r.gen_range(6..=24);
        let cands: Vec<CandidatePoint> = (0..n)
            .map(|i| {
                let row = i as f64 * 120.0 / n as f64 + r.gen_range(0.0..2.0);
                let col = planted[0]
                    + planted[1] * row
                    + planted[2] * row * row
                    + planted[3] * row * row * row;
                CandidatePoint { row, col, weight: r.gen_range(1.0..16.0) }
            })
            .collect();
        let m = fit_cubic(&cands).unwrap();
        assert!((m.d - planted[0]).abs() < 1e-6, "trial {trial} d");
        assert!((m.c - planted[1]).abs() < 1e-6, "trial {trial} c");
        assert!((m.b - planted[2]).abs() < 1e-6, "trial {trial} b");
        assert!((m.a - planted[3]).abs() < 1e-6, "trial {trial} a");
        assert!(m.residual < 1e-6, "trial {trial} residual {}", m.residual);
    }

    // noisy candidates: agree with the double-double normal-equations oracle
    for trial in 0..100 {
        let planted = [
            r.gen_range(100.0..400.0),
            r.gen_range(-1.0..1.0),
            r.gen_range(-0.01..0.01),
            r.gen_range(-3e-4..3e-4),
        ];
        let cands: Vec<CandidatePoint> = (0..20)
            .map(|i| {
                let row = i as f64 * 5.0 + r.gen_range(0.0..4.0);
                let clean = planted[0]
                    + planted[1] * row
                    + planted[2] * row * row
                    + planted[3] * row * row * row;
                CandidatePoint {
                    row,
                    col: clean + r.gen_range(-0.5..0.5),
                    weight: r.gen_range(1.0..8.0),
                }
            })
            .collect();
        let m = fit_cubic(&cands).unwrap();
        let pts: Vec<(f64, f64, f64)> = cands.iter().map(|p| (p.row, p.col, p.weight)).collect();
        let oracle = lmd_testkit::dd::polyfit(&pts, 3);
        assert!((m.d - oracle[0]).abs() < 1e-6, "trial {trial}: d {} vs {}", m.d, oracle[0]);
        assert!((m.c - oracle[1]).abs() < 1e-6, "trial {trial}: c {} vs {}", m.c, oracle[1]);
        assert!((m.b - oracle[2]).abs() < 1e-6, "trial {trial}: b {} vs {}", m.b, oracle[2]);
        assert!((m.a - oracle[3]).abs() < 1e-6, "trial {trial}: a {} vs {}", m.a, oracle[3]);
    }
    println!("criterion 07 PASS: 20 exact recoveries and 100 noisy trials vs extended-precision oracle, 1e-6");
}

#[test]
fn criterion_08_wider_predictions_raise_recall_and_sink_iou() {
    let (h, w) = (64usize, 64usize);
    let mut gt = LabelMap::filled(h, w, 0);
    for y in 0..h {
        for x in 30..33 {
            gt.set(y, x, 1); // 3 px wide ground-truth lane
        }
    }
    let mut accs = Vec::new();
    let mut ious = Vec::new();
    for half in 0..10usize {
        let mut pred = LabelMap::filled(h, w, 0);
        for y in 0..h {
            for x in 31 - half..=31 + half {
                pred.set(y, x, 1);
            }
        }
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&pred, &gt, None).unwrap();
        accs.push(cm.class_accuracy().0[1].unwrap());
        ious.push(cm.iou().0[1].unwrap());
    }
    for k in 1..accs.len() {
        assert!(accs[k] >= accs[k - 1], "recall fell when widening: {accs:?}");
    }
    // past the ground-truth width (half >= 1 covers the 3 px lane)
    for k in 2..ious.len() {
        assert!(ious[k] < ious[k - 1], "IoU must strictly fall past gt width: {ious:?}");
    }
    assert_eq!(accs[1], 1.0);
    println!("criterion 08 PASS: recall nondecreasing {accs:?}; IoU strictly decreasing past gt width {ious:?}");
}

#[test]
fn criterion_09_class_weights_cli_reproduces_the_hand_example() {
    let dir = tempfile::tempdir().unwrap();
    let map = LabelMap::new(2, 5, vec![0, 0, 0, 0, 0, 1, 1, 1, 2, 2]).unwrap();
    netpbm::write_pgm(dir.path().join("corpus.pgm"), &map).unwrap();
    let labels = dir.path().to_str().unwrap();

    let (code, stdout, stderr) =
        run_cli(&["class-weights", "--labels", labels, "--num-classes", "3"]);
    assert_eq!(code, 0, "{stderr}");
    let parse_w = |out: &str| -> Vec<f64> {
        out.lines().skip(1).map(|l| l.split_whitespace().last().unwrap().parse().unwrap()).collect()
    };
    let w = parse_w(&stdout);
    assert_eq!(w, vec![0.6, 1.0, 1.5], "exact weights from {stdout}");

    let (code, stdout, stderr) =
        run_cli(&["class-weights", "--labels", labels, "--num-classes", "3", "--scale", "1:5"]);
    assert_eq!(code, 0, "{stderr}");
    let w = parse_w(&stdout);
    assert_eq!(w, vec![0.6, 5.0, 1.5], "scaling touches only the lane entry: {stdout}");
    println!("criterion 09 PASS: w = (0.6, 1.0, 1.5) exactly; --scale 1:5 -> (0.6, 5.0, 1.5)");
}

#[test]
fn criterion_10_dashed_lanes_merge_and_refit_the_generating_line() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.pgm");
    netpbm::write_pgm(&scene, &dashed_lane_scene()).unwrap();

    let (code, stdout, stderr) = run_cli(&["detect", "--labels-in", scene.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let (components, groups, lanes) = parse_report(&stdout);
    assert_eq!(components, 3, "two dashes plus the distractor:\n{stdout}");
    assert_eq!(groups, 2, "dashes merged, distractor separate:\n{stdout}");

    let merged = &lanes[0];
    assert_eq!(merged.group_id, 1);
    assert_eq!(merged.pixels, 2 * 20 * 3, "group 1 is the two dashes");
    assert!(merged.a.abs() < 1e-6, "a = {}", merged.a);
    assert!(merged.b.abs() < 1e-6, "b = {}", merged.b);
    assert!(merged.c.abs() < 1e-6, "c = {}", merged.c);
    assert!((merged.d - 101.0).abs() < 1e-3, "line at col 101, got d = {}", merged.d);
    assert_eq!(merged.degree, 3, "enough candidates for a full cubic");
    assert!(merged.residual < 1e-9, "collinear dashes fit exactly, residual {}", merged.residual);
    assert!(lanes[1].pixels == 3 * 81, "group 2 is the distractor");
    println!(
        "criterion 10 PASS: 3 components -> 2 groups; merged fit a = {:.2e}, b = {:.2e}, d = {:.4}",
        merged.a, merged.b, merged.d
    );
}

#[test]
fn criterion_11_every_command_is_byte_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    // shared inputs
    let scene = p("scene.pgm");
    netpbm::write_pgm(&scene, &dashed_lane_scene()).unwrap();
    let mut r = rng(11);
    let mut img = netpbm::RgbImage::filled(32, 32, [0, 0, 0]);
    for v in img.data.iter_mut() {
        *v = r.gen_range(0..=255);
    }
    let image = p("img.ppm");
    netpbm::write_ppm(&image, &img).unwrap();
    for (d, variant) in [("gt", 0u8), ("pred", 1)] {
        std::fs::create_dir(dir.path().join(d)).unwrap();
        for i in 0..3 {
            let mut map = LabelMap::filled(16, 16, 0);
            for y in 0..16 {
                map.set(y, (y + i + variant as usize) % 16, 1);
            }
            netpbm::write_pgm(dir.path().join(d).join(format!("{i}.pgm")), &map).unwrap();
        }
    }

    // weight file used by infer (made once, outside the comparison)
    let weights = p("w.lmdw");
    let (code, _, stderr) = run_cli(&["init-weights", "--out", &weights, "--seed", "9"]);
    assert_eq!(code, 0, "{stderr}");

    // inputs are absolute paths, outputs relative; each run gets its own
    // working directory so both runs see byte-identical argument lists
    let commands: Vec<(&str, Vec<String>, Vec<&str>)> = vec![
        ("info", vec!["info".into(), "--num-classes".into(), "12".into()], vec![]),
        (
            "init-weights",
            vec![
                "init-weights".into(),
                "--seed".into(),
                "7".into(),
                "--out".into(),
                "init.lmdw".into(),
            ],
            vec!["init.lmdw"],
        ),
        (
            "infer",
            vec![
                "infer".into(),
                "--image".into(),
                image.clone(),
                "--weights".into(),
                weights.clone(),
                "--labels-out".into(),
                "infer.pgm".into(),
            ],
            vec!["infer.pgm"],
        ),
        (
            "detect",
            vec![
                "detect".into(),
                "--labels-in".into(),
                scene.clone(),
                "--groups-out".into(),
                "groups.pgm".into(),
                "--overlay-out".into(),
                "overlay.ppm".into(),
            ],
            vec!["groups.pgm", "overlay.ppm"],
        ),
        (
            "postprocess",
            vec![
                "postprocess".into(),
                "--labels".into(),
                scene.clone(),
                "--overlay-out".into(),
                "post.ppm".into(),
            ],
            vec!["post.ppm"],
        ),
        (
            "evaluate",
            vec![
                "evaluate".into(),
                "--pred".into(),
                p("pred"),
                "--gt".into(),
                p("gt"),
                "--num-classes".into(),
                "2".into(),
            ],
            vec![],
        ),
        (
            "class-weights",
            vec![
                "class-weights".into(),
                "--labels".into(),
                p("gt"),
                "--num-classes".into(),
                "2".into(),
            ],
            vec![],
        ),
    ];

    for (name, template, out_names) in commands {
        let mut stdouts = Vec::new();
        let mut run_dirs = Vec::new();
        for (run_idx, threads) in ["1", "2"].iter().enumerate() {
            let run_dir = dir.path().join(format!("{name}-run{run_idx}"));
            std::fs::create_dir(&run_dir).unwrap();
            let mut full: Vec<&str> = vec!["--threads", threads];
            full.extend(template.iter().map(|s| s.as_str()));
            let (code, stdout) = run_cli_in(&run_dir, &full);
            assert_eq!(code, 0, "{name} with --threads {threads} failed");
            stdouts.push(stdout);
            run_dirs.push(run_dir);
        }
        assert_eq!(stdouts[0], stdouts[1], "{name}: stdout differs across thread counts");
        for out_name in out_names {
            assert!(
                files_equal(run_dirs[0].join(out_name), run_dirs[1].join(out_name)),
                "{name}: output file {out_name} differs across thread counts"
            );
        }
    }
    println!("criterion 11 PASS: all 7 commands byte-identical with --threads 1 vs --threads 2");
}
