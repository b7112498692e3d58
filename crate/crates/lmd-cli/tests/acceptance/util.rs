//! Helpers shared by the acceptance criteria.

use std::path::Path;
use std::process::Command;

use lmd_core::grouping::Supermarking;
use lmd_core::LabelMap;

pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lmd")).args(args).output().expect("spawn lmd");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

pub fn run_cli_in(dir: &Path, args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_lmd"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn lmd");
    (out.status.code().unwrap_or(-1), out.stdout)
}

pub fn assert_close(actual: &[f32], expected: &[f64], tol: f64, what: &str) {
    assert_eq!(actual.len(), expected.len(), "{what}: length");
    for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
        let diff = (*a as f64 - e).abs();
        assert!(diff <= tol, "{what}: element {i} differs by {diff} ({a} vs {e})");
    }
}

/// The label-map scene behind the dashed-lane criteria: two collinear
/// vertical dashes (class 1) plus a perpendicular distractor, all on a
/// 360x480 canvas whose default merge threshold is 30 px.
pub fn dashed_lane_scene() -> LabelMap {
    let (h, w) = (360usize, 480usize);
    let mut labels = LabelMap::filled(h, w, 0);
    for y in 100..120 {
        for x in 100..103 {
            labels.set(y, x, 1);
        }
    }
    for y in 128..148 {
        for x in 100..103 {
            labels.set(y, x, 1);
        }
    }
    for y in 200..203 {
        for x in 60..141 {
            labels.set(y, x, 1);
        }
    }
    labels
}

/// Parsed `lane <id> <a> <b> <c> <d> <degree> <residual> <pixels>` line.
#[derive(Debug)]
pub struct LaneLine {
    pub group_id: u32,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub degree: usize,
    pub residual: f64,
    pub pixels: usize,
}

pub fn parse_report(stdout: &str) -> (usize, usize, Vec<LaneLine>) {
    let mut components = usize::MAX;
    let mut groups = usize::MAX;
    let mut lanes = Vec::new();
    for line in stdout.lines() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["components", n] => components = n.parse().unwrap(),
            ["groups", n] => groups = n.parse().unwrap(),
            ["lane", id, a, b, c, d, degree, residual, pixels] => lanes.push(LaneLine {
                group_id: id.parse().unwrap(),
                a: a.parse().unwrap(),
                b: b.parse().unwrap(),
                c: c.parse().unwrap(),
                d: d.parse().unwrap(),
                degree: degree.parse().unwrap(),
                residual: residual.parse().unwrap(),
                pixels: pixels.parse().unwrap(),
            }),
            _ => {}
        }
    }
    assert_ne!(components, usize::MAX, "report has a components line:\n{stdout}");
    assert_ne!(groups, usize::MAX, "report has a groups line:\n{stdout}");
    (components, groups, lanes)
}

/// Synthetic supermarking for a straight segment between two endpoints.
pub fn segment(top: (f64, f64), bottom: (f64, f64)) -> Supermarking {
    let len = ((bottom.0 - top.0).powi(2) + (bottom.1 - top.1).powi(2)).sqrt().max(1e-12);
    let mut dir = ((bottom.0 - top.0) / len, (bottom.1 - top.1) / len);
    if dir.0 < 0.0 || (dir.0 == 0.0 && dir.1 < 0.0) {
        dir = (-dir.0, -dir.1);
    }
    Supermarking {
        label: 1,
        pixel_count: 2,
        centroid: ((top.0 + bottom.0) / 2.0, (top.1 + bottom.1) / 2.0),
        top,
        bottom,
        direction: dir,
        bbox: (0, 0, 0, 0),
    }
}

pub fn files_equal(a: impl AsRef<Path>, b: impl AsRef<Path>) -> bool {
    std::fs::read(a).unwrap() == std::fs::read(b).unwrap()
}
