//! Shared machinery behind the subcommands: image/tensor conversion, the
//! post-processing chain (mask, components, grouping, fitting) and the plain
//! text report.

use std::fmt::Write as _;

use lmd_core::fitting::{block_candidates, fit_cubic, LaneModel};
use lmd_core::grouping::{
    connected_components, extract_lane_mask, group_supermarkings, regroup_labels,
    validate_threshold, Connectivity,
};
use lmd_core::netpbm::RgbImage;
use lmd_core::{LabelMap, Tensor};

use crate::errors::{CliError, CliResult};

/// Converts an 8-bit RGB image to a (1, 3, H, W) tensor scaled to [0, 1].
pub fn tensor_from_rgb(img: &RgbImage) -> Tensor {
    let (h, w) = (img.height, img.width);
    let plane = h * w;
    let mut data = vec![0.0f32; 3 * plane];
    for p in 0..plane {
        for ch in 0..3 {
            data[ch * plane + p] = img.data[3 * p + ch] as f32 / 255.0;
        }
    }
    Tensor::from_vec(1, 3, h, w, data).expect("image dims are positive")
}

/// Post-processing knobs, one field per CLI flag.
#[derive(Debug, Clone)]
pub struct PostConfig {
    pub lane_class: u8,
    pub connectivity: Connectivity,
    pub min_pixels: usize,
    /// `None` means the default of 5% of the image diagonal.
    pub merge_threshold: Option<f64>,
    pub blocks: usize,
}

/// One merged lane group and its fitted model.
#[derive(Debug, Clone)]
pub struct LaneGroup {
    pub group_id: u32,
    pub pixels: usize,
    pub model: LaneModel,
}

#[derive(Debug, Clone)]
pub struct PostOutcome {
    pub width: usize,
    pub height: usize,
    pub components: usize,
    pub threshold: f64,
    pub group_labels: Vec<u32>,
    pub lanes: Vec<LaneGroup>,
}

/// Runs grouping and model fitting on a label map.
pub fn run_postprocess(labels: &LabelMap, cfg: &PostConfig) -> CliResult<PostOutcome> {
    let (h, w) = (labels.height(), labels.width());
    let threshold = cfg.merge_threshold.unwrap_or_else(|| 0.05 * ((h * h + w * w) as f64).sqrt());
    validate_threshold(threshold).map_err(|e| CliError::usage(e.to_string()))?;
    if cfg.blocks == 0 {
        return Err(CliError::usage("--blocks must be at least 1"));
    }

    let mask = extract_lane_mask(labels, cfg.lane_class);
    let (component_labels, marks) = connected_components(&mask, cfg.connectivity, cfg.min_pixels);
    let groups = group_supermarkings(&marks, threshold);
    let group_labels = regroup_labels(&component_labels, &groups);
    let group_count = groups.iter().copied().max().unwrap_or(0) as usize;

    let mut pixel_counts = vec![0usize; group_count + 1];
    for g in &group_labels {
        pixel_counts[*g as usize] += 1;
    }

    // Groups are independent; fit them in parallel.
    let fits = lmd_core::par::map_indexed(group_count, |i| {
        let gid = i as u32 + 1;
        let cands = block_candidates(&group_labels, h, w, gid, cfg.blocks)?;
        fit_cubic(&cands)
    });
    let mut lanes = Vec::with_capacity(group_count);
    for (i, fit) in fits.into_iter().enumerate() {
        let gid = i as u32 + 1;
        lanes.push(LaneGroup { group_id: gid, pixels: pixel_counts[gid as usize], model: fit? });
    }

    Ok(PostOutcome { width: w, height: h, components: marks.len(), threshold, group_labels, lanes })
}

/// The text report: sizes, counts and one `lane <id> <a> <b> <c> <d>
/// <degree> <residual> <pixels>` line per group.
pub fn report(outcome: &PostOutcome) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "size {}x{}", outcome.width, outcome.height);
    let _ = writeln!(out, "merge_threshold {}", outcome.threshold);
    let _ = writeln!(out, "components {}", outcome.components);
    let _ = writeln!(out, "groups {}", outcome.lanes.len());
    for lane in &outcome.lanes {
        let m = &lane.model;
        let _ = writeln!(
            out,
            "lane {} {} {} {} {} {} {} {}",
            lane.group_id, m.a, m.b, m.c, m.d, m.degree, m.residual, lane.pixels
        );
    }
    out
}

/// The group map as a label image (ids above 255 saturate; id 0 is
/// background).
pub fn group_map(outcome: &PostOutcome) -> LabelMap {
    let data = outcome.group_labels.iter().map(|&g| g.min(255) as u8).collect();
    LabelMap::new(outcome.height, outcome.width, data).expect("label buffer matches dims")
}

pub fn lane_models(outcome: &PostOutcome) -> Vec<(u32, LaneModel)> {
    outcome.lanes.iter().map(|l| (l.group_id, l.model)).collect()
}
