//! One function per subcommand. Each returns the text to print on stdout;
//! file outputs are written as side effects.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lmd_core::balance::{class_frequencies, median_frequency_weights, scale_class_weight};
use lmd_core::graph::{build_lmd, forward, LayerSpec, NetworkSpec};
use lmd_core::grouping::Connectivity;
use lmd_core::metrics::ConfusionMatrix;
use lmd_core::netpbm;
use lmd_core::weights::WeightStore;
use lmd_core::LabelMap;

use crate::errors::{CliError, CliResult};
use crate::pipeline::{self, PostConfig};
use crate::render;

fn build_net(num_classes: usize) -> CliResult<NetworkSpec> {
    build_lmd(num_classes).map_err(|e| CliError::usage(e.to_string()))
}

pub fn connectivity_from_flag(value: u8) -> CliResult<Connectivity> {
    match value {
        4 => Ok(Connectivity::Four),
        8 => Ok(Connectivity::Eight),
        other => Err(CliError::usage(format!("--connectivity must be 4 or 8, got {other}"))),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "-".to_string(),
    }
}

pub fn info(num_classes: usize) -> CliResult<String> {
    let net = build_net(num_classes)?;
    let mut out = String::new();
    let _ = writeln!(out, "name kind in_c out_c dilation bn_relu");
    for layer in net.layers() {
        match layer {
            LayerSpec::Conv { name, in_c, out_c, dilation, bn_relu } => {
                let _ = writeln!(
                    out,
                    "{name} conv3x3 {in_c} {out_c} {dilation} {}",
                    if *bn_relu { "yes" } else { "no" }
                );
            }
            LayerSpec::MaxPool => out.push_str("- maxpool2x2 - - - -\n"),
            LayerSpec::MaxUnpool { source } => {
                let _ = writeln!(out, "- maxunpool2x2(pool@{source}) - - - -");
            }
            LayerSpec::Upsample2x => out.push_str("- upsample2x - - - -\n"),
            LayerSpec::Softmax => out.push_str("- softmax - - - -\n"),
        }
    }
    let params = net.param_count();
    // exact serialized size: params * 4 bytes plus the format's record headers
    let file_bytes = WeightStore::random_init(&net, 0).file_size();
    let rf = net.receptive_field();
    let _ = writeln!(out, "params {params}");
    let _ = writeln!(out, "model_bytes {file_bytes}");
    let _ = writeln!(out, "model_size_mb {:.2}", file_bytes as f64 / 1e6);
    let _ = writeln!(out, "receptive_field {}x{}", rf.height, rf.width);
    let _ = writeln!(out, "output_stride {}", rf.output_stride);
    let _ = writeln!(out, "input_multiple {}", net.input_multiple());
    Ok(out)
}

pub fn init_weights(out_path: &Path, seed: u64, num_classes: usize) -> CliResult<String> {
    let net = build_net(num_classes)?;
    let store = WeightStore::random_init(&net, seed);
    store.save(out_path)?;
    Ok(format!("wrote {} ({} bytes)\n", out_path.display(), store.file_size()))
}

fn load_validated(path: &Path, net: &NetworkSpec) -> CliResult<WeightStore> {
    let store = WeightStore::load(path)?;
    store.validate_against(net)?;
    Ok(store)
}

fn run_network(
    image_path: &Path,
    weights_path: &Path,
    num_classes: usize,
) -> CliResult<(netpbm::RgbImage, LabelMap)> {
    let net = build_net(num_classes)?;
    let image = netpbm::read_ppm(image_path)?;
    let store = load_validated(weights_path, &net)?;
    let tensor = pipeline::tensor_from_rgb(&image);
    let result = forward(&net, &store, &tensor)?;
    Ok((image, result.labels))
}

pub fn infer(
    image: &Path,
    weights: &Path,
    num_classes: usize,
    labels_out: &Path,
) -> CliResult<String> {
    let (_, labels) = run_network(image, weights, num_classes)?;
    netpbm::write_pgm(labels_out, &labels)?;
    Ok(format!("wrote {}\n", labels_out.display()))
}

pub struct DetectInput {
    pub image: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub labels_in: Option<PathBuf>,
    pub num_classes: usize,
}

pub struct PostOutputs {
    pub labels_out: Option<PathBuf>,
    pub groups_out: Option<PathBuf>,
    pub overlay_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
}

fn finish(
    labels: &LabelMap,
    base: Option<netpbm::RgbImage>,
    cfg: &PostConfig,
    outputs: &PostOutputs,
) -> CliResult<String> {
    if let Some(path) = &outputs.labels_out {
        netpbm::write_pgm(path, labels)?;
    }
    let outcome = pipeline::run_postprocess(labels, cfg)?;
    if let Some(path) = &outputs.groups_out {
        netpbm::write_pgm(path, &pipeline::group_map(&outcome))?;
    }
    if let Some(path) = &outputs.overlay_out {
        let mut canvas = base.unwrap_or_else(|| render::labels_as_rgb(labels));
        render::render_lanes(&mut canvas, &pipeline::lane_models(&outcome));
        netpbm::write_ppm(path, &canvas)?;
    }
    let report = pipeline::report(&outcome);
    match &outputs.report_out {
        Some(path) => {
            std::fs::write(path, &report).map_err(|e| CliError::Io(e.to_string()))?;
            Ok(String::new())
        }
        None => Ok(report),
    }
}

pub fn detect(input: &DetectInput, cfg: &PostConfig, outputs: &PostOutputs) -> CliResult<String> {
    let (base, labels) = match (&input.labels_in, &input.image, &input.weights) {
        (Some(path), None, None) => (None, netpbm::read_pgm(path)?),
        (None, Some(image), Some(weights)) => {
            let (img, labels) = run_network(image, weights, input.num_classes)?;
            (Some(img), labels)
        }
        _ => {
            return Err(CliError::usage(
                "provide either --labels-in, or --image together with --weights",
            ))
        }
    };
    finish(&labels, base, cfg, outputs)
}

/// The postprocess command with an explicit photograph as overlay base.
pub fn postprocess_with_image(
    input: &DetectInput,
    image: &Path,
    cfg: &PostConfig,
    outputs: &PostOutputs,
) -> CliResult<String> {
    let labels_path = input.labels_in.as_ref().expect("postprocess always carries labels");
    let labels = netpbm::read_pgm(labels_path)?;
    let base = netpbm::read_ppm(image)?;
    if (base.height, base.width) != (labels.height(), labels.width()) {
        return Err(CliError::Data(format!(
            "overlay base is {}x{} but labels are {}x{}",
            base.width,
            base.height,
            labels.width(),
            labels.height()
        )));
    }
    finish(&labels, Some(base), cfg, outputs)
}

fn sorted_pgm_names(dir: &Path) -> CliResult<Vec<String>> {
    let mut names = Vec::new();
    for entry in
        std::fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?
    {
        let entry = entry.map_err(|e| CliError::Io(e.to_string()))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".pgm") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

pub fn evaluate(
    pred_dir: &Path,
    gt_dir: &Path,
    num_classes: usize,
    ignore_id: u8,
) -> CliResult<String> {
    if num_classes == 0 {
        return Err(CliError::usage("--num-classes must be at least 1"));
    }
    let pred_names = sorted_pgm_names(pred_dir)?;
    let gt_names = sorted_pgm_names(gt_dir)?;
    for name in &pred_names {
        if !gt_names.contains(name) {
            return Err(CliError::Data(format!("no ground truth for '{name}'")));
        }
    }
    for name in &gt_names {
        if !pred_names.contains(name) {
            return Err(CliError::Data(format!("no prediction for '{name}'")));
        }
    }
    if pred_names.is_empty() {
        return Err(CliError::Data("no .pgm files to evaluate".into()));
    }

    // Per-image matrices in parallel; integer merge is exact in any order.
    let partials =
        lmd_core::par::map_indexed(pred_names.len(), |i| -> CliResult<ConfusionMatrix> {
            let name = &pred_names[i];
            let pred = netpbm::read_pgm(pred_dir.join(name))?;
            let gt = netpbm::read_pgm(gt_dir.join(name))?;
            let mut cm = ConfusionMatrix::new(num_classes);
            cm.accumulate(&pred, &gt, Some(ignore_id))
                .map_err(|e| CliError::Data(format!("{name}: {e}")))?;
            Ok(cm)
        });
    let mut cm = ConfusionMatrix::new(num_classes);
    for partial in partials {
        cm.merge(&partial?);
    }

    let (acc, class_avg) = cm.class_accuracy();
    let (iou, miou) = cm.iou();
    let mut out = String::new();
    let _ = writeln!(out, "class gt_pixels accuracy iou");
    for c in 0..num_classes {
        let gt_pixels: u64 = (0..num_classes).map(|p| cm.count(c, p)).sum();
        let _ = writeln!(out, "{c} {gt_pixels} {} {}", fmt_opt(acc[c]), fmt_opt(iou[c]));
    }
    let _ = writeln!(out, "class_avg {}", fmt_opt(class_avg));
    let _ = writeln!(out, "miou {}", fmt_opt(miou));
    let _ = writeln!(out, "pixels {}", cm.total());
    Ok(out)
}

fn parse_scale_spec(spec: &str) -> CliResult<(usize, f64)> {
    let (class, factor) = spec
        .split_once(':')
        .ok_or_else(|| CliError::usage(format!("--scale expects CLASS:FACTOR, got '{spec}'")))?;
    let class = class
        .parse::<usize>()
        .map_err(|_| CliError::usage(format!("--scale class id '{class}' is not an integer")))?;
    let factor = factor
        .parse::<f64>()
        .map_err(|_| CliError::usage(format!("--scale factor '{factor}' is not a number")))?;
    Ok((class, factor))
}

pub fn class_weights(
    labels_dir: &Path,
    num_classes: usize,
    ignore_id: u8,
    scales: &[String],
) -> CliResult<String> {
    if num_classes == 0 {
        return Err(CliError::usage("--num-classes must be at least 1"));
    }
    let names = sorted_pgm_names(labels_dir)?;
    if names.is_empty() {
        return Err(CliError::Data(format!("no .pgm label maps in {}", labels_dir.display())));
    }
    let maps = lmd_core::par::map_indexed(names.len(), |i| -> CliResult<LabelMap> {
        Ok(netpbm::read_pgm(labels_dir.join(&names[i]))?)
    });
    let maps: Vec<LabelMap> = maps.into_iter().collect::<CliResult<_>>()?;
    let freq = class_frequencies(&maps, num_classes, Some(ignore_id))?;
    let mut weights = median_frequency_weights(&freq)?;
    for spec in scales {
        let (class, factor) = parse_scale_spec(spec)?;
        weights = scale_class_weight(&weights, class, factor)
            .map_err(|e| CliError::usage(e.to_string()))?;
    }

    let mut out = String::new();
    let _ = writeln!(out, "class present_images p w");
    for c in 0..num_classes {
        let _ = writeln!(
            out,
            "{c} {} {} {}",
            freq.present_images[c],
            fmt_opt(freq.frequencies[c]),
            weights.weights[c]
        );
    }
    Ok(out)
}
