mod commands;
mod errors;
mod pipeline;
mod render;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{DetectInput, PostOutputs};
use errors::CliResult;
use pipeline::PostConfig;

#[derive(Parser)]
#[command(
    name = "lmd",
    version,
    about = "Road lane marking detection: segmentation, grouping and cubic lane fitting"
)]
struct Cli {
    /// Worker threads for data-parallel stages (0 = one per core). Results
    /// are identical for every thread count.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the network layer table, parameter count and receptive field.
    Info {
        #[arg(long, default_value_t = 12)]
        num_classes: usize,
    },
    /// Write a deterministic, randomly initialized weight file.
    InitWeights {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        num_classes: usize,
    },
    /// Segment a P6 road image and write the P5 label map.
    Infer {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 3)]
        num_classes: usize,
        #[arg(long)]
        labels_out: PathBuf,
    },
    /// Full pipeline: segmentation, lane grouping, model fitting, overlay.
    Detect(DetectArgs),
    /// Lane grouping and model fitting on an existing P5 label map.
    Postprocess(PostprocessArgs),
    /// Per-class accuracy and IoU of predicted label maps vs ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        num_classes: usize,
        #[arg(long, default_value_t = 255)]
        ignore_id: u8,
    },
    /// Median frequency balancing weights over a directory of label maps.
    ClassWeights {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        num_classes: usize,
        #[arg(long, default_value_t = 255)]
        ignore_id: u8,
        /// Multiply one class weight, e.g. `--scale 1:5`. May be repeated.
        #[arg(long)]
        scale: Vec<String>,
    },
}

#[derive(Args)]
struct DetectArgs {
    /// P6 road image; requires --weights.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Weight file produced by init-weights (or any valid .lmdw).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Skip inference and post-process this P5 label map instead.
    #[arg(long)]
    labels_in: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    num_classes: usize,
    #[command(flatten)]
    post: PostFlags,
    /// Write the P5 label map here.
    #[arg(long)]
    labels_out: Option<PathBuf>,
    /// Write the P5 group map here (pixel = merged group id).
    #[arg(long)]
    groups_out: Option<PathBuf>,
    /// Write a P6 overlay with the fitted lanes here.
    #[arg(long)]
    overlay_out: Option<PathBuf>,
    /// Write the text report here instead of stdout.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct PostprocessArgs {
    /// P5 label map to post-process.
    #[arg(long)]
    labels: PathBuf,
    /// Optional P6 image used as the overlay background.
    #[arg(long)]
    image: Option<PathBuf>,
    #[command(flatten)]
    post: PostFlags,
    /// Write the P5 group map here (pixel = merged group id).
    #[arg(long)]
    groups_out: Option<PathBuf>,
    #[arg(long)]
    overlay_out: Option<PathBuf>,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct PostFlags {
    /// Class id treated as lane marking.
    #[arg(long, default_value_t = 1)]
    lane_class: u8,
    /// Pixel connectivity for component labeling: 4 or 8.
    #[arg(long, default_value_t = 8)]
    connectivity: u8,
    /// Components smaller than this are discarded as noise.
    #[arg(long, default_value_t = 8)]
    min_pixels: usize,
    /// Supermarking merge threshold; default is 5% of the image diagonal.
    #[arg(long)]
    merge_threshold: Option<f64>,
    /// Vertical bands used to pick curve-fitting candidates.
    #[arg(long, default_value_t = 32)]
    blocks: usize,
}

impl PostFlags {
    fn to_config(&self) -> CliResult<PostConfig> {
        Ok(PostConfig {
            lane_class: self.lane_class,
            connectivity: commands::connectivity_from_flag(self.connectivity)?,
            min_pixels: self.min_pixels,
            merge_threshold: self.merge_threshold,
            blocks: self.blocks,
        })
    }
}

fn run(command: Command) -> CliResult<String> {
    match command {
        Command::Info { num_classes } => commands::info(num_classes),
        Command::InitWeights { out, seed, num_classes } => {
            commands::init_weights(&out, seed, num_classes)
        }
        Command::Infer { image, weights, num_classes, labels_out } => {
            commands::infer(&image, &weights, num_classes, &labels_out)
        }
        Command::Detect(args) => {
            let cfg = args.post.to_config()?;
            let input = DetectInput {
                image: args.image,
                weights: args.weights,
                labels_in: args.labels_in,
                num_classes: args.num_classes,
            };
            let outputs = PostOutputs {
                labels_out: args.labels_out,
                groups_out: args.groups_out,
                overlay_out: args.overlay_out,
                report_out: args.report_out,
            };
            commands::detect(&input, &cfg, &outputs)
        }
        Command::Postprocess(args) => {
            let cfg = args.post.to_config()?;
            let input = DetectInput {
                image: None,
                weights: None,
                labels_in: Some(args.labels),
                num_classes: 0,
            };
            let outputs = PostOutputs {
                labels_out: None,
                groups_out: args.groups_out,
                overlay_out: args.overlay_out,
                report_out: args.report_out,
            };
            // reuse the detect path; an explicit image only changes the overlay base
            match args.image {
                None => commands::detect(&input, &cfg, &outputs),
                Some(image) => commands::postprocess_with_image(&input, &image, &cfg, &outputs),
            }
        }
        Command::Evaluate { pred, gt, num_classes, ignore_id } => {
            commands::evaluate(&pred, &gt, num_classes, ignore_id)
        }
        Command::ClassWeights { labels, num_classes, ignore_id, scale } => {
            commands::class_weights(&labels, num_classes, ignore_id, &scale)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprintln!("{e}");
            std::process::exit(1);
        }
    };

    #[cfg(feature = "parallel")]
    if cli.threads > 0 {
        // ignore failure: the pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = cli.threads;

    match run(cli.command) {
        Ok(output) => {
            print!("{output}");
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
