//! `floodsense`: novelty detection, prototype segmentation and flood
//! reporting over multispectral image series.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "floodsense",
    version,
    about = "Flood detection over multispectral image series"
)]
struct Cli {
    #[command(flatten)]
    flags: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score every frame of a series and write the verdict log
    Detect {
        manifest: Option<PathBuf>,
        /// Also write similarity maps of normal frames
        #[arg(long)]
        all_maps: bool,
    },
    /// Threshold a similarity map into a binary change map
    ChangeMap { similarity: PathBuf },
    /// Build a prototype bank from a labelled manifest
    TrainBank { manifest: Option<PathBuf> },
    /// Segment frames with a prototype bank (or an NDWI baseline)
    Segment {
        manifest: Option<PathBuf>,
        /// Only this image id
        #[arg(long)]
        id: Option<String>,
        /// Use an NDWI water index instead of a bank: 1 = (B3-B8)/(B3+B8), 2 = (B8-B11)/(B8+B11)
        #[arg(long, value_name = "VARIANT")]
        ndwi: Option<u8>,
        #[arg(long, default_value_t = 0.0, requires = "ndwi")]
        ndwi_threshold: f32,
    },
    /// List the prototypes behind one pixel's label
    Explain {
        manifest: Option<PathBuf>,
        #[arg(long)]
        id: String,
        /// Pixel as ROW,COL
        #[arg(long, value_parser = parse_pixel)]
        pixel: (usize, usize),
        /// Print JSON instead of text
        #[arg(long)]
        json: bool,
    },
    /// Run all stages; dense stages only on novel frames
    Pipeline {
        manifest: Option<PathBuf>,
        /// Skip PNG renderings
        #[arg(long)]
        no_png: bool,
    },
    /// Compare predictions with ground truth and print a CSV row
    Eval {
        #[arg(value_enum, value_name = "MODE")]
        metric: EvalMode,
        /// Predicted files (class maps, a verdict log, or change maps)
        #[arg(long, num_args = 1.., required = true)]
        pred: Vec<PathBuf>,
        /// Ground-truth files, paired with --pred in order
        #[arg(long, num_args = 1.., required = true)]
        gt: Vec<PathBuf>,
        /// Validity masks for change mode, paired in order
        #[arg(long, num_args = 1..)]
        valid: Vec<PathBuf>,
    },
    /// Render a stored map as PNG
    Render {
        #[arg(value_enum)]
        kind: RenderKind,
        input: PathBuf,
        /// Class map needed by `confidence` and `change`
        #[arg(long)]
        classes: Option<PathBuf>,
        /// Canvas size for `projection`
        #[arg(long, default_value_t = 512)]
        size: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    Segmentation,
    Anomaly,
    Change,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RenderKind {
    /// Class map colours
    Classes,
    /// Class colours lightened below the confidence threshold
    Confidence,
    /// Changed water over gray
    Change,
    /// Any binary mask over gray
    Mask,
    /// Prototype bank scatter on the top two principal axes
    Projection,
}

fn parse_pixel(s: &str) -> Result<(usize, usize), String> {
    let (h, v) = s.split_once(',').ok_or("expected ROW,COL")?;
    Ok((
        h.trim().parse().map_err(|e| format!("row: {e}"))?,
        v.trim().parse().map_err(|e| format!("col: {e}"))?,
    ))
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub const INPUT: u8 = 2;
    pub const CONFIG: u8 = 3;

    pub fn input(message: impl fmt::Display) -> Self {
        Failure {
            code: Self::INPUT,
            message: message.to_string(),
        }
    }

    pub fn config(message: impl fmt::Display) -> Self {
        Failure {
            code: Self::CONFIG,
            message: message.to_string(),
        }
    }

    pub fn context(self, what: impl fmt::Display) -> Self {
        Failure {
            code: self.code,
            message: format!("{what}: {}", self.message),
        }
    }
}

impl From<floodsense_core::Error> for Failure {
    fn from(e: floodsense_core::Error) -> Self {
        Failure::input(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(&cli.flags)?;
    match cli.command {
        Command::Detect { manifest, all_maps } => {
            commands::detect(&cfg, manifest.as_deref(), all_maps)
        }
        Command::ChangeMap { similarity } => commands::change_map(&cfg, &similarity),
        Command::TrainBank { manifest } => commands::train_bank(&cfg, manifest.as_deref()),
        Command::Segment {
            manifest,
            id,
            ndwi,
            ndwi_threshold,
        } => commands::segment(
            &cfg,
            manifest.as_deref(),
            id.as_deref(),
            ndwi.map(|v| (v, ndwi_threshold)),
        ),
        Command::Explain {
            manifest,
            id,
            pixel,
            json,
        } => commands::explain(&cfg, manifest.as_deref(), &id, pixel, json),
        Command::Pipeline { manifest, no_png } => {
            commands::pipeline(&cfg, manifest.as_deref(), !no_png)
        }
        Command::Eval {
            metric,
            pred,
            gt,
            valid,
        } => match metric {
            EvalMode::Segmentation => commands::eval_segmentation(&cfg, &pred, &gt),
            EvalMode::Anomaly => commands::eval_anomaly(&cfg, &pred, &gt),
            EvalMode::Change => commands::eval_change(&cfg, &pred, &gt, &valid),
        },
        Command::Render {
            kind,
            input,
            classes,
            size,
        } => commands::render(&cfg, kind, &input, classes.as_deref(), size),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
