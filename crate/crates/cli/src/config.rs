//! Run configuration: defaults, then an optional JSON file, then flags.

use std::path::{Path, PathBuf};

use clap::Args;
use floodsense_core::decision::DEFAULT_DECISION_THRESHOLD;
use floodsense_core::features::ProviderSpec;
use floodsense_core::idss::{
    BankConfig, ClusterMethod, PrototypeMode, DEFAULT_BATCH_SIZE, DEFAULT_CONFIDENCE_THRESHOLD,
    DEFAULT_K, DEFAULT_MEDOID_SAMPLE_CAP, DEFAULT_PROTOTYPES_PER_CLASS, DEFAULT_SAMPLE_CAP,
};
use floodsense_core::pipeline::PipelineConfig;
use floodsense_core::rse::{DetectorConfig, DEFAULT_EPSILON, DEFAULT_M, DEFAULT_WARMUP};
use floodsense_core::Execution;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub m: f64,
    pub epsilon: f64,
    pub k: usize,
    /// Prototypes per class.
    pub prototypes: usize,
    pub confidence_threshold: f64,
    /// Percent of valid pixels.
    pub decision_threshold: f64,
    pub provider: String,
    pub bank: Option<PathBuf>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub method: ClusterMethod,
    pub mode: PrototypeMode,
    pub warmup: usize,
    /// Training samples kept per class; defaults depend on the method.
    pub cap: Option<usize>,
    pub iters: Option<usize>,
    pub batch_size: usize,
    pub despeckle: bool,
    pub sequential: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            m: DEFAULT_M,
            epsilon: DEFAULT_EPSILON,
            k: DEFAULT_K,
            prototypes: DEFAULT_PROTOTYPES_PER_CLASS,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            decision_threshold: DEFAULT_DECISION_THRESHOLD,
            provider: "identity".into(),
            bank: None,
            seed: 0,
            out: None,
            method: ClusterMethod::MiniBatchKMeans,
            mode: PrototypeMode::NearestRealPixel,
            warmup: DEFAULT_WARMUP,
            cap: None,
            iters: None,
            batch_size: DEFAULT_BATCH_SIZE,
            despeckle: false,
            sequential: false,
        }
    }
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration; flags take precedence over its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Sigma multiplier of the novelty rule
    #[arg(long, global = true)]
    pub m: Option<f64>,
    /// Pixel similarity below which a pixel counts as changed
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Neighbours in the prototype vote
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Prototypes per class
    #[arg(long, global = true)]
    pub prototypes: Option<usize>,
    #[arg(long, global = true)]
    pub confidence_threshold: Option<f64>,
    /// Percent of valid pixels that must be new water to declare a flood
    #[arg(long, global = true)]
    pub decision_threshold: Option<f64>,
    /// minibatch-kmeans or kmedoids
    #[arg(long, global = true)]
    pub method: Option<ClusterMethod>,
    /// centroid or nearest-real-pixel
    #[arg(long, global = true)]
    pub mode: Option<PrototypeMode>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `identity` or a directory of `<id>.features.imtf` tensors
    #[arg(long, global = true)]
    pub provider: Option<String>,
    /// Prototype bank JSON
    #[arg(long, global = true)]
    pub bank: Option<PathBuf>,
    /// Output file or directory
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    /// Leading frames never flagged as novel (at least 1)
    #[arg(long, global = true)]
    pub warmup: Option<usize>,
    /// Training samples kept per class
    #[arg(long, global = true)]
    pub cap: Option<usize>,
    /// Mini-batch k-means iterations (default 100 per prototype)
    #[arg(long, global = true)]
    pub iters: Option<usize>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Remove isolated changed pixels with a 3x3 opening
    #[arg(long, global = true)]
    pub despeckle: bool,
    /// Disable data-parallel execution
    #[arg(long, global = true)]
    pub sequential: bool,
}

impl RunConfig {
    pub fn resolve(flags: &Overrides) -> Result<Self, Failure> {
        let mut cfg = match &flags.config {
            Some(path) => Self::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),+) => {
                $(if let Some(v) = flags.$field.clone() { cfg.$field = v; })+
            };
        }
        take!(
            m,
            epsilon,
            k,
            prototypes,
            confidence_threshold,
            decision_threshold,
            method,
            mode,
            seed,
            provider,
            warmup,
            batch_size
        );
        if flags.bank.is_some() {
            cfg.bank = flags.bank.clone();
        }
        if flags.out.is_some() {
            cfg.out = flags.out.clone();
        }
        if flags.cap.is_some() {
            cfg.cap = flags.cap;
        }
        if flags.iters.is_some() {
            cfg.iters = flags.iters;
        }
        cfg.despeckle |= flags.despeckle;
        cfg.sequential |= flags.sequential;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_file(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        // paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.manifest, &mut cfg.bank, &mut cfg.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.provider != "identity" {
            let dir = cfg.provider.strip_prefix("dir:").unwrap_or(&cfg.provider);
            if !dir.is_empty() && Path::new(dir).is_relative() {
                cfg.provider = format!("dir:{}", base.join(dir).display());
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Failure::config(format!(
                    "{name} must be in [0, 1], got {v}"
                )))
            }
        };
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Failure::config(format!(
                "m must be positive, got {}",
                self.m
            )));
        }
        unit("epsilon", self.epsilon)?;
        unit("confidence threshold", self.confidence_threshold)?;
        if !(0.0..=100.0).contains(&self.decision_threshold) {
            return Err(Failure::config(format!(
                "decision threshold must be in [0, 100], got {}",
                self.decision_threshold
            )));
        }
        if self.k == 0 {
            return Err(Failure::config("k must be at least 1"));
        }
        if self.prototypes == 0 {
            return Err(Failure::config("prototypes must be at least 1"));
        }
        if self.cap == Some(0) || self.batch_size == 0 || self.iters == Some(0) {
            return Err(Failure::config(
                "cap, batch size and iterations must be positive",
            ));
        }
        self.provider_spec()?;
        Ok(())
    }

    pub fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }

    pub fn provider_spec(&self) -> Result<ProviderSpec, Failure> {
        self.provider
            .parse()
            .map_err(|e| Failure::config(format!("provider: {e}")))
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            m: self.m,
            warmup: self.warmup,
            keep_all_maps: false,
            exec: self.exec(),
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            detector: self.detector(),
            epsilon: self.epsilon,
            k: self.k,
            confidence_threshold: self.confidence_threshold,
            decision_threshold: self.decision_threshold,
            despeckle: self.despeckle,
        }
    }

    pub fn bank_config(&self) -> BankConfig {
        BankConfig {
            method: self.method,
            mode: self.mode,
            per_class: self.prototypes,
            batch_size: self.batch_size,
            iters: self.iters,
            seed: self.seed,
            exec: self.exec(),
        }
    }

    pub fn sample_cap(&self) -> usize {
        self.cap.unwrap_or(match self.method {
            ClusterMethod::MiniBatchKMeans => DEFAULT_SAMPLE_CAP,
            ClusterMethod::KMedoids => DEFAULT_MEDOID_SAMPLE_CAP,
        })
    }

    pub fn manifest_path(&self, positional: Option<&Path>) -> Result<PathBuf, Failure> {
        positional
            .map(Path::to_path_buf)
            .or_else(|| self.manifest.clone())
            .ok_or_else(|| {
                Failure::config(
                    "no manifest given (positional argument or \"manifest\" in --config)",
                )
            })
    }

    pub fn bank_path(&self) -> Result<&Path, Failure> {
        self.bank
            .as_deref()
            .ok_or_else(|| Failure::config("--bank is required"))
    }

    pub fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}
