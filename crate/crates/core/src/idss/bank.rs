use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::raster::Class;
use crate::{Error, Execution, Result};

use super::kmeans::{nearest, squared_distance, MiniBatchKMeans};
use super::kmedoids::kmedoids;
use super::sampling::{ClassSamples, Provenance};

pub const DEFAULT_PROTOTYPES_PER_CLASS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClusterMethod {
    #[serde(rename = "minibatch-kmeans")]
    MiniBatchKMeans,
    #[serde(rename = "kmedoids")]
    KMedoids,
}

/// What a prototype stores for a k-means cluster: the centre itself, or the
/// real training pixel closest to it. Medoids are always real pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrototypeMode {
    #[serde(rename = "centroid")]
    Centroid,
    #[serde(rename = "nearest-real-pixel")]
    NearestRealPixel,
}

macro_rules! str_enum {
    ($ty:ty, $($name:literal => $variant:expr),+) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::invalid(format!("unknown {} {other:?}", stringify!($ty)))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $variant { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

str_enum!(ClusterMethod, "minibatch-kmeans" => ClusterMethod::MiniBatchKMeans, "kmedoids" => ClusterMethod::KMedoids);
str_enum!(PrototypeMode, "centroid" => PrototypeMode::Centroid, "nearest-real-pixel" => PrototypeMode::NearestRealPixel);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub class: Class,
    /// Latent vector used for distance computations.
    pub y: Vec<f32>,
    /// Raw band spectrum. For centroid-mode prototypes this is the mean of
    /// the cluster members' spectra, not a real pixel.
    pub x: Vec<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeBank {
    pub method: ClusterMethod,
    pub mode: PrototypeMode,
    pub seed: u64,
    #[serde(rename = "D")]
    pub latent_dim: usize,
    #[serde(rename = "n")]
    pub raw_dim: usize,
    #[serde(rename = "L_per_class")]
    pub per_class: usize,
    pub prototypes: Vec<Prototype>,
}

impl PrototypeBank {
    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn class_counts(&self) -> BTreeMap<Class, usize> {
        let mut counts = BTreeMap::new();
        for p in &self.prototypes {
            *counts.entry(p.class).or_default() += 1;
        }
        counts
    }

    /// Checks the structural invariants of a (possibly hand-edited) bank.
    pub fn validate(&self) -> Result<()> {
        if self.prototypes.is_empty() {
            return Err(Error::invalid("prototype bank is empty"));
        }
        for (i, p) in self.prototypes.iter().enumerate() {
            if p.class == Class::Invalid {
                return Err(Error::invalid(format!("prototype {i} has class Invalid")));
            }
            if p.y.len() != self.latent_dim || p.x.len() != self.raw_dim {
                return Err(Error::shape(format!(
                    "prototype {i} has |y|={} |x|={}, bank declares D={} n={}",
                    p.y.len(),
                    p.x.len(),
                    self.latent_dim,
                    self.raw_dim
                )));
            }
            if p.y.iter().chain(&p.x).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "prototype {i} has non-finite values"
                )));
            }
        }
        for (class, n) in self.class_counts() {
            if n > self.per_class {
                return Err(Error::invalid(format!(
                    "{n} prototypes for {class:?} exceed L_per_class={}",
                    self.per_class
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let bank: PrototypeBank = serde_json::from_str(s)?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankConfig {
    pub method: ClusterMethod,
    pub mode: PrototypeMode,
    pub per_class: usize,
    pub batch_size: usize,
    /// Mini-batch iterations; `None` means 100 per prototype.
    pub iters: Option<usize>,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for BankConfig {
    fn default() -> Self {
        BankConfig {
            method: ClusterMethod::MiniBatchKMeans,
            mode: PrototypeMode::NearestRealPixel,
            per_class: DEFAULT_PROTOTYPES_PER_CLASS,
            batch_size: super::kmeans::DEFAULT_BATCH_SIZE,
            iters: None,
            seed: 0,
            exec: Execution::default(),
        }
    }
}

/// Index of the sample whose latent vector is closest to `centre`; ties go
/// to the lower index.
pub fn nearest_real_pixel(centre: &[f64], samples: &ClassSamples) -> Result<usize> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples to pick a prototype from"));
    }
    let mut best = (0, f64::INFINITY);
    for i in 0..samples.len() {
        let d = squared_distance(centre, samples.latent(i));
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

fn real_prototype(class: Class, samples: &ClassSamples, i: usize) -> Prototype {
    Prototype {
        class,
        y: samples.latent(i).to_vec(),
        x: samples.raw(i).to_vec(),
        provenance: Some(samples.provenance[i].clone()),
    }
}

/// Clusters every class's latent samples and turns the clusters into
/// prototypes. Classes are emitted in label order.
pub fn build_prototype_bank(
    samples: &BTreeMap<Class, ClassSamples>,
    config: &BankConfig,
) -> Result<PrototypeBank> {
    if config.per_class == 0 {
        return Err(Error::invalid("L_per_class must be at least 1"));
    }
    let first = samples
        .values()
        .next()
        .ok_or_else(|| Error::invalid("no classes to build prototypes for"))?;
    let (latent_dim, raw_dim) = (first.latent_dim, first.raw_dim);
    for (&class, s) in samples {
        if s.is_empty() {
            return Err(Error::EmptyClass(class));
        }
        if (s.latent_dim, s.raw_dim) != (latent_dim, raw_dim) {
            return Err(Error::shape(format!(
                "{class:?} samples have D={} n={}, expected D={latent_dim} n={raw_dim}",
                s.latent_dim, s.raw_dim
            )));
        }
    }

    let classes: Vec<(&Class, &ClassSamples)> = samples.iter().collect();
    // Classes train independently; within a class clustering stays sequential.
    let per_class = config.exec.map_indexed(classes.len(), |c| {
        let (&class, s) = classes[c];
        class_prototypes(class, s, config)
    });
    let mut prototypes = Vec::new();
    for p in per_class {
        prototypes.extend(p?);
    }

    Ok(PrototypeBank {
        method: config.method,
        mode: config.mode,
        seed: config.seed,
        latent_dim,
        raw_dim,
        per_class: config.per_class,
        prototypes,
    })
}

fn class_prototypes(class: Class, s: &ClassSamples, config: &BankConfig) -> Result<Vec<Prototype>> {
    let seed = config.seed ^ (class.code() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    match config.method {
        ClusterMethod::KMedoids => {
            let medoids = kmedoids(
                &s.latent,
                s.latent_dim,
                config.per_class,
                Execution::Sequential,
            )?;
            Ok(medoids
                .into_iter()
                .map(|i| real_prototype(class, s, i))
                .collect())
        }
        ClusterMethod::MiniBatchKMeans => {
            let km = MiniBatchKMeans {
                clusters: config.per_class,
                batch_size: config.batch_size,
                iters: config
                    .iters
                    .unwrap_or(super::kmeans::DEFAULT_ITERS_PER_CLUSTER * config.per_class),
                seed,
            };
            let centres = km.fit(&s.latent, s.latent_dim, Execution::Sequential)?;
            match config.mode {
                PrototypeMode::NearestRealPixel => centres
                    .iter()
                    .map(|c| Ok(real_prototype(class, s, nearest_real_pixel(c, s)?)))
                    .collect(),
                PrototypeMode::Centroid => Ok(centroid_prototypes(class, s, &centres)),
            }
        }
    }
}

fn centroid_prototypes(class: Class, s: &ClassSamples, centres: &[Vec<f64>]) -> Vec<Prototype> {
    let mut sums = vec![vec![0.0f64; s.raw_dim]; centres.len()];
    let mut counts = vec![0usize; centres.len()];
    for i in 0..s.len() {
        let c = nearest(centres, s.latent(i)).0;
        counts[c] += 1;
        for (acc, &v) in sums[c].iter_mut().zip(s.raw(i)) {
            *acc += v as f64;
        }
    }
    centres
        .iter()
        .enumerate()
        .map(|(c, centre)| {
            let x = if counts[c] > 0 {
                sums[c]
                    .iter()
                    .map(|&v| (v / counts[c] as f64) as f32)
                    .collect()
            } else {
                // no member: fall back to the spectrum of the closest sample
                let i = nearest_real_pixel(centre, s).expect("class samples are nonempty");
                s.raw(i).to_vec()
            };
            Prototype {
                class,
                y: centre.iter().map(|&v| v as f32).collect(),
                x,
                provenance: None,
            }
        })
        .collect()
}
