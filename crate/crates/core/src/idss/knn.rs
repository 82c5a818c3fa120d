use serde::Serialize;

use crate::features::{FeatureMap, ProviderSpec};
use crate::raster::{check_dims, Class, ClassMap, ConfidenceMap, MultispectralImage};
use crate::{Error, Execution, Result};

use super::bank::PrototypeBank;
use super::sampling::Provenance;

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.8;

/// Flat copy of a bank's latent vectors for fast exact search.
#[derive(Debug, Clone)]
pub struct PrototypeIndex<'a> {
    bank: &'a PrototypeBank,
    dim: usize,
    latent: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub prototype: usize,
    pub class: Class,
    /// Euclidean distance in latent space.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: Class,
    /// Share of the k neighbours voting for `class`.
    pub confidence: f64,
    /// Nearest prototypes, closest first.
    pub neighbors: Vec<Neighbor>,
}

impl<'a> PrototypeIndex<'a> {
    pub fn new(bank: &'a PrototypeBank) -> Result<Self> {
        if bank.is_empty() {
            return Err(Error::invalid("prototype bank is empty"));
        }
        let dim = bank.latent_dim;
        let mut latent = Vec::with_capacity(bank.len() * dim);
        for (i, p) in bank.prototypes.iter().enumerate() {
            if p.y.len() != dim {
                return Err(Error::shape(format!(
                    "prototype {i} has |y|={}, expected {dim}",
                    p.y.len()
                )));
            }
            latent.extend_from_slice(&p.y);
        }
        Ok(PrototypeIndex { bank, dim, latent })
    }

    pub fn bank(&self) -> &PrototypeBank {
        self.bank
    }

    /// Exact k-nearest-neighbour vote over all prototypes of all classes.
    ///
    /// Neighbours are ordered by distance, then prototype index. The winner
    /// has the most votes; ties go to the class whose neighbours have the
    /// smaller summed distance, then to the lower class code.
    pub fn classify(&self, query: &[f32], k: usize) -> Result<Classification> {
        if query.len() != self.dim {
            return Err(Error::shape(format!(
                "query has {} features, bank has D={}",
                query.len(),
                self.dim
            )));
        }
        let total = self.bank.len();
        if k == 0 || k > total {
            return Err(Error::invalid(format!("k={k} must be in 1..={total}")));
        }
        let mut scored: Vec<(f64, usize)> = self
            .latent
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(i, y)| {
                let d: f64 = y
                    .iter()
                    .zip(query)
                    .map(|(&a, &b)| {
                        let t = a as f64 - b as f64;
                        t * t
                    })
                    .sum();
                (d, i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < total {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(order);

        let neighbors: Vec<Neighbor> = scored
            .into_iter()
            .map(|(d2, i)| Neighbor {
                prototype: i,
                class: self.bank.prototypes[i].class,
                distance: d2.sqrt(),
            })
            .collect();

        let mut votes = [(0usize, 0.0f64); 4];
        for n in &neighbors {
            let slot = &mut votes[n.class.code() as usize];
            slot.0 += 1;
            slot.1 += n.distance;
        }
        let mut winner = Class::LABELLED[0];
        for class in Class::LABELLED {
            let (count, dist) = votes[class.code() as usize];
            let (best_count, best_dist) = votes[winner.code() as usize];
            if count > best_count || (count == best_count && dist < best_dist) {
                winner = class;
            }
        }
        Ok(Classification {
            class: winner,
            confidence: votes[winner.code() as usize].0 as f64 / k as f64,
            neighbors,
        })
    }
}

/// One-off classification of a latent vector. Use [`PrototypeIndex`] when
/// classifying many pixels.
pub fn classify_pixel(f: &[f32], bank: &PrototypeBank, k: usize) -> Result<(Class, f64)> {
    let c = PrototypeIndex::new(bank)?.classify(f, k)?;
    Ok((c.class, c.confidence))
}

/// Labels every valid pixel of a feature map; invalid pixels get
/// `Class::Invalid` and confidence 0.
pub fn segment_features(
    features: &FeatureMap,
    valid: &[bool],
    bank: &PrototypeBank,
    k: usize,
    exec: Execution,
) -> Result<(ClassMap, ConfidenceMap)> {
    if features.depth != bank.latent_dim {
        return Err(Error::shape(format!(
            "features have D={}, bank has D={}",
            features.depth, bank.latent_dim
        )));
    }
    let n = features.height * features.width;
    if valid.len() != n {
        return Err(Error::shape("validity mask does not match feature map"));
    }
    let index = PrototypeIndex::new(bank)?;
    if k == 0 || k > bank.len() {
        return Err(Error::invalid(format!(
            "k={k} must be in 1..={}",
            bank.len()
        )));
    }
    let results = exec.map_indexed(n, |i| {
        if valid[i] {
            index
                .classify(features.pixel(i), k)
                .map(|c| (c.class, c.confidence as f32))
        } else {
            Ok((Class::Invalid, 0.0))
        }
    });
    let mut labels = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for r in results {
        let (c, conf) = r?;
        labels.push(c);
        values.push(conf);
    }
    Ok((
        ClassMap {
            height: features.height,
            width: features.width,
            labels,
        },
        ConfidenceMap {
            height: features.height,
            width: features.width,
            values,
        },
    ))
}

pub fn segment_image(
    image: &MultispectralImage,
    bank: &PrototypeBank,
    provider: &ProviderSpec,
    k: usize,
    exec: Execution,
) -> Result<(ClassMap, ConfidenceMap)> {
    let features = provider.features(image)?;
    segment_features(&features, image.valid_mask(), bank, k, exec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainedNeighbor {
    pub rank: usize,
    pub prototype: usize,
    pub class: Class,
    pub distance: f64,
    /// Raw band spectrum of the prototype.
    pub spectrum: Vec<f32>,
    pub provenance: Option<Provenance>,
}

/// Why a pixel received its label: the neighbouring prototypes that voted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PixelExplanation {
    pub image_id: String,
    pub h: usize,
    pub v: usize,
    pub k: usize,
    pub class: Class,
    pub confidence: f64,
    pub neighbors: Vec<ExplainedNeighbor>,
}

impl PixelExplanation {
    /// A short plain-text account, e.g. for terminal output.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "pixel ({}, {}) of {}: {} with confidence {:.2} ({} of {} nearest prototypes)\n",
            self.h,
            self.v,
            self.image_id,
            self.class.name(),
            self.confidence,
            (self.confidence * self.k as f64).round() as usize,
            self.k
        );
        for n in &self.neighbors {
            let origin = match &n.provenance {
                Some(p) => format!("training pixel ({}, {}) of {}", p.h, p.v, p.image_id),
                None => "cluster centre".to_string(),
            };
            out.push_str(&format!(
                "  #{:<2} {:<5} d={:.4}  {}\n",
                n.rank,
                n.class.name(),
                n.distance,
                origin
            ));
        }
        out
    }
}

pub fn explain_pixel(
    image: &MultispectralImage,
    h: usize,
    v: usize,
    bank: &PrototypeBank,
    provider: &ProviderSpec,
    k: usize,
) -> Result<PixelExplanation> {
    if h >= image.height() || v >= image.width() || !image.is_valid(image.index(h, v)) {
        return Err(Error::InvalidPixel { h, v });
    }
    let features = provider.features(image)?;
    if features.depth != bank.latent_dim {
        return Err(Error::shape(format!(
            "features have D={}, bank has D={}",
            features.depth, bank.latent_dim
        )));
    }
    let c = PrototypeIndex::new(bank)?.classify(features.pixel(image.index(h, v)), k)?;
    let neighbors = c
        .neighbors
        .iter()
        .enumerate()
        .map(|(rank, n)| {
            let p = &bank.prototypes[n.prototype];
            ExplainedNeighbor {
                rank: rank + 1,
                prototype: n.prototype,
                class: n.class,
                distance: n.distance,
                spectrum: p.x.clone(),
                provenance: p.provenance.clone(),
            }
        })
        .collect();
    Ok(PixelExplanation {
        image_id: image.id.clone(),
        h,
        v,
        k,
        class: c.class,
        confidence: c.confidence,
        neighbors,
    })
}

/// High-confidence flags: `confidence ≥ tau`. Invalid pixels (label 0) are
/// never flagged.
pub fn threshold_confidence(
    conf: &ConfidenceMap,
    classes: &ClassMap,
    tau: f64,
) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!(
            "confidence threshold {tau} outside [0, 1]"
        )));
    }
    check_dims(
        (conf.height, conf.width),
        (classes.height, classes.width),
        "confidence vs class map",
    )?;
    Ok(conf
        .values
        .iter()
        .zip(&classes.labels)
        .map(|(&c, &l)| l != Class::Invalid && is_high_confidence(c as f64, tau))
        .collect())
}

/// `confidence ≥ tau`, tolerant to the f32 storage of confidence maps.
pub fn is_high_confidence(confidence: f64, tau: f64) -> bool {
    confidence >= tau - 1e-6
}
