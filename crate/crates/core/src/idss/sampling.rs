use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::ProviderSpec;
use crate::raster::{check_dims, Class, ClassMap, MultispectralImage};
use crate::{Error, Result};

/// Where a training pixel came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub image_id: String,
    pub h: usize,
    pub v: usize,
}

/// Training pixels of one class: latent vectors, raw spectra and origins,
/// stored as flat row-major matrices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassSamples {
    pub latent_dim: usize,
    pub raw_dim: usize,
    pub latent: Vec<f32>,
    pub raw: Vec<f32>,
    pub provenance: Vec<Provenance>,
}

impl ClassSamples {
    pub fn new(latent_dim: usize, raw_dim: usize) -> Self {
        ClassSamples {
            latent_dim,
            raw_dim,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }

    pub fn latent(&self, i: usize) -> &[f32] {
        &self.latent[i * self.latent_dim..(i + 1) * self.latent_dim]
    }

    pub fn raw(&self, i: usize) -> &[f32] {
        &self.raw[i * self.raw_dim..(i + 1) * self.raw_dim]
    }

    pub fn push(&mut self, latent: &[f32], raw: &[f32], provenance: Provenance) {
        self.latent.extend_from_slice(latent);
        self.raw.extend_from_slice(raw);
        self.provenance.push(provenance);
    }

    fn replace(&mut self, slot: usize, latent: &[f32], raw: &[f32], provenance: Provenance) {
        self.latent[slot * self.latent_dim..(slot + 1) * self.latent_dim].copy_from_slice(latent);
        self.raw[slot * self.raw_dim..(slot + 1) * self.raw_dim].copy_from_slice(raw);
        self.provenance[slot] = provenance;
    }
}

/// Streams labelled images into per-class uniform reservoirs.
///
/// Pixels are visited in image order, then row-major. A single seeded RNG
/// drives all reservoirs, so the result depends only on the seed and the
/// order in which images are added.
#[derive(Debug)]
pub struct ClassSampler {
    cap: usize,
    rng: ChaCha8Rng,
    reservoirs: BTreeMap<Class, (usize, ClassSamples)>,
}

impl ClassSampler {
    pub fn new(classes: &[Class], cap_per_class: usize, seed: u64) -> Result<Self> {
        if cap_per_class == 0 {
            return Err(Error::invalid("cap per class must be at least 1"));
        }
        if classes.contains(&Class::Invalid) {
            return Err(Error::invalid("cannot sample the Invalid class"));
        }
        Ok(ClassSampler {
            cap: cap_per_class,
            rng: ChaCha8Rng::seed_from_u64(seed),
            reservoirs: classes
                .iter()
                .map(|&c| (c, (0, ClassSamples::default())))
                .collect(),
        })
    }

    pub fn add(
        &mut self,
        image: &MultispectralImage,
        labels: &ClassMap,
        provider: &ProviderSpec,
    ) -> Result<()> {
        check_dims(
            (image.height(), image.width()),
            (labels.height, labels.width),
            &format!("labels of {}", image.id),
        )?;
        let features = provider.features(image)?;
        for (seen, samples) in self.reservoirs.values_mut() {
            if *seen == 0 && samples.is_empty() {
                *samples = ClassSamples::new(features.depth, image.bands());
            } else if samples.latent_dim != features.depth || samples.raw_dim != image.bands() {
                return Err(Error::shape(format!(
                    "{} has {} features / {} bands, earlier images had {} / {}",
                    image.id,
                    features.depth,
                    image.bands(),
                    samples.latent_dim,
                    samples.raw_dim
                )));
            }
        }
        for (i, &class) in labels.labels.iter().enumerate() {
            if class == Class::Invalid || !image.is_valid(i) {
                continue;
            }
            let Some((seen, samples)) = self.reservoirs.get_mut(&class) else {
                continue;
            };
            let provenance = || Provenance {
                image_id: image.id.clone(),
                h: i / image.width(),
                v: i % image.width(),
            };
            if *seen < self.cap {
                samples.push(features.pixel(i), image.pixel(i), provenance());
            } else {
                let j = self.rng.gen_range(0..=*seen);
                if j < self.cap {
                    samples.replace(j, features.pixel(i), image.pixel(i), provenance());
                }
            }
            *seen += 1;
        }
        Ok(())
    }

    /// Number of eligible pixels seen so far per class.
    pub fn seen(&self) -> BTreeMap<Class, usize> {
        self.reservoirs.iter().map(|(&c, (n, _))| (c, *n)).collect()
    }

    pub fn finish(self) -> Result<BTreeMap<Class, ClassSamples>> {
        let mut out = BTreeMap::new();
        for (class, (_, samples)) in self.reservoirs {
            if samples.is_empty() {
                return Err(Error::EmptyClass(class));
            }
            out.insert(class, samples);
        }
        Ok(out)
    }
}

/// Collects up to `cap_per_class` training pixels for each requested class.
pub fn collect_class_pixels<'a, I>(
    items: I,
    provider: &ProviderSpec,
    classes: &[Class],
    cap_per_class: usize,
    seed: u64,
) -> Result<BTreeMap<Class, ClassSamples>>
where
    I: IntoIterator<Item = (&'a MultispectralImage, &'a ClassMap)>,
{
    let mut sampler = ClassSampler::new(classes, cap_per_class, seed)?;
    for (image, labels) in items {
        sampler.add(image, labels, provider)?;
    }
    sampler.finish()
}
