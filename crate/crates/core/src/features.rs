//! Turns an image into the per-pixel latent vectors consumed by the
//! prototype classifier. Neural features are produced offline and read
//! from `<image_id>.features.imtf` files; the identity provider passes the
//! raw bands through.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::raster::{read_tensor, MultispectralImage};
use crate::rse::FrameView;
use crate::{Error, Result};

/// `H × V × D` latent features, row-major with features fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub depth: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn pixel(&self, index: usize) -> &[f32] {
        &self.data[index * self.depth..(index + 1) * self.depth]
    }

    /// Pairs the features with the validity mask of their source image.
    pub fn view<'a>(&'a self, image: &'a MultispectralImage) -> FrameView<'a> {
        FrameView {
            height: self.height,
            width: self.width,
            depth: self.depth,
            data: &self.data,
            valid: image.valid_mask(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    Identity,
    Directory(PathBuf),
}

impl FromStr for ProviderSpec {
    type Err = Error;

    /// `identity`, or a directory path (optionally prefixed with `dir:`).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "" => Err(Error::invalid("empty provider spec")),
            "identity" => Ok(ProviderSpec::Identity),
            other => Ok(ProviderSpec::Directory(PathBuf::from(
                other.strip_prefix("dir:").unwrap_or(other),
            ))),
        }
    }
}

impl ProviderSpec {
    pub fn feature_path(dir: &Path, image_id: &str) -> PathBuf {
        dir.join(format!("{image_id}.features.imtf"))
    }

    /// Latent dimensionality for an image with `bands` bands, if known
    /// without reading files.
    pub fn fixed_depth(&self, bands: usize) -> Option<usize> {
        match self {
            ProviderSpec::Identity => Some(bands),
            ProviderSpec::Directory(_) => None,
        }
    }

    pub fn features(&self, image: &MultispectralImage) -> Result<FeatureMap> {
        match self {
            ProviderSpec::Identity => Ok(FeatureMap {
                height: image.height(),
                width: image.width(),
                depth: image.bands(),
                data: image.data().to_vec(),
            }),
            ProviderSpec::Directory(dir) => {
                let path = Self::feature_path(dir, &image.id);
                if !path.is_file() {
                    return Err(Error::MissingFeatures(path));
                }
                let (dims, data) = read_tensor(&path)?.into_f32()?;
                let [height, width, depth] = dims[..] else {
                    return Err(Error::shape(format!(
                        "{}: feature tensor must be rank 3, got {dims:?}",
                        path.display()
                    )));
                };
                if (height, width) != (image.height(), image.width()) {
                    return Err(Error::shape(format!(
                        "{}: features are {height}x{width}, image {} is {}x{}",
                        path.display(),
                        image.id,
                        image.height(),
                        image.width()
                    )));
                }
                let map = FeatureMap {
                    height,
                    width,
                    depth,
                    data,
                };
                for i in 0..image.pixel_count() {
                    if image.is_valid(i) && map.pixel(i).iter().any(|x| !x.is_finite()) {
                        return Err(Error::NonFinite {
                            h: i / width,
                            v: i % width,
                        });
                    }
                }
                Ok(map)
            }
        }
    }
}
