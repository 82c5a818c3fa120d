use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::raster::{read_tensor, write_tensor, MultispectralImage, TensorData};
use crate::{Error, Execution, Result};

use super::similarity;

/// Borrowed view of one frame's per-pixel vectors: raw bands or latent
/// features, row-major with the vector dimension fastest.
#[derive(Debug, Clone, Copy)]
pub struct FrameView<'a> {
    pub height: usize,
    pub width: usize,
    pub depth: usize,
    pub data: &'a [f32],
    pub valid: &'a [bool],
}

impl<'a> FrameView<'a> {
    pub fn new(
        (height, width, depth): (usize, usize, usize),
        data: &'a [f32],
        valid: &'a [bool],
    ) -> Result<Self> {
        if data.len() != height * width * depth || valid.len() != height * width {
            return Err(Error::shape(format!(
                "frame view {height}x{width}x{depth} with {} values and {} mask entries",
                data.len(),
                valid.len()
            )));
        }
        Ok(FrameView {
            height,
            width,
            depth,
            data,
            valid,
        })
    }

    pub fn pixel(&self, index: usize) -> &'a [f32] {
        &self.data[index * self.depth..(index + 1) * self.depth]
    }
}

impl<'a> From<&'a MultispectralImage> for FrameView<'a> {
    fn from(image: &'a MultispectralImage) -> Self {
        FrameView {
            height: image.height(),
            width: image.width(),
            depth: image.bands(),
            data: image.data(),
            valid: image.valid_mask(),
        }
    }
}

/// Running per-pixel statistics over accepted (non-novel) frames.
///
/// Each pixel is stored as `depth + 2` consecutive values: the mean vector,
/// the mean squared norm, and the number of frames in which the pixel was
/// valid. A pixel that was invalid in some accepted frames averages over
/// fewer frames than [`accepted`](Self::accepted).
#[derive(Debug, Clone, PartialEq)]
pub struct PixelStatField {
    height: usize,
    width: usize,
    depth: usize,
    stats: Vec<f64>,
    accepted: usize,
}

impl PixelStatField {
    pub fn empty(height: usize, width: usize, depth: usize) -> Self {
        PixelStatField {
            height,
            width,
            depth,
            stats: vec![0.0; height * width * (depth + 2)],
            accepted: 0,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of frames folded in (L).
    pub fn accepted(&self) -> usize {
        self.accepted
    }

    fn stride(&self) -> usize {
        self.depth + 2
    }

    pub fn mu(&self, index: usize) -> &[f64] {
        let s = self.stride();
        &self.stats[index * s..index * s + self.depth]
    }

    pub fn big_sigma(&self, index: usize) -> f64 {
        self.stats[index * self.stride() + self.depth]
    }

    /// Frames in which this pixel was valid.
    pub fn count(&self, index: usize) -> usize {
        self.stats[index * self.stride() + self.depth + 1] as usize
    }

    /// `big_sigma − ‖mu‖²` before clamping.
    pub fn raw_variance(&self, index: usize) -> f64 {
        let mu_sq: f64 = self.mu(index).iter().map(|m| m * m).sum();
        self.big_sigma(index) - mu_sq
    }

    fn check(&self, frame: &FrameView<'_>) -> Result<()> {
        if (frame.height, frame.width, frame.depth) != (self.height, self.width, self.depth) {
            return Err(Error::shape(format!(
                "frame is {}x{}x{}, statistics are {}x{}x{}",
                frame.height, frame.width, frame.depth, self.height, self.width, self.depth
            )));
        }
        Ok(())
    }

    /// Folds a frame into the running statistics of its valid pixels.
    pub fn update(&mut self, frame: &FrameView<'_>, exec: Execution) -> Result<()> {
        self.check(frame)?;
        let depth = self.depth;
        exec.for_each_chunk_mut(&mut self.stats, depth + 2, |i, px| {
            if !frame.valid[i] {
                return;
            }
            let x = frame.pixel(i);
            let count = px[depth + 1] + 1.0;
            let rate = 1.0 / count;
            let mut norm_sq = 0.0;
            for (m, &xi) in px[..depth].iter_mut().zip(x) {
                let xi = xi as f64;
                *m += (xi - *m) * rate;
                norm_sq += xi * xi;
            }
            px[depth] += (norm_sq - px[depth]) * rate;
            px[depth + 1] = count;
        });
        self.accepted += 1;
        Ok(())
    }

    /// Per-pixel similarity of a frame to the accumulated history. Pixels
    /// that are invalid in the frame or have no history are left unscored.
    pub fn similarity_map(&self, frame: &FrameView<'_>, exec: Execution) -> Result<SimilarityMap> {
        self.check(frame)?;
        let n = self.height * self.width;
        let values = exec.map_indexed(n, |i| {
            if frame.valid[i] && self.count(i) > 0 {
                similarity(frame.pixel(i), self.mu(i), self.big_sigma(i))
            } else {
                f64::NAN
            }
        });
        let valid = values.iter().map(|v| !v.is_nan()).collect();
        Ok(SimilarityMap {
            height: self.height,
            width: self.width,
            values,
            valid,
        })
    }

    /// Overall frame similarity `S`: the mean pixel similarity.
    pub fn image_similarity(&self, frame: &FrameView<'_>, exec: Execution) -> Result<f64> {
        self.similarity_map(frame, exec)?.mean()
    }
}

/// Per-pixel similarities of one frame. Unscored pixels hold NaN and are
/// marked invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl SimilarityMap {
    /// Mean over valid pixels, summed in row-major order.
    pub fn mean(&self) -> Result<f64> {
        let (sum, n) = self
            .values
            .iter()
            .zip(&self.valid)
            .filter(|(_, &v)| v)
            .fold((0.0, 0usize), |(s, n), (&x, _)| (s + x, n + 1));
        if n == 0 {
            return Err(Error::NoValidPixels);
        }
        Ok(sum / n as f64)
    }

    /// Stored as a dtype-1 `(H, V)` tensor with NaN at unscored pixels.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let data = self
            .values
            .iter()
            .zip(&self.valid)
            .map(|(&s, &v)| if v { s as f32 } else { f32::NAN })
            .collect();
        write_tensor(path, &[self.height, self.width], &TensorData::F32(data))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (dims, data) = read_tensor(path)?.into_f32()?;
        let [height, width] = dims[..] else {
            return Err(Error::shape(format!(
                "similarity map must be rank 2, got {dims:?}"
            )));
        };
        let valid = data.iter().map(|v| v.is_finite()).collect();
        Ok(SimilarityMap {
            height,
            width,
            values: data.into_iter().map(f64::from).collect(),
            valid,
        })
    }
}

/// Running mean and variance of the frame similarity `S` over all frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesState {
    pub k: usize,
    pub s_bar: f64,
    pub sigma_sq: f64,
}

impl SeriesState {
    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }

    pub fn threshold(&self, m: f64) -> f64 {
        self.s_bar - m * self.sigma()
    }

    /// `S̄ₖ = ((k−1)/k) S̄ₖ₋₁ + Sₖ/k`, then
    /// `σₖ² = ((k−1)/k) σₖ₋₁² + (Sₖ − S̄ₖ)²/k`.
    pub fn update(&mut self, s: f64) {
        self.k += 1;
        let k = self.k as f64;
        // incremental form of the same recursion; exact for constant input
        self.s_bar += (s - self.s_bar) / k;
        let d = s - self.s_bar;
        self.sigma_sq = (k - 1.0) / k * self.sigma_sq + d * d / k;
    }
}
