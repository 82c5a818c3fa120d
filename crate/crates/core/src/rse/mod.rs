//! Recursive similarity estimation: frame-level novelty detection and
//! per-pixel change maps.
//!
//! Each pixel keeps a running mean vector `mu` and a running mean of squared
//! norms `big_sigma` over the frames accepted as normal. A new pixel value
//! `x` scores
//!
//! ```text
//! s = 1 / (1 + ‖x − mu‖² + big_sigma − ‖mu‖²)
//! ```
//!
//! which lies in `(0, 1]`. The frame score `S` is the mean of `s` over valid
//! pixels. `S` feeds a running mean / variance over all frames, and a frame
//! is novel when `S < S̄ − m·σ` against the statistics of earlier frames.

mod detector;
mod stats;

pub use detector::{DetectorConfig, FrameVerdict, NoveltyDetector, VerdictRecord};
pub use stats::{FrameView, PixelStatField, SeriesState, SimilarityMap};

use crate::raster::BinaryChangeMap;
use crate::{Error, Result};

pub const DEFAULT_M: f64 = 3.0;
pub const DEFAULT_EPSILON: f64 = 0.5;
/// Number of leading frames that are never flagged. The first frame has no
/// history; after it, σ is still 0 and any drop at all would trip the rule.
pub const DEFAULT_WARMUP: usize = 2;

/// Similarity of `x` to a pixel history summarised by `mu` and `big_sigma`.
pub fn pixel_similarity(x: &[f64], mu: &[f64], big_sigma: f64) -> Result<f64> {
    if x.len() != mu.len() {
        return Err(Error::shape(format!(
            "vector of length {} vs mean of length {}",
            x.len(),
            mu.len()
        )));
    }
    if x.iter().chain(mu).any(|v| !v.is_finite()) || !big_sigma.is_finite() {
        return Err(Error::invalid("non-finite input to pixel similarity"));
    }
    Ok(similarity(x, mu, big_sigma))
}

#[inline]
pub(crate) fn similarity<T: Copy + Into<f64>>(x: &[T], mu: &[f64], big_sigma: f64) -> f64 {
    let mut dist_sq = 0.0;
    let mut mu_sq = 0.0;
    for (&xi, &mi) in x.iter().zip(mu) {
        let d = xi.into() - mi;
        dist_sq += d * d;
        mu_sq += mi * mi;
    }
    let variance = (big_sigma - mu_sq).max(0.0);
    1.0 / (1.0 + dist_sq + variance)
}

/// `S < S̄ − m·σ`, strictly. A state that has seen no frames never flags.
pub fn detect_novelty(similarity: f64, state: &SeriesState, m: f64) -> bool {
    state.k > 0 && similarity < state.threshold(m)
}

/// Flags valid pixels whose similarity is strictly below `epsilon`.
pub fn binary_change_map(map: &SimilarityMap, epsilon: f64) -> Result<BinaryChangeMap> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let changed = map
        .values
        .iter()
        .zip(&map.valid)
        .map(|(&s, &valid)| valid && s < epsilon)
        .collect();
    Ok(BinaryChangeMap {
        height: map.height,
        width: map.width,
        changed,
    })
}

/// 3×3 morphological opening (erosion then dilation). Removes isolated
/// changed pixels and one-pixel-wide slivers. Off by default in the pipeline.
pub fn open_mask(mask: &BinaryChangeMap) -> BinaryChangeMap {
    let (h, w) = (mask.height, mask.width);
    let window = |src: &[bool], all: bool| -> Vec<bool> {
        let mut out = vec![false; h * w];
        for r in 0..h {
            for c in 0..w {
                let mut acc = all;
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                        let v = if rr < 0 || cc < 0 || rr >= h as i64 || cc >= w as i64 {
                            false
                        } else {
                            src[rr as usize * w + cc as usize]
                        };
                        acc = if all { acc && v } else { acc || v };
                    }
                }
                out[r * w + c] = acc;
            }
        }
        out
    };
    let eroded = window(&mask.changed, true);
    let changed = window(&eroded, false);
    BinaryChangeMap {
        height: h,
        width: w,
        changed,
    }
}
