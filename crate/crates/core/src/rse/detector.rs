use serde::{Deserialize, Serialize};

use crate::raster::{MultispectralImage, Timestamp};
use crate::{Error, Execution, Result};

use super::{detect_novelty, FrameView, PixelStatField, SeriesState, SimilarityMap};
use super::{DEFAULT_M, DEFAULT_WARMUP};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Sigma multiplier of the novelty rule.
    pub m: f64,
    /// Leading frames that are scored but never flagged (at least 1).
    pub warmup: usize,
    /// Keep similarity maps of normal frames too.
    pub keep_all_maps: bool,
    pub exec: Execution,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            m: DEFAULT_M,
            warmup: DEFAULT_WARMUP,
            keep_all_maps: false,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameVerdict {
    pub id: String,
    pub timestamp: Timestamp,
    /// Overall similarity `S` of the frame against earlier accepted frames.
    pub similarity: f64,
    /// `S̄ − m·σ` before this frame; `None` for the bootstrap frame.
    pub threshold: Option<f64>,
    pub is_novel: bool,
    pub similarity_map: Option<SimilarityMap>,
}

/// One line of the JSON-lines verdict log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub id: String,
    pub timestamp: Timestamp,
    #[serde(rename = "S")]
    pub similarity: f64,
    pub threshold: Option<f64>,
    pub is_novel: bool,
}

impl From<&FrameVerdict> for VerdictRecord {
    fn from(v: &FrameVerdict) -> Self {
        VerdictRecord {
            id: v.id.clone(),
            timestamp: v.timestamp,
            similarity: v.similarity,
            threshold: v.threshold,
            is_novel: v.is_novel,
        }
    }
}

/// Streams frames through the novelty rule (test-then-train).
///
/// Each frame is scored against statistics that exclude it. Series
/// statistics take every frame's `S`; pixel statistics only take frames
/// judged normal, so an anomaly never pollutes the per-pixel baseline.
#[derive(Debug, Clone)]
pub struct NoveltyDetector {
    config: DetectorConfig,
    field: Option<PixelStatField>,
    series: SeriesState,
    last_timestamp: Option<Timestamp>,
}

impl NoveltyDetector {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        if !(config.m > 0.0 && config.m.is_finite()) {
            return Err(Error::invalid(format!(
                "m must be positive, got {}",
                config.m
            )));
        }
        Ok(NoveltyDetector {
            config,
            field: None,
            series: SeriesState::default(),
            last_timestamp: None,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn field(&self) -> Option<&PixelStatField> {
        self.field.as_ref()
    }

    pub fn series(&self) -> &SeriesState {
        &self.series
    }

    pub fn process_image(&mut self, image: &MultispectralImage) -> Result<FrameVerdict> {
        self.process(&FrameView::from(image), &image.id, image.timestamp)
    }

    pub fn process(
        &mut self,
        frame: &FrameView<'_>,
        id: &str,
        timestamp: Timestamp,
    ) -> Result<FrameVerdict> {
        if let Some(last) = self.last_timestamp {
            if timestamp < last {
                return Err(Error::invalid(format!(
                    "frame {id} at {timestamp} precedes the previous frame at {last}"
                )));
            }
        }
        let exec = self.config.exec;

        let Some(field) = self.field.as_mut() else {
            let mut field = PixelStatField::empty(frame.height, frame.width, frame.depth);
            field.update(frame, exec)?;
            self.field = Some(field);
            self.series.update(1.0);
            self.last_timestamp = Some(timestamp);
            return Ok(FrameVerdict {
                id: id.to_string(),
                timestamp,
                similarity: 1.0,
                threshold: None,
                is_novel: false,
                similarity_map: None,
            });
        };

        let map = field.similarity_map(frame, exec)?;
        let similarity = map.mean()?;
        let threshold = self.series.threshold(self.config.m);
        let is_novel = self.series.k >= self.config.warmup.max(1)
            && detect_novelty(similarity, &self.series, self.config.m);

        self.series.update(similarity);
        if !is_novel {
            field.update(frame, exec)?;
        }
        self.last_timestamp = Some(timestamp);

        Ok(FrameVerdict {
            id: id.to_string(),
            timestamp,
            similarity,
            threshold: Some(threshold),
            is_novel,
            similarity_map: (is_novel || self.config.keep_all_maps).then_some(map),
        })
    }
}
