//! End-to-end orchestration: novelty detection on every frame, dense change
//! detection and segmentation only on flagged frames, then the flood report.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::decision::{build_report, FloodReport, FrameRecord, DEFAULT_DECISION_THRESHOLD};
use crate::features::ProviderSpec;
use crate::idss::{segment_image, PrototypeBank, DEFAULT_CONFIDENCE_THRESHOLD, DEFAULT_K};
use crate::raster::{BinaryChangeMap, ClassMap, ConfidenceMap, MultispectralImage};
use crate::rse::DEFAULT_EPSILON;
use crate::rse::{
    binary_change_map, open_mask, DetectorConfig, FrameVerdict, NoveltyDetector, SimilarityMap,
    VerdictRecord,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub detector: DetectorConfig,
    pub epsilon: f64,
    pub k: usize,
    pub confidence_threshold: f64,
    /// Percent of valid pixels.
    pub decision_threshold: f64,
    /// Apply a 3×3 opening to change masks.
    pub despeckle: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            detector: DetectorConfig::default(),
            epsilon: DEFAULT_EPSILON,
            k: DEFAULT_K,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            decision_threshold: DEFAULT_DECISION_THRESHOLD,
            despeckle: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} {v} outside [0, 1]")))
            }
        };
        unit("epsilon", self.epsilon)?;
        unit("confidence threshold", self.confidence_threshold)?;
        if !(0.0..=100.0).contains(&self.decision_threshold) {
            return Err(Error::invalid(format!(
                "decision threshold {} outside [0, 100]",
                self.decision_threshold
            )));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !(self.detector.m > 0.0 && self.detector.m.is_finite()) {
            return Err(Error::invalid(format!(
                "m must be positive, got {}",
                self.detector.m
            )));
        }
        Ok(())
    }
}

/// Dense outputs for one flagged frame.
#[derive(Debug, Clone)]
pub struct FlaggedFrame {
    pub similarity: SimilarityMap,
    pub change: BinaryChangeMap,
    pub classes: ClassMap,
    pub confidence: ConfidenceMap,
    pub record: FrameRecord,
}

#[derive(Debug, Clone)]
pub struct FrameOutcome {
    pub verdict: FrameVerdict,
    pub flagged: Option<FlaggedFrame>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct InvocationCounts {
    pub frames: usize,
    pub novel: usize,
    pub segment_calls: usize,
}

pub struct Pipeline<'a> {
    config: PipelineConfig,
    bank: &'a PrototypeBank,
    provider: &'a ProviderSpec,
    detector: NoveltyDetector,
    records: Vec<FrameRecord>,
    counts: InvocationCounts,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        config: PipelineConfig,
        bank: &'a PrototypeBank,
        provider: &'a ProviderSpec,
    ) -> Result<Self> {
        config.validate()?;
        if config.k > bank.len() {
            return Err(Error::invalid(format!(
                "k={} exceeds the {} prototypes in the bank",
                config.k,
                bank.len()
            )));
        }
        Ok(Pipeline {
            detector: NoveltyDetector::new(config.detector)?,
            config,
            bank,
            provider,
            records: Vec::new(),
            counts: InvocationCounts::default(),
        })
    }

    pub fn counts(&self) -> InvocationCounts {
        self.counts
    }

    /// Processes the next frame in time order.
    pub fn push(&mut self, image: &MultispectralImage) -> Result<FrameOutcome> {
        let mut verdict = self.detector.process_image(image)?;
        self.counts.frames += 1;
        if !verdict.is_novel {
            return Ok(FrameOutcome {
                verdict,
                flagged: None,
            });
        }
        self.counts.novel += 1;
        let similarity = verdict
            .similarity_map
            .take()
            .expect("novel verdicts carry their similarity map");
        let mut change = binary_change_map(&similarity, self.config.epsilon)?;
        if self.config.despeckle {
            change = open_mask(&change);
        }
        self.counts.segment_calls += 1;
        let (classes, confidence) = segment_image(
            image,
            self.bank,
            self.provider,
            self.config.k,
            self.config.detector.exec,
        )
        .map_err(|e| Error::invalid(format!("segmenting frame {}: {e}", image.id)))?;
        let record = FrameRecord::new(
            image.id.clone(),
            image.timestamp,
            &change,
            &classes,
            self.config.decision_threshold,
        )?;
        self.records.push(record.clone());
        verdict.similarity_map = Some(similarity.clone());
        Ok(FrameOutcome {
            verdict,
            flagged: Some(FlaggedFrame {
                similarity,
                change,
                classes,
                confidence,
                record,
            }),
        })
    }

    pub fn report(&self) -> FloodReport {
        build_report(&self.records)
    }
}

/// Writes pipeline outputs into a directory:
///
/// ```text
/// verdicts.jsonl            one VerdictRecord per frame
/// maps/<id>.similarity.imtf
/// maps/<id>.change.imtf
/// maps/<id>.classes.imtf
/// maps/<id>.confidence.imtf
/// report.json, extent.imtf  written by `finish`
/// invocations.json
/// ```
pub struct OutputWriter {
    dir: PathBuf,
    verdicts: BufWriter<File>,
}

impl OutputWriter {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let maps = dir.join("maps");
        fs::create_dir_all(&maps).map_err(|e| Error::io(&maps, e))?;
        let path = dir.join("verdicts.jsonl");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(OutputWriter {
            dir,
            verdicts: BufWriter::new(file),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn map_path(&self, id: &str, kind: &str) -> PathBuf {
        self.dir.join("maps").join(format!("{id}.{kind}.imtf"))
    }

    pub fn write(&mut self, outcome: &FrameOutcome) -> Result<()> {
        let line = serde_json::to_string(&VerdictRecord::from(&outcome.verdict))?;
        let path = self.dir.join("verdicts.jsonl");
        writeln!(self.verdicts, "{line}").map_err(|e| Error::io(&path, e))?;
        if let Some(f) = &outcome.flagged {
            let id = &outcome.verdict.id;
            f.similarity.save(self.map_path(id, "similarity"))?;
            f.change.save(self.map_path(id, "change"))?;
            f.classes.save(self.map_path(id, "classes"))?;
            f.confidence.save(self.map_path(id, "confidence"))?;
        }
        Ok(())
    }

    pub fn finish(mut self, report: &FloodReport, counts: InvocationCounts) -> Result<()> {
        let path = self.dir.join("verdicts.jsonl");
        self.verdicts.flush().map_err(|e| Error::io(&path, e))?;
        report.save(&self.dir)?;
        let path = self.dir.join("invocations.json");
        let mut json = serde_json::to_string_pretty(&counts)?;
        json.push('\n');
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }
}

/// Runs a time-ordered series through the pipeline and writes every output
/// into `dir`.
pub fn run_to_dir<'i, I>(
    images: I,
    config: PipelineConfig,
    bank: &PrototypeBank,
    provider: &ProviderSpec,
    dir: impl AsRef<Path>,
) -> Result<(FloodReport, InvocationCounts)>
where
    I: IntoIterator<Item = &'i MultispectralImage>,
{
    let mut pipeline = Pipeline::new(config, bank, provider)?;
    let mut out = OutputWriter::create(dir)?;
    for image in images {
        let outcome = pipeline.push(image)?;
        out.write(&outcome)?;
    }
    let report = pipeline.report();
    let counts = pipeline.counts();
    out.finish(&report, counts)?;
    Ok((report, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idss::{build_prototype_bank, collect_class_pixels, BankConfig};
    use crate::raster::Class;
    use crate::synthetic::{flood_series, training_scene, SceneSpec};

    fn bank() -> PrototypeBank {
        let (img, labels) = training_scene(SceneSpec::new(12, 12, 99));
        let samples = collect_class_pixels(
            [(&img, &labels)],
            &ProviderSpec::Identity,
            &Class::LABELLED,
            1000,
            0,
        )
        .unwrap();
        build_prototype_bank(
            &samples,
            &BankConfig {
                per_class: 10,
                iters: Some(30),
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn quiet_series_never_segments() {
        let bank = bank();
        let mut p =
            Pipeline::new(PipelineConfig::default(), &bank, &ProviderSpec::Identity).unwrap();
        for img in &flood_series(SceneSpec::new(10, 10, 1), 12, 0.0).images {
            assert!(p.push(img).unwrap().flagged.is_none());
        }
        assert_eq!(p.counts().segment_calls, 0);
        assert_eq!(p.report().flood_onset, None);
    }

    #[test]
    fn flood_is_found_and_dated() {
        let bank = bank();
        let series = flood_series(SceneSpec::new(10, 10, 2), 14, 0.3);
        let mut p =
            Pipeline::new(PipelineConfig::default(), &bank, &ProviderSpec::Identity).unwrap();
        for img in &series.images {
            p.push(img).unwrap();
        }
        assert_eq!(
            p.counts(),
            InvocationCounts {
                frames: 15,
                novel: 1,
                segment_calls: 1
            }
        );
        let report = p.report();
        assert_eq!(report.flood_onset, Some(series.images[14].timestamp));
        assert_eq!(report.extent_pixels, 30);
    }

    #[test]
    fn config_validation() {
        let bank = bank();
        let bad = PipelineConfig {
            epsilon: 2.0,
            ..Default::default()
        };
        assert!(Pipeline::new(bad, &bank, &ProviderSpec::Identity).is_err());
        let too_many = PipelineConfig {
            k: 1000,
            ..Default::default()
        };
        assert!(Pipeline::new(too_many, &bank, &ProviderSpec::Identity).is_err());
    }
}
