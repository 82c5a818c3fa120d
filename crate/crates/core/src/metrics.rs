//! Evaluation: per-class IoU and mIoU for segmentation, precision / recall /
//! F1 for frame-level anomaly flags and pixel-level change masks, and NDWI
//! water baselines.

use serde::Serialize;

use crate::raster::{check_dims, BinaryChangeMap, Class, ClassMap, MultispectralImage};
use crate::{Error, Result};

/// Pixel counts indexed `[ground truth][prediction]` by class code.
/// Pixels whose ground truth is Invalid are never counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub counts: [[u64; 4]; 4],
}

impl ConfusionCounts {
    pub fn from_maps(pred: &ClassMap, gt: &ClassMap) -> Result<Self> {
        let mut c = ConfusionCounts::default();
        c.add(pred, gt)?;
        Ok(c)
    }

    /// Accumulates another prediction / ground-truth pair.
    pub fn add(&mut self, pred: &ClassMap, gt: &ClassMap) -> Result<()> {
        check_dims(
            (pred.height, pred.width),
            (gt.height, gt.width),
            "prediction vs ground truth",
        )?;
        for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
            if g != Class::Invalid {
                self.counts[g.code() as usize][p.code() as usize] += 1;
            }
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// IoU of one class, or `None` when the class is absent from both
    /// prediction and ground truth.
    pub fn iou(&self, class: Class) -> Option<f64> {
        let c = class.code() as usize;
        let inter = self.counts[c][c];
        let gt: u64 = self.counts[c].iter().sum();
        let pred: u64 = (0..4).map(|g| self.counts[g][c]).sum();
        let union = gt + pred - inter;
        (union > 0).then(|| inter as f64 / union as f64)
    }

    pub fn miou(&self) -> Result<f64> {
        mean_defined(Class::LABELLED.map(|c| self.iou(c)))
    }
}

/// Unweighted mean of the defined values.
pub fn mean_defined<I: IntoIterator<Item = Option<f64>>>(values: I) -> Result<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(Error::invalid("no class has a defined IoU"));
    }
    Ok(sum / n as f64)
}

pub fn iou(pred: &ClassMap, gt: &ClassMap, class: Class) -> Result<Option<f64>> {
    Ok(ConfusionCounts::from_maps(pred, gt)?.iou(class))
}

pub fn miou(pred: &ClassMap, gt: &ClassMap) -> Result<f64> {
    ConfusionCounts::from_maps(pred, gt)?.miou()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl BinaryCounts {
    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    /// IoU of the positive class: `TP / (TP + FP + FN)`, 0 when empty.
    pub fn positive_iou(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp + self.fn_)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecisionRecallF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and their harmonic mean; each is 0 when its
/// denominator is 0.
pub fn precision_recall_f1(counts: &BinaryCounts) -> PrecisionRecallF1 {
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PrecisionRecallF1 {
        precision,
        recall,
        f1,
    }
}

/// Frame-level confusion counts of predicted versus true anomaly flags.
pub fn eval_anomaly_series(predicted: &[bool], actual: &[bool]) -> Result<BinaryCounts> {
    if predicted.len() != actual.len() {
        return Err(Error::shape(format!(
            "{} verdicts vs {} ground-truth flags",
            predicted.len(),
            actual.len()
        )));
    }
    let mut c = BinaryCounts::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        c.add(p, a);
    }
    Ok(c)
}

/// Pixel-level counts of a predicted change mask against ground truth,
/// restricted to `valid` pixels when given.
pub fn eval_change_mask(
    pred: &BinaryChangeMap,
    gt: &BinaryChangeMap,
    valid: Option<&[bool]>,
) -> Result<BinaryCounts> {
    check_dims(
        (pred.height, pred.width),
        (gt.height, gt.width),
        "prediction vs ground truth",
    )?;
    if valid.is_some_and(|v| v.len() != pred.changed.len()) {
        return Err(Error::shape("validity mask does not match change maps"));
    }
    let mut c = BinaryCounts::default();
    for i in 0..pred.changed.len() {
        if valid.is_none_or(|v| v[i]) {
            c.add(pred.changed[i], gt.changed[i]);
        }
    }
    Ok(c)
}

/// Band-ratio water indices. Which formulation a published baseline used is
/// not recorded with it; both common ones are offered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NdwiVariant {
    /// `(B3 − B8) / (B3 + B8)`, green / near infrared.
    GreenNir = 1,
    /// `(B8 − B11) / (B8 + B11)`, near infrared / short-wave infrared.
    NirSwir = 2,
}

impl NdwiVariant {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(NdwiVariant::GreenNir),
            2 => Ok(NdwiVariant::NirSwir),
            other => Err(Error::invalid(format!("unknown NDWI variant {other}"))),
        }
    }

    fn bands(self) -> (usize, usize) {
        // indices into the Sentinel-2 band order
        match self {
            NdwiVariant::GreenNir => (2, 7),
            NdwiVariant::NirSwir => (7, 11),
        }
    }
}

/// Normalised difference per pixel; 0 where the denominator is 0 or the
/// pixel is invalid.
pub fn ndwi(image: &MultispectralImage, variant: NdwiVariant) -> Result<Vec<f32>> {
    let (a, b) = variant.bands();
    if image.bands() <= a.max(b) {
        return Err(Error::shape(format!(
            "NDWI variant {} needs {} bands, image has {}",
            variant as u8,
            a.max(b) + 1,
            image.bands()
        )));
    }
    Ok((0..image.pixel_count())
        .map(|i| {
            if !image.is_valid(i) {
                return 0.0;
            }
            let px = image.pixel(i);
            let den = px[a] + px[b];
            if den == 0.0 {
                0.0
            } else {
                (px[a] - px[b]) / den
            }
        })
        .collect())
}

/// Water where the index exceeds `threshold` at a valid pixel.
pub fn ndwi_water_mask(
    image: &MultispectralImage,
    index: &[f32],
    threshold: f32,
) -> Result<BinaryChangeMap> {
    if index.len() != image.pixel_count() {
        return Err(Error::shape("NDWI map does not match image"));
    }
    Ok(BinaryChangeMap {
        height: image.height(),
        width: image.width(),
        changed: index
            .iter()
            .enumerate()
            .map(|(i, &x)| image.is_valid(i) && x > threshold)
            .collect(),
    })
}

/// Class map from an NDWI water mask: Water or Land, Invalid where the image
/// is invalid.
pub fn ndwi_class_map(image: &MultispectralImage, water: &BinaryChangeMap) -> ClassMap {
    ClassMap {
        height: image.height(),
        width: image.width(),
        labels: water
            .changed
            .iter()
            .enumerate()
            .map(|(i, &w)| match (image.is_valid(i), w) {
                (false, _) => Class::Invalid,
                (true, true) => Class::Water,
                (true, false) => Class::Land,
            })
            .collect(),
    }
}

fn fmt_opt_percent(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.2}", 100.0 * x))
}

/// `IoU water,IoU land,IoU cloud,mIoU` in percent; undefined classes as `-`.
pub fn segmentation_csv(counts: &ConfusionCounts) -> String {
    format!(
        "IoU water,IoU land,IoU cloud,mIoU\n{},{},{},{}\n",
        fmt_opt_percent(counts.iou(Class::Water)),
        fmt_opt_percent(counts.iou(Class::Land)),
        fmt_opt_percent(counts.iou(Class::Cloud)),
        fmt_opt_percent(counts.miou().ok()),
    )
}

/// `Precision,Recall,F1` as fractions with two decimals.
pub fn anomaly_csv(counts: &BinaryCounts) -> String {
    let s = precision_recall_f1(counts);
    format!(
        "Precision,Recall,F1\n{:.2},{:.2},{:.2}\n",
        s.precision, s.recall, s.f1
    )
}

/// `Precision,Recall,F1,IoU water` in percent.
pub fn change_csv(counts: &BinaryCounts) -> String {
    let s = precision_recall_f1(counts);
    format!(
        "Precision,Recall,F1,IoU water\n{:.2},{:.2},{:.2},{:.2}\n",
        100.0 * s.precision,
        100.0 * s.recall,
        100.0 * s.f1,
        100.0 * counts.positive_iou()
    )
}
