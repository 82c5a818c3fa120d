//! Flood / no-flood decisions from labelled change masks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::raster::{check_dims, BinaryChangeMap, Class, ClassMap, Timestamp};
use crate::{Error, Result};

/// Default decision threshold, in percent of valid pixels.
pub const DEFAULT_DECISION_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Flooding,
    NoFlooding,
}

/// Changed pixels that are labelled Water. Invalid pixels are never included.
pub fn water_change_mask(change: &BinaryChangeMap, classes: &ClassMap) -> Result<BinaryChangeMap> {
    check_dims(
        (change.height, change.width),
        (classes.height, classes.width),
        "change map vs class map",
    )?;
    Ok(BinaryChangeMap {
        height: change.height,
        width: change.width,
        changed: change
            .changed
            .iter()
            .zip(&classes.labels)
            .map(|(&c, &l)| c && l == Class::Water)
            .collect(),
    })
}

/// Newly changed Water pixels as a percentage of all valid (non-Invalid)
/// pixels.
pub fn water_change_percentage(change: &BinaryChangeMap, classes: &ClassMap) -> Result<f64> {
    let water = water_change_mask(change, classes)?;
    let valid = classes
        .labels
        .iter()
        .filter(|&&l| l != Class::Invalid)
        .count();
    if valid == 0 {
        return Err(Error::NoValidPixels);
    }
    Ok(100.0 * water.count() as f64 / valid as f64)
}

/// `Flooding` iff `percentage ≥ threshold`.
pub fn flood_decision(percentage: f64, threshold: f64) -> Decision {
    if percentage >= threshold {
        Decision::Flooding
    } else {
        Decision::NoFlooding
    }
}

/// Outcome of stages 2–4 for one flagged frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub id: String,
    pub timestamp: Timestamp,
    pub new_water_percentage: f64,
    pub decision: Decision,
    pub water_change: BinaryChangeMap,
}

impl FrameRecord {
    pub fn new(
        id: impl Into<String>,
        timestamp: Timestamp,
        change: &BinaryChangeMap,
        classes: &ClassMap,
        threshold: f64,
    ) -> Result<Self> {
        let new_water_percentage = water_change_percentage(change, classes)?;
        Ok(FrameRecord {
            id: id.into(),
            timestamp,
            new_water_percentage,
            decision: flood_decision(new_water_percentage, threshold),
            water_change: water_change_mask(change, classes)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub id: String,
    pub timestamp: Timestamp,
    pub new_water_percentage: f64,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodReport {
    pub records: Vec<ReportEntry>,
    pub flood_onset: Option<Timestamp>,
    pub onset_id: Option<String>,
    pub extent_pixels: usize,
    /// Water-changed mask of the onset frame.
    #[serde(skip)]
    pub extent: Option<BinaryChangeMap>,
}

impl FloodReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `report.json` and, when a flood was found, `extent.imtf`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let path = dir.join("report.json");
        std::fs::write(&path, self.to_json()?).map_err(|e| Error::io(&path, e))?;
        if let Some(extent) = &self.extent {
            extent.save(dir.join("extent.imtf"))?;
        }
        Ok(())
    }
}

/// Aggregates per-frame records (in time order) into a report whose onset is
/// the first Flooding frame.
pub fn build_report(records: &[FrameRecord]) -> FloodReport {
    let onset = records.iter().find(|r| r.decision == Decision::Flooding);
    FloodReport {
        records: records
            .iter()
            .map(|r| ReportEntry {
                id: r.id.clone(),
                timestamp: r.timestamp,
                new_water_percentage: r.new_water_percentage,
                decision: r.decision,
            })
            .collect(),
        flood_onset: onset.map(|r| r.timestamp),
        onset_id: onset.map(|r| r.id.clone()),
        extent_pixels: onset.map_or(0, |r| r.water_change.count()),
        extent: onset.map(|r| r.water_change.clone()),
    }
}
