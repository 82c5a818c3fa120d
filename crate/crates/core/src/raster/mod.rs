//! Rasters shared by every stage: multispectral frames, class maps,
//! confidence maps and binary change masks, plus the IMTF container they are
//! stored in.

mod manifest;
mod tensor;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use manifest::{Manifest, ManifestEntry};
pub use tensor::{
    decode, encode, read_tensor, write_tensor, DType, Tensor, TensorData, MAGIC, VERSION,
};

use crate::{Error, Result};

/// Sentinel-2 band order. Files carry no band metadata; this order is assumed.
pub const SENTINEL2_BANDS: [&str; 13] = [
    "B1", "B2", "B3", "B4", "B5", "B6", "B7", "B8", "B8A", "B9", "B10", "B11", "B12",
];

/// Index of a Sentinel-2 band in [`SENTINEL2_BANDS`].
pub fn band_index(name: &str) -> Option<usize> {
    SENTINEL2_BANDS.iter().position(|&b| b == name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Class {
    Invalid = 0,
    Land = 1,
    Water = 2,
    Cloud = 3,
}

impl Class {
    /// The three labelled classes, in label order.
    pub const LABELLED: [Class; 3] = [Class::Land, Class::Water, Class::Cloud];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Class::Invalid),
            1 => Ok(Class::Land),
            2 => Ok(Class::Water),
            3 => Ok(Class::Cloud),
            other => Err(Error::UnknownLabel(other)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Invalid => "Invalid",
            Class::Land => "Land",
            Class::Water => "Water",
            Class::Cloud => "Cloud",
        }
    }
}

/// Acquisition time. Parses `YYYY-MM-DD` or `YYYY-MM-DDTHH:MM:SS`; prints
/// the date-only form when the time is midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Timestamp(pub NaiveDateTime);

impl Timestamp {
    pub fn from_ymd(y: i32, m: u32, d: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(y, m, d).map(|d| Timestamp(d.and_time(NaiveTime::MIN)))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.time() == NaiveTime::MIN {
            write!(f, "{}", self.0.format("%Y-%m-%d"))
        } else {
            write!(f, "{}", self.0.format("%Y-%m-%dT%H:%M:%S"))
        }
    }
}

impl FromStr for Timestamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
            return Ok(Timestamp(dt));
        }
        if let Ok(dt) =
            NaiveDateTime::parse_from_str(s.trim_end_matches('Z'), "%Y-%m-%dT%H:%M:%S%.f")
        {
            return Ok(Timestamp(dt));
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map(|d| Timestamp(d.and_time(NaiveTime::MIN)))
            .map_err(|_| Error::invalid(format!("unparseable timestamp {s:?}")))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One frame of the series: `height × width × bands` reflectances, row-major
/// with bands fastest, plus a per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MultispectralImage {
    pub id: String,
    pub timestamp: Timestamp,
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<f32>,
    valid: Vec<bool>,
}

impl MultispectralImage {
    /// Builds an image, checking sizes and that valid pixels are finite.
    pub fn new(
        id: impl Into<String>,
        timestamp: Timestamp,
        (height, width, bands): (usize, usize, usize),
        data: Vec<f32>,
        valid: Option<Vec<bool>>,
    ) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::shape(format!(
                "image dims must be positive, got {height}x{width}x{bands}"
            )));
        }
        if data.len() != height * width * bands {
            return Err(Error::shape(format!(
                "{height}x{width}x{bands} image needs {} values, got {}",
                height * width * bands,
                data.len()
            )));
        }
        let valid = valid.unwrap_or_else(|| vec![true; height * width]);
        if valid.len() != height * width {
            return Err(Error::shape(format!(
                "mask has {} pixels, image has {}",
                valid.len(),
                height * width
            )));
        }
        for (i, pixel) in data.chunks_exact(bands).enumerate() {
            if valid[i] && pixel.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    h: i / width,
                    v: i % width,
                });
            }
        }
        Ok(MultispectralImage {
            id: id.into(),
            timestamp,
            height,
            width,
            bands,
            data,
            valid,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, index: usize) -> bool {
        self.valid[index]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Band values of the pixel at flat index `index`.
    pub fn pixel(&self, index: usize) -> &[f32] {
        &self.data[index * self.bands..(index + 1) * self.bands]
    }

    pub fn index(&self, h: usize, v: usize) -> usize {
        h * self.width + v
    }
}

/// Loads an image from an IMTF data tensor `(H, V, n)` of dtype 1 and an
/// optional `(H, V)` dtype-2 mask (nonzero = valid).
pub fn load_image(
    data_path: impl AsRef<Path>,
    mask_path: Option<&Path>,
    timestamp: Timestamp,
    id: impl Into<String>,
) -> Result<MultispectralImage> {
    let (dims, data) = read_tensor(data_path.as_ref())?.into_f32()?;
    if dims.len() != 3 {
        return Err(Error::shape(format!(
            "image tensor must be rank 3 (H, V, n), got dims {dims:?}"
        )));
    }
    let valid = match mask_path {
        Some(p) => {
            let (mdims, mask) = read_tensor(p)?.into_u8()?;
            if mdims != dims[..2] {
                return Err(Error::shape(format!(
                    "mask dims {mdims:?} do not match image dims {:?}",
                    &dims[..2]
                )));
            }
            Some(mask.into_iter().map(|m| m != 0).collect())
        }
        None => None,
    };
    MultispectralImage::new(id, timestamp, (dims[0], dims[1], dims[2]), data, valid)
}

/// Writes the band data of an image as a rank-3 dtype-1 tensor.
pub fn save_image_data(image: &MultispectralImage, path: impl AsRef<Path>) -> Result<()> {
    write_tensor(
        path,
        &[image.height, image.width, image.bands],
        &TensorData::F32(image.data.clone()),
    )
}

/// Writes a validity mask as a dtype-2 `(H, V)` tensor.
pub fn save_mask(image: &MultispectralImage, path: impl AsRef<Path>) -> Result<()> {
    let mask = image.valid.iter().map(|&v| v as u8).collect();
    write_tensor(path, &[image.height, image.width], &TensorData::U8(mask))
}

fn expect_2d(dims: &[usize], what: &str) -> Result<(usize, usize)> {
    match dims {
        [h, w] => Ok((*h, *w)),
        _ => Err(Error::shape(format!(
            "{what} must be rank 2, got dims {dims:?}"
        ))),
    }
}

/// Per-pixel class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<Class>,
}

impl ClassMap {
    pub fn new(height: usize, width: usize, labels: Vec<Class>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::shape(format!(
                "{height}x{width} class map needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        Ok(ClassMap {
            height,
            width,
            labels,
        })
    }

    pub fn filled(height: usize, width: usize, class: Class) -> Self {
        ClassMap {
            height,
            width,
            labels: vec![class; height * width],
        }
    }

    pub fn get(&self, h: usize, v: usize) -> Class {
        self.labels[h * self.width + v]
    }

    pub fn to_tensor(&self) -> (Vec<usize>, TensorData) {
        (
            vec![self.height, self.width],
            TensorData::U8(self.labels.iter().map(|c| c.code()).collect()),
        )
    }

    pub fn from_tensor(tensor: Tensor) -> Result<Self> {
        let (dims, codes) = tensor.into_u8()?;
        let (height, width) = expect_2d(&dims, "class map")?;
        let labels = codes
            .into_iter()
            .map(Class::from_code)
            .collect::<Result<_>>()?;
        Ok(ClassMap {
            height,
            width,
            labels,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let (dims, data) = self.to_tensor();
        write_tensor(path, &dims, &data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tensor(read_tensor(path)?)
    }
}

/// Per-pixel fraction of agreeing neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
}

impl ConfidenceMap {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_tensor(
            path,
            &[self.height, self.width],
            &TensorData::F32(self.values.clone()),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (dims, values) = read_tensor(path)?.into_f32()?;
        let (height, width) = expect_2d(&dims, "confidence map")?;
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("confidence {v} outside [0, 1]")));
        }
        Ok(ConfidenceMap {
            height,
            width,
            values,
        })
    }
}

/// Per-pixel change flags; `true` = changed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryChangeMap {
    pub height: usize,
    pub width: usize,
    pub changed: Vec<bool>,
}

impl BinaryChangeMap {
    pub fn empty(height: usize, width: usize) -> Self {
        BinaryChangeMap {
            height,
            width,
            changed: vec![false; height * width],
        }
    }

    pub fn count(&self) -> usize {
        self.changed.iter().filter(|&&c| c).count()
    }

    pub fn to_tensor(&self) -> (Vec<usize>, TensorData) {
        (
            vec![self.height, self.width],
            TensorData::U8(self.changed.iter().map(|&c| c as u8).collect()),
        )
    }

    pub fn from_tensor(tensor: Tensor) -> Result<Self> {
        let (dims, flags) = tensor.into_u8()?;
        let (height, width) = expect_2d(&dims, "change map")?;
        let changed = flags
            .into_iter()
            .map(|f| match f {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::invalid(format!("change flag {other} is not 0 or 1"))),
            })
            .collect::<Result<_>>()?;
        Ok(BinaryChangeMap {
            height,
            width,
            changed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let (dims, data) = self.to_tensor();
        write_tensor(path, &dims, &data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tensor(read_tensor(path)?)
    }
}

pub(crate) fn check_dims(a: (usize, usize), b: (usize, usize), what: &str) -> Result<()> {
    if a != b {
        return Err(Error::shape(format!(
            "{what}: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}
