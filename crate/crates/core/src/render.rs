//! PNG renderings of class maps, confidence maps and flood overlays.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::idss::is_high_confidence;
use crate::raster::{check_dims, BinaryChangeMap, Class, ClassMap, ConfidenceMap};
use crate::{Error, Result};

pub const BACKGROUND_GRAY: [u8; 3] = [128, 128, 128];

/// Land green, Water blue, Cloud yellow, Invalid black.
pub fn class_color(class: Class) -> [u8; 3] {
    match class {
        Class::Invalid => [0, 0, 0],
        Class::Land => [0, 160, 0],
        Class::Water => [0, 0, 255],
        Class::Cloud => [255, 255, 0],
    }
}

/// Halfway toward white, rounding up.
fn lighten(c: [u8; 3]) -> [u8; 3] {
    c.map(|v| (v as u16 + 255).div_ceil(2) as u8)
}

fn raster(
    height: usize,
    width: usize,
    mut color: impl FnMut(usize) -> [u8; 3],
) -> Result<RgbImage> {
    let (w, h) = (
        u32::try_from(width).map_err(|_| Error::shape("image too wide"))?,
        u32::try_from(height).map_err(|_| Error::shape("image too tall"))?,
    );
    Ok(RgbImage::from_fn(w, h, |x, y| {
        Rgb(color(y as usize * width + x as usize))
    }))
}

pub fn render_class_map(classes: &ClassMap) -> Result<RgbImage> {
    raster(classes.height, classes.width, |i| {
        class_color(classes.labels[i])
    })
}

/// Class colours, lightened where confidence falls below `tau`.
pub fn render_confidence(conf: &ConfidenceMap, classes: &ClassMap, tau: f64) -> Result<RgbImage> {
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
    raster(classes.height, classes.width, |i| {
        let color = class_color(classes.labels[i]);
        if classes.labels[i] == Class::Invalid || is_high_confidence(conf.values[i] as f64, tau) {
            color
        } else {
            lighten(color)
        }
    })
}

/// Changed Water pixels in blue over a gray background.
pub fn render_change_overlay(change: &BinaryChangeMap, classes: &ClassMap) -> Result<RgbImage> {
    check_dims(
        (change.height, change.width),
        (classes.height, classes.width),
        "change vs class map",
    )?;
    raster(change.height, change.width, |i| {
        if change.changed[i] && classes.labels[i] == Class::Water {
            class_color(Class::Water)
        } else {
            BACKGROUND_GRAY
        }
    })
}

/// Renders an already-combined mask (e.g. a report's extent) the same way.
pub fn render_mask(mask: &BinaryChangeMap) -> Result<RgbImage> {
    raster(mask.height, mask.width, |i| {
        if mask.changed[i] {
            class_color(Class::Water)
        } else {
            BACKGROUND_GRAY
        }
    })
}

/// Scatter plot of 2-D points on a white square canvas, one 3×3 dot per
/// point in its class colour. Axes are scaled jointly to keep the aspect
/// ratio.
pub fn render_projection(points: &[[f64; 2]], classes: &[Class], size: u32) -> Result<RgbImage> {
    if points.len() != classes.len() {
        return Err(Error::shape(format!(
            "{} points but {} classes",
            points.len(),
            classes.len()
        )));
    }
    if size < 8 {
        return Err(Error::invalid("canvas must be at least 8 pixels"));
    }
    let mut img = RgbImage::from_pixel(size, size, Rgb([255, 255, 255]));
    if points.is_empty() {
        return Ok(img);
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let margin = 4.0;
    let scale = (size as f64 - 2.0 * margin - 1.0) / span;
    let centre = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let mid = (size as f64 - 1.0) / 2.0;
    for (p, &c) in points.iter().zip(classes) {
        let x = (mid + (p[0] - centre[0]) * scale).round() as i64;
        // image rows grow downward
        let y = (mid - (p[1] - centre[1]) * scale).round() as i64;
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (px, py) = (x + dx, y + dy);
                if (0..size as i64).contains(&px) && (0..size as i64).contains(&py) {
                    img.put_pixel(px as u32, py as u32, Rgb(class_color(c)));
                }
            }
        }
    }
    Ok(img)
}

pub fn save_png(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    image.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}
