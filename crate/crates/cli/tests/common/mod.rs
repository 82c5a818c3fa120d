#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use floodsense_core::raster::{save_image_data, Manifest, ManifestEntry, MultispectralImage};
use floodsense_core::synthetic::{flood_series, training_scene, SceneSpec};

pub fn floodsense(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floodsense"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[track_caller]
pub fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        stdout(&out),
        stderr(&out)
    );
    out
}

fn entry(dir: &Path, image: &MultispectralImage) -> ManifestEntry {
    let data = PathBuf::from(format!("{}.imtf", image.id));
    save_image_data(image, dir.join(&data)).unwrap();
    ManifestEntry {
        id: image.id.clone(),
        timestamp: image.timestamp,
        data,
        mask: None,
        label: None,
    }
}

/// Writes `quiet` land frames (plus one flood frame when `fraction > 0`)
/// and returns the manifest path.
pub fn write_series(dir: &Path, size: usize, quiet: usize, fraction: f64, seed: u64) -> PathBuf {
    let series = flood_series(SceneSpec::new(size, size, seed), quiet, fraction);
    let entries = series.images.iter().map(|img| entry(dir, img)).collect();
    let path = dir.join("series.json");
    Manifest::new(entries, dir).save(&path).unwrap();
    path
}

/// Writes a labelled training scene and returns the manifest path.
pub fn write_training(dir: &Path, size: usize, seed: u64) -> PathBuf {
    let (image, labels) = training_scene(SceneSpec::new(size, size, seed));
    let mut e = entry(dir, &image);
    let label = PathBuf::from(format!("{}.label.imtf", image.id));
    labels.save(dir.join(&label)).unwrap();
    e.label = Some(label);
    let path = dir.join("train.json");
    Manifest::new(vec![e], dir).save(&path).unwrap();
    path
}
