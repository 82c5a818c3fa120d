//! Seeded synthetic Sentinel-2-like scenes for tests, benchmarks and demos.
//!
//! Values are reflectances multiplied by [`SceneSpec::gain`] (10 by
//! default), which puts ordinary sensor noise well inside the similarity
//! kernel and land-to-water transitions well outside it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::{Class, ClassMap, MultispectralImage, Timestamp};

/// Vegetated land: dark visible, bright near infrared.
pub const LAND: [f32; 13] = [
    0.13, 0.12, 0.14, 0.12, 0.20, 0.28, 0.31, 0.33, 0.34, 0.30, 0.10, 0.24, 0.16,
];
/// Open water: every band at least 0.05 below or above [`LAND`].
pub const WATER: [f32; 13] = [
    0.07, 0.06, 0.05, 0.04, 0.03, 0.02, 0.02, 0.02, 0.02, 0.01, 0.03, 0.01, 0.01,
];
pub const CLOUD: [f32; 13] = [
    0.62, 0.64, 0.66, 0.68, 0.69, 0.70, 0.70, 0.71, 0.70, 0.45, 0.30, 0.52, 0.44,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    /// Per-band temporal noise (reflectance units).
    pub noise: f32,
    /// Fixed per-pixel texture (reflectance units).
    pub texture: f32,
    pub gain: f32,
    pub seed: u64,
}

impl SceneSpec {
    pub fn new(height: usize, width: usize, seed: u64) -> Self {
        SceneSpec {
            height,
            width,
            noise: 0.01,
            texture: 0.005,
            gain: 10.0,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSeries {
    pub images: Vec<MultispectralImage>,
    /// Index of the flooded frame, if any.
    pub flood_frame: Option<usize>,
    /// Pixels turned to water in the flooded frame.
    pub flood_mask: Vec<bool>,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f32 {
    // Box-Muller; one draw per call keeps the stream easy to reason about
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    ((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()) as f32
}

struct Scene {
    spec: SceneSpec,
    texture: Vec<f32>,
    rng: ChaCha8Rng,
}

impl Scene {
    fn new(spec: SceneSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let texture = (0..spec.height * spec.width * 13)
            .map(|_| spec.texture * gaussian(&mut rng))
            .collect();
        Scene { spec, texture, rng }
    }

    fn frame(
        &mut self,
        id: String,
        timestamp: Timestamp,
        cover: impl Fn(usize) -> Class,
    ) -> MultispectralImage {
        let n = self.spec.height * self.spec.width;
        let mut data = Vec::with_capacity(n * 13);
        for i in 0..n {
            let signature = match cover(i) {
                Class::Water => &WATER,
                Class::Cloud => &CLOUD,
                _ => &LAND,
            };
            for (b, &base) in signature.iter().enumerate() {
                let v = base + self.texture[i * 13 + b] + self.spec.noise * gaussian(&mut self.rng);
                data.push(v * self.spec.gain);
            }
        }
        MultispectralImage::new(
            id,
            timestamp,
            (self.spec.height, self.spec.width, 13),
            data,
            None,
        )
        .expect("synthetic frame is well formed")
    }
}

fn day(start: Timestamp, offset: usize) -> Timestamp {
    Timestamp(start.0 + chrono::Duration::days(5 * offset as i64))
}

/// `quiet` land-only frames five days apart, followed (when
/// `flood_fraction > 0`) by one frame in which the leftmost
/// `ceil(flood_fraction · width)` columns have turned to water.
pub fn flood_series(spec: SceneSpec, quiet: usize, flood_fraction: f64) -> SyntheticSeries {
    let mut scene = Scene::new(spec);
    let start = Timestamp::from_ymd(2021, 1, 1).unwrap();
    let mut images: Vec<MultispectralImage> = (0..quiet)
        .map(|t| {
            scene.frame(format!("s{}_t{t:02}", spec.seed), day(start, t), |_| {
                Class::Land
            })
        })
        .collect();
    let flood_cols = (flood_fraction * spec.width as f64).ceil() as usize;
    let flood_mask: Vec<bool> = (0..spec.height * spec.width)
        .map(|i| i % spec.width < flood_cols)
        .collect();
    let mut flood_frame = None;
    if flood_cols > 0 {
        let mask = flood_mask.clone();
        images.push(scene.frame(
            format!("s{}_t{quiet:02}", spec.seed),
            day(start, quiet),
            move |i| if mask[i] { Class::Water } else { Class::Land },
        ));
        flood_frame = Some(quiet);
    }
    SyntheticSeries {
        images,
        flood_frame,
        flood_mask,
    }
}

/// A labelled training scene: left third water, a cloud block in the lower
/// right, land elsewhere.
pub fn training_scene(spec: SceneSpec) -> (MultispectralImage, ClassMap) {
    let mut scene = Scene::new(spec);
    let (h, w) = (spec.height, spec.width);
    let cover = move |i: usize| {
        let (r, c) = (i / w, i % w);
        if c < w / 3 {
            Class::Water
        } else if r >= h / 2 && c >= 2 * w / 3 {
            Class::Cloud
        } else {
            Class::Land
        }
    };
    let image = scene.frame(
        format!("train{}", spec.seed),
        Timestamp::from_ymd(2020, 6, 1).unwrap(),
        cover,
    );
    let labels = ClassMap {
        height: h,
        width: w,
        labels: (0..h * w).map(cover).collect(),
    };
    (image, labels)
}
