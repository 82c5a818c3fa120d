//! Independent reference implementations used by the integration and
//! acceptance tests. Everything here is written the slow, obvious way.
#![allow(dead_code)]

use std::collections::BTreeMap;

use floodsense_core::features::ProviderSpec;
use floodsense_core::idss::{
    build_prototype_bank, collect_class_pixels, BankConfig, Prototype, PrototypeBank,
};
use floodsense_core::idss::{ClusterMethod, PrototypeMode};
use floodsense_core::raster::Class;
use floodsense_core::synthetic::{training_scene, SceneSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

/// Per-pixel mean vector and mean squared norm over `frames`, each
/// `n_pix × d` row-major.
pub fn batch_stats(frames: &[Vec<f32>], n_pix: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    let l = frames.len() as f64;
    let mut mu = vec![0.0; n_pix * d];
    let mut sigma = vec![0.0; n_pix];
    for f in frames {
        for p in 0..n_pix {
            let x = &f[p * d..(p + 1) * d];
            for j in 0..d {
                mu[p * d + j] += x[j] as f64;
            }
            sigma[p] += x.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>();
        }
    }
    mu.iter_mut().for_each(|v| *v /= l);
    sigma.iter_mut().for_each(|v| *v /= l);
    (mu, sigma)
}

/// Mean over pixels of 1 / (1 + ‖x−μ‖² + max(0, Σ − ‖μ‖²)).
pub fn batch_frame_similarity(frame: &[f32], mu: &[f64], sigma: &[f64], d: usize) -> f64 {
    let n = sigma.len();
    let mut total = 0.0;
    for p in 0..n {
        let mut dist = 0.0;
        let mut mu_sq = 0.0;
        for j in 0..d {
            let m = mu[p * d + j];
            dist += (frame[p * d + j] as f64 - m).powi(2);
            mu_sq += m * m;
        }
        total += 1.0 / (1.0 + dist + (sigma[p] - mu_sq).max(0.0));
    }
    total / n as f64
}

/// Closed form of the series recursion: the plain mean of all scores, and
/// the mean over frames of the squared deviation of each score from the
/// mean of the scores up to and including it.
pub fn series_batch(values: &[f64]) -> (f64, f64) {
    let prefix_mean = |i: usize| values[..=i].iter().sum::<f64>() / (i + 1) as f64;
    let n = values.len();
    let mean = prefix_mean(n - 1);
    let var = (0..n)
        .map(|i| (values[i] - prefix_mean(i)).powi(2))
        .sum::<f64>()
        / n as f64;
    (mean, var)
}

/// Exhaustive kNN: sort every prototype by (squared distance, index), vote,
/// then break ties by summed distance and class code.
pub fn knn_oracle(bank: &PrototypeBank, q: &[f32], k: usize) -> (Class, f64) {
    let mut all: Vec<(f64, usize)> = bank
        .prototypes
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d: f64 =
                p.y.iter()
                    .zip(q)
                    .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
                    .sum();
            (d, i)
        })
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tally: BTreeMap<u8, (usize, f64)> = BTreeMap::new();
    for &(d, i) in &all[..k] {
        let e = tally
            .entry(bank.prototypes[i].class.code())
            .or_insert((0, 0.0));
        e.0 += 1;
        e.1 += d.sqrt();
    }
    let mut ranked: Vec<(u8, usize, f64)> =
        tally.into_iter().map(|(c, (n, s))| (c, n, s)).collect();
    ranked.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(a.2.partial_cmp(&b.2).unwrap())
            .then(a.0.cmp(&b.0))
    });
    let (code, votes, _) = ranked[0];
    (Class::from_code(code).unwrap(), votes as f64 / k as f64)
}

/// Random bank whose latents sit on a small integer grid, so that distance
/// ties are common.
pub fn random_bank(rng: &mut ChaCha8Rng, size: usize, dim: usize, grid: i32) -> PrototypeBank {
    let prototypes = (0..size)
        .map(|_| {
            let y: Vec<f32> = (0..dim)
                .map(|_| rng.gen_range(-grid..=grid) as f32)
                .collect();
            Prototype {
                class: Class::LABELLED[rng.gen_range(0..3)],
                x: y.clone(),
                y,
                provenance: None,
            }
        })
        .collect();
    PrototypeBank {
        method: ClusterMethod::KMedoids,
        mode: PrototypeMode::NearestRealPixel,
        seed: 0,
        latent_dim: dim,
        raw_dim: dim,
        per_class: size,
        prototypes,
    }
}

/// Sum over rows of the squared distance to the nearest chosen medoid.
pub fn medoid_cost(data: &[f32], dim: usize, medoids: &[usize]) -> f64 {
    data.chunks_exact(dim)
        .map(|r| {
            medoids
                .iter()
                .map(|&m| {
                    r.iter()
                        .zip(&data[m * dim..(m + 1) * dim])
                        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Best k-subset by exhaustive enumeration: the lexicographically first
/// optimum, its cost, and how many subsets reach that cost.
pub fn exhaustive_medoids(data: &[f32], dim: usize, k: usize) -> (Vec<usize>, f64, usize) {
    let n = data.len() / dim;
    let mut best = (Vec::new(), f64::INFINITY, 0);
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let c = medoid_cost(data, dim, &subset);
        if c < best.1 {
            best = (subset.clone(), c, 1);
        } else if c == best.1 {
            best.2 += 1;
        }
        // next combination in lexicographic order
        let Some(i) = (0..k).rev().find(|&i| subset[i] < n - k + i) else {
            return best;
        };
        subset[i] += 1;
        for j in i + 1..k {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

/// Plain Lloyd iterations from the given starting centres.
pub fn lloyd(data: &[f32], dim: usize, mut centres: Vec<Vec<f64>>, iters: usize) -> Vec<Vec<f64>> {
    for _ in 0..iters {
        let mut sums = vec![vec![0.0; dim]; centres.len()];
        let mut counts = vec![0usize; centres.len()];
        for r in data.chunks_exact(dim) {
            let c = (0..centres.len())
                .min_by(|&a, &b| {
                    let da: f64 = r
                        .iter()
                        .zip(&centres[a])
                        .map(|(&x, m)| (x as f64 - m).powi(2))
                        .sum();
                    let db: f64 = r
                        .iter()
                        .zip(&centres[b])
                        .map(|(&x, m)| (x as f64 - m).powi(2))
                        .sum();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            counts[c] += 1;
            for j in 0..dim {
                sums[c][j] += r[j] as f64;
            }
        }
        for (c, centre) in centres.iter_mut().enumerate() {
            if counts[c] > 0 {
                for j in 0..dim {
                    centre[j] = sums[c][j] / counts[c] as f64;
                }
            }
        }
    }
    centres
}

/// Isotropic Gaussian blobs, `per_blob` rows each, returned with the blob
/// of every row.
pub fn blobs(
    rng: &mut ChaCha8Rng,
    means: &[Vec<f64>],
    spread: f64,
    per_blob: usize,
) -> (Vec<f32>, Vec<usize>) {
    use rand_distr::{Distribution, StandardNormal};
    let mut data = Vec::new();
    let mut owner = Vec::new();
    for (b, m) in means.iter().enumerate() {
        for _ in 0..per_blob {
            for &c in m {
                let z: f64 = StandardNormal.sample(rng);
                data.push((c + spread * z) as f32);
            }
            owner.push(b);
        }
    }
    (data, owner)
}

/// Small bank trained on the synthetic labelled scene.
pub fn synthetic_bank(seed: u64) -> PrototypeBank {
    let (img, labels) = training_scene(SceneSpec::new(16, 16, 1000 + seed));
    let samples = collect_class_pixels(
        [(&img, &labels)],
        &ProviderSpec::Identity,
        &Class::LABELLED,
        2_000,
        seed,
    )
    .unwrap();
    build_prototype_bank(
        &samples,
        &BankConfig {
            per_class: 12,
            iters: Some(40),
            seed,
            ..Default::default()
        },
    )
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
