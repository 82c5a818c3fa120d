//! Mini-batch k-means with k-means++ seeding and per-centre learning rates
//! of `1 / count`.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Execution, Result};

pub const DEFAULT_BATCH_SIZE: usize = 1024;
/// Default iterations per requested cluster.
pub const DEFAULT_ITERS_PER_CLUSTER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiniBatchKMeans {
    pub clusters: usize,
    pub batch_size: usize,
    pub iters: usize,
    pub seed: u64,
}

impl MiniBatchKMeans {
    pub fn new(clusters: usize, seed: u64) -> Self {
        MiniBatchKMeans {
            clusters,
            batch_size: DEFAULT_BATCH_SIZE,
            iters: DEFAULT_ITERS_PER_CLUSTER * clusters,
            seed,
        }
    }

    /// Clusters the rows of `data` (`dim` columns) and returns the centres.
    ///
    /// When there are no more distinct rows than requested clusters, the
    /// distinct rows themselves are returned, in order of first appearance.
    pub fn fit(&self, data: &[f32], dim: usize, exec: Execution) -> Result<Vec<Vec<f64>>> {
        let n = check_input(data, dim, self.clusters)?;
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        let distinct = distinct_rows(data, dim);
        if distinct.len() <= self.clusters {
            if distinct.len() < self.clusters {
                log::warn!(
                    "requested {} clusters but only {} distinct samples; using the samples",
                    self.clusters,
                    distinct.len()
                );
            }
            return Ok(distinct
                .into_iter()
                .map(|i| row_f64(data, dim, i))
                .collect());
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut centres = kmeans_plus_plus(data, dim, n, self.clusters, &mut rng);
        let mut counts = vec![0u64; self.clusters];

        for _ in 0..self.iters {
            let batch: Vec<usize> = (0..self.batch_size).map(|_| rng.gen_range(0..n)).collect();
            let assigned = exec.map_indexed(batch.len(), |b| {
                nearest(&centres, &data[batch[b] * dim..(batch[b] + 1) * dim]).0
            });
            for (&i, &c) in batch.iter().zip(&assigned) {
                counts[c] += 1;
                let rate = 1.0 / counts[c] as f64;
                for (m, &x) in centres[c].iter_mut().zip(&data[i * dim..(i + 1) * dim]) {
                    *m = (1.0 - rate) * *m + rate * x as f64;
                }
            }
        }
        Ok(centres)
    }
}

pub(crate) fn check_input(data: &[f32], dim: usize, clusters: usize) -> Result<usize> {
    if clusters == 0 {
        return Err(Error::invalid("number of clusters must be at least 1"));
    }
    if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
        return Err(Error::invalid(format!(
            "cannot cluster {} values with dimension {dim}",
            data.len()
        )));
    }
    Ok(data.len() / dim)
}

/// Indices of the first occurrence of each distinct row (bitwise equality).
pub(crate) fn distinct_rows(data: &[f32], dim: usize) -> Vec<usize> {
    let mut seen = HashSet::new();
    data.chunks_exact(dim)
        .enumerate()
        .filter(|(_, row)| seen.insert(row.iter().map(|x| x.to_bits()).collect::<Vec<_>>()))
        .map(|(i, _)| i)
        .collect()
}

fn row_f64(data: &[f32], dim: usize, i: usize) -> Vec<f64> {
    data[i * dim..(i + 1) * dim]
        .iter()
        .map(|&x| x as f64)
        .collect()
}

pub(crate) fn squared_distance(a: &[f64], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&p, &q)| {
            let d = p - q as f64;
            d * d
        })
        .sum()
}

/// Index and squared distance of the closest centre; ties go to the lower index.
pub(crate) fn nearest(centres: &[Vec<f64>], x: &[f32]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centre) in centres.iter().enumerate() {
        let d = squared_distance(centre, x);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_plus_plus(
    data: &[f32],
    dim: usize,
    n: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let mut centres = vec![row_f64(data, dim, rng.gen_range(0..n))];
    let mut d2: Vec<f64> = data
        .chunks_exact(dim)
        .map(|x| squared_distance(&centres[0], x))
        .collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.gen::<f64>() * total;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w > 0.0 {
                pick = Some(i);
                if target < w {
                    break;
                }
                target -= w;
            }
        }
        // total > 0 is guaranteed: there are more distinct rows than centres
        let pick = pick.expect("no sample left with positive distance");
        let centre = row_f64(data, dim, pick);
        for (w, x) in d2.iter_mut().zip(data.chunks_exact(dim)) {
            *w = w.min(squared_distance(&centre, x));
        }
        centres.push(centre);
    }
    centres
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    /// Full-batch Lloyd iterations from the given starting centres.
    fn lloyd(data: &[f32], dim: usize, mut centres: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        for _ in 0..100 {
            let mut sums = vec![vec![0.0; dim]; centres.len()];
            let mut counts = vec![0usize; centres.len()];
            for x in data.chunks_exact(dim) {
                let c = nearest(&centres, x).0;
                counts[c] += 1;
                for (s, &v) in sums[c].iter_mut().zip(x) {
                    *s += v as f64;
                }
            }
            for (c, s) in sums.into_iter().enumerate() {
                if counts[c] > 0 {
                    centres[c] = s.into_iter().map(|v| v / counts[c] as f64).collect();
                }
            }
        }
        centres
    }

    #[test]
    fn single_sample() {
        let c = MiniBatchKMeans::new(1, 0)
            .fit(&[1.5, -2.0], 2, Execution::Sequential)
            .unwrap();
        assert_eq!(c, vec![vec![1.5, -2.0]]);
    }

    #[test]
    fn two_blobs_match_lloyd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut data = Vec::new();
        for centre in [-5.0, 5.0] {
            for _ in 0..200 {
                data.push((centre + 0.1 * normal(&mut rng)) as f32);
            }
        }
        let mut got = MiniBatchKMeans::new(2, 3)
            .fit(&data, 1, Execution::Sequential)
            .unwrap();
        got.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let mut oracle = lloyd(&data, 1, vec![vec![-1.0], vec![1.0]]);
        oracle.sort_by(|a, b| a[0].total_cmp(&b[0]));
        for (g, (o, truth)) in got.iter().zip(oracle.iter().zip([-5.0, 5.0])) {
            assert!((g[0] - truth).abs() < 0.1, "{got:?}");
            assert!((g[0] - o[0]).abs() < 0.1, "{got:?} vs {oracle:?}");
        }
    }

    #[test]
    fn clusters_equal_to_distinct_samples() {
        let data = [0.0f32, 1.0, 4.0, 1.0, 9.0, 0.0];
        let c = MiniBatchKMeans::new(4, 0)
            .fit(&data, 1, Execution::Sequential)
            .unwrap();
        assert_eq!(c, vec![vec![0.0], vec![1.0], vec![4.0], vec![9.0]]);
        let too_many = MiniBatchKMeans::new(10, 0)
            .fit(&data, 1, Execution::Sequential)
            .unwrap();
        assert_eq!(too_many.len(), 4);
    }

    #[test]
    fn deterministic_and_exec_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f32> = (0..3000).map(|_| rng.gen::<f32>()).collect();
        let km = MiniBatchKMeans {
            clusters: 7,
            batch_size: 64,
            iters: 50,
            seed: 9,
        };
        let a = km.fit(&data, 3, Execution::Sequential).unwrap();
        let b = km.fit(&data, 3, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, km.fit(&data, 3, Execution::Sequential).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(MiniBatchKMeans::new(0, 0)
            .fit(&[1.0], 1, Execution::Sequential)
            .is_err());
        assert!(MiniBatchKMeans::new(1, 0)
            .fit(&[], 1, Execution::Sequential)
            .is_err());
        assert!(MiniBatchKMeans::new(1, 0)
            .fit(&[1.0, 2.0, 3.0], 2, Execution::Sequential)
            .is_err());
    }
}
