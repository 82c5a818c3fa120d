//! PAM k-medoids (BUILD, then SWAP) under squared Euclidean cost.
//!
//! The full pairwise distance matrix is kept in memory, so callers should cap
//! the sample count (a few thousand rows is comfortable).

use crate::{Execution, Result};

use super::kmeans::{check_input, distinct_rows};

/// Returns the indices of `k` medoid rows of `data`, sorted ascending.
///
/// Ties are broken toward lower sample indices. With no more distinct rows
/// than `k`, the first occurrence of each distinct row is returned.
pub fn kmedoids(data: &[f32], dim: usize, k: usize, exec: Execution) -> Result<Vec<usize>> {
    let n = check_input(data, dim, k)?;
    let distinct = distinct_rows(data, dim);
    if distinct.len() <= k {
        if distinct.len() < k {
            log::warn!(
                "requested {k} medoids but only {} distinct samples",
                distinct.len()
            );
        }
        return Ok(distinct);
    }

    let rows: Vec<&[f32]> = data.chunks_exact(dim).collect();
    let dist: Vec<f64> = exec
        .map_indexed(n, |i| {
            rows.iter()
                .map(|r| {
                    rows[i]
                        .iter()
                        .zip(*r)
                        .map(|(&a, &b)| {
                            let d = a as f64 - b as f64;
                            d * d
                        })
                        .sum::<f64>()
                })
                .collect::<Vec<f64>>()
        })
        .concat();
    let d = |i: usize, j: usize| dist[i * n + j];

    // BUILD: greedily add the medoid that lowers total cost the most.
    let mut medoids = Vec::with_capacity(k);
    let mut is_medoid = vec![false; n];
    let mut nearest = vec![f64::INFINITY; n];
    for _ in 0..k {
        let costs = exec.map_indexed(n, |c| {
            if is_medoid[c] {
                f64::INFINITY
            } else {
                (0..n).map(|j| nearest[j].min(d(c, j))).sum::<f64>()
            }
        });
        let best = argmin(&costs);
        medoids.push(best);
        is_medoid[best] = true;
        for j in 0..n {
            nearest[j] = nearest[j].min(d(best, j));
        }
    }

    // SWAP: apply the single best improving (medoid, non-medoid) exchange
    // until none lowers the cost.
    let mut cost = total_cost(&medoids, n, &d);
    loop {
        let assign = Assignment::new(&medoids, n, &d);
        let deltas = exec.map_indexed(n, |h| {
            if is_medoid[h] {
                return (f64::INFINITY, 0);
            }
            let mut per_slot = vec![0.0; k];
            let mut shared = 0.0;
            for j in 0..n {
                let dhj = d(h, j);
                let gain = (dhj - assign.d1[j]).min(0.0);
                shared += gain;
                per_slot[assign.m1[j]] += dhj.min(assign.d2[j]) - assign.d1[j] - gain;
            }
            let slot = argmin(&per_slot);
            (shared + per_slot[slot], slot)
        });
        let mut best: Option<(f64, usize, usize)> = None;
        for (h, &(delta, slot)) in deltas.iter().enumerate() {
            if delta < 0.0 && best.is_none_or(|b| delta < b.0) {
                best = Some((delta, h, slot));
            }
        }
        let Some((_, h, slot)) = best else { break };
        let mut candidate = medoids.clone();
        candidate[slot] = h;
        let new_cost = total_cost(&candidate, n, &d);
        if new_cost >= cost {
            break;
        }
        is_medoid[medoids[slot]] = false;
        is_medoid[h] = true;
        medoids = candidate;
        cost = new_cost;
    }

    medoids.sort_unstable();
    Ok(medoids)
}

/// Index of the smallest value; the first one on ties.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

fn total_cost(medoids: &[usize], n: usize, d: &impl Fn(usize, usize) -> f64) -> f64 {
    (0..n)
        .map(|j| {
            medoids
                .iter()
                .map(|&m| d(m, j))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Nearest and second-nearest medoid distance of every sample.
struct Assignment {
    d1: Vec<f64>,
    m1: Vec<usize>,
    d2: Vec<f64>,
}

impl Assignment {
    fn new(medoids: &[usize], n: usize, d: &impl Fn(usize, usize) -> f64) -> Self {
        let mut a = Assignment {
            d1: vec![f64::INFINITY; n],
            m1: vec![0; n],
            d2: vec![f64::INFINITY; n],
        };
        for j in 0..n {
            for (slot, &m) in medoids.iter().enumerate() {
                let dist = d(m, j);
                if dist < a.d1[j] {
                    a.d2[j] = a.d1[j];
                    a.d1[j] = dist;
                    a.m1[j] = slot;
                } else if dist < a.d2[j] {
                    a.d2[j] = dist;
                }
            }
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medoids_are_samples() {
        let data = [0.0f32, 0.5, 3.0, 3.2, 7.0, 7.7, 9.0];
        let m = kmedoids(&data, 1, 3, Execution::Sequential).unwrap();
        assert_eq!(m.len(), 3);
        assert!(m.iter().all(|&i| i < data.len()));
    }

    #[test]
    fn two_groups_on_a_line() {
        let data = [0.0f32, 1.0, 2.0, 10.0, 11.0, 12.0];
        assert_eq!(
            kmedoids(&data, 1, 2, Execution::Sequential).unwrap(),
            vec![1, 4]
        );
    }

    #[test]
    fn tie_goes_to_lower_index() {
        assert_eq!(
            kmedoids(&[0.0, 10.0], 1, 1, Execution::Sequential).unwrap(),
            vec![0]
        );
    }

    #[test]
    fn duplicates_collapse_to_distinct_rows() {
        let data = [2.0f32, 2.0, 5.0, 2.0];
        assert_eq!(
            kmedoids(&data, 1, 3, Execution::Sequential).unwrap(),
            vec![0, 2]
        );
    }

    #[test]
    fn parallel_matches_sequential() {
        let data: Vec<f32> = (0..120).map(|i| ((i * 7919 % 97) as f32).sqrt()).collect();
        assert_eq!(
            kmedoids(&data, 2, 5, Execution::Sequential).unwrap(),
            kmedoids(&data, 2, 5, Execution::Parallel).unwrap()
        );
    }
}
