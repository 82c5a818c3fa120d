//! Two-dimensional principal-component view of prototype latents.

use crate::{Error, Result};

use super::bank::PrototypeBank;

/// Projects every prototype's latent vector onto the top two principal axes
/// of the bank. Each axis is signed so that its first non-negligible
/// coordinate is positive. With fewer than two latent dimensions the second
/// coordinate is 0.
pub fn project_prototypes_2d(bank: &PrototypeBank) -> Result<Vec<[f64; 2]>> {
    let rows: Vec<&[f32]> = bank.prototypes.iter().map(|p| p.y.as_slice()).collect();
    project_rows_2d(&rows)
}

pub fn project_rows_2d(rows: &[&[f32]]) -> Result<Vec<[f64; 2]>> {
    if rows.len() < 2 {
        return Err(Error::invalid("need at least two prototypes to project"));
    }
    let dim = rows[0].len();
    if dim == 0 || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::shape(
            "prototype latents must share a nonzero length",
        ));
    }
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..dim)
        .map(|j| rows.iter().map(|r| r[j] as f64).sum::<f64>() / n)
        .collect();
    let centred: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(&x, &m)| x as f64 - m).collect())
        .collect();
    let mut cov = vec![0.0; dim * dim];
    for r in &centred {
        for a in 0..dim {
            for b in a..dim {
                cov[a * dim + b] += r[a] * r[b];
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            let v = cov[a * dim + b] / (n - 1.0);
            cov[a * dim + b] = v;
            cov[b * dim + a] = v;
        }
    }

    let (values, vectors) = jacobi_eigen(cov, dim);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let axes: Vec<Vec<f64>> = order
        .iter()
        .take(2)
        .map(|&c| {
            let mut axis: Vec<f64> = (0..dim).map(|r| vectors[r * dim + c]).collect();
            if let Some(first) = axis.iter().find(|v| v.abs() > 1e-12) {
                if *first < 0.0 {
                    axis.iter_mut().for_each(|v| *v = -*v);
                }
            }
            axis
        })
        .collect();

    Ok(centred
        .iter()
        .map(|r| {
            let mut out = [0.0; 2];
            for (o, axis) in out.iter_mut().zip(&axes) {
                *o = r.iter().zip(axis).map(|(a, b)| a * b).sum();
            }
            out
        })
        .collect())
}

/// Cyclic Jacobi eigendecomposition of a symmetric `dim × dim` matrix.
/// Returns eigenvalues and the eigenvector matrix (columns), row-major.
fn jacobi_eigen(mut a: Vec<f64>, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; dim * dim];
    for i in 0..dim {
        v[i * dim + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..dim)
            .flat_map(|p| (0..dim).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p * dim + q] * a[p * dim + q])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..dim {
            for q in p + 1..dim {
                let apq = a[p * dim + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q * dim + q] - a[p * dim + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let akp = a[k * dim + p];
                    let akq = a[k * dim + q];
                    a[k * dim + p] = c * akp - s * akq;
                    a[k * dim + q] = s * akp + c * akq;
                }
                for k in 0..dim {
                    let apk = a[p * dim + k];
                    let aqk = a[q * dim + k];
                    a[p * dim + k] = c * apk - s * aqk;
                    a[q * dim + k] = s * apk + c * aqk;
                }
                for k in 0..dim {
                    let vkp = v[k * dim + p];
                    let vkq = v[k * dim + q];
                    v[k * dim + p] = c * vkp - s * vkq;
                    v[k * dim + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..dim).map(|i| a[i * dim + i]).collect(), v)
}
