//! Lloyd's k-means with k-means++ seeding from a fixed-seed generator.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 0x5eed_0050;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    /// `K × D`.
    pub centroids: DMatrix<f64>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

fn dist2(data: &DMatrix<f64>, i: usize, c: &DMatrix<f64>, k: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..data.ncols() {
        let e = data[(i, j)] - c[(k, j)];
        s += e * e;
    }
    s
}

/// Nearest centroid per row, ties to the lowest centroid index.
fn assign(data: &DMatrix<f64>, centroids: &DMatrix<f64>) -> Vec<(usize, f64)> {
    (0..data.nrows())
        .into_par_iter()
        .map(|i| {
            let mut best = (0, dist2(data, i, centroids, 0));
            for k in 1..centroids.nrows() {
                let d = dist2(data, i, centroids, k);
                if d < best.1 {
                    best = (k, d);
                }
            }
            best
        })
        .collect()
}

fn seed_centroids(data: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = data.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| row_dist2(data, i, chosen[0])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if *d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the target just past the final sum
            pick.unwrap_or_else(|| (0..n).rev().find(|&i| d2[i] > 0.0).expect("positive total"))
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(pick);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(row_dist2(data, i, pick));
        }
    }
    DMatrix::from_fn(k, data.ncols(), |r, j| data[(chosen[r], j)])
}

fn row_dist2(data: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    (0..data.ncols())
        .map(|j| (data[(a, j)] - data[(b, j)]).powi(2))
        .sum()
}

/// Clusters the rows of `data` into `k` groups.
pub fn kmeans(data: &DMatrix<f64>, k: usize, max_iter: usize, seed: u64) -> Result<KMeans> {
    let (n, d) = data.shape();
    if k == 0 || k > n {
        return Err(Error::NotEnough {
            what: "points for the requested cluster count",
            needed: k.max(1),
            got: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(data, k, &mut rng);
    let mut current = assign(data, &centroids);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = DMatrix::<f64>::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &(c, _)) in current.iter().enumerate() {
            counts[c] += 1;
            for j in 0..d {
                sums[(c, j)] += data[(i, j)];
            }
        }
        for c in 0..k {
            // an empty cluster keeps its previous centroid
            if counts[c] > 0 {
                for j in 0..d {
                    centroids[(c, j)] = sums[(c, j)] / counts[c] as f64;
                }
            }
        }
        let next = assign(data, &centroids);
        let changed = next.iter().zip(&current).any(|(a, b)| a.0 != b.0);
        current = next;
        if !changed {
            break;
        }
    }
    Ok(KMeans {
        centroids,
        inertia: current.iter().map(|&(_, d)| d).sum(),
        assignment: current.into_iter().map(|(c, _)| c).collect(),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (DMatrix<f64>, Vec<usize>) {
        let n = 200;
        let truth: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let m = DMatrix::from_fn(n, 3, |i, j| {
            let jitter = crate::synth::noise_at(3, (i * 3 + j) as u64) * 0.5;
            if truth[i] == 0 {
                jitter
            } else {
                20.0 + jitter
            }
        });
        (m, truth)
    }

    #[test]
    fn every_point_its_own_cluster() {
        let m = DMatrix::from_fn(50, 4, |i, j| (i * 4 + j) as f64 * 0.37);
        let km = kmeans(&m, 50, DEFAULT_MAX_ITER, DEFAULT_SEED).unwrap();
        assert_eq!(km.inertia, 0.0);
        let mut a = km.assignment.clone();
        a.sort();
        a.dedup();
        assert_eq!(a.len(), 50);
    }

    #[test]
    fn separates_blobs() {
        let (m, truth) = blobs();
        let km = kmeans(&m, 2, DEFAULT_MAX_ITER, DEFAULT_SEED).unwrap();
        let flip = km.assignment[0] != truth[0];
        for (a, t) in km.assignment.iter().zip(&truth) {
            assert_eq!(*a == *t, !flip);
        }
    }

    #[test]
    fn deterministic_and_checked() {
        let (m, _) = blobs();
        assert_eq!(
            kmeans(&m, 7, 100, 1).unwrap(),
            kmeans(&m, 7, 100, 1).unwrap()
        );
        assert!(kmeans(&m, 201, 100, 1).is_err());
        assert!(kmeans(&m, 0, 100, 1).is_err());
    }

    #[test]
    fn duplicate_points() {
        let m = DMatrix::from_element(5, 2, 1.0);
        let km = kmeans(&m, 3, 100, 1).unwrap();
        assert_eq!(km.inertia, 0.0);
    }
}
