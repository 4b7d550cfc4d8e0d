//! Seeded k-means (k-means++ seeding, Lloyd refinement) for RBF centers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const MAX_LLOYD_ITERATIONS: usize = 100;
pub const RELATIVE_SHIFT_TOL: f64 = 1e-6;

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &DenseMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.row_iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding. When every remaining point coincides with a chosen
/// center, the next center is drawn uniformly from the unchosen rows.
fn seed_centers(inputs: &DenseMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = inputs.rows();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut d2: Vec<f64> = inputs.row_iter().map(|r| sq_dist(r, inputs.row(first))).collect();

    while chosen.len() < k {
        let total: f64 = d2.iter().zip(&taken).filter(|(_, t)| !**t).map(|(d, _)| d).sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for i in 0..n {
                if taken[i] || d2[i] <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < d2[i] {
                    break;
                }
                target -= d2[i];
            }
            pick.expect("positive total weight implies a candidate")
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            *free.choose(rng).expect("k <= n leaves a free row")
        };
        chosen.push(next);
        taken[next] = true;
        for (i, r) in inputs.row_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, inputs.row(next)));
        }
    }
    chosen
}

/// Clusters the rows of `inputs` into `k` groups and returns the `k × d` centers.
///
/// Runs at most [`MAX_LLOYD_ITERATIONS`] Lloyd steps, stopping early once the
/// centers move by less than [`RELATIVE_SHIFT_TOL`] relative to their norm.
/// Empty clusters keep their previous center.
pub fn kmeans(inputs: &DenseMatrix, k: usize, seed: u64) -> Result<DenseMatrix> {
    let n = inputs.rows();
    let d = inputs.cols();
    if k == 0 {
        return Err(Error::invalid("number of centers must be positive"));
    }
    if k > n {
        return Err(Error::invalid(format!("cannot place {k} centers on {n} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = seed_centers(inputs, k, &mut rng);
    let mut centers = DenseMatrix::from_rows(&seeds.iter().map(|&i| inputs.row(i)).collect::<Vec<_>>())?;

    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for _ in 0..MAX_LLOYD_ITERATIONS {
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        for r in inputs.row_iter() {
            let (j, _) = nearest(r, &centers);
            counts[j] += 1;
            for (s, v) in sums[j * d..(j + 1) * d].iter_mut().zip(r) {
                *s += v;
            }
        }
        let mut shift = 0.0;
        let mut norm = 0.0;
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            let inv = 1.0 / counts[j] as f64;
            for c in 0..d {
                let updated = sums[j * d + c] * inv;
                let old = centers[(j, c)];
                shift += (updated - old) * (updated - old);
                norm += updated * updated;
                centers[(j, c)] = updated;
            }
        }
        if shift.sqrt() <= RELATIVE_SHIFT_TOL * norm.sqrt().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(centers)
}
