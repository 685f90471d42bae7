use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{DfcnError, Result};
use crate::numcore::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansOptions {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop once the summed squared center movement falls to this value.
    pub tol: f64,
    pub seed: u64,
}

impl KMeansOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansOptions {
            k,
            restarts: 20,
            max_iter: 300,
            tol: 1e-4,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// K x d
    pub centers: Matrix,
    pub inertia: f64,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest center for every row (ties to the lower index) and the total squared distance.
pub fn assign(z: &Matrix, centers: &Matrix) -> (Vec<usize>, Vec<f64>, f64) {
    let mut labels = Vec::with_capacity(z.rows());
    let mut dists = Vec::with_capacity(z.rows());
    for i in 0..z.rows() {
        let mut best = (0, f64::INFINITY);
        for c in 0..centers.rows() {
            let d = sq_dist(z.row(i), centers.row(c));
            if d < best.1 {
                best = (c, d);
            }
        }
        labels.push(best.0);
        dists.push(best.1);
    }
    let inertia = dists.iter().sum();
    (labels, dists, inertia)
}

fn plus_plus_seed(z: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = z.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(z.row(i), z.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // every point coincides with a chosen center
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(z.row(i), z.row(next)));
        }
    }
    Matrix::from_fn(k, z.cols(), |c, j| z.get(chosen[c], j))
}

fn lloyd(z: &Matrix, opts: &KMeansOptions, rng: &mut ChaCha8Rng) -> KMeansResult {
    let (n, d, k) = (z.rows(), z.cols(), opts.k);
    let mut centers = plus_plus_seed(z, k, rng);
    let mut trace = Vec::new();
    for _ in 0..opts.max_iter {
        let (labels, dists, inertia) = assign(z, &centers);
        trace.push(inertia);

        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, v) in sums.row_mut(labels[i]).iter_mut().zip(z.row(i)) {
                *s += v;
            }
        }
        let mut taken = vec![false; n];
        let mut next = Matrix::zeros(k, d);
        for c in 0..k {
            if counts[c] > 0 {
                for (o, s) in next.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *o = s / counts[c] as f64;
                }
            } else {
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                taken[far] = true;
                log::warn!("k-means: cluster {c} emptied, re-seeded at point {far}");
                next.row_mut(c).copy_from_slice(z.row(far));
            }
        }
        let shift: f64 = (0..k).map(|c| sq_dist(centers.row(c), next.row(c))).sum();
        centers = next;
        if shift <= opts.tol {
            break;
        }
    }
    let (labels, _, inertia) = assign(z, &centers);
    KMeansResult {
        labels,
        centers,
        inertia,
        inertia_trace: trace,
    }
}

/// k-means++ seeding and Lloyd iterations, best of `restarts` by inertia.
///
/// Restart `r` draws from its own generator seeded from the master seed, so
/// the result does not depend on how restarts are scheduled.
pub fn kmeans_with(z: &Matrix, opts: &KMeansOptions) -> Result<KMeansResult> {
    let n = z.rows();
    if opts.k == 0 || opts.k > n {
        return Err(DfcnError::Parameter(format!("k-means needs 1 <= K <= N, got K = {} with N = {n}", opts.k)));
    }
    if !z.is_finite() {
        return Err(DfcnError::Validation("k-means input contains non-finite values".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(opts.seed);
    let seeds: Vec<u64> = (0..opts.restarts.max(1)).map(|_| master.random()).collect();
    let runs: Vec<KMeansResult> = seeds
        .par_iter()
        .map(|&s| lloyd(z, opts, &mut ChaCha8Rng::seed_from_u64(s)))
        .collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.inertia < runs[best].inertia {
            best = i;
        }
    }
    Ok(runs.into_iter().nth(best).unwrap())
}

pub fn kmeans(z: &Matrix, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_with(
        z,
        &KMeansOptions {
            restarts,
            ..KMeansOptions::new(k, seed)
        },
    )
}
