//! Lloyd's algorithm with k-means++ seeding.

use rand::{Rng, SeedableRng};

use super::RmabError;
use crate::seed;

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans<const D: usize> {
    pub assignment: Vec<usize>,
    pub centroids: Vec<[f64; D]>,
    /// Inertia after every assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl<const D: usize> KMeans<D> {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().unwrap_or(&0.0)
    }
}

pub fn squared_distance<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest<const D: usize>(point: &[f64; D], centroids: &[[f64; D]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus<const D: usize, R: Rng>(points: &[[f64; D]], k: usize, rng: &mut R) -> Vec<[f64; D]> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut dist: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, d) in dist.iter().enumerate() {
                if *d > 0.0 && target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[pick]);
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &points[pick]));
        }
    }
    centroids
}

/// Clusters `points` into `k` groups. Iterates until assignments stop changing
/// or [`MAX_ITERATIONS`] is reached. An emptied cluster is reseeded at the
/// point farthest from its current centroid.
pub fn kmeans<const D: usize>(points: &[[f64; D]], k: usize, seed: u64) -> Result<KMeans<D>, RmabError> {
    if k == 0 || k > points.len() {
        return Err(RmabError::InvalidClusterCount { k, points: points.len() });
    }
    let mut rng = seed::Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(points, k, &mut rng);
    let mut assignment = vec![usize::MAX; points.len()];
    let mut inertia_history = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut changed = false;
        let mut dists = Vec::with_capacity(points.len());
        for (slot, p) in assignment.iter_mut().zip(points) {
            let (j, d) = nearest(p, &centroids);
            if *slot != j {
                *slot = j;
                changed = true;
            }
            dists.push(d);
        }
        inertia_history.push(dists.iter().sum());
        if !changed || iterations >= MAX_ITERATIONS {
            break;
        }
        let mut sums = vec![[0.0; D]; k];
        let mut sizes = vec![0usize; k];
        for (p, &j) in points.iter().zip(&assignment) {
            sizes[j] += 1;
            for (s, x) in sums[j].iter_mut().zip(p) {
                *s += x;
            }
        }
        for j in 0..k {
            if sizes[j] > 0 {
                for s in sums[j].iter_mut() {
                    *s /= sizes[j] as f64;
                }
                centroids[j] = sums[j];
            }
        }
        for j in 0..k {
            if sizes[j] == 0 {
                let Some(far) = (0..points.len()).filter(|&i| sizes[assignment[i]] > 1).max_by(|&a, &b| {
                    let da = squared_distance(&points[a], &centroids[assignment[a]]);
                    let db = squared_distance(&points[b], &centroids[assignment[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                }) else {
                    break;
                };
                centroids[j] = points[far];
                sizes[assignment[far]] -= 1;
                assignment[far] = j;
                sizes[j] = 1;
            }
        }
    }
    Ok(KMeans { assignment, centroids, inertia_history, iterations })
}
