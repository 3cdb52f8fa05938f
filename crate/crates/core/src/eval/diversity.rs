use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_CLUSTERS: usize = 20;
pub const DEFAULT_RESTARTS: usize = 50;
const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityMetrics {
    /// Natural-log entropy of the cluster assignment frequencies.
    pub entropy: f64,
    /// Mean member-to-centroid distance, averaged over non-empty clusters,
    /// in the units of the input.
    pub cluster_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid; ties go to the lowest index.
fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut t = rng.gen_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if t < d {
                    pick = i;
                    break;
                }
                t -= d;
            }
            pick
        } else {
            rng.gen_range(0..points.len())
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> Clustering {
    let dim = points[0].len();
    let mut assignment = vec![usize::MAX; points.len()];
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (j, _) = nearest(p, &centroids);
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (p, &j) in points.iter().zip(&assignment) {
            counts[j] += 1;
            for (s, x) in sums[j].iter_mut().zip(p) {
                *s += x;
            }
        }
        for j in 0..centroids.len() {
            // an emptied cluster keeps its old centroid
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
    }
    let inertia = points.iter().zip(&assignment).map(|(p, &j)| sq_dist(p, &centroids[j])).sum();
    Clustering {
        centroids,
        assignment,
        inertia,
    }
}

/// K-means with k-means++ seeding; keeps the restart with the lowest inertia.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> Result<Clustering> {
    if k == 0 || restarts == 0 {
        return Err(Error::InvalidArgument("k and restarts must be positive".into()));
    }
    if points.len() < k {
        return Err(Error::InvalidArgument(format!("{} grasps are fewer than {k} clusters", points.len())));
    }
    let dim = points[0].len();
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(Error::ShapeMismatch("grasp feature vectors differ in length".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("grasp features"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Clustering> = None;
    for _ in 0..restarts {
        let c = lloyd(points, seed_centroids(points, k, &mut rng));
        if best.as_ref().map_or(true, |b| c.inertia < b.inertia) {
            best = Some(c);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Entropy and mean cluster size of the grasps' flattened keypoints.
pub fn diversity_metrics(grasps: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> Result<DiversityMetrics> {
    let c = kmeans(grasps, k, restarts, seed)?;
    let n = grasps.len() as f64;
    let mut counts = vec![0usize; k];
    let mut spread = vec![0.0; k];
    for (p, &j) in grasps.iter().zip(&c.assignment) {
        counts[j] += 1;
        spread[j] += sq_dist(p, &c.centroids[j]).sqrt();
    }
    let entropy = counts
        .iter()
        .filter(|&&m| m > 0)
        .map(|&m| {
            let q = m as f64 / n;
            -q * q.ln()
        })
        .sum::<f64>()
        .max(0.0);
    let occupied: Vec<usize> = (0..k).filter(|&j| counts[j] > 0).collect();
    let cluster_size = occupied.iter().map(|&j| spread[j] / counts[j] as f64).sum::<f64>() / occupied.len() as f64;
    Ok(DiversityMetrics { entropy, cluster_size })
}
