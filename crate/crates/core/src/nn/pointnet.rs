//! Hierarchical point-set feature extractor: three set-abstraction levels
//! followed by three feature-propagation levels back to the input points.

use std::cmp::Ordering;

use rand::Rng;

use super::layers::DenseStack;
use super::tape::{ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointNetConfig {
    pub sa1_points: usize,
    pub sa1_radius: f64,
    pub sa2_points: usize,
    pub sa2_radius: f64,
    /// Neighbors gathered per centroid.
    pub neighbors: usize,
    /// Multiplier on every hidden width.
    pub width: f64,
    /// Coordinates are multiplied by this before entering the network.
    pub coordinate_scale: f64,
}

impl Default for PointNetConfig {
    fn default() -> Self {
        Self {
            sa1_points: 512,
            sa1_radius: 0.2,
            sa2_points: 128,
            sa2_radius: 0.4,
            neighbors: 32,
            width: 1.0,
            coordinate_scale: 20.0,
        }
    }
}

impl PointNetConfig {
    pub fn scaled(&self, base: usize) -> usize {
        ((base as f64 * self.width).round() as usize).max(1)
    }

    pub fn feature_dim(&self) -> usize {
        self.scaled(64)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sa1_points >= self.sa2_points
            && self.sa2_points >= 1
            && self.neighbors >= 1
            && self.sa1_radius > 0.0
            && self.sa2_radius > 0.0
            && self.width > 0.0
            && self.coordinate_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad point network config {self:?}")))
        }
    }
}

/// Lexicographic order on (key, x, y, z) so that selections do not depend on
/// the order of the input points.
fn cmp_key(a: (f64, &Vec3), b: (f64, &Vec3)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.x.total_cmp(&b.1.x))
        .then(a.1.y.total_cmp(&b.1.y))
        .then(a.1.z.total_cmp(&b.1.z))
}

/// `m` indices chosen greedily, each the farthest from those already taken.
/// The first pick is the point farthest from the centroid.
pub fn farthest_point_sample(points: &[Vec3], m: usize) -> Vec<usize> {
    let n = points.len();
    let m = m.min(n);
    if m == 0 {
        return Vec::new();
    }
    let centroid = points.iter().sum::<Vec3>() / n as f64;
    let argmax = |key: &dyn Fn(usize) -> f64| {
        (0..n)
            .max_by(|&a, &b| cmp_key((key(a), &points[a]), (key(b), &points[b])))
            .expect("non-empty")
    };
    let mut chosen = vec![argmax(&|i| (points[i] - centroid).norm_squared())];
    let mut dist: Vec<f64> = points.iter().map(|p| (p - points[chosen[0]]).norm_squared()).collect();
    while chosen.len() < m {
        let next = argmax(&|i| dist[i]);
        chosen.push(next);
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min((p - points[next]).norm_squared());
        }
    }
    chosen
}

/// For each center, its `k` nearest points; those farther than `radius` are
/// replaced by the nearest one. Returns `centers.len() · k` indices.
pub fn nearest_in_radius(points: &[Vec3], centers: &[Vec3], radius: f64, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(centers.len() * k);
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(points.len());
    for c in centers {
        order.clear();
        order.extend(points.iter().enumerate().map(|(i, p)| ((p - c).norm_squared(), i)));
        let by = |a: &(f64, usize), b: &(f64, usize)| cmp_key((a.0, &points[a.1]), (b.0, &points[b.1]));
        let take = k.min(order.len());
        if take < order.len() {
            order.select_nth_unstable_by(take - 1, by);
        }
        order[..take].sort_unstable_by(by);
        let nearest = order[0].1;
        for slot in 0..k {
            match order.get(slot) {
                Some(&(d2, i)) if slot < take && d2.sqrt() <= radius => out.push(i),
                _ => out.push(nearest),
            }
        }
    }
    out
}

/// Three nearest sources of every target with normalized inverse-distance
/// weights. With fewer than three sources the spare slots get weight zero.
pub fn three_nearest(targets: &[Vec3], sources: &[Vec3]) -> (Vec<[usize; 3]>, Vec<[f64; 3]>) {
    let mut idx = Vec::with_capacity(targets.len());
    let mut weights = Vec::with_capacity(targets.len());
    for t in targets {
        let mut best = [(f64::INFINITY, 0usize); 3];
        for (i, s) in sources.iter().enumerate() {
            let d = (s - t).norm();
            let cand = (d, i);
            let pos = best.iter().position(|b| cmp_key((cand.0, s), (b.0, &sources[b.1])) == Ordering::Less);
            if let Some(pos) = pos {
                best.copy_within(pos..2, pos + 1);
                best[pos] = cand;
            }
        }
        let mut w = [0.0; 3];
        for k in 0..3 {
            if best[k].0.is_finite() {
                w[k] = 1.0 / (best[k].0 + 1e-8);
            }
        }
        let total: f64 = w.iter().sum();
        idx.push([best[0].1, best[1].1, best[2].1]);
        weights.push(w.map(|x| x / total));
    }
    (idx, weights)
}

/// Neighborhoods for one point cloud. Rigid motions leave it unchanged, so
/// it can be computed once and reused under augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    pub sa1_centers: Vec<usize>,
    pub sa1_neighbors: Vec<usize>,
    /// Indices into `sa1_centers`.
    pub sa2_centers: Vec<usize>,
    /// Indices into `sa1_centers`.
    pub sa2_neighbors: Vec<usize>,
    pub up2: (Vec<[usize; 3]>, Vec<[f64; 3]>),
    pub up1: (Vec<[usize; 3]>, Vec<[f64; 3]>),
}

impl Grouping {
    pub fn new(points: &[Vec3], cfg: &PointNetConfig) -> Result<Self> {
        cfg.validate()?;
        if points.len() < cfg.sa1_points {
            return Err(Error::InvalidArgument(format!(
                "point network needs at least {} points, got {}",
                cfg.sa1_points,
                points.len()
            )));
        }
        let sa1_centers = farthest_point_sample(points, cfg.sa1_points);
        let l1: Vec<Vec3> = sa1_centers.iter().map(|&i| points[i]).collect();
        let sa1_neighbors = nearest_in_radius(points, &l1, cfg.sa1_radius, cfg.neighbors);
        let sa2_centers = farthest_point_sample(&l1, cfg.sa2_points);
        let l2: Vec<Vec3> = sa2_centers.iter().map(|&i| l1[i]).collect();
        let sa2_neighbors = nearest_in_radius(&l1, &l2, cfg.sa2_radius, cfg.neighbors);
        let up2 = three_nearest(&l1, &l2);
        let up1 = three_nearest(points, &l1);
        Ok(Self {
            sa1_centers,
            sa1_neighbors,
            sa2_centers,
            sa2_neighbors,
            up2,
            up1,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointNetPlusPlus {
    pub config: PointNetConfig,
    sa1: DenseStack,
    sa2: DenseStack,
    sa3: DenseStack,
    fp3: DenseStack,
    fp2: DenseStack,
    fp1: DenseStack,
}

fn relative_coords(points: &[Vec3], centers: &[usize], neighbors: &[usize], k: usize, scale: f64) -> Tensor {
    Tensor::from_shape_fn((neighbors.len(), 3), |(r, c)| {
        let center = points[centers[r / k]];
        (points[neighbors[r]][c] - center[c]) * scale
    })
}

impl PointNetPlusPlus {
    pub fn new(store: &mut ParamStore, name: &str, config: PointNetConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let w = |b| config.scaled(b);
        let mut stack = |suffix: &str, sizes: &[usize]| DenseStack::new(store, &format!("{name}.{suffix}"), sizes, true, rng);
        Ok(Self {
            sa1: stack("sa1", &[6, w(64), w(128)]),
            sa2: stack("sa2", &[3 + w(128), w(128), w(256)]),
            sa3: stack("sa3", &[3 + w(256), w(256), w(512)]),
            fp3: stack("fp3", &[w(256) + w(512), w(256)]),
            fp2: stack("fp2", &[w(128) + w(256), w(256), w(128)]),
            fp1: stack("fp1", &[3 + w(128), w(128), w(64)]),
            config,
        })
    }

    /// Per-point features, N × `feature_dim`.
    pub fn forward(&self, tape: &mut Tape<'_>, points: &[Vec3], normals: &[Vec3], grouping: &Grouping) -> Var {
        let cfg = &self.config;
        let k = cfg.neighbors;
        let scale = cfg.coordinate_scale;
        let n = points.len();
        let normals_t = tape.constant(Tensor::from_shape_fn((n, 3), |(r, c)| normals[r][c]));

        // level 1
        let rel1 = tape.constant(relative_coords(points, &grouping.sa1_centers, &grouping.sa1_neighbors, k, scale));
        let nbr_normals = tape.gather(normals_t, grouping.sa1_neighbors.clone());
        let x = tape.concat(&[rel1, nbr_normals]);
        let x = self.sa1.forward(tape, x);
        let f1 = tape.group_max(x, k);

        // level 2
        let l1: Vec<Vec3> = grouping.sa1_centers.iter().map(|&i| points[i]).collect();
        let rel2 = tape.constant(relative_coords(&l1, &grouping.sa2_centers, &grouping.sa2_neighbors, k, scale));
        let nbr_f1 = tape.gather(f1, grouping.sa2_neighbors.clone());
        let x = tape.concat(&[rel2, nbr_f1]);
        let x = self.sa2.forward(tape, x);
        let f2 = tape.group_max(x, k);

        // global level
        let m2 = grouping.sa2_centers.len();
        let abs2 = tape.constant(Tensor::from_shape_fn((m2, 3), |(r, c)| l1[grouping.sa2_centers[r]][c] * scale));
        let x = tape.concat(&[abs2, f2]);
        let x = self.sa3.forward(tape, x);
        let global = tape.group_max(x, m2);

        // propagation back to the input points
        let g = tape.repeat(global, m2);
        let x = tape.concat(&[f2, g]);
        let p2 = self.fp3.forward(tape, x);
        let up = tape.interp(p2, grouping.up2.0.clone(), grouping.up2.1.clone());
        let x = tape.concat(&[f1, up]);
        let p1 = self.fp2.forward(tape, x);
        let up = tape.interp(p1, grouping.up1.0.clone(), grouping.up1.1.clone());
        let x = tape.concat(&[normals_t, up]);
        self.fp1.forward(tape, x)
    }
}
