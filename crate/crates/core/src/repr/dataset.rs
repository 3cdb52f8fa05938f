//! Procedural grasp dataset: primitive objects wrapped by the analytic hand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::maps::{extract_ground_truth, ContactGenMaps};
use super::points::ObjectPoints;
use crate::error::{Error, Result};
use crate::geometry::{primitives, rotation_to_axis_angle, sample_surface_points, Mat3, TriangleMesh, Vec3};
use crate::hand::{anatomy, HandModel, HandParams, PosedHand, SHAPE_DIM};
use crate::hand::anatomy::RELAXED_FLEXION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Sphere,
    Box,
    Cylinder,
    Capsule,
    Torus,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] = [
        ShapeKind::Sphere,
        ShapeKind::Box,
        ShapeKind::Cylinder,
        ShapeKind::Capsule,
        ShapeKind::Torus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Box => "box",
            ShapeKind::Cylinder => "cylinder",
            ShapeKind::Capsule => "capsule",
            ShapeKind::Torus => "torus",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown shape {s:?}")))
    }
}

/// A primitive family with a range for its characteristic size (meters):
/// sphere radius, box half-extent, cylinder and capsule radius, torus
/// major radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub min_size: f64,
    pub max_size: f64,
}

impl ShapeSpec {
    pub fn new(kind: ShapeKind, min_size: f64, max_size: f64) -> Result<Self> {
        if !(min_size > 0.0 && max_size >= min_size && max_size.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bad size range [{min_size}, {max_size}] for {}",
                kind.name()
            )));
        }
        Ok(Self {
            kind,
            min_size,
            max_size,
        })
    }

    /// One hand-sized spec per primitive family.
    pub fn default_suite() -> Vec<ShapeSpec> {
        vec![
            ShapeSpec::new(ShapeKind::Sphere, 0.030, 0.042).unwrap(),
            ShapeSpec::new(ShapeKind::Box, 0.024, 0.034).unwrap(),
            ShapeSpec::new(ShapeKind::Cylinder, 0.024, 0.034).unwrap(),
            ShapeSpec::new(ShapeKind::Capsule, 0.022, 0.030).unwrap(),
            ShapeSpec::new(ShapeKind::Torus, 0.036, 0.046).unwrap(),
        ]
    }

    /// Draws a size and builds the closed mesh, centered at the origin.
    pub fn build(&self, rng: &mut impl Rng) -> TriangleMesh {
        let s = if self.max_size > self.min_size {
            rng.gen_range(self.min_size..=self.max_size)
        } else {
            self.min_size
        };
        match self.kind {
            ShapeKind::Sphere => primitives::uv_sphere(s, 32, 16),
            ShapeKind::Box => {
                let mut size = Vec3::new(2.0 * s, 2.0 * s * rng.gen_range(0.8..1.3), 2.0 * s * rng.gen_range(1.2..2.0));
                size.iter_mut().for_each(|v| *v = v.max(0.02));
                primitives::cuboid(size)
            }
            ShapeKind::Cylinder => primitives::cylinder(s, s * rng.gen_range(2.5..3.5), 32),
            ShapeKind::Capsule => primitives::capsule(s, s * rng.gen_range(1.2..1.8), 32, 8),
            ShapeKind::Torus => primitives::torus(s, s * rng.gen_range(0.3..0.4), 32, 16),
        }
    }
}

/// One training record.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspSample {
    pub object: ObjectPoints,
    pub object_mesh: TriangleMesh,
    pub hand: HandParams,
    pub maps: ContactGenMaps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub samples: Vec<GraspSample>,
    /// Requested grasps that failed to close.
    pub skipped: usize,
}

/// SplitMix64 finalizer; used to derive independent per-sample seeds.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Tuning of the closure heuristic.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureConfig {
    /// Points sampled on the object to measure hand-object distance.
    pub probe_points: usize,
    /// Signed distance at which a part counts as touching, meters. Slightly
    /// negative so contacts press into the surface.
    pub touch_depth: f64,
    pub flex_step: f64,
    pub flex_max: f64,
    /// Fingers (thumb included) that must touch for a grasp to count.
    pub min_fingers: usize,
    pub attempts: usize,
}

impl Default for ClosureConfig {
    fn default() -> Self {
        Self {
            probe_points: 3000,
            touch_depth: -0.001,
            flex_step: 0.02,
            flex_max: 1.5,
            min_fingers: 3,
            attempts: 12,
        }
    }
}

/// Relative flexion of the three segments of each finger.
const FLEX_PROFILE: [f64; 3] = [1.0, 1.1, 0.8];

fn min_sdf(posed: &PosedHand, parts: &[usize], probes: &[Vec3]) -> f64 {
    let mut best = f64::INFINITY;
    for p in probes {
        for &b in parts {
            let local = posed.local(p, b);
            let d = crate::hand::PartSdf::value(&posed.model.sdf, b, &local, &posed.params.shape);
            best = best.min(d);
        }
    }
    best
}

fn frame_from_approach(a: &Vec3, roll: f64) -> Mat3 {
    let z = a.normalize();
    let helper = if z.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let x0 = (helper - z * z.dot(&helper)).normalize();
    let y0 = z.cross(&x0);
    let x = x0 * roll.cos() + y0 * roll.sin();
    let y = z.cross(&x);
    Mat3::from_columns(&[x, y, z])
}

/// Tries to close the hand around the object. Returns `None` when too few
/// fingers reach the surface.
fn close_hand(
    model: &HandModel,
    probes: &[Vec3],
    center: &Vec3,
    cfg: &ClosureConfig,
    rng: &mut ChaCha8Rng,
) -> Option<HandParams> {
    let mut params = HandParams::rest();
    for k in 0..SHAPE_DIM {
        params.shape[k] = rng.gen_range(-1.0..1.0);
    }
    // approach direction: unit vector from the object toward the back of the hand
    let a = loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            break v / n;
        }
    };
    let rotation = frame_from_approach(&a, rng.gen_range(0.0..std::f64::consts::TAU));
    params.pose[0] = rotation_to_axis_angle(&rotation);
    let lateral = rotation * Vec3::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01), 0.0);
    // approach with the fingers straight
    for b in 1..model.part_count() {
        params.pose[b].y = -RELAXED_FLEXION;
    }

    // slide in along the approach until the first touch
    let place = |s: f64, params: &mut HandParams| params.translation = center + lateral + a * s;
    let all: Vec<usize> = (0..model.part_count()).collect();
    let (mut lo, mut hi) = (0.0, 0.3);
    place(hi, &mut params);
    if min_sdf(&model.pose(&params), &all, probes) <= 0.0 {
        return None;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        place(mid, &mut params);
        if min_sdf(&model.pose(&params), &all, probes) > cfg.touch_depth {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    place(hi, &mut params);

    let mut touching = 0;
    for f in 0..anatomy::FINGERS.len() {
        let base = anatomy::finger_base(f);
        let segments = [base, base + 1, base + 2];
        let set_flex = |params: &mut HandParams, from: usize, phi: f64, start: &[f64; 3]| {
            for s in from..3 {
                params.pose[segments[s]].y = start[s] + phi * FLEX_PROFILE[s];
            }
        };
        let mut start = [-RELAXED_FLEXION; 3];
        let mut from = 0;
        let mut touched = false;
        // flex the free segments together; once a segment touches, keep
        // flexing the ones beyond it
        while from < 3 {
            let mut phi = 0.0;
            let mut hit = None;
            while phi < cfg.flex_max {
                let next = (phi + cfg.flex_step).min(cfg.flex_max);
                set_flex(&mut params, from, next, &start);
                let posed = model.pose(&params);
                let first = (from..3).find(|&s| min_sdf(&posed, &[segments[s]], probes) <= cfg.touch_depth);
                if let Some(s) = first {
                    // back off to the last free angle, then bisect
                    let (mut a_lo, mut a_hi) = (phi, next);
                    for _ in 0..12 {
                        let mid = 0.5 * (a_lo + a_hi);
                        set_flex(&mut params, from, mid, &start);
                        let posed = model.pose(&params);
                        if (from..3).any(|s| min_sdf(&posed, &[segments[s]], probes) <= cfg.touch_depth) {
                            a_hi = mid;
                        } else {
                            a_lo = mid;
                        }
                    }
                    set_flex(&mut params, from, a_hi, &start);
                    hit = Some(s);
                    break;
                }
                phi = next;
            }
            match hit {
                Some(s) => {
                    touched = true;
                    for k in from..3 {
                        start[k] = params.pose[segments[k]].y;
                    }
                    from = s + 1;
                }
                None => break,
            }
        }
        if touched {
            touching += 1;
        } else {
            // a finger that never touches returns to the relaxed rest pose,
            // or stays straight if that would push it into the object
            for s in 0..3 {
                params.pose[segments[s]].y = 0.0;
            }
            if min_sdf(&model.pose(&params), &segments, probes) < 0.0 {
                for s in 0..3 {
                    params.pose[segments[s]].y = -RELAXED_FLEXION;
                }
            }
        }
    }
    if touching < cfg.min_fingers {
        return None;
    }
    // reject grasps that ended up deep in the object
    if min_sdf(&model.pose(&params), &all, probes) < 4.0 * cfg.touch_depth.min(-0.001) {
        return None;
    }
    params.validate().ok()?;
    Some(params)
}

fn contact_quality_ok(maps: &ContactGenMaps) -> bool {
    let touched: Vec<f64> = maps.contact.iter().copied().filter(|&c| c > 0.0).collect();
    !touched.is_empty() && touched.iter().sum::<f64>() / touched.len() as f64 >= 0.5
}

/// Wraps the hand around every object `grasps_per_object` times. Objects
/// cycle through `shapes`; each object and grasp draws from its own stream
/// derived from `seed`.
pub fn make_synthetic_dataset(
    shapes: &[ShapeSpec],
    grasps_per_object: usize,
    seed: u64,
    points: usize,
    model: &HandModel,
) -> Result<SyntheticDataset> {
    make_synthetic_dataset_with(shapes, grasps_per_object, seed, points, model, &ClosureConfig::default())
}

pub fn make_synthetic_dataset_with(
    shapes: &[ShapeSpec],
    grasps_per_object: usize,
    seed: u64,
    points: usize,
    model: &HandModel,
    cfg: &ClosureConfig,
) -> Result<SyntheticDataset> {
    if points == 0 {
        return Err(Error::InvalidArgument("point count must be positive".into()));
    }
    let mut samples = Vec::new();
    let mut skipped = 0;
    for (j, spec) in shapes.iter().enumerate() {
        let object_seed = derive_seed(seed, j as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(object_seed);
        let mesh = spec.build(&mut rng);
        let object = sample_surface_points(&mesh, points, derive_seed(object_seed, 1))?
            .with_source(format!("{}-{j}", spec.kind.name()));
        let probes = sample_surface_points(&mesh, cfg.probe_points.max(1), derive_seed(object_seed, 2))?.points;
        let center = Vec3::zeros();
        for g in 0..grasps_per_object {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(object_seed, 1000 + g as u64));
            let mut emitted = false;
            for _ in 0..cfg.attempts {
                let Some(params) = close_hand(model, &probes, &center, cfg, &mut rng) else { continue };
                let maps = extract_ground_truth(&object, &params, model)?;
                if !contact_quality_ok(&maps) {
                    continue;
                }
                samples.push(GraspSample {
                    object: object.clone(),
                    object_mesh: mesh.clone(),
                    hand: params,
                    maps,
                });
                emitted = true;
                break;
            }
            if !emitted {
                skipped += 1;
            }
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} synthetic grasps failed to close and were skipped");
    }
    Ok(SyntheticDataset { samples, skipped })
}
