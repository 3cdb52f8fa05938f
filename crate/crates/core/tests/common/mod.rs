//! Random scenes and plain-loop reference implementations shared by the
//! solver and acceptance tests.
#![allow(dead_code)]

use contactgen::geometry::{RigidTransform, Vec3};
use contactgen::hand::{HandModel, HandParams, PartSdfModel, NUM_PARTS, SHAPE_DIM};
use contactgen::repr::{ContactGenMaps, ObjectPoints};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_params(rng: &mut ChaCha8Rng) -> HandParams {
    let mut p = HandParams::rest();
    p.pose[0] = random_unit(rng) * rng.gen_range(0.0..2.5);
    for b in 1..NUM_PARTS {
        p.pose[b] = Vec3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.2..0.9), rng.gen_range(-0.3..0.3));
    }
    for k in 0..SHAPE_DIM {
        p.shape[k] = rng.gen_range(-1.0..1.0);
    }
    p.translation = Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
    p
}

/// `n` points scattered around random parts of the posed hand, some inside.
pub fn points_near_hand(rng: &mut ChaCha8Rng, hand: &HandModel, params: &HandParams, n: usize) -> ObjectPoints {
    let posed = hand.pose(params);
    let points: Vec<Vec3> = (0..n)
        .map(|_| {
            let b = rng.gen_range(0..NUM_PARTS);
            let local = Vec3::new(rng.gen_range(-0.03..0.03), rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02));
            posed.transforms[b].apply(&local)
        })
        .collect();
    let normals = (0..n).map(|_| random_unit(rng)).collect();
    ObjectPoints::new(points, normals, "random").unwrap()
}

pub fn random_maps(rng: &mut ChaCha8Rng, n: usize) -> ContactGenMaps {
    let contact = (0..n)
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..=1.0) })
        .collect();
    let parts = (0..n).map(|_| rng.gen_range(0..NUM_PARTS)).collect();
    let directions = (0..n).map(|_| random_unit(rng)).collect();
    ContactGenMaps::new(contact, parts, directions, NUM_PARTS).unwrap()
}

pub fn random_rigid(rng: &mut ChaCha8Rng) -> RigidTransform {
    RigidTransform::from_axis_angle(
        &(random_unit(rng) * rng.gen_range(0.1..3.0)),
        Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)),
    )
}

/// Capsule distance written out from the segment formula.
fn capsule_distance(local: &Vec3, half_length: f64, radius: f64) -> f64 {
    let x = local.x.max(-half_length).min(half_length);
    let dx = local.x - x;
    (dx * dx + local.y * local.y + local.z * local.z).sqrt() - radius
}

/// Part-local coordinates of `p` and the part's signed distance.
pub fn oracle_sdf(hand: &HandModel, params: &HandParams, p: &Vec3, b: usize) -> (Vec3, f64) {
    let PartSdfModel::Analytic(caps) = &hand.sdf else { panic!("analytic hand expected") };
    let t = &hand.chain.forward(params)[b];
    let local = t.rotation.transpose() * (p - t.translation);
    let c = &caps.capsules[b];
    let d = capsule_distance(&local, c.half_length.eval(&params.shape), c.radius.eval(&params.shape));
    (local, d)
}

pub fn oracle_contact(hand: &HandModel, params: &HandParams, o: &ObjectPoints, m: &ContactGenMaps) -> f64 {
    let eps = 1e-6;
    let mut total = 0.0;
    for i in 0..o.points.len() {
        let (_, d) = oracle_sdf(hand, params, &o.points[i], m.parts[i]);
        total += m.contact[i] * ((d * d + eps * eps).sqrt() - eps);
    }
    total / o.points.len() as f64
}

pub fn oracle_direction(hand: &HandModel, params: &HandParams, o: &ObjectPoints, m: &ContactGenMaps, delta: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..o.points.len() {
        let (local, _) = oracle_sdf(hand, params, &o.points[i], m.parts[i]);
        let len = local.norm();
        if len > 1e-12 {
            let cos = (local.x * m.directions[i].x + local.y * m.directions[i].y + local.z * m.directions[i].z) / len;
            total += (m.contact[i] + delta) * (1.0 - cos);
        }
    }
    total / o.points.len() as f64
}

pub fn oracle_penetration(hand: &HandModel, params: &HandParams, o: &ObjectPoints) -> f64 {
    let mut total = 0.0;
    for p in &o.points {
        for b in 0..NUM_PARTS {
            let (_, d) = oracle_sdf(hand, params, p, b);
            if d < 0.0 {
                total += -d;
            }
        }
    }
    total / o.points.len() as f64
}

pub fn oracle_reg(params: &HandParams) -> f64 {
    let mut total = 0.0;
    for b in 1..NUM_PARTS {
        for k in 0..3 {
            total += params.pose[b][k] * params.pose[b][k];
        }
    }
    for k in 0..SHAPE_DIM {
        total += params.shape[k] * params.shape[k];
    }
    total
}
