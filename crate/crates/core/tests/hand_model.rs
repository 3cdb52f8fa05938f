use contactgen::geometry::{axis_angle_to_rotation, MeshDistance, Mat3, RigidTransform, Vec3};
use contactgen::hand::{
    default_hand, hand_sdf, part_direction, Affine, Affine3, Capsule, CapsuleSet, HandModel, HandParams, Joint,
    KinematicChain, PartSdfModel, NUM_PARTS, SHAPE_DIM,
};
use contactgen::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_params(rng: &mut ChaCha8Rng) -> HandParams {
    let mut p = HandParams::rest();
    for b in 0..NUM_PARTS {
        p.pose[b] = Vec3::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6));
    }
    for k in 0..SHAPE_DIM {
        p.shape[k] = rng.gen_range(-1.0..1.0);
    }
    p.translation = Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
    p
}

fn random_motion(rng: &mut ChaCha8Rng) -> RigidTransform {
    RigidTransform::from_axis_angle(
        &Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
        Vec3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)),
    )
}

fn moved(hand: &HandModel, p: &HandParams, w: &RigidTransform) -> HandParams {
    let root = &hand.chain.joints()[0];
    p.moved_by(w, &root.offset.eval(&p.shape), &root.rest_rotation)
}

/// 4×4 homogeneous matrix helpers for the explicit product oracle.
type M4 = nalgebra::Matrix4<f64>;

fn m4_rot(r: &Mat3) -> M4 {
    let mut m = M4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m
}

fn m4_tr(t: &Vec3) -> M4 {
    let mut m = M4::identity();
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(t);
    m
}

#[test]
fn rest_pose_gives_rest_transforms() {
    let hand = default_hand();
    let p = HandParams::rest();
    let t = hand.chain.forward(&p);
    for (b, j) in hand.chain.joints().iter().enumerate() {
        let parent = j.parent.map(|q| t[q]).unwrap_or_else(RigidTransform::identity);
        let off = j.offset.eval(&p.shape);
        let anc = j.anchor.eval(&p.shape);
        let rot = parent.rotation * j.rest_rotation;
        let expect = RigidTransform::new(rot, parent.apply(&off) - rot * anc);
        assert!((t[b].rotation - expect.rotation).amax() < 1e-15);
        assert!((t[b].translation - expect.translation).amax() < 1e-15);
    }
    assert_eq!(t[0], RigidTransform::identity());
}

#[test]
fn root_rotation_premultiplies_every_part() {
    let hand = default_hand();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut p = random_params(&mut rng);
    p.pose[0] = Vec3::zeros();
    p.translation = Vec3::zeros();
    let before = hand.chain.forward(&p);
    let aa = Vec3::new(0.3, -1.1, 0.7);
    p.pose[0] = aa;
    let after = hand.chain.forward(&p);
    let r = RigidTransform::from_axis_angle(&aa, Vec3::zeros());
    for b in 0..NUM_PARTS {
        let expect = r * before[b];
        assert!((after[b].rotation - expect.rotation).amax() < 1e-12);
        assert!((after[b].translation - expect.translation).amax() < 1e-12);
    }
}

#[test]
fn forward_kinematics_matches_per_path_matrix_products() {
    let hand = default_hand();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let joints = hand.chain.joints();
    for _ in 0..20 {
        let p = random_params(&mut rng);
        let t = hand.chain.forward(&p);
        for b in 0..NUM_PARTS {
            let mut path = vec![b];
            while let Some(q) = joints[*path.last().unwrap()].parent {
                path.push(q);
            }
            path.reverse();
            let mut m = m4_tr(&p.translation);
            for &k in &path {
                let j = &joints[k];
                m = m
                    * m4_tr(&j.offset.eval(&p.shape))
                    * m4_rot(&j.rest_rotation)
                    * m4_rot(&axis_angle_to_rotation(&p.pose[k]))
                    * m4_tr(&-j.anchor.eval(&p.shape));
            }
            let rot: Mat3 = m.fixed_view::<3, 3>(0, 0).into();
            let tr: Vec3 = m.fixed_view::<3, 1>(0, 3).into();
            assert!((rot - t[b].rotation).amax() < 1e-9);
            assert!((tr - t[b].translation).amax() < 1e-9);
        }
    }
}

#[test]
fn chain_depth_is_at_most_four() {
    let hand = default_hand();
    assert_eq!(hand.chain.depth(0), 1);
    for b in 0..NUM_PARTS {
        assert!(hand.chain.depth(b) <= 4);
    }
}

#[test]
fn part_centroid_is_inside() {
    let hand = default_hand();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let p = random_params(&mut rng);
        let posed = hand.pose(&p);
        for b in 0..NUM_PARTS {
            let c = posed.transforms[b].translation;
            assert!(posed.part_sdf(&c, b).unwrap() < 0.0);
        }
    }
}

#[test]
fn capsule_part_matches_closed_form() {
    let hand = default_hand();
    let PartSdfModel::Analytic(caps) = &hand.sdf else { unreachable!() };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let p = random_params(&mut rng);
        let posed = hand.pose(&p);
        let b = rng.gen_range(0..NUM_PARTS);
        let h = caps.capsules[b].half_length.eval(&p.shape);
        let r = caps.capsules[b].radius.eval(&p.shape);
        let a1 = posed.transforms[b].apply(&Vec3::new(-h, 0.0, 0.0));
        let a2 = posed.transforms[b].apply(&Vec3::new(h, 0.0, 0.0));
        let q = posed.transforms[b].translation
            + Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
        // nearest point on the segment a1-a2
        let ab = a2 - a1;
        let s = ((q - a1).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        let expect = (q - (a1 + ab * s)).norm() - r;
        assert!((posed.part_sdf(&q, b).unwrap() - expect).abs() < 1e-9);
    }
}

#[test]
fn non_finite_query_and_bad_part_are_errors() {
    let hand = default_hand();
    let posed = hand.pose(&HandParams::rest());
    assert!(matches!(posed.part_sdf(&Vec3::new(f64::NAN, 0.0, 0.0), 0), Err(Error::NonFinite(_))));
    assert!(matches!(posed.part_sdf(&Vec3::zeros(), 16), Err(Error::PartIndexOutOfRange { .. })));
}

#[test]
fn hand_sdf_matches_brute_force_minimum() {
    let hand = default_hand();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let p = random_params(&mut rng);
    let posed = hand.pose(&p);
    for _ in 0..500 {
        let q = p.translation + Vec3::new(rng.gen_range(-0.12..0.12), rng.gen_range(-0.12..0.12), rng.gen_range(-0.12..0.12));
        let mut best = f64::INFINITY;
        let mut arg = usize::MAX;
        for b in 0..NUM_PARTS {
            let d = posed.part_sdf(&q, b).unwrap();
            assert!(hand_sdf(&q, &p, &hand).unwrap().0 <= d);
            if d < best {
                best = d;
                arg = b;
            }
        }
        assert_eq!(hand_sdf(&q, &p, &hand).unwrap(), (best, arg));
    }
}

#[test]
fn point_on_isolated_part_surface_reports_that_part() {
    let hand = default_hand();
    let p = HandParams::rest();
    let posed = hand.pose(&p);
    let PartSdfModel::Analytic(caps) = &hand.sdf else { unreachable!() };
    let r = caps.capsules[5].radius.eval(&p.shape);
    let q = posed.transforms[5].apply(&Vec3::new(0.0, 0.0, r));
    for b in (0..NUM_PARTS).filter(|&b| b != 5) {
        assert!(posed.part_sdf(&q, b).unwrap() > 0.005, "part {b} is too close");
    }
    let (d, b) = posed.hand_sdf(&q).unwrap();
    assert!(d.abs() < 1e-12);
    assert_eq!(b, 5);
}

fn capsule(h: f64, r: f64) -> Capsule {
    Capsule {
        half_length: Affine::constant(h),
        radius: Affine::constant(r),
    }
}

#[test]
fn equidistant_parts_resolve_to_lowest_index() {
    let joint = |parent: Option<usize>, at: Vec3| Joint {
        name: "p".into(),
        parent,
        rest_rotation: Mat3::identity(),
        offset: Affine3::constant(at),
        anchor: Affine3::constant(Vec3::zeros()),
    };
    let chain = KinematicChain::new(vec![
        joint(None, Vec3::zeros()),
        joint(Some(0), Vec3::new(-0.2, 0.0, 0.0)),
        joint(Some(0), Vec3::new(0.1, 0.02, 0.0)),
        joint(Some(0), Vec3::new(0.1, -0.02, 0.0)),
    ])
    .unwrap();
    let caps = CapsuleSet {
        capsules: vec![capsule(0.01, 0.005), capsule(0.01, 0.005), capsule(0.01, 0.008), capsule(0.01, 0.008)],
    };
    let hand = HandModel::new(chain, PartSdfModel::Analytic(caps)).unwrap();
    let posed = hand.pose(&HandParams::rest());
    let q = Vec3::new(0.1, 0.0, 0.0);
    assert_eq!(posed.part_sdf(&q, 2).unwrap(), posed.part_sdf(&q, 3).unwrap());
    assert_eq!(posed.hand_sdf(&q).unwrap().1, 2);
}

#[test]
fn direction_queries() {
    let hand = default_hand();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let p = random_params(&mut rng);
    let posed = hand.pose(&p);
    let q = posed.transforms[7].apply(&Vec3::new(0.03, 0.0, 0.0));
    let d = part_direction(&q, 7, &p, &hand.chain).unwrap();
    assert!((d - Vec3::x()).amax() < 1e-9);

    let origin = posed.transforms[4].translation;
    assert!(matches!(
        part_direction(&origin, 4, &p, &hand.chain),
        Err(Error::UndefinedDirection { part: 4 })
    ));

    for _ in 0..200 {
        let p = random_params(&mut rng);
        let b = rng.gen_range(0..NUM_PARTS);
        let q = Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
        let d = part_direction(&q, b, &p, &hand.chain).unwrap();
        assert!((d.norm() - 1.0).abs() < 1e-9);

        let w = random_motion(&mut rng);
        let p2 = moved(&hand, &p, &w);
        let d2 = part_direction(&w.apply(&q), b, &p2, &hand.chain).unwrap();
        assert!((d - d2).amax() < 1e-9);
    }
}

#[test]
fn rigid_motion_of_hand_and_point_preserves_sdf() {
    let hand = default_hand();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let w = random_motion(&mut rng);
        let p2 = moved(&hand, &p, &w);
        let q = p.translation + Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
        let a = hand_sdf(&q, &p, &hand).unwrap();
        let b = hand_sdf(&w.apply(&q), &p2, &hand).unwrap();
        assert_eq!(a.1, b.1);
        assert!((a.0 - b.0).abs() < 1e-9);
    }
}

#[test]
fn analytic_gradient_is_unit_and_matches_finite_differences() {
    let hand = default_hand();
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let mut checked = 0;
    while checked < 300 {
        let p = random_params(&mut rng);
        let posed = hand.pose(&p);
        let b = rng.gen_range(0..NUM_PARTS);
        let q = posed.transforms[b].translation
            + Vec3::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
        let (_, g) = posed.part_sdf_with_gradient(&q, b).unwrap();
        // stay away from the medial axis
        let PartSdfModel::Analytic(caps) = &hand.sdf else { unreachable!() };
        let local = posed.local(&q, b);
        let h_len = caps.capsules[b].half_length.eval(&p.shape);
        let axis_dist = Vec3::new(local.x - local.x.clamp(-h_len, h_len), local.y, local.z).norm();
        if axis_dist < 1e-3 {
            continue;
        }
        assert!((g.norm() - 1.0).abs() < 1e-6);
        let h = 1e-5;
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            let fd = (posed.part_sdf(&(q + e), b).unwrap() - posed.part_sdf(&(q - e), b).unwrap()) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-3 * fd.abs().max(1e-2), "{fd} vs {}", g[k]);
        }
        checked += 1;
    }
}

fn hausdorff(a: &contactgen::geometry::TriangleMesh, b: &contactgen::geometry::TriangleMesh) -> f64 {
    let da = MeshDistance::new(a).unwrap();
    let db = MeshDistance::new(b).unwrap();
    let ab = a.vertices.iter().map(|v| db.unsigned_distance(v)).fold(0.0, f64::max);
    let ba = b.vertices.iter().map(|v| da.unsigned_distance(v)).fold(0.0, f64::max);
    ab.max(ba)
}

#[test]
fn reconstructed_rest_hand_is_watertight_and_on_the_level_set() {
    let hand = default_hand();
    let posed = hand.pose(&HandParams::rest());
    let (lo, hi) = posed.bounds();
    let coarse = posed.reconstruct_mesh(64).unwrap();
    let edge = (hi - lo).max() / 64.0;
    assert!(!coarse.vertices.is_empty());
    assert_eq!(coarse.boundary_or_nonmanifold_edges(), 0);
    assert_eq!(coarse.euler_characteristic(), 2);
    let diag = edge * 3f64.sqrt();
    for v in &coarse.vertices {
        assert!(posed.hand_sdf(v).unwrap().0.abs() <= 1.5 * diag);
    }
    let fine = posed.reconstruct_mesh(128).unwrap();
    let h = hausdorff(&coarse, &fine);
    assert!(h <= edge, "hausdorff {h} vs edge {edge}");
}

#[test]
fn low_resolution_is_rejected() {
    let hand = default_hand();
    let r = hand.pose(&HandParams::rest()).reconstruct_mesh(16);
    assert!(matches!(r, Err(Error::InvalidArgument(_))));
}

#[test]
fn keypoints_cover_wrist_and_finger_joints() {
    let hand = default_hand();
    let posed = hand.pose(&HandParams::rest());
    let k = posed.keypoints();
    assert_eq!(k.len(), 21);
    // fingertips lie on the distal capsule axes' far end
    for f in 0..5 {
        let tip = k[1 + 4 * f + 3];
        let b = 3 + 3 * f;
        assert!(posed.part_sdf(&tip, b).unwrap() < 0.0);
    }
}
