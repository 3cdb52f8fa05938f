//! Default analytic right hand: a palm capsule plus three capsules per finger.
//!
//! Hand frame: palm centroid at the origin, fingers along +x, thumb on +y,
//! back of the hand toward +z. Finger segments flex toward the palm under a
//! positive rotation about their local y axis and rest at
//! [`RELAXED_FLEXION`]. Part order follows MANO:
//! palm, index, middle, pinky, ring, thumb.

use super::capsule::{Capsule, CapsuleSet};
use super::chain::{Joint, KinematicChain};
use super::params::{Affine, Affine3, NUM_PARTS};
use crate::geometry::{axis_angle_to_rotation, Mat3, Vec3};

pub const PALM: usize = 0;

/// Finger names in part order (each owns three consecutive parts after the palm).
pub const FINGERS: [&str; 5] = ["index", "middle", "pinky", "ring", "thumb"];

/// Shape-code components.
pub mod shape {
    pub const GLOBAL_SCALE: usize = 0;
    pub const FINGER_LENGTH: usize = 1;
    pub const FINGER_THICKNESS: usize = 2;
    pub const PALM_WIDTH: usize = 3;
    pub const PALM_LENGTH: usize = 4;
    pub const THUMB_LENGTH: usize = 5;
    /// Per-finger length for index, middle, pinky, ring.
    pub const DIGIT_LENGTH: [usize; 4] = [6, 7, 8, 9];
}

/// Flexion of every finger joint at zero articulation, radians. The rest
/// pose is a relaxed, slightly closed hand rather than a flat one.
pub const RELAXED_FLEXION: f64 = 0.5;

/// Relative change per unit of a shape component.
const SCALE_RATE: f64 = 0.03;

/// First part of finger `f` (0 = index … 4 = thumb).
pub fn finger_base(f: usize) -> usize {
    1 + 3 * f
}

/// Finger that owns part `b`, or `None` for the palm.
pub fn finger_of(b: usize) -> Option<usize> {
    (b > 0 && b < NUM_PARTS).then(|| (b - 1) / 3)
}

/// Distal (fingertip) parts.
pub fn fingertips() -> [usize; 5] {
    [3, 6, 9, 12, 15]
}

struct Digit {
    base: Vec3,
    rest: Mat3,
    half_lengths: [f64; 3],
    radii: [f64; 3],
    length_code: usize,
}

fn digits() -> [Digit; 5] {
    let splay = |a: f64| axis_angle_to_rotation(&Vec3::new(0.0, 0.0, a));
    let finger = |base: [f64; 3], a: f64, h: [f64; 3], r: [f64; 3], code: usize| Digit {
        base: Vec3::from(base),
        rest: splay(a),
        half_lengths: h,
        radii: r,
        length_code: code,
    };
    // thumb: points out and forward, flexes toward the palm center
    let dir = Vec3::new(0.55, 0.72, -0.42).normalize();
    let bend = Vec3::new(0.25, -0.55, -0.8);
    let bend = (bend - dir * dir.dot(&bend)).normalize();
    let z = -bend;
    let y = z.cross(&dir);
    let thumb_rest = Mat3::from_columns(&[dir, y, z]);
    [
        finger([0.032, 0.024, 0.0], 0.30, [0.019, 0.012, 0.010], [0.0078, 0.0071, 0.0064], shape::DIGIT_LENGTH[0]),
        finger([0.042, 0.008, 0.0], 0.10, [0.021, 0.013, 0.011], [0.0079, 0.0072, 0.0065], shape::DIGIT_LENGTH[1]),
        finger([0.032, -0.024, 0.0], -0.30, [0.016, 0.010, 0.009], [0.0068, 0.0062, 0.0057], shape::DIGIT_LENGTH[2]),
        finger([0.042, -0.008, 0.0], -0.10, [0.020, 0.0125, 0.0105], [0.0075, 0.0069, 0.0062], shape::DIGIT_LENGTH[3]),
        Digit {
            base: Vec3::new(-0.012, 0.026, -0.010),
            rest: thumb_rest,
            half_lengths: [0.017, 0.014, 0.012],
            radii: [0.0100, 0.0090, 0.0080],
            length_code: shape::THUMB_LENGTH,
        },
    ]
}

/// Kinematic chain and capsule set of the default hand.
pub fn default_parts() -> (KinematicChain, CapsuleSet) {
    use shape::*;
    let mut joints = Vec::with_capacity(NUM_PARTS);
    let mut capsules = Vec::with_capacity(NUM_PARTS);

    joints.push(Joint {
        name: "palm".into(),
        parent: None,
        rest_rotation: Mat3::identity(),
        offset: Affine3::constant(Vec3::zeros()),
        anchor: Affine3::constant(Vec3::zeros()),
    });
    capsules.push(Capsule {
        half_length: Affine::scaled(0.022, &[(GLOBAL_SCALE, SCALE_RATE), (PALM_LENGTH, SCALE_RATE)]),
        radius: Affine::scaled(0.028, &[(GLOBAL_SCALE, SCALE_RATE), (PALM_WIDTH, SCALE_RATE)]),
    });

    for (f, d) in digits().iter().enumerate() {
        let is_thumb = f == 4;
        let length_rates: Vec<(usize, f64)> = if is_thumb {
            vec![(GLOBAL_SCALE, SCALE_RATE), (d.length_code, SCALE_RATE)]
        } else {
            vec![
                (GLOBAL_SCALE, SCALE_RATE),
                (FINGER_LENGTH, SCALE_RATE),
                (d.length_code, SCALE_RATE),
            ]
        };
        let radius_rates = [(GLOBAL_SCALE, SCALE_RATE), (FINGER_THICKNESS, SCALE_RATE)];
        for s in 0..3 {
            let b = finger_base(f) + s;
            let half = Affine::scaled(d.half_lengths[s], &length_rates);
            let (parent, offset, rest) = if s == 0 {
                let offset = Affine3::from_components(
                    Affine::scaled(d.base.x, &[(GLOBAL_SCALE, SCALE_RATE), (PALM_LENGTH, SCALE_RATE)]),
                    Affine::scaled(d.base.y, &[(GLOBAL_SCALE, SCALE_RATE), (PALM_WIDTH, SCALE_RATE)]),
                    Affine::scaled(d.base.z, &[(GLOBAL_SCALE, SCALE_RATE)]),
                );
                (PALM, offset, d.rest)
            } else {
                // parent's distal endpoint
                let parent_half = Affine::scaled(d.half_lengths[s - 1], &length_rates);
                let offset = Affine3::from_components(parent_half, Affine::constant(0.0), Affine::constant(0.0));
                (b - 1, offset, Mat3::identity())
            };
            let neg_half = Affine {
                base: -half.base,
                coef: half.coef.map(|c| -c),
            };
            joints.push(Joint {
                name: format!("{}{}", FINGERS[f], s + 1),
                parent: Some(parent),
                rest_rotation: rest,
                offset,
                anchor: Affine3::from_components(neg_half, Affine::constant(0.0), Affine::constant(0.0)),
            });
            capsules.push(Capsule {
                half_length: half,
                radius: Affine::scaled(d.radii[s], &radius_rates),
            });
        }
    }
    let relax = axis_angle_to_rotation(&Vec3::new(0.0, RELAXED_FLEXION, 0.0));
    for j in joints.iter_mut().skip(1) {
        j.rest_rotation *= relax;
    }
    let chain = KinematicChain::new(joints).expect("default chain is valid");
    (chain, CapsuleSet { capsules })
}
