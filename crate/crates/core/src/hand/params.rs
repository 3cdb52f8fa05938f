use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{axis_angle_to_rotation, rotation_to_axis_angle, RigidTransform, Vec3};

/// Number of hand parts: palm plus three segments for each of five fingers.
pub const NUM_PARTS: usize = 16;
/// Length of the global shape code.
pub const SHAPE_DIM: usize = 10;
/// Flattened parameter length: pose, shape, then global translation.
pub const FLAT_DIM: usize = NUM_PARTS * 3 + SHAPE_DIM + 3;

/// MANO-compatible hand parameters: per-part axis-angle pose (part 0 is the
/// global orientation), a global shape code and a global translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandParams {
    pub pose: [Vec3; NUM_PARTS],
    pub shape: [f64; SHAPE_DIM],
    pub translation: Vec3,
}

impl Default for HandParams {
    fn default() -> Self {
        Self::rest()
    }
}

impl HandParams {
    pub fn rest() -> Self {
        Self {
            pose: [Vec3::zeros(); NUM_PARTS],
            shape: [0.0; SHAPE_DIM],
            translation: Vec3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (b, p) in self.pose.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite("hand pose"));
            }
            if p.norm() > PI + 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "joint {b} rotation magnitude {} exceeds pi",
                    p.norm()
                )));
            }
        }
        if !self.shape.iter().all(|c| c.is_finite()) || !self.translation.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("hand shape or translation"));
        }
        Ok(())
    }

    pub fn global_orientation(&self) -> Vec3 {
        self.pose[0]
    }

    /// Articulation-only part of the pose (excludes the root).
    pub fn articulation(&self) -> &[Vec3] {
        &self.pose[1..]
    }

    pub fn to_flat(&self) -> [f64; FLAT_DIM] {
        let mut out = [0.0; FLAT_DIM];
        for (b, p) in self.pose.iter().enumerate() {
            out[3 * b..3 * b + 3].copy_from_slice(p.as_slice());
        }
        out[NUM_PARTS * 3..NUM_PARTS * 3 + SHAPE_DIM].copy_from_slice(&self.shape);
        out[FLAT_DIM - 3..].copy_from_slice(self.translation.as_slice());
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() != FLAT_DIM {
            return Err(Error::ShapeMismatch(format!(
                "expected {FLAT_DIM} hand parameters, got {}",
                flat.len()
            )));
        }
        let mut out = Self::rest();
        for b in 0..NUM_PARTS {
            out.pose[b] = Vec3::from_column_slice(&flat[3 * b..3 * b + 3]);
        }
        out.shape.copy_from_slice(&flat[NUM_PARTS * 3..NUM_PARTS * 3 + SHAPE_DIM]);
        out.translation = Vec3::from_column_slice(&flat[FLAT_DIM - 3..]);
        Ok(out)
    }

    /// Parameters of the same hand after the rigid motion `w` is applied to
    /// it. `root_offset` and `root_rest` are the root joint position and rest
    /// rotation of the chain.
    pub fn moved_by(&self, w: &RigidTransform, root_offset: &Vec3, root_rest: &crate::geometry::Mat3) -> Self {
        let r_theta = axis_angle_to_rotation(&self.pose[0]);
        let new_rot = root_rest.transpose() * w.rotation * root_rest * r_theta;
        let mut out = *self;
        out.pose[0] = rotation_to_axis_angle(&new_rot);
        out.translation = w.rotation * (self.translation + root_offset) + w.translation - root_offset;
        out
    }
}

/// Gradient with respect to [`HandParams`], laid out the same way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamGrad {
    pub pose: [Vec3; NUM_PARTS],
    pub shape: [f64; SHAPE_DIM],
    pub translation: Vec3,
}

impl Default for ParamGrad {
    fn default() -> Self {
        Self {
            pose: [Vec3::zeros(); NUM_PARTS],
            shape: [0.0; SHAPE_DIM],
            translation: Vec3::zeros(),
        }
    }
}

impl ParamGrad {
    pub fn to_flat(&self) -> [f64; FLAT_DIM] {
        HandParams {
            pose: self.pose,
            shape: self.shape,
            translation: self.translation,
        }
        .to_flat()
    }

    pub fn add_scaled(&mut self, other: &ParamGrad, s: f64) {
        for b in 0..NUM_PARTS {
            self.pose[b] += other.pose[b] * s;
        }
        for k in 0..SHAPE_DIM {
            self.shape[k] += other.shape[k] * s;
        }
        self.translation += other.translation * s;
    }
}

/// Affine function of the shape code: `base + Σ_k coef_k β_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub base: f64,
    pub coef: [f64; SHAPE_DIM],
}

impl Affine {
    pub fn constant(base: f64) -> Self {
        Self {
            base,
            coef: [0.0; SHAPE_DIM],
        }
    }

    /// `base · (1 + Σ_k rate_k β_k)` for the listed `(k, rate)` pairs.
    pub fn scaled(base: f64, rates: &[(usize, f64)]) -> Self {
        let mut coef = [0.0; SHAPE_DIM];
        for &(k, r) in rates {
            coef[k] += base * r;
        }
        Self { base, coef }
    }

    pub fn eval(&self, shape: &[f64; SHAPE_DIM]) -> f64 {
        self.base + self.coef.iter().zip(shape).map(|(c, b)| c * b).sum::<f64>()
    }
}

/// Vector-valued [`Affine`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine3 {
    pub base: Vec3,
    pub coef: [Vec3; SHAPE_DIM],
}

impl Affine3 {
    pub fn constant(base: Vec3) -> Self {
        Self {
            base,
            coef: [Vec3::zeros(); SHAPE_DIM],
        }
    }

    pub fn from_components(x: Affine, y: Affine, z: Affine) -> Self {
        let mut coef = [Vec3::zeros(); SHAPE_DIM];
        for (k, c) in coef.iter_mut().enumerate() {
            *c = Vec3::new(x.coef[k], y.coef[k], z.coef[k]);
        }
        Self {
            base: Vec3::new(x.base, y.base, z.base),
            coef,
        }
    }

    pub fn eval(&self, shape: &[f64; SHAPE_DIM]) -> Vec3 {
        self.coef
            .iter()
            .zip(shape)
            .fold(self.base, |acc, (c, b)| acc + c * *b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip() {
        let mut p = HandParams::rest();
        p.pose[3] = Vec3::new(0.1, -0.2, 0.3);
        p.shape[9] = 1.5;
        p.translation = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(HandParams::from_flat(&p.to_flat()).unwrap(), p);
        assert!(HandParams::from_flat(&[0.0; 5]).is_err());
    }

    #[test]
    fn validation_limits_joint_angles() {
        let mut p = HandParams::rest();
        p.pose[2] = Vec3::new(4.0, 0.0, 0.0);
        assert!(p.validate().is_err());
        p.pose[2] = Vec3::new(f64::NAN, 0.0, 0.0);
        assert!(p.validate().is_err());
        assert!(HandParams::rest().validate().is_ok());
    }

    #[test]
    fn affine_scaling() {
        let a = Affine::scaled(2.0, &[(0, 0.1), (3, -0.5)]);
        let mut s = [0.0; SHAPE_DIM];
        assert_eq!(a.eval(&s), 2.0);
        s[0] = 1.0;
        s[3] = 1.0;
        assert!((a.eval(&s) - 2.0 * (1.0 + 0.1 - 0.5)).abs() < 1e-15);
    }
}
