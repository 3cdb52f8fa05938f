use super::params::{Affine, SHAPE_DIM};
use super::sdf::{PartSdf, SdfSample};
use crate::geometry::{primitives, TriangleMesh, Vec3};

/// Capsule centered on the local origin with its axis along local x, from
/// `(−half_length, 0, 0)` to `(half_length, 0, 0)`. Both dimensions are
/// affine in the shape code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub half_length: Affine,
    pub radius: Affine,
}

impl Capsule {
    /// `(value, ∂/∂point, ∂/∂half_length, ∂/∂radius)` for fixed dimensions.
    pub fn sdf_with_grad(p: &Vec3, half_length: f64, radius: f64) -> (f64, Vec3, f64, f64) {
        let (qx, dq_dh) = if p.x > half_length {
            (half_length, 1.0)
        } else if p.x < -half_length {
            (-half_length, -1.0)
        } else {
            (p.x, 0.0)
        };
        let diff = Vec3::new(p.x - qx, p.y, p.z);
        let dist = diff.norm();
        if dist == 0.0 {
            // on the axis segment: the gradient is undefined, pick any unit direction
            return (-radius, Vec3::y(), 0.0, -1.0);
        }
        let dir = diff / dist;
        (dist - radius, dir, -dir.x * dq_dh, -1.0)
    }

    pub fn sdf(p: &Vec3, half_length: f64, radius: f64) -> f64 {
        let qx = p.x.clamp(-half_length, half_length);
        Vec3::new(p.x - qx, p.y, p.z).norm() - radius
    }
}

/// Analytic per-part evaluator made of one capsule per part.
#[derive(Debug, Clone, PartialEq)]
pub struct CapsuleSet {
    pub capsules: Vec<Capsule>,
}

impl CapsuleSet {
    /// Tessellated capsule of `part` in its local frame.
    pub fn part_mesh(&self, part: usize, shape: &[f64; SHAPE_DIM], segments: usize, rings: usize) -> TriangleMesh {
        let c = &self.capsules[part];
        primitives::capsule(c.radius.eval(shape), c.half_length.eval(shape), segments, rings)
    }
}

impl PartSdf for CapsuleSet {
    fn part_count(&self) -> usize {
        self.capsules.len()
    }

    fn value(&self, part: usize, local: &Vec3, shape: &[f64; SHAPE_DIM]) -> f64 {
        let c = &self.capsules[part];
        Capsule::sdf(local, c.half_length.eval(shape), c.radius.eval(shape))
    }

    fn gradient(&self, part: usize, local: &Vec3, shape: &[f64; SHAPE_DIM]) -> SdfSample {
        let c = &self.capsules[part];
        let (value, d_point, d_h, d_r) = Capsule::sdf_with_grad(local, c.half_length.eval(shape), c.radius.eval(shape));
        let mut d_shape = [0.0; SHAPE_DIM];
        for (k, d) in d_shape.iter_mut().enumerate() {
            *d = d_h * c.half_length.coef[k] + d_r * c.radius.coef[k];
        }
        SdfSample {
            value,
            d_point,
            d_shape,
        }
    }

    fn bound_radius(&self, part: usize, shape: &[f64; SHAPE_DIM]) -> f64 {
        let c = &self.capsules[part];
        c.half_length.eval(shape) + c.radius.eval(shape)
    }
}
