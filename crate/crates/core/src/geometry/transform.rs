//! Rigid transforms and axis-angle rotations.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Skew-symmetric cross-product matrix `[v]×`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula. The zero vector maps to the identity.
pub fn axis_angle_to_rotation(axis_angle: &Vec3) -> Mat3 {
    let angle = axis_angle.norm();
    if angle < 1e-12 {
        // second-order expansion keeps the map smooth through zero
        let k = skew(axis_angle);
        return Mat3::identity() + k + 0.5 * k * k;
    }
    let k = skew(&(axis_angle / angle));
    Mat3::identity() + angle.sin() * k + (1.0 - angle.cos()) * k * k
}

/// Inverse of [`axis_angle_to_rotation`], returning a vector with norm in `[0, π]`.
pub fn rotation_to_axis_angle(rotation: &Mat3) -> Vec3 {
    let rot = Rotation3::from_matrix_unchecked(*rotation);
    let q = UnitQuaternion::from_rotation_matrix(&rot);
    q.scaled_axis()
}

/// Partial derivatives `∂R/∂v_i` of the Rodrigues map at `v`.
///
/// Uses `∂R/∂v_i = (v_i [v]× + [v × (I − R) e_i]×) R / ‖v‖²`, which reduces to
/// `[e_i]×` at the origin.
pub fn rotation_jacobian(axis_angle: &Vec3) -> [Mat3; 3] {
    let sq = axis_angle.norm_squared();
    let basis = [Vec3::x(), Vec3::y(), Vec3::z()];
    if sq < 1e-16 {
        return basis.map(|e| skew(&e));
    }
    let r = axis_angle_to_rotation(axis_angle);
    let vx = skew(axis_angle);
    let i_minus_r = Mat3::identity() - r;
    basis.map(|e| {
        let col = axis_angle.cross(&(i_minus_r * e));
        let v_i = axis_angle.dot(&e);
        (v_i * vx + skew(&col)) * r / sq
    })
}

/// Proper rigid motion `x ↦ R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(Mat3::identity(), translation)
    }

    pub fn from_axis_angle(axis_angle: &Vec3, translation: Vec3) -> Self {
        Self::new(axis_angle_to_rotation(axis_angle), translation)
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `T⁻¹ p = Rᵀ (p − t)`.
    pub fn inverse_apply(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    /// Max deviation of `RᵀR` from identity and of `det R` from one.
    pub fn orthonormality_error(&self) -> f64 {
        let rtr = self.rotation.transpose() * self.rotation - Mat3::identity();
        rtr.amax().max((self.rotation.determinant() - 1.0).abs())
    }
}

impl std::ops::Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    #[test]
    fn zero_axis_angle_is_identity() {
        let t = RigidTransform::from_axis_angle(&Vec3::zeros(), Vec3::zeros());
        assert_eq!(t.rotation, Mat3::identity());
        assert_eq!(t.translation, Vec3::zeros());
    }

    #[test]
    fn half_turn_about_z() {
        let t = RigidTransform::from_axis_angle(&Vec3::new(0.0, 0.0, std::f64::consts::PI), Vec3::zeros());
        let p = t.apply(&Vec3::x());
        assert!((p - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let t = RigidTransform::from_axis_angle(&random_vec(&mut rng, 3.0), random_vec(&mut rng, 1.0));
            let id = t.compose(&t.inverse());
            for _ in 0..100 {
                let p = random_vec(&mut rng, 2.0);
                assert!((id.apply(&p) - p).norm() < 1e-9);
                assert!((t.inverse_apply(&t.apply(&p)) - p).norm() < 1e-9);
            }
            assert!(t.orthonormality_error() < 1e-8);
        }
    }

    #[test]
    fn log_inverts_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let mut v = random_vec(&mut rng, 1.7);
            if v.norm() > 3.0 {
                v *= 3.0 / v.norm();
            }
            let back = rotation_to_axis_angle(&axis_angle_to_rotation(&v));
            assert!((back - v).norm() < 1e-9, "{v:?} vs {back:?}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for trial in 0..50 {
            let v = if trial == 0 { Vec3::zeros() } else { random_vec(&mut rng, 2.0) };
            let jac = rotation_jacobian(&v);
            for i in 0..3 {
                let mut e = Vec3::zeros();
                e[i] = h;
                let fd = (axis_angle_to_rotation(&(v + e)) - axis_angle_to_rotation(&(v - e))) / (2.0 * h);
                assert!((fd - jac[i]).amax() < 1e-7, "trial {trial} axis {i}");
            }
        }
    }
}
