use super::params::{Affine3, HandParams, ParamGrad, NUM_PARTS, SHAPE_DIM};
use crate::error::{Error, Result};
use crate::geometry::{axis_angle_to_rotation, rotation_jacobian, Mat3, RigidTransform, Vec3};

/// One articulated part.
///
/// The part's global transform is
/// `T_b = T_parent ∘ Tr(offset) ∘ rest_rotation ∘ Rot(θ_b) ∘ Tr(−anchor)`,
/// so `anchor` (in the part's local frame) is the rotation center and lands
/// on `offset` (in the parent frame). The root uses `Tr(translation)` as its
/// parent. Local frames are centered on the part centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    pub rest_rotation: Mat3,
    pub offset: Affine3,
    pub anchor: Affine3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    joints: Vec<Joint>,
}

impl KinematicChain {
    /// Joints must be listed parents-first with the single root at index 0.
    pub fn new(joints: Vec<Joint>) -> Result<Self> {
        if joints.is_empty() || joints.len() > NUM_PARTS {
            return Err(Error::InvalidArgument(format!(
                "chain must have between 1 and {NUM_PARTS} parts, got {}",
                joints.len()
            )));
        }
        for (b, j) in joints.iter().enumerate() {
            match (b, j.parent) {
                (0, None) => {}
                (0, Some(_)) => return Err(Error::InvalidArgument("part 0 must be the root".into())),
                (_, None) => return Err(Error::InvalidArgument(format!("part {b} is a second root"))),
                (_, Some(p)) if p >= b => {
                    return Err(Error::InvalidArgument(format!("part {b} lists parent {p} after itself")))
                }
                _ => {}
            }
            let r = &j.rest_rotation;
            if (r.transpose() * r - Mat3::identity()).amax() > 1e-8 || (r.determinant() - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidArgument(format!("part {b} rest rotation is not a rotation")));
            }
        }
        Ok(Self { joints })
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn parent(&self, b: usize) -> Option<usize> {
        self.joints[b].parent
    }

    /// Number of parts on the path from the root to `b`, inclusive.
    pub fn depth(&self, mut b: usize) -> usize {
        let mut d = 1;
        while let Some(p) = self.joints[b].parent {
            b = p;
            d += 1;
        }
        d
    }

    fn parent_transform(&self, b: usize, transforms: &[RigidTransform], params: &HandParams) -> RigidTransform {
        match self.joints[b].parent {
            Some(p) => transforms[p],
            None => RigidTransform::from_translation(params.translation),
        }
    }

    /// Global part transforms (local frame → world).
    pub fn forward(&self, params: &HandParams) -> Vec<RigidTransform> {
        let mut out: Vec<RigidTransform> = Vec::with_capacity(self.joints.len());
        for (b, j) in self.joints.iter().enumerate() {
            let parent = self.parent_transform(b, &out, params);
            let offset = j.offset.eval(&params.shape);
            let anchor = j.anchor.eval(&params.shape);
            let rotation = parent.rotation * j.rest_rotation * axis_angle_to_rotation(&params.pose[b]);
            let translation = parent.rotation * offset + parent.translation - rotation * anchor;
            out.push(RigidTransform::new(rotation, translation));
        }
        out
    }

    /// Back-propagates gradients with respect to each part's global rotation
    /// matrix (entrywise) and translation onto the hand parameters.
    pub fn backward(
        &self,
        params: &HandParams,
        transforms: &[RigidTransform],
        grad_rotation: &[Mat3],
        grad_translation: &[Vec3],
    ) -> ParamGrad {
        let n = self.joints.len();
        let mut g_r = grad_rotation.to_vec();
        let mut g_t = grad_translation.to_vec();
        let mut out = ParamGrad::default();
        for b in (0..n).rev() {
            let j = &self.joints[b];
            let parent = self.parent_transform(b, transforms, params);
            let offset = j.offset.eval(&params.shape);
            let anchor = j.anchor.eval(&params.shape);
            let r_theta = axis_angle_to_rotation(&params.pose[b]);
            let m = parent.rotation * j.rest_rotation;
            let rb = transforms[b].rotation;
            let gt = g_t[b];

            // t_b = P.R·offset + P.t − R_b·anchor
            let gr = g_r[b] - gt * anchor.transpose();
            let g_theta_mat = m.transpose() * gr;
            let jac = rotation_jacobian(&params.pose[b]);
            for k in 0..3 {
                out.pose[b][k] += g_theta_mat.dot(&jac[k]);
            }
            let g_m = gr * r_theta.transpose();
            let g_parent_r = g_m * j.rest_rotation.transpose() + gt * offset.transpose();
            let g_offset = parent.rotation.transpose() * gt;
            let g_anchor = -(rb.transpose() * gt);
            for k in 0..SHAPE_DIM {
                out.shape[k] += j.offset.coef[k].dot(&g_offset) + j.anchor.coef[k].dot(&g_anchor);
            }
            match j.parent {
                Some(p) => {
                    g_r[p] += g_parent_r;
                    g_t[p] += gt;
                }
                None => out.translation += gt,
            }
        }
        out
    }
}
