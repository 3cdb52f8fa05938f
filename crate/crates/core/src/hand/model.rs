use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::anatomy::{self, default_parts, finger_base};
use super::chain::KinematicChain;
use super::isosurface::extract_isosurface;
use super::learned::HandMeshSample;
use super::params::{HandParams, NUM_PARTS, SHAPE_DIM};
use super::sdf::{PartSdf, PartSdfModel};
use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, TriangleMesh, Vec3};

/// Tessellation used for the fixed-topology hand surface.
const TEMPLATE_SEGMENTS: usize = 16;
const TEMPLATE_RINGS: usize = 4;

/// Articulated hand: kinematic chain plus a per-part SDF evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    pub chain: KinematicChain,
    pub sdf: PartSdfModel,
}

/// The default analytic capsule hand.
pub fn default_hand() -> HandModel {
    let (chain, capsules) = default_parts();
    HandModel {
        chain,
        sdf: PartSdfModel::Analytic(capsules),
    }
}

impl HandModel {
    pub fn new(chain: KinematicChain, sdf: PartSdfModel) -> Result<Self> {
        if chain.len() != sdf.part_count() {
            return Err(Error::ShapeMismatch(format!(
                "chain has {} parts but the SDF model has {}",
                chain.len(),
                sdf.part_count()
            )));
        }
        Ok(Self { chain, sdf })
    }

    pub fn part_count(&self) -> usize {
        self.chain.len()
    }

    pub fn pose(&self, params: &HandParams) -> PosedHand<'_> {
        PosedHand {
            model: self,
            params: *params,
            transforms: self.chain.forward(params),
        }
    }
}

/// A hand model evaluated at fixed parameters.
#[derive(Debug, Clone)]
pub struct PosedHand<'a> {
    pub model: &'a HandModel,
    pub params: HandParams,
    pub transforms: Vec<RigidTransform>,
}

fn check_point(p: &Vec3) -> Result<()> {
    if p.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("query point"))
    }
}

impl PosedHand<'_> {
    pub fn part_count(&self) -> usize {
        self.transforms.len()
    }

    fn check_part(&self, b: usize) -> Result<()> {
        if b < self.part_count() {
            Ok(())
        } else {
            Err(Error::PartIndexOutOfRange {
                index: b,
                parts: self.part_count(),
            })
        }
    }

    pub fn local(&self, point: &Vec3, b: usize) -> Vec3 {
        self.transforms[b].inverse_apply(point)
    }

    /// `SDF_b(T_b⁻¹ p; β)`.
    pub fn part_sdf(&self, point: &Vec3, b: usize) -> Result<f64> {
        check_point(point)?;
        self.check_part(b)?;
        let v = self.model.sdf.value(b, &self.local(point, b), &self.params.shape);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteSdf { part: b })
        }
    }

    /// Part SDF and its gradient with respect to the global query point.
    pub fn part_sdf_with_gradient(&self, point: &Vec3, b: usize) -> Result<(f64, Vec3)> {
        check_point(point)?;
        self.check_part(b)?;
        let s = self.model.sdf.gradient(b, &self.local(point, b), &self.params.shape);
        if !s.value.is_finite() {
            return Err(Error::NonFiniteSdf { part: b });
        }
        Ok((s.value, self.transforms[b].rotation * s.d_point))
    }

    /// Minimum over parts and its argmin; ties go to the lowest index.
    pub fn hand_sdf(&self, point: &Vec3) -> Result<(f64, usize)> {
        let mut best = (f64::INFINITY, 0);
        for b in 0..self.part_count() {
            let d = self.part_sdf(point, b)?;
            if d < best.0 {
                best = (d, b);
            }
        }
        Ok(best)
    }

    /// All per-part distances at `point`.
    pub fn part_sdfs(&self, point: &Vec3) -> Result<Vec<f64>> {
        (0..self.part_count()).map(|b| self.part_sdf(point, b)).collect()
    }

    /// `T_b⁻¹ p / ‖T_b⁻¹ p‖`.
    pub fn part_direction(&self, point: &Vec3, b: usize) -> Result<Vec3> {
        check_point(point)?;
        self.check_part(b)?;
        direction_from_local(&self.local(point, b), b)
    }

    /// Fixed-topology surface: each part's tessellated surface placed by its
    /// transform. Vertex order depends only on the model, so two posed
    /// copies of one model correspond vertex by vertex.
    pub fn template_mesh(&self) -> TriangleMesh {
        let shape = &self.params.shape;
        let parts: Vec<TriangleMesh> = (0..self.part_count())
            .map(|b| self.local_part_mesh(b, shape).transformed(&self.transforms[b]))
            .collect();
        TriangleMesh::merge(&parts)
    }

    /// Part index of every vertex of [`Self::template_mesh`].
    pub fn template_vertex_parts(&self) -> Vec<usize> {
        let shape = &self.params.shape;
        (0..self.part_count())
            .flat_map(|b| std::iter::repeat(b).take(self.local_part_mesh(b, shape).vertices.len()))
            .collect()
    }

    fn local_part_mesh(&self, b: usize, shape: &[f64; SHAPE_DIM]) -> TriangleMesh {
        match &self.model.sdf {
            PartSdfModel::Analytic(caps) => caps.part_mesh(b, shape, TEMPLATE_SEGMENTS, TEMPLATE_RINGS),
            PartSdfModel::Learned(_) => {
                // sphere of the bound radius, projected onto the zero level set
                let sdf = &self.model.sdf;
                let r = sdf.bound_radius(b, shape);
                let mut mesh = crate::geometry::primitives::uv_sphere(r, 2 * TEMPLATE_SEGMENTS, TEMPLATE_SEGMENTS);
                for v in mesh.vertices.iter_mut() {
                    for _ in 0..8 {
                        let s = sdf.gradient(b, v, shape);
                        let g2 = s.d_point.norm_squared().max(1e-12);
                        *v -= s.d_point * (s.value / g2);
                    }
                }
                mesh.compute_vertex_normals();
                mesh
            }
        }
    }

    /// 21 keypoints: wrist, then for each finger its three joints and tip.
    pub fn keypoints(&self) -> Vec<Vec3> {
        let shape = &self.params.shape;
        let joints = self.model.chain.joints();
        let mut out = Vec::with_capacity(21);
        let palm_reach = (1..self.part_count())
            .filter(|&b| joints[b].parent == Some(anatomy::PALM))
            .map(|b| joints[b].offset.eval(shape).x.abs())
            .fold(0.0, f64::max);
        out.push(self.transforms[0].apply(&Vec3::new(-palm_reach, 0.0, 0.0)));
        for f in 0..5 {
            for s in 0..3 {
                let b = finger_base(f) + s;
                if b >= self.part_count() {
                    continue;
                }
                out.push(self.transforms[b].apply(&joints[b].anchor.eval(shape)));
                if s == 2 {
                    out.push(self.transforms[b].apply(&(-joints[b].anchor.eval(shape))));
                }
            }
        }
        out
    }

    /// Axis-aligned bounds of the posed parts' bounding spheres.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for (b, t) in self.transforms.iter().enumerate() {
            let r = self.model.sdf.bound_radius(b, &self.params.shape);
            lo = lo.inf(&(t.translation - Vec3::repeat(r)));
            hi = hi.sup(&(t.translation + Vec3::repeat(r)));
        }
        (lo, hi)
    }

    /// Zero isosurface of the min-over-parts SDF; `resolution` cells span the
    /// longest side of the bounding box.
    pub fn reconstruct_mesh(&self, resolution: usize) -> Result<TriangleMesh> {
        if resolution < 32 {
            return Err(Error::InvalidArgument(format!(
                "isosurface resolution {resolution} is below 32"
            )));
        }
        let (lo, hi) = self.bounds();
        let extent = hi - lo;
        let edge = extent.max() / resolution as f64;
        let pad = 2.0 * edge;
        let origin = lo - Vec3::repeat(pad);
        let dims = [0, 1, 2].map(|i| ((extent[i] + 2.0 * pad) / edge).ceil() as usize);
        let sdf = &self.model.sdf;
        let shape = self.params.shape;
        extract_isosurface(&origin, edge, dims, |p| {
            (0..self.part_count())
                .map(|b| sdf.value(b, &self.transforms[b].inverse_apply(p), &shape))
                .fold(f64::INFINITY, f64::min)
        })
    }
}

pub(crate) fn direction_from_local(local: &Vec3, b: usize) -> Result<Vec3> {
    let n = local.norm();
    if n <= 1e-12 {
        return Err(Error::UndefinedDirection { part: b });
    }
    Ok(local / n)
}

/// Global part transforms for `params`.
pub fn forward_kinematics(chain: &KinematicChain, params: &HandParams) -> Vec<RigidTransform> {
    chain.forward(params)
}

pub fn part_sdf(point: &Vec3, b: usize, params: &HandParams, model: &HandModel) -> Result<f64> {
    model.pose(params).part_sdf(point, b)
}

pub fn hand_sdf(point: &Vec3, params: &HandParams, model: &HandModel) -> Result<(f64, usize)> {
    model.pose(params).hand_sdf(point)
}

pub fn part_direction(point: &Vec3, b: usize, params: &HandParams, chain: &KinematicChain) -> Result<Vec3> {
    check_point(point)?;
    if b >= chain.len() {
        return Err(Error::PartIndexOutOfRange {
            index: b,
            parts: chain.len(),
        });
    }
    let t = chain.forward(params);
    direction_from_local(&t[b].inverse_apply(point), b)
}

pub fn reconstruct_mesh(params: &HandParams, model: &HandModel, resolution: usize) -> Result<TriangleMesh> {
    model.pose(params).reconstruct_mesh(resolution)
}

/// Random plausible articulation: flexion about each segment's local y,
/// small abduction for proximal segments.
pub fn random_articulation(rng: &mut impl Rng, flex_max: f64) -> [Vec3; NUM_PARTS] {
    let mut pose = [Vec3::zeros(); NUM_PARTS];
    for f in 0..5 {
        for s in 0..3 {
            let b = finger_base(f) + s;
            let flex = rng.gen_range(0.0..flex_max);
            let abd = if s == 0 { rng.gen_range(-0.15..0.15) } else { 0.0 };
            pose[b] = Vec3::new(0.0, flex, abd);
        }
    }
    pose
}

/// Posed analytic hand meshes with skinning weights, for SDF fitting.
/// Each template vertex is weighted fully to its own part, plus half weight
/// to any other part whose surface lies within 5 mm.
pub fn analytic_mesh_dataset(model: &HandModel, count: usize, seed: u64) -> Result<Vec<HandMeshSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut params = HandParams::rest();
        params.pose = random_articulation(&mut rng, 1.2);
        params.pose[0] = Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        for k in 0..SHAPE_DIM {
            params.shape[k] = rng.gen_range(-1.5..1.5);
        }
        let posed = model.pose(&params);
        let mesh = posed.template_mesh();
        let owners = posed.template_vertex_parts();
        let mut vertex_weights = Vec::with_capacity(mesh.vertices.len());
        for (v, &own) in mesh.vertices.iter().zip(&owners) {
            let mut w = vec![(own, 1.0)];
            for b in 0..posed.part_count() {
                if b == own {
                    continue;
                }
                let d = posed.part_sdf(v, b)?.max(0.0);
                if d < 0.005 {
                    w.push((b, 0.5 * (1.0 - d / 0.005)));
                }
            }
            vertex_weights.push(w);
        }
        out.push(HandMeshSample {
            params,
            mesh,
            vertex_weights,
        });
    }
    Ok(out)
}
