use super::capsule::CapsuleSet;
use super::learned::LearnedSdf;
use super::params::SHAPE_DIM;
use crate::geometry::Vec3;

/// Signed distance and its derivatives for one part, in that part's frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdfSample {
    pub value: f64,
    pub d_point: Vec3,
    pub d_shape: [f64; SHAPE_DIM],
}

/// Per-part signed distance evaluated in part-local coordinates.
pub trait PartSdf {
    fn part_count(&self) -> usize;

    fn value(&self, part: usize, local: &Vec3, shape: &[f64; SHAPE_DIM]) -> f64;

    fn gradient(&self, part: usize, local: &Vec3, shape: &[f64; SHAPE_DIM]) -> SdfSample;

    /// Radius of a local-origin sphere enclosing the part surface.
    fn bound_radius(&self, part: usize, shape: &[f64; SHAPE_DIM]) -> f64;
}

/// The two evaluator families a hand model can carry.
#[derive(Debug, Clone, PartialEq)]
pub enum PartSdfModel {
    Analytic(CapsuleSet),
    Learned(LearnedSdf),
}

impl PartSdf for PartSdfModel {
    fn part_count(&self) -> usize {
        match self {
            PartSdfModel::Analytic(m) => m.part_count(),
            PartSdfModel::Learned(m) => m.part_count(),
        }
    }

    fn value(&self, part: usize, local: &Vec3, shape: &[f64; SHAPE_DIM]) -> f64 {
        match self {
            PartSdfModel::Analytic(m) => m.value(part, local, shape),
            PartSdfModel::Learned(m) => m.value(part, local, shape),
        }
    }

    fn gradient(&self, part: usize, local: &Vec3, shape: &[f64; SHAPE_DIM]) -> SdfSample {
        match self {
            PartSdfModel::Analytic(m) => m.gradient(part, local, shape),
            PartSdfModel::Learned(m) => m.gradient(part, local, shape),
        }
    }

    fn bound_radius(&self, part: usize, shape: &[f64; SHAPE_DIM]) -> f64 {
        match self {
            PartSdfModel::Analytic(m) => m.bound_radius(part, shape),
            PartSdfModel::Learned(m) => m.bound_radius(part, shape),
        }
    }
}
