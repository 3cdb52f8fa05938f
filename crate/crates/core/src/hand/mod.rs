//! Piecewise-SDF articulated hand.

pub mod anatomy;
mod capsule;
mod chain;
mod isosurface;
mod learned;
mod model;
mod params;
mod sdf;
mod text;

pub use capsule::{Capsule, CapsuleSet};
pub use chain::{Joint, KinematicChain};
pub use isosurface::extract_isosurface;
pub use learned::{fit_part_sdfs, HandMeshSample, LearnedSdf, Mlp, SdfFitConfig, SdfFitReport};
pub(crate) use model::direction_from_local;
pub use model::{
    analytic_mesh_dataset, default_hand, forward_kinematics, hand_sdf, part_direction, part_sdf,
    random_articulation, reconstruct_mesh, HandModel, PosedHand,
};
pub use params::{Affine, Affine3, HandParams, ParamGrad, FLAT_DIM, NUM_PARTS, SHAPE_DIM};
pub use sdf::{PartSdf, PartSdfModel, SdfSample};
pub use text::{read_analytic_hand, write_analytic_hand};
