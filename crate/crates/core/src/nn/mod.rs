//! Minimal neural-network toolkit: a differentiation tape, dense layers and
//! point-cloud set abstraction.

mod layers;
mod pointnet;
mod tape;

pub use layers::{Dense, DenseStack};
pub use pointnet::{farthest_point_sample, nearest_in_radius, three_nearest, Grouping, PointNetConfig, PointNetPlusPlus};
pub use tape::{ParamId, ParamStore, Tape, Tensor, Var};
