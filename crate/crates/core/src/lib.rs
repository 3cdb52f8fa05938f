mod binio;
mod error;
pub mod cvae;
pub mod eval;
pub mod geometry;
pub mod hand;
pub mod nn;
pub mod optim;
pub mod repr;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{RigidTransform, TriangleMesh, Vec3};
pub use hand::{default_hand, HandModel, HandParams};
pub use repr::{ContactGenMaps, GraspSample, ObjectPoints};
pub use solver::{GraspResult, SolverConfig};
