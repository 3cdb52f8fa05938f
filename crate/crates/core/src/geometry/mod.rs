//! Meshes, rigid transforms, surface sampling and voxel volumes.

pub mod io;
mod mesh;
pub mod primitives;
mod sampling;
mod transform;
mod voxel;

pub use mesh::{closest_point_on_triangle, Feature, MeshDistance, Nearest, Solid, TriangleMesh};
pub use sampling::{sample_surface_points, sample_with_faces};
pub use transform::{
    axis_angle_to_rotation, rotation_jacobian, rotation_to_axis_angle, skew, Mat3, RigidTransform, Vec3,
};
pub use voxel::{overlap_volume_solids, voxel_overlap_volume, voxelize, VoxelGrid};

/// Builds the rigid transform for an axis-angle rotation (radians) followed
/// by a translation.
pub fn axis_angle_to_transform(axis_angle: &Vec3, translation: &Vec3) -> RigidTransform {
    RigidTransform::from_axis_angle(axis_angle, *translation)
}
