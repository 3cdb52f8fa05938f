//! Object-centric contact representation.

mod dataset;
mod maps;
mod points;

pub use dataset::{
    derive_seed, make_synthetic_dataset, make_synthetic_dataset_with, ClosureConfig, GraspSample, ShapeKind,
    ShapeSpec, SyntheticDataset,
};
pub use maps::{
    binarize_contact, contact_value, extract_ground_truth, read_maps, write_maps, ContactGenMaps, CONTACT_DISTANCE,
    CONTACT_FLOOR,
};
pub use points::ObjectPoints;
