//! Reconstruction, physical and diversity metrics.

mod diversity;
mod mesh;
mod physical;
mod report;
mod simulation;

pub use diversity::{diversity_metrics, kmeans, Clustering, DiversityMetrics, DEFAULT_CLUSTERS, DEFAULT_RESTARTS};
pub use mesh::{
    f_score, mesh_metrics, nearest_distances, pck_auc, vertex_error, MeshMetricReport, AUC_MAX_THRESHOLD, AUC_STEPS,
};
pub use physical::{physical_metrics, GraspPhysics, PhysicalMetrics, PhysicsProbe, CONTACT_THRESHOLD, PENETRATION_VOXEL};
pub use report::{format_table, write_report_csv, write_summary_csv, EvalRow, GraspSetReport, UNAVAILABLE};
pub use simulation::{simulation_displacement, MockEngine, ProcessEngine, SimulationConfig, SimulationEngine};
