use crate::error::{Error, Result};
use crate::geometry::{overlap_volume_solids, MeshDistance, Solid, TriangleMesh};

/// Voxel edge for interpenetration volume, meters.
pub const PENETRATION_VOXEL: f64 = 0.001;
/// Hand-object distance that still counts as contact, meters.
pub const CONTACT_THRESHOLD: f64 = 0.002;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalMetrics {
    /// Mean hand-object overlap, cm³.
    pub penetration_cm3: f64,
    /// Fraction of grasps touching the object.
    pub contact_ratio: f64,
}

/// Per-grasp overlap volume (cm³) and whether the hand touches the object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspPhysics {
    pub penetration_cm3: f64,
    /// Smallest hand-object distance, meters; zero when they intersect.
    pub min_distance: f64,
    pub in_contact: bool,
}

/// Object geometry prepared once for many grasps.
#[derive(Debug, Clone)]
pub struct PhysicsProbe {
    solid: Solid,
    distance: MeshDistance,
    vertices: Vec<crate::geometry::Vec3>,
    voxel: f64,
    threshold: f64,
}

impl PhysicsProbe {
    pub fn new(object: &TriangleMesh, voxel: f64, threshold: f64) -> Result<Self> {
        if !(threshold >= 0.0) {
            return Err(Error::InvalidArgument(format!("contact threshold must be >= 0, got {threshold}")));
        }
        Ok(Self {
            solid: Solid::new(object)?,
            distance: MeshDistance::new(object)?,
            vertices: object.vertices.clone(),
            voxel,
            threshold,
        })
    }

    pub fn measure(&self, hand: &TriangleMesh) -> Result<GraspPhysics> {
        let hand_solid = Solid::new(hand)?;
        let penetration_cm3 = overlap_volume_solids(&hand_solid, &self.solid, self.voxel)?;
        let mut min_distance = f64::INFINITY;
        for v in &hand.vertices {
            min_distance = min_distance.min(self.distance.signed_distance(v).max(0.0));
        }
        for v in &self.vertices {
            let d = if hand_solid.contains(v) { 0.0 } else { hand_solid.surface_distance(v) };
            min_distance = min_distance.min(d);
        }
        if penetration_cm3 > 0.0 {
            min_distance = 0.0;
        }
        Ok(GraspPhysics {
            penetration_cm3,
            min_distance,
            in_contact: min_distance <= self.threshold,
        })
    }
}

/// Mean overlap volume and contact ratio over a set of hand meshes grasping
/// one object.
pub fn physical_metrics(hands: &[TriangleMesh], object: &TriangleMesh, contact_threshold: f64) -> Result<PhysicalMetrics> {
    if hands.is_empty() {
        return Err(Error::InvalidArgument("no grasps to evaluate".into()));
    }
    let probe = PhysicsProbe::new(object, PENETRATION_VOXEL, contact_threshold)?;
    let mut volume = 0.0;
    let mut touching = 0usize;
    for h in hands {
        let g = probe.measure(h)?;
        volume += g.penetration_cm3;
        touching += usize::from(g.in_contact);
    }
    Ok(PhysicalMetrics {
        penetration_cm3: volume / hands.len() as f64,
        contact_ratio: touching as f64 / hands.len() as f64,
    })
}
