use super::mesh::{Solid, TriangleMesh};
use super::transform::Vec3;
use crate::error::{Error, Result};

/// Dense occupancy lattice. Cell `(i, j, k)` has its center at
/// `origin + (i + ½, j + ½, k + ½) · edge`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub edge: f64,
    pub dims: [usize; 3],
    pub occupancy: Vec<bool>,
}

impl VoxelGrid {
    pub fn new(origin: Vec3, edge: f64, dims: [usize; 3]) -> Result<Self> {
        if !(edge > 0.0) {
            return Err(Error::InvalidVoxelEdge(edge));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!("voxel grid dimensions {dims:?} must be >= 1")));
        }
        Ok(Self {
            origin,
            edge,
            dims,
            occupancy: vec![false; dims[0] * dims[1] * dims[2]],
        })
    }

    /// Grid aligned to the global lattice `edge · ℤ³` and covering `[lo, hi]`.
    pub fn covering(lo: &Vec3, hi: &Vec3, edge: f64) -> Result<Self> {
        if !(edge > 0.0) {
            return Err(Error::InvalidVoxelEdge(edge));
        }
        let start = lo.map(|c| (c / edge).floor());
        let end = hi.map(|c| (c / edge).ceil());
        let dims = [0, 1, 2].map(|i| ((end[i] - start[i]) as usize).max(1));
        Self::new(start * edge, edge, dims)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.edge
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    /// Occupied volume in m³.
    pub fn occupied_volume(&self) -> f64 {
        self.occupied_count() as f64 * self.edge.powi(3)
    }

    /// Marks cells whose centers pass `inside`.
    pub fn fill(&mut self, mut inside: impl FnMut(&Vec3) -> bool) {
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    let c = self.center(i, j, k);
                    let idx = self.index(i, j, k);
                    self.occupancy[idx] = inside(&c);
                }
            }
        }
    }
}

/// Voxelizes a mesh by cell-center membership.
pub fn voxelize(mesh: &TriangleMesh, edge: f64) -> Result<VoxelGrid> {
    let solid = Solid::new(mesh)?;
    let (lo, hi) = solid.bounds();
    let mut grid = VoxelGrid::covering(&lo, &hi, edge)?;
    grid.fill(|c| solid.contains(c));
    Ok(grid)
}

/// Volume in cm³ of lattice cells whose centers lie inside both meshes.
pub fn voxel_overlap_volume(a: &TriangleMesh, b: &TriangleMesh, edge: f64) -> Result<f64> {
    if !(edge > 0.0) {
        return Err(Error::InvalidVoxelEdge(edge));
    }
    overlap_volume_solids(&Solid::new(a)?, &Solid::new(b)?, edge)
}

/// [`voxel_overlap_volume`] on prebuilt solids.
pub fn overlap_volume_solids(a: &Solid, b: &Solid, edge: f64) -> Result<f64> {
    if !(edge > 0.0) {
        return Err(Error::InvalidVoxelEdge(edge));
    }
    let (alo, ahi) = a.bounds();
    let (blo, bhi) = b.bounds();
    let lo = alo.sup(&blo);
    let hi = ahi.inf(&bhi);
    if (0..3).any(|i| lo[i] >= hi[i]) {
        return Ok(0.0);
    }
    let mut grid = VoxelGrid::covering(&lo, &hi, edge)?;
    grid.fill(|c| a.contains(c) && b.contains(c));
    Ok(grid.occupied_volume() * 1e6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{primitives, RigidTransform};
    use std::f64::consts::PI;

    #[test]
    fn identical_cubes_overlap_fully() {
        let cube = primitives::cuboid(Vec3::repeat(0.01));
        let v = voxel_overlap_volume(&cube, &cube, 0.001).unwrap();
        assert!((v - 1.0).abs() <= 0.03, "{v}");
    }

    #[test]
    fn disjoint_meshes_do_not_overlap() {
        let a = primitives::uv_sphere(0.01, 32, 16);
        let b = a.transformed(&RigidTransform::from_translation(Vec3::new(0.05, 0.0, 0.0)));
        assert_eq!(voxel_overlap_volume(&a, &b, 0.001).unwrap(), 0.0);
    }

    #[test]
    fn sphere_lens_matches_closed_form() {
        let r = 0.01;
        let a = primitives::uv_sphere(r, 96, 48);
        let b = a.transformed(&RigidTransform::from_translation(Vec3::new(r, 0.0, 0.0)));
        let lens_cm3 = 5.0 / 12.0 * PI * (r * 100.0).powi(3);
        let v = voxel_overlap_volume(&a, &b, 0.001).unwrap();
        assert!((v - lens_cm3).abs() / lens_cm3 <= 0.05, "{v} vs {lens_cm3}");
        let sym = voxel_overlap_volume(&b, &a, 0.001).unwrap();
        assert_eq!(v, sym);
    }

    #[test]
    fn overlap_shrinks_as_spheres_separate() {
        let r = 0.01;
        let a = primitives::uv_sphere(r, 48, 24);
        let mut last = f64::INFINITY;
        for step in 0..6 {
            let d = 0.004 * step as f64;
            let b = a.transformed(&RigidTransform::from_translation(Vec3::new(d, 0.0, 0.0)));
            let v = voxel_overlap_volume(&a, &b, 0.001).unwrap();
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn non_positive_edge_is_rejected() {
        let cube = primitives::cuboid(Vec3::repeat(0.01));
        assert!(matches!(voxel_overlap_volume(&cube, &cube, 0.0), Err(Error::InvalidVoxelEdge(_))));
        assert!(VoxelGrid::new(Vec3::zeros(), -1.0, [1, 1, 1]).is_err());
        assert!(VoxelGrid::new(Vec3::zeros(), 1.0, [0, 1, 1]).is_err());
    }
}
