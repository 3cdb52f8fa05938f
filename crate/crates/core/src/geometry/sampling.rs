use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mesh::TriangleMesh;
use super::transform::Vec3;
use crate::error::{Error, Result};
use crate::repr::ObjectPoints;

/// Draws `n` area-uniform surface samples. Normals are interpolated from
/// vertex normals when present, otherwise taken from the face.
pub fn sample_surface_points(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<ObjectPoints> {
    let (points, normals, _) = sample_with_faces(mesh, n, seed)?;
    ObjectPoints::new(points, normals, "")
}

/// Like [`sample_surface_points`] but also returns the source face of each sample.
pub fn sample_with_faces(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<(Vec<Vec3>, Vec<Vec3>, Vec<usize>)> {
    let mut cdf = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateMesh);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut faces = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen::<f64>() * total;
        let fi = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = r1.sqrt();
        let w = [1.0 - s, s * (1.0 - r2), s * r2];
        let [a, b, c] = mesh.triangle(fi);
        points.push(w[0] * a + w[1] * b + w[2] * c);
        let face_normal = mesh.face_cross(fi).normalize();
        let normal = match &mesh.normals {
            Some(ns) => {
                let f = mesh.faces[fi];
                let interp = w[0] * ns[f[0] as usize] + w[1] * ns[f[1] as usize] + w[2] * ns[f[2] as usize];
                let l = interp.norm();
                if l > 1e-12 {
                    interp / l
                } else {
                    face_normal
                }
            }
            None => face_normal,
        };
        normals.push(normal);
        faces.push(fi);
    }
    Ok((points, normals, faces))
}
