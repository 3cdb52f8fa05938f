//! Zero-level isosurface extraction on a regular grid.
//!
//! Each grid cube is split into six tetrahedra sharing the main diagonal
//! (Kuhn triangulation). The split is identical in every cube, so faces
//! between neighbors agree and the welded output is a closed 2-manifold
//! wherever the level set does not touch the grid boundary.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{TriangleMesh, Vec3};

/// Corner `c` of a cube has offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
const TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Extracts `{x : f(x) = 0}` over `dims` cells of size `edge` starting at
/// `origin`. Negative values are inside; the output is oriented outward.
pub fn extract_isosurface(
    origin: &Vec3,
    edge: f64,
    dims: [usize; 3],
    f: impl Fn(&Vec3) -> f64,
) -> Result<TriangleMesh> {
    let [nx, ny, nz] = dims;
    let (px, py) = (nx + 1, ny + 1);
    let vid = |i: usize, j: usize, k: usize| i + px * (j + py * k);
    let pos = |id: usize| {
        let i = id % px;
        let j = (id / px) % py;
        let k = id / (px * py);
        origin + Vec3::new(i as f64, j as f64, k as f64) * edge
    };
    let values: Vec<f64> = (0..px * py * (nz + 1)).map(|id| f(&pos(id))).collect();

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut edge_vertex: HashMap<(usize, usize), u32> = HashMap::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();

    let mut crossing = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> u32 {
        let key = (a.min(b), a.max(b));
        *edge_vertex.entry(key).or_insert_with(|| {
            let (va, vb) = (values[key.0], values[key.1]);
            let t = va / (va - vb);
            let p = pos(key.0) + (pos(key.1) - pos(key.0)) * t;
            vertices.push(p);
            (vertices.len() - 1) as u32
        })
    };

    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let corners: [usize; 8] =
                    std::array::from_fn(|c| vid(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)));
                for tet in &TETS {
                    let ids = tet.map(|c| corners[c]);
                    let inside: Vec<usize> = ids.iter().copied().filter(|&v| values[v] < 0.0).collect();
                    let outside: Vec<usize> = ids.iter().copied().filter(|&v| values[v] >= 0.0).collect();
                    if inside.is_empty() || outside.is_empty() {
                        continue;
                    }
                    let centroid = |vs: &[usize]| vs.iter().map(|&v| pos(v)).sum::<Vec3>() / vs.len() as f64;
                    let out_dir = centroid(&outside) - centroid(&inside);
                    let emit = |tri: [u32; 3], vertices: &Vec<Vec3>, faces: &mut Vec<[u32; 3]>| {
                        let [a, b, c] = tri.map(|v| vertices[v as usize]);
                        if (b - a).cross(&(c - a)).dot(&out_dir) < 0.0 {
                            faces.push([tri[0], tri[2], tri[1]]);
                        } else {
                            faces.push(tri);
                        }
                    };
                    match (inside.len(), outside.len()) {
                        (1, 3) => {
                            let s = inside[0];
                            let tri = [
                                crossing(s, outside[0], &mut vertices),
                                crossing(s, outside[1], &mut vertices),
                                crossing(s, outside[2], &mut vertices),
                            ];
                            emit(tri, &vertices, &mut faces);
                        }
                        (3, 1) => {
                            let s = outside[0];
                            let tri = [
                                crossing(inside[0], s, &mut vertices),
                                crossing(inside[1], s, &mut vertices),
                                crossing(inside[2], s, &mut vertices),
                            ];
                            emit(tri, &vertices, &mut faces);
                        }
                        _ => {
                            // quad a0-b0, a0-b1, a1-b1, a1-b0
                            let (a0, a1, b0, b1) = (inside[0], inside[1], outside[0], outside[1]);
                            let q = [
                                crossing(a0, b0, &mut vertices),
                                crossing(a0, b1, &mut vertices),
                                crossing(a1, b1, &mut vertices),
                                crossing(a1, b0, &mut vertices),
                            ];
                            emit([q[0], q[1], q[2]], &vertices, &mut faces);
                            emit([q[0], q[2], q[3]], &vertices, &mut faces);
                        }
                    }
                }
            }
        }
    }
    if faces.is_empty() {
        return Err(Error::EmptyIsosurface);
    }
    let mut mesh = TriangleMesh {
        vertices,
        faces,
        normals: None,
    };
    mesh.compute_vertex_normals();
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_isosurface_is_closed_and_accurate() {
        let r = 0.7;
        let edge = 2.0 / 40.0;
        let mesh = extract_isosurface(&Vec3::repeat(-1.0), edge, [40, 40, 40], |p| p.norm() - r).unwrap();
        assert_eq!(mesh.boundary_or_nonmanifold_edges(), 0);
        assert_eq!(mesh.euler_characteristic(), 2);
        for v in &mesh.vertices {
            assert!((v.norm() - r).abs() < edge);
        }
        let vol = mesh.signed_volume();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * r.powi(3);
        assert!((vol - exact).abs() / exact < 0.02, "{vol} vs {exact}");
    }

    #[test]
    fn torus_has_genus_one() {
        let mesh = extract_isosurface(&Vec3::new(-1.0, -1.0, -0.5), 0.04, [50, 50, 25], |p| {
            let q = (p.x * p.x + p.y * p.y).sqrt() - 0.6;
            (q * q + p.z * p.z).sqrt() - 0.2
        })
        .unwrap();
        assert_eq!(mesh.boundary_or_nonmanifold_edges(), 0);
        assert_eq!(mesh.euler_characteristic(), 0);
    }

    #[test]
    fn empty_level_set_errors() {
        let r = extract_isosurface(&Vec3::zeros(), 0.1, [4, 4, 4], |_| 1.0);
        assert!(matches!(r, Err(Error::EmptyIsosurface)));
    }
}
