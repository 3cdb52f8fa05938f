//! Closed, outward-oriented primitive meshes centered at the origin.

use std::f64::consts::PI;

use super::mesh::TriangleMesh;
use super::transform::Vec3;

/// Latitude-longitude tessellation of a surface of revolution about z.
/// `profile(φ)` returns `(radial, z)` for polar angle `φ ∈ [0, π]`; the two
/// poles must have zero radius.
fn revolve(segments: usize, rings: &[f64], profile: impl Fn(usize, f64) -> (f64, f64)) -> TriangleMesh {
    let segments = segments.max(3);
    let mut vertices = Vec::new();
    let (_, top_z) = profile(0, 0.0);
    vertices.push(Vec3::new(0.0, 0.0, top_z));
    for (ri, &phi) in rings.iter().enumerate() {
        let (rad, z) = profile(ri + 1, phi);
        for j in 0..segments {
            let a = 2.0 * PI * j as f64 / segments as f64;
            vertices.push(Vec3::new(rad * a.cos(), rad * a.sin(), z));
        }
    }
    let (_, bottom_z) = profile(rings.len() + 1, PI);
    vertices.push(Vec3::new(0.0, 0.0, bottom_z));
    let bottom = (vertices.len() - 1) as u32;
    let ring = |r: usize, j: usize| (1 + r * segments + (j % segments)) as u32;

    let mut faces = Vec::new();
    for j in 0..segments {
        faces.push([0, ring(0, j), ring(0, j + 1)]);
    }
    for r in 0..rings.len() - 1 {
        for j in 0..segments {
            let (a, b, c, d) = (ring(r, j), ring(r + 1, j), ring(r + 1, j + 1), ring(r, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    let last = rings.len() - 1;
    for j in 0..segments {
        faces.push([bottom, ring(last, j + 1), ring(last, j)]);
    }
    TriangleMesh {
        vertices,
        faces,
        normals: None,
    }
}

pub fn uv_sphere(radius: f64, segments: usize, rings: usize) -> TriangleMesh {
    let rings = rings.max(2);
    let phis: Vec<f64> = (1..rings).map(|i| PI * i as f64 / rings as f64).collect();
    let mut mesh = revolve(segments, &phis, |_, phi| (radius * phi.sin(), radius * phi.cos()));
    mesh.normals = Some(mesh.vertices.iter().map(|v| v / radius).collect());
    mesh
}

/// Capsule whose axis runs along x from `(-half_length, 0, 0)` to
/// `(half_length, 0, 0)`. `rings` counts latitude bands per hemisphere.
pub fn capsule(radius: f64, half_length: f64, segments: usize, rings: usize) -> TriangleMesh {
    let rings = rings.max(1);
    let mut phis = Vec::new();
    let mut centers = Vec::new();
    for i in 1..=rings {
        phis.push(0.5 * PI * i as f64 / rings as f64);
        centers.push(half_length);
    }
    for i in 0..rings {
        phis.push(0.5 * PI + 0.5 * PI * i as f64 / rings as f64);
        centers.push(-half_length);
    }
    let mesh = revolve(segments, &phis, |ri, phi| {
        let c = match ri {
            0 => half_length,
            r if r > phis.len() => -half_length,
            r => centers[r - 1],
        };
        (radius * phi.sin(), c + radius * phi.cos())
    });
    // (x, y, z) -> (z, x, y) maps the revolution axis onto x
    let vertices = mesh.vertices.iter().map(|v| Vec3::new(v.z, v.x, v.y)).collect();
    let mut out = TriangleMesh {
        vertices,
        faces: mesh.faces,
        normals: None,
    };
    out.compute_vertex_normals();
    out
}

pub fn torus(major: f64, minor: f64, segments: usize, tube_segments: usize) -> TriangleMesh {
    let (s, t) = (segments.max(3), tube_segments.max(3));
    let mut vertices = Vec::with_capacity(s * t);
    let mut normals = Vec::with_capacity(s * t);
    for i in 0..s {
        let u = 2.0 * PI * i as f64 / s as f64;
        for j in 0..t {
            let v = 2.0 * PI * j as f64 / t as f64;
            let n = Vec3::new(v.cos() * u.cos(), v.cos() * u.sin(), v.sin());
            let center = Vec3::new(major * u.cos(), major * u.sin(), 0.0);
            vertices.push(center + minor * n);
            normals.push(n);
        }
    }
    let idx = |i: usize, j: usize| ((i % s) * t + (j % t)) as u32;
    let mut faces = Vec::with_capacity(2 * s * t);
    for i in 0..s {
        for j in 0..t {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh {
        vertices,
        faces,
        normals: Some(normals),
    }
}

/// Axis-aligned box with the given edge lengths. No vertex normals: corners
/// are sharp, so sampling falls back to face normals.
pub fn cuboid(size: Vec3) -> TriangleMesh {
    let h = size / 2.0;
    let vertices = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    let quads: [[u32; 4]; 6] = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let faces = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    TriangleMesh {
        vertices,
        faces,
        normals: None,
    }
}

/// Closed cylinder along z with flat caps.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let s = segments.max(3);
    let h = height / 2.0;
    let mut vertices = vec![Vec3::new(0.0, 0.0, h)];
    for z in [h, -h] {
        for j in 0..s {
            let a = 2.0 * PI * j as f64 / s as f64;
            vertices.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    vertices.push(Vec3::new(0.0, 0.0, -h));
    let bottom = (vertices.len() - 1) as u32;
    let top = |j: usize| (1 + j % s) as u32;
    let low = |j: usize| (1 + s + j % s) as u32;
    let mut faces = Vec::new();
    for j in 0..s {
        faces.push([0, top(j), top(j + 1)]);
        faces.push([top(j), low(j), low(j + 1)]);
        faces.push([top(j), low(j + 1), top(j + 1)]);
        faces.push([bottom, low(j + 1), low(j)]);
    }
    TriangleMesh {
        vertices,
        faces,
        normals: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_closed(mesh: &TriangleMesh, volume: f64, tol: f64) {
        mesh.validate().unwrap();
        assert_eq!(mesh.boundary_or_nonmanifold_edges(), 0);
        let v = mesh.signed_volume();
        assert!((v - volume).abs() <= tol * volume, "volume {v} vs {volume}");
    }

    #[test]
    fn primitives_are_closed_and_outward() {
        check_closed(&uv_sphere(1.0, 64, 32), 4.0 / 3.0 * PI, 0.01);
        check_closed(&cuboid(Vec3::new(1.0, 2.0, 3.0)), 6.0, 1e-12);
        check_closed(&cylinder(1.0, 2.0, 128), 2.0 * PI, 0.01);
        check_closed(&torus(2.0, 0.5, 96, 48), 2.0 * PI * PI * 2.0 * 0.25, 0.01);
        let cap = capsule(0.5, 1.0, 64, 16);
        check_closed(&cap, PI * 0.25 * 2.0 + 4.0 / 3.0 * PI * 0.125, 0.01);
        assert_eq!(cap.euler_characteristic(), 2);
        let (lo, hi) = cap.bounds().unwrap();
        assert!((hi.x - 1.5).abs() < 1e-12 && (lo.x + 1.5).abs() < 1e-12);
    }
}
