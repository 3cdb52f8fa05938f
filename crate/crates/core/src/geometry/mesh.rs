use super::transform::{RigidTransform, Vec3};
use crate::error::{Error, Result};

/// Indexed triangle mesh. Lengths are in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub normals: Option<Vec<Vec3>>,
}

impl TriangleMesh {
    /// Builds a mesh and checks index range, finiteness and normal length.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>, normals: Option<Vec<Vec3>>) -> Result<Self> {
        let mesh = Self {
            vertices,
            faces,
            normals,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        if let Some((i, _)) = self
            .vertices
            .iter()
            .enumerate()
            .find(|(_, v)| !v.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidMesh(format!("vertex {i} is not finite")));
        }
        for (fi, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&i| i as usize >= nv) {
                return Err(Error::InvalidMesh(format!("face {fi} references a vertex outside [0, {nv})")));
            }
        }
        if let Some(normals) = &self.normals {
            if normals.len() != nv {
                return Err(Error::InvalidMesh(format!(
                    "{} normals for {} vertices",
                    normals.len(),
                    nv
                )));
            }
            if let Some((i, _)) = normals
                .iter()
                .enumerate()
                .find(|(_, n)| !((n.norm() - 1.0).abs() <= 1e-6))
            {
                return Err(Error::InvalidMesh(format!("normal {i} is not unit length")));
            }
        }
        Ok(())
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let f = self.faces[face];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    /// Non-normalized face normal; its norm is twice the face area.
    pub fn face_cross(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_cross(face).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Volume enclosed by a closed, outward-oriented mesh (divergence theorem).
    pub fn signed_volume(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    /// Angle-weighted vertex normals.
    pub fn compute_vertex_normals(&mut self) {
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for (f, face) in self.faces.iter().enumerate() {
            let n = self.face_cross(f);
            let norm = n.norm();
            if norm == 0.0 {
                continue;
            }
            let n = n / norm;
            let tri = self.triangle(f);
            for k in 0..3 {
                acc[face[k] as usize] += corner_angle(&tri, k) * n;
            }
        }
        self.normals = Some(
            acc.into_iter()
                .map(|n| {
                    let l = n.norm();
                    if l > 0.0 {
                        n / l
                    } else {
                        Vec3::z()
                    }
                })
                .collect(),
        );
    }

    pub fn transformed(&self, t: &RigidTransform) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| t.apply(v)).collect(),
            faces: self.faces.clone(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| t.apply_vector(n)).collect()),
        }
    }

    /// Concatenates meshes, offsetting face indices. Normals survive only if
    /// every input carries them.
    pub fn merge(meshes: &[TriangleMesh]) -> TriangleMesh {
        let mut out = TriangleMesh {
            vertices: Vec::new(),
            faces: Vec::new(),
            normals: Some(Vec::new()),
        };
        for m in meshes {
            let offset = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&m.vertices);
            out.faces
                .extend(m.faces.iter().map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]));
            match (&mut out.normals, &m.normals) {
                (Some(acc), Some(ns)) => acc.extend_from_slice(ns),
                _ => out.normals = None,
            }
        }
        out
    }

    /// Connected components over shared vertex indices, as face lists.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for f in &self.faces {
            let a = find(&mut parent, f[0] as usize);
            for &v in &f[1..] {
                let b = find(&mut parent, v as usize);
                if a != b {
                    parent[b] = a;
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (fi, f) in self.faces.iter().enumerate() {
            let root = find(&mut parent, f[0] as usize);
            groups.entry(root).or_default().push(fi);
        }
        groups.into_values().collect()
    }

    /// Sub-mesh made of the given faces, with vertices re-indexed.
    pub fn submesh(&self, faces: &[usize]) -> TriangleMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut normals = self.normals.as_ref().map(|_| Vec::new());
        let mut out_faces = Vec::with_capacity(faces.len());
        for &fi in faces {
            let mut nf = [0u32; 3];
            for (k, &v) in self.faces[fi].iter().enumerate() {
                let v = v as usize;
                if remap[v] == u32::MAX {
                    remap[v] = vertices.len() as u32;
                    vertices.push(self.vertices[v]);
                    if let (Some(out), Some(src)) = (&mut normals, &self.normals) {
                        out.push(src[v]);
                    }
                }
                nf[k] = remap[v];
            }
            out_faces.push(nf);
        }
        TriangleMesh {
            vertices,
            faces: out_faces,
            normals,
        }
    }

    /// Edges used by other than exactly two faces, in either orientation.
    pub fn boundary_or_nonmanifold_edges(&self) -> usize {
        let mut counts: std::collections::HashMap<(u32, u32), usize> = Default::default();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        counts.values().filter(|&&c| c != 2).count()
    }

    /// `V − E + F` over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
                used[f[k] as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - edges.len() as i64 + self.faces.len() as i64
    }
}

fn corner_angle(tri: &[Vec3; 3], k: usize) -> f64 {
    let a = tri[(k + 1) % 3] - tri[k];
    let b = tri[(k + 2) % 3] - tri[k];
    let (la, lb) = (a.norm(), b.norm());
    if la == 0.0 || lb == 0.0 {
        return 0.0;
    }
    (a.dot(&b) / (la * lb)).clamp(-1.0, 1.0).acos()
}

/// Closest-point feature on a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Vertex(usize),
    /// Edge from corner `k` to corner `(k + 1) % 3`.
    Edge(usize),
    Face,
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection 5.1.5).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, Feature) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, Feature::Vertex(0));
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + v * ab, Feature::Edge(0));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + w * ac, Feature::Edge(2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + w * (c - b), Feature::Edge(1));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, Feature::Face)
}

#[derive(Debug, Clone)]
struct BvhNode {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: `start..start+count` into the permuted face list. Inner: children.
    start: usize,
    count: usize,
    left: usize,
    right: usize,
}

fn box_distance_sq(p: &Vec3, lo: &Vec3, hi: &Vec3) -> f64 {
    let mut d = 0.0;
    for i in 0..3 {
        let v = if p[i] < lo[i] {
            lo[i] - p[i]
        } else if p[i] > hi[i] {
            p[i] - hi[i]
        } else {
            0.0
        };
        d += v * v;
    }
    d
}

/// Nearest-surface query structure: an AABB tree over faces plus
/// angle-weighted pseudo-normals for sign determination.
#[derive(Debug, Clone)]
pub struct MeshDistance {
    mesh: TriangleMesh,
    nodes: Vec<BvhNode>,
    order: Vec<usize>,
    face_normals: Vec<Vec3>,
    vertex_normals: Vec<Vec3>,
    edge_normals: std::collections::HashMap<(u32, u32), Vec3>,
}

/// Result of a nearest-surface query.
#[derive(Debug, Clone, Copy)]
pub struct Nearest {
    pub distance: f64,
    pub point: Vec3,
    pub face: usize,
    pub feature: Feature,
}

impl MeshDistance {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        if mesh.faces.is_empty() {
            return Err(Error::InvalidMesh("mesh has no faces".into()));
        }
        let nf = mesh.faces.len();
        let mut face_normals = Vec::with_capacity(nf);
        let mut vertex_normals = vec![Vec3::zeros(); mesh.vertices.len()];
        let mut edge_normals: std::collections::HashMap<(u32, u32), Vec3> = Default::default();
        for (fi, f) in mesh.faces.iter().enumerate() {
            let n = mesh.face_cross(fi);
            let l = n.norm();
            let n = if l > 0.0 { n / l } else { Vec3::zeros() };
            face_normals.push(n);
            let tri = mesh.triangle(fi);
            for k in 0..3 {
                vertex_normals[f[k] as usize] += corner_angle(&tri, k) * n;
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *edge_normals.entry((a.min(b), a.max(b))).or_insert_with(Vec3::zeros) += n;
            }
        }
        let centroids: Vec<Vec3> = (0..nf)
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                (a + b + c) / 3.0
            })
            .collect();
        let mut order: Vec<usize> = (0..nf).collect();
        let mut nodes = Vec::with_capacity(2 * nf / 4 + 1);
        build_node(mesh, &centroids, &mut order, 0, nf, &mut nodes);
        Ok(Self {
            mesh: mesh.clone(),
            nodes,
            order,
            face_normals,
            vertex_normals,
            edge_normals,
        })
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        (self.nodes[0].lo, self.nodes[0].hi)
    }

    /// Nearest point on the surface.
    pub fn nearest(&self, p: &Vec3) -> Nearest {
        let mut best = Nearest {
            distance: f64::INFINITY,
            point: *p,
            face: 0,
            feature: Feature::Face,
        };
        let mut best_sq = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if box_distance_sq(p, &node.lo, &node.hi) >= best_sq {
                continue;
            }
            if node.count > 0 {
                for &fi in &self.order[node.start..node.start + node.count] {
                    let [a, b, c] = self.mesh.triangle(fi);
                    let (q, feature) = closest_point_on_triangle(p, &a, &b, &c);
                    let d = (p - q).norm_squared();
                    if d < best_sq {
                        best_sq = d;
                        best = Nearest {
                            distance: 0.0,
                            point: q,
                            face: fi,
                            feature,
                        };
                    }
                }
            } else {
                let (l, r) = (node.left, node.right);
                let dl = box_distance_sq(p, &self.nodes[l].lo, &self.nodes[l].hi);
                let dr = box_distance_sq(p, &self.nodes[r].lo, &self.nodes[r].hi);
                // visit the nearer child first
                if dl < dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best.distance = best_sq.sqrt();
        best
    }

    pub fn unsigned_distance(&self, p: &Vec3) -> f64 {
        self.nearest(p).distance
    }

    /// Signed distance, negative inside, using the pseudo-normal of the
    /// nearest feature.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.signed_distance_with_gradient(p).0
    }

    /// Signed distance and its gradient: the unit vector away from the
    /// nearest point, or the pseudo-normal for points on the surface.
    pub fn signed_distance_with_gradient(&self, p: &Vec3) -> (f64, Vec3) {
        let n = self.nearest(p);
        let f = self.mesh.faces[n.face];
        let normal = match n.feature {
            Feature::Face => self.face_normals[n.face],
            Feature::Vertex(k) => self.vertex_normals[f[k] as usize],
            Feature::Edge(k) => {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                self.edge_normals[&(a.min(b), a.max(b))]
            }
        };
        let offset = p - n.point;
        let sign = if offset.dot(&normal) < 0.0 { -1.0 } else { 1.0 };
        let grad = if n.distance > 1e-9 { offset * (sign / n.distance) } else { normal };
        (sign * n.distance, grad)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let (lo, hi) = self.bounds();
        if (0..3).any(|i| p[i] < lo[i] || p[i] > hi[i]) {
            return false;
        }
        self.signed_distance(p) < 0.0
    }
}

fn build_node(
    mesh: &TriangleMesh,
    centroids: &[Vec3],
    order: &mut [usize],
    start: usize,
    count: usize,
    nodes: &mut Vec<BvhNode>,
) -> usize {
    let slice = &mut order[start..start + count];
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    let mut clo = lo;
    let mut chi = hi;
    for &fi in slice.iter() {
        for v in mesh.triangle(fi) {
            lo = lo.inf(&v);
            hi = hi.sup(&v);
        }
        clo = clo.inf(&centroids[fi]);
        chi = chi.sup(&centroids[fi]);
    }
    let idx = nodes.len();
    nodes.push(BvhNode {
        lo,
        hi,
        start,
        count,
        left: 0,
        right: 0,
    });
    if count <= 4 {
        return idx;
    }
    let extent = chi - clo;
    let axis = extent.imax();
    let mid = count / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a][axis].total_cmp(&centroids[b][axis])
    });
    let left = build_node(mesh, centroids, order, start, mid, nodes);
    let right = build_node(mesh, centroids, order, start + mid, count - mid, nodes);
    let node = &mut nodes[idx];
    node.count = 0;
    node.left = left;
    node.right = right;
    idx
}

/// A solid bounded by one or more closed surfaces. Each connected component
/// is treated as its own closed shell and a point is inside the solid when it
/// is inside any shell, so unions of overlapping closed parts are handled.
#[derive(Debug, Clone)]
pub struct Solid {
    shells: Vec<MeshDistance>,
}

impl Solid {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        let shells = mesh
            .connected_components()
            .iter()
            .map(|faces| MeshDistance::new(&mesh.submesh(faces)))
            .collect::<Result<Vec<_>>>()?;
        if shells.is_empty() {
            return Err(Error::InvalidMesh("mesh has no faces".into()));
        }
        Ok(Self { shells })
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.shells.iter().any(|s| s.contains(p))
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        self.shells.iter().skip(1).fold(self.shells[0].bounds(), |(lo, hi), s| {
            let (l, h) = s.bounds();
            (lo.inf(&l), hi.sup(&h))
        })
    }

    /// Unsigned distance to the nearest surface of any shell.
    pub fn surface_distance(&self, p: &Vec3) -> f64 {
        self.shells
            .iter()
            .map(|s| s.unsigned_distance(p))
            .fold(f64::INFINITY, f64::min)
    }
}
