//! Wavefront OBJ and binary little-endian PLY mesh readers and writers.
//! Only positions, triangle faces and optional per-vertex normals are kept.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::mesh::TriangleMesh;
use super::transform::Vec3;
use crate::error::{Error, Result};

pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("obj") => read_obj(path),
        Some("ply") => read_ply(path),
        _ => Err(Error::format(path, "unsupported mesh extension (expected .obj or .ply)")),
    }
}

pub fn write_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("obj") => write_obj(mesh, path),
        Some("ply") => write_ply(mesh, path),
        _ => Err(Error::format(path, "unsupported mesh extension (expected .obj or .ply)")),
    }
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut positions = Vec::new();
    let mut normals = Vec::new();
    // (position index, normal index) per face corner
    let mut faces: Vec<[(usize, Option<usize>); 3]> = Vec::new();

    let parse_f = |s: &str, line: usize| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::format(path, format!("line {line}: bad number {s:?}")))
    };
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") | Some("vn") => {
                let tag = line.split_whitespace().next().unwrap();
                let xs: Vec<f64> = it.take(3).map(|s| parse_f(s, ln + 1)).collect::<Result<_>>()?;
                if xs.len() != 3 {
                    return Err(Error::format(path, format!("line {}: expected 3 coordinates", ln + 1)));
                }
                let v = Vec3::new(xs[0], xs[1], xs[2]);
                if tag == "v" {
                    positions.push(v);
                } else {
                    normals.push(v);
                }
            }
            Some("f") => {
                let corners = it
                    .map(|tok| parse_corner(tok, positions.len(), normals.len()))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| Error::format(path, format!("line {}: bad face", ln + 1)))?;
                if corners.len() < 3 {
                    return Err(Error::format(path, format!("line {}: face with fewer than 3 corners", ln + 1)));
                }
                for k in 1..corners.len() - 1 {
                    faces.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }

    // Normals are kept only if every corner of every face names one and each
    // vertex is paired with a single normal.
    let mut vertex_normals: Option<Vec<Option<Vec3>>> = if normals.is_empty() {
        None
    } else {
        Some(vec![None; positions.len()])
    };
    if let Some(vn) = &mut vertex_normals {
        'outer: for f in &faces {
            for &(v, n) in f {
                let Some(n) = n else {
                    vertex_normals = None;
                    break 'outer;
                };
                let n = normals[n];
                match vn[v] {
                    None => vn[v] = Some(n),
                    Some(prev) if (prev - n).norm() < 1e-9 => {}
                    Some(_) => {
                        vertex_normals = None;
                        break 'outer;
                    }
                }
            }
        }
    }
    let normals = vertex_normals.and_then(|vn| {
        vn.into_iter()
            .map(|n| n.map(|n| if n.norm() > 0.0 { n.normalize() } else { n }))
            .collect::<Option<Vec<_>>>()
    });
    let faces = faces
        .iter()
        .map(|f| f.map(|(v, _)| v as u32))
        .collect();
    TriangleMesh::new(positions, faces, normals)
}

fn parse_corner(tok: &str, nv: usize, nn: usize) -> Option<(usize, Option<usize>)> {
    let mut parts = tok.split('/');
    let v = resolve_index(parts.next()?, nv)?;
    let _vt = parts.next();
    let n = match parts.next() {
        Some(s) if !s.is_empty() => Some(resolve_index(s, nn)?),
        _ => None,
    };
    Some((v, n))
}

fn resolve_index(s: &str, count: usize) -> Option<usize> {
    let i: i64 = s.parse().ok()?;
    let idx = if i > 0 { i - 1 } else { count as i64 + i };
    (0..count as i64).contains(&idx).then_some(idx as usize)
}

pub fn write_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in &mesh.vertices {
        writeln!(w, "v {:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
    }
    if let Some(ns) = &mesh.normals {
        for n in ns {
            writeln!(w, "vn {:.17e} {:.17e} {:.17e}", n.x, n.y, n.z)?;
        }
        for f in &mesh.faces {
            writeln!(w, "f {0}//{0} {1}//{1} {2}//{2}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
    } else {
        for f in &mesh.faces {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, r: &mut impl Read) -> std::io::Result<f64> {
        let mut buf = [0u8; 8];
        let b = &mut buf[..self.size()];
        r.read_exact(b)?;
        Ok(match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b.try_into().unwrap()),
        })
    }
}

enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != "ply" {
        return Err(Error::format(path, "missing ply magic"));
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut format_ok = false;
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::format(path, "unterminated header"));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "binary_little_endian", _] => format_ok = true,
            ["format", ..] => return Err(Error::format(path, "only binary_little_endian PLY is supported")),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::format(path, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", cnt, item, name] => {
                let (Some(c), Some(i)) = (Scalar::parse(cnt), Scalar::parse(item)) else {
                    return Err(Error::format(path, "bad list property type"));
                };
                elements
                    .last_mut()
                    .ok_or_else(|| Error::format(path, "property before element"))?
                    .props
                    .push(Property::List(name.to_string(), c, i));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| Error::format(path, "bad property type"))?;
                elements
                    .last_mut()
                    .ok_or_else(|| Error::format(path, "property before element"))?
                    .props
                    .push(Property::Scalar(name.to_string(), ty));
            }
            ["end_header"] => break,
            _ => {}
        }
    }
    if !format_ok {
        return Err(Error::format(path, "missing format line"));
    }

    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut faces = Vec::new();
    let eof = |e: std::io::Error| Error::format(path, format!("truncated body: {e}"));
    for el in &elements {
        for _ in 0..el.count {
            let mut pos = [f64::NAN; 3];
            let mut nrm = [f64::NAN; 3];
            for p in &el.props {
                match p {
                    Property::Scalar(name, ty) => {
                        let v = ty.read(&mut r).map_err(eof)?;
                        match name.as_str() {
                            "x" => pos[0] = v,
                            "y" => pos[1] = v,
                            "z" => pos[2] = v,
                            "nx" => nrm[0] = v,
                            "ny" => nrm[1] = v,
                            "nz" => nrm[2] = v,
                            _ => {}
                        }
                    }
                    Property::List(name, cnt, item) => {
                        let n = cnt.read(&mut r).map_err(eof)? as usize;
                        let mut idx = Vec::with_capacity(n);
                        for _ in 0..n {
                            idx.push(item.read(&mut r).map_err(eof)? as u32);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            if n < 3 {
                                return Err(Error::format(path, "face with fewer than 3 corners"));
                            }
                            for k in 1..n - 1 {
                                faces.push([idx[0], idx[k], idx[k + 1]]);
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                vertices.push(Vec3::from(pos));
                normals.push(Vec3::from(nrm));
            }
        }
    }
    let has_normals = !normals.is_empty() && normals.iter().all(|n| n.iter().all(|c| c.is_finite()));
    TriangleMesh::new(vertices, faces, has_normals.then_some(normals))
}

pub fn write_ply(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "ply\nformat binary_little_endian 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertices.len())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    if mesh.normals.is_some() {
        writeln!(w, "property double nx\nproperty double ny\nproperty double nz")?;
    }
    writeln!(w, "element face {}", mesh.faces.len())?;
    writeln!(w, "property list uchar uint vertex_indices\nend_header")?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        for c in v.iter() {
            w.write_all(&c.to_le_bytes())?;
        }
        if let Some(ns) = &mesh.normals {
            for c in ns[i].iter() {
                w.write_all(&c.to_le_bytes())?;
            }
        }
    }
    for f in &mesh.faces {
        w.write_all(&[3u8])?;
        for i in f {
            w.write_all(&i.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}
