//! Dataset manifests and the small text formats for hand parameters and
//! oriented point clouds.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use contactgen::geometry::Vec3;
use contactgen::hand::{HandParams, NUM_PARTS, SHAPE_DIM};
use contactgen::repr::ObjectPoints;
use serde::{Deserialize, Serialize};

use crate::Invalid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One object with its sampled points and, when known, the ground-truth
/// grasp. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: String,
    pub split: Split,
    pub object_mesh: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maps: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hand_params: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hand_mesh: Option<PathBuf>,
}

impl Record {
    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        std::iter::once(&self.object_mesh).chain(&self.points).chain(&self.maps).chain(&self.hand_params).chain(&self.hand_mesh)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub seed: u64,
    #[serde(default, rename = "record")]
    pub records: Vec<Record>,
}

impl DatasetManifest {
    pub fn validate(&self, base: &Path) -> Result<()> {
        let mut ids = HashSet::new();
        let mut seen = HashSet::new();
        for r in &self.records {
            if !ids.insert(&r.id) {
                bail!(Invalid(format!("duplicate record id {}", r.id)));
            }
            for p in r.paths() {
                if !seen.insert(p) {
                    bail!(Invalid(format!("path {} appears twice in the manifest", p.display())));
                }
                if !base.join(p).is_file() {
                    bail!(Invalid(format!("record {}: {} does not exist", r.id, base.join(p).display())));
                }
            }
        }
        Ok(())
    }

    /// Reads and validates a manifest; returns it with its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| Invalid(format!("cannot read manifest {}: {e}", path.display())))?;
        let manifest: Self = toml::from_str(&text).map_err(|e| Invalid(format!("manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        manifest.validate(&base)?;
        Ok((manifest, base))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).context("serializing manifest")?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    pose: Vec<[f64; 3]>,
    shape: Vec<f64>,
    translation: [f64; 3],
}

pub fn write_params(params: &HandParams, path: &Path) -> Result<()> {
    let file = ParamsFile {
        pose: params.pose.iter().map(|v| [v.x, v.y, v.z]).collect(),
        shape: params.shape.to_vec(),
        translation: [params.translation.x, params.translation.y, params.translation.z],
    };
    std::fs::write(path, toml::to_string(&file)?).with_context(|| format!("writing {}", path.display()))
}

pub fn read_params(path: &Path) -> Result<HandParams> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ParamsFile = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if file.pose.len() != NUM_PARTS || file.shape.len() != SHAPE_DIM {
        bail!("{}: expected {NUM_PARTS} pose rows and {SHAPE_DIM} shape values", path.display());
    }
    let mut p = HandParams::rest();
    for (slot, v) in p.pose.iter_mut().zip(&file.pose) {
        *slot = Vec3::from(*v);
    }
    p.shape.copy_from_slice(&file.shape);
    p.translation = Vec3::from(file.translation);
    p.validate()?;
    Ok(p)
}

/// One `x y z nx ny nz` line per point, written with round-trip precision.
pub fn write_points(points: &ObjectPoints, path: &Path) -> Result<()> {
    let mut text = String::new();
    for (p, n) in points.points.iter().zip(&points.normals) {
        writeln!(text, "{} {} {} {} {} {}", p.x, p.y, p.z, n.x, n.y, n.z)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_points(path: &Path) -> Result<ObjectPoints> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let v = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}:{}", path.display(), i + 1))?;
        if v.len() != 6 {
            bail!("{}:{}: expected 6 values, found {}", path.display(), i + 1, v.len());
        }
        points.push(Vec3::new(v[0], v[1], v[2]));
        normals.push(Vec3::new(v[3], v[4], v[5]));
    }
    Ok(ObjectPoints::new(points, normals, path.display().to_string())?)
}
