use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::points::ObjectPoints;
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::hand::{direction_from_local, HandModel, HandParams};

/// Distance at which the contact value reaches zero, meters.
pub const CONTACT_DISTANCE: f64 = 0.01;

/// Floor `δ` in the contact weight `W_C = C + δ`.
pub const CONTACT_FLOOR: f64 = 0.1;

const MAGIC: &[u8; 8] = b"CGMAPS\0\0";
const VERSION: u32 = 1;

/// Per-point contact value, part label and part-local direction.
///
/// The part map is stored as labels; [`ContactGenMaps::part_one_hot`]
/// expands it. A label is exactly one one-hot row, so rows always sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactGenMaps {
    pub contact: Vec<f64>,
    pub parts: Vec<usize>,
    pub directions: Vec<Vec3>,
    pub part_count: usize,
}

impl ContactGenMaps {
    pub fn new(contact: Vec<f64>, parts: Vec<usize>, directions: Vec<Vec3>, part_count: usize) -> Result<Self> {
        let maps = Self {
            contact,
            parts,
            directions,
            part_count,
        };
        maps.validate()?;
        Ok(maps)
    }

    pub fn len(&self) -> usize {
        self.contact.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contact.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.contact.len();
        if self.parts.len() != n || self.directions.len() != n {
            return Err(Error::InvalidMaps(format!(
                "map lengths differ: contact {n}, part {}, direction {}",
                self.parts.len(),
                self.directions.len()
            )));
        }
        if self.part_count == 0 || self.part_count > u16::MAX as usize {
            return Err(Error::InvalidMaps(format!("bad part count {}", self.part_count)));
        }
        if let Some(i) = self.contact.iter().position(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidMaps(format!("contact value {} at point {i} is outside [0, 1]", self.contact[i])));
        }
        if let Some(&label) = self.parts.iter().find(|&&p| p >= self.part_count) {
            return Err(Error::PartLabelOutOfRange {
                label,
                parts: self.part_count,
            });
        }
        if let Some(i) = self.directions.iter().position(|d| !((d.norm() - 1.0).abs() <= 1e-6)) {
            return Err(Error::InvalidMaps(format!("direction {i} is not unit length")));
        }
        Ok(())
    }

    /// N×B one-hot part matrix, row-major.
    pub fn part_one_hot(&self) -> Vec<Vec<f64>> {
        self.parts
            .iter()
            .map(|&p| {
                let mut row = vec![0.0; self.part_count];
                row[p] = 1.0;
                row
            })
            .collect()
    }
}

/// Ground-truth maps of `object` against the hand posed at `params`.
pub fn extract_ground_truth(object: &ObjectPoints, params: &HandParams, model: &HandModel) -> Result<ContactGenMaps> {
    let posed = model.pose(params);
    let n = object.len();
    let mut contact = Vec::with_capacity(n);
    let mut parts = Vec::with_capacity(n);
    let mut directions = Vec::with_capacity(n);
    for p in &object.points {
        let (d, b) = posed.hand_sdf(p)?;
        contact.push(contact_value(d));
        parts.push(b);
        directions.push(direction_from_local(&posed.local(p, b), b)?);
    }
    ContactGenMaps::new(contact, parts, directions, posed.part_count())
}

/// `1 − clamp(max(d, 0) / CONTACT_DISTANCE, 0, 1)`.
pub fn contact_value(signed_distance: f64) -> f64 {
    1.0 - (signed_distance.max(0.0) / CONTACT_DISTANCE).clamp(0.0, 1.0)
}

pub fn binarize_contact(maps: &ContactGenMaps, threshold: f64) -> Vec<bool> {
    maps.contact.iter().map(|&c| c >= threshold).collect()
}

/// Little-endian map file: magic, version, N, B, then N f32 contact values,
/// N u16 labels and N f32 direction triples.
pub fn write_maps(maps: &ContactGenMaps, path: impl AsRef<Path>) -> Result<()> {
    maps.validate()?;
    let mut w = Writer::new(BufWriter::new(File::create(path)?));
    w.bytes(MAGIC)?;
    w.u32(VERSION)?;
    w.u32(maps.len() as u32)?;
    w.u32(maps.part_count as u32)?;
    for &c in &maps.contact {
        w.f32(c as f32)?;
    }
    for &p in &maps.parts {
        w.u16(p as u16)?;
    }
    for d in &maps.directions {
        for k in 0..3 {
            w.f32(d[k] as f32)?;
        }
    }
    w.finish()?;
    Ok(())
}

pub fn read_maps(path: impl AsRef<Path>) -> Result<ContactGenMaps> {
    let path = path.as_ref();
    let mut r = Reader::new(BufReader::new(File::open(path)?), path);
    r.expect_magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let n = r.u32()? as usize;
    let b = r.u32()? as usize;
    if b == 0 || b > u16::MAX as usize {
        return Err(r.err(format!("bad part count {b}")));
    }
    let len = std::fs::metadata(path)?.len() as usize;
    if len != 20 + n * (4 + 2 + 12) {
        return Err(r.err(format!("file holds {len} bytes, expected {} for N = {n}", 20 + n * 18)));
    }
    let contact = (0..n).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
    let parts = (0..n).map(|_| r.u16().map(usize::from)).collect::<Result<Vec<_>>>()?;
    let directions = (0..n)
        .map(|_| Ok(Vec3::new(r.f32()?.into(), r.f32()?.into(), r.f32()?.into())))
        .collect::<Result<Vec<_>>>()?;
    r.expect_end()?;
    ContactGenMaps::new(contact, parts, directions, b)
}
