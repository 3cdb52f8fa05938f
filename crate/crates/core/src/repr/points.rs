use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};

/// Surface samples of a conditioning object, with unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectPoints {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub source: String,
}

impl ObjectPoints {
    pub fn new(points: Vec<Vec3>, normals: Vec<Vec3>, source: impl Into<String>) -> Result<Self> {
        let out = Self {
            points,
            normals,
            source: source.into(),
        };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidArgument("object point set is empty".into()));
        }
        if self.points.len() != self.normals.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} points but {} normals",
                self.points.len(),
                self.normals.len()
            )));
        }
        if self.points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("object points"));
        }
        if let Some(i) = self.normals.iter().position(|n| !((n.norm() - 1.0).abs() <= 1e-6)) {
            return Err(Error::InvalidArgument(format!("normal {i} is not unit length")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            normals: self.normals.iter().map(|n| t.apply_vector(n)).collect(),
            source: self.source.clone(),
        }
    }

    pub fn centroid(&self) -> Vec3 {
        self.points.iter().sum::<Vec3>() / self.points.len() as f64
    }

    /// Rows reordered as `out[i] = self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            points: perm.iter().map(|&i| self.points[i]).collect(),
            normals: perm.iter().map(|&i| self.normals[i]).collect(),
            source: self.source.clone(),
        }
    }
}
