//! Point clouds with optional per-point normals.

use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec3};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        PointCloud {
            points,
            normals: None,
        }
    }

    /// Builds a cloud with normals. Normals are renormalized and must match
    /// the point count.
    pub fn with_normals(points: Vec<Point3>, normals: Vec<Vec3>) -> Result<Self> {
        if points.len() != normals.len() {
            return Err(Error::ConfigInvalid(format!(
                "{} normals for {} points",
                normals.len(),
                points.len()
            )));
        }
        let normals = normals
            .into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 && len.is_finite() {
                    Ok(n / len)
                } else {
                    Err(Error::ConfigInvalid("zero-length normal".into()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PointCloud {
            points,
            normals: Some(normals),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Appends another cloud. Normals are kept only if both sides have them.
    pub fn extend(&mut self, other: &PointCloud) {
        self.normals = match (self.normals.take(), &other.normals) {
            (Some(mut a), Some(b)) if !self.points.is_empty() || a.is_empty() => {
                a.extend_from_slice(b);
                Some(a)
            }
            (None, Some(b)) if self.points.is_empty() => Some(b.clone()),
            _ => None,
        };
        self.points.extend_from_slice(&other.points);
    }
}
