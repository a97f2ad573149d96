//! Shared geometric primitives.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Point3 = Vector3<f64>;

/// Axis-aligned rectangle in the X-Y plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiBox {
    pub min_xy: [f64; 2],
    pub max_xy: [f64; 2],
}

impl RoiBox {
    pub fn new(min_xy: [f64; 2], max_xy: [f64; 2]) -> Result<Self> {
        let b = RoiBox { min_xy, max_xy };
        b.validate()?;
        Ok(b)
    }

    pub fn centered(center: [f64; 2], half_x: f64, half_y: f64) -> Result<Self> {
        Self::new(
            [center[0] - half_x, center[1] - half_y],
            [center[0] + half_x, center[1] + half_y],
        )
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.min_xy.iter().chain(&self.max_xy).all(|c| c.is_finite());
        if !finite || self.min_xy[0] >= self.max_xy[0] || self.min_xy[1] >= self.max_xy[1] {
            return Err(Error::ConfigInvalid(format!(
                "ROI min {:?} must be below max {:?} componentwise",
                self.min_xy, self.max_xy
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.max_xy[0] - self.min_xy[0]
    }

    pub fn height(&self) -> f64 {
        self.max_xy[1] - self.min_xy[1]
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_xy[0] && x <= self.max_xy[0] && y >= self.min_xy[1] && y <= self.max_xy[1]
    }

    pub fn intersects(&self, other: &RoiBox) -> bool {
        self.min_xy[0] <= other.max_xy[0]
            && other.min_xy[0] <= self.max_xy[0]
            && self.min_xy[1] <= other.max_xy[1]
            && other.min_xy[1] <= self.max_xy[1]
    }

    /// Bounding box of the XY projection of `points`, `None` when empty.
    pub fn bounding(points: impl IntoIterator<Item = Point3>) -> Option<RoiBox> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut lo, mut hi) = ([first.x, first.y], [first.x, first.y]);
        for p in it {
            lo[0] = lo[0].min(p.x);
            lo[1] = lo[1].min(p.y);
            hi[0] = hi[0].max(p.x);
            hi[1] = hi[1].max(p.y);
        }
        Some(RoiBox {
            min_xy: lo,
            max_xy: hi,
        })
    }
}
