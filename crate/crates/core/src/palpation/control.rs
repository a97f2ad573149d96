//! Min-jerk stroke shaping and the clamped Cartesian impedance law.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec2, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerGains {
    /// Stiffness, N/m, same on every axis.
    pub k_p: f64,
    /// Damping, N·s/m.
    pub k_d: f64,
    /// Per-axis pose-error saturation, m.
    pub e_thres: f64,
    /// Controller period, s.
    pub t: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        ControllerGains {
            k_p: 1000.0,
            k_d: 20.0,
            e_thres: 0.01,
            t: 0.001,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_p > 0.0 && self.k_d > 0.0 && self.e_thres > 0.0 && self.t > 0.0) {
            return Err(Error::ConfigInvalid(format!("bad controller gains {self:?}")));
        }
        Ok(())
    }
}

/// `2A (10t³ − 15t⁴ + 6t⁵) − A`, sweeping from −A to +A.
pub fn min_jerk_offset(t: f64, a: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(t));
    }
    let t3 = t * t * t;
    Ok(2.0 * a * (t3 * (10.0 + t * (-15.0 + 6.0 * t))) - a)
}

/// Advances `p_now` by `delta_xy` in the plane and sinks the target
/// `depth_bias` below the current height.
pub fn desired_pose(p_now: &Point3, delta_xy: &Vec2, depth_bias: f64) -> Point3 {
    Point3::new(
        p_now.x + delta_xy.x,
        p_now.y + delta_xy.y,
        p_now.z - depth_bias.abs(),
    )
}

/// `K_d (v_d − v) + K_p clamp(p_d − p, ±E_thres)`.
pub fn impedance_force(
    p_d: &Point3,
    p: &Point3,
    v_d: &Vec3,
    v: &Vec3,
    gains: &ControllerGains,
) -> Vec3 {
    let e = (p_d - p).map(|c| c.clamp(-gains.e_thres, gains.e_thres));
    gains.k_d * (v_d - v) + gains.k_p * e
}

/// `K_p |E_thres| + 2 K_d |E_thres| / T`.
pub fn admissible_force(gains: &ControllerGains) -> f64 {
    gains.k_p * gains.e_thres.abs() + 2.0 * gains.k_d * gains.e_thres.abs() / gains.t
}
