//! Cartesian point-mass probe pressed against the phantom.
//!
//! The contact is evaluated at the bottom of the spherical tip,
//! `p − tip_radius · axis`, with vertical penetration; the reaction acts
//! along the skin normal at that point.

use serde::{Deserialize, Serialize};

use crate::calibration::EulerZyx;
use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec3};
use crate::phantom::{ContactRegime, Phantom};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    pub mass: f64,
    pub tip_radius: f64,
    /// Uncompensated weight acting along −z, N.
    pub gravity_residual: f64,
    /// Speed above which the integration is declared unstable, m/s.
    pub speed_limit: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            mass: 0.1,
            tip_radius: 0.0025,
            gravity_residual: 0.0,
            speed_limit: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    /// Tip center.
    pub p: Point3,
    pub v: Vec3,
    pub orientation: EulerZyx,
    pub in_contact: bool,
    /// Contact reaction at the current state, inertial frame.
    pub contact: Vec3,
}

impl PlantState {
    /// At rest at `p`, with contact evaluated for that pose.
    pub fn at(p: Point3, orientation: EulerZyx, phantom: &Phantom, cfg: &PlantConfig) -> Self {
        let mut s = PlantState {
            p,
            v: Vec3::zeros(),
            orientation,
            in_contact: false,
            contact: Vec3::zeros(),
        };
        s.update_contact(phantom, cfg);
        s
    }

    pub fn tip_bottom(&self, cfg: &PlantConfig) -> Point3 {
        self.p - cfg.tip_radius * self.orientation.axis()
    }

    fn update_contact(&mut self, phantom: &Phantom, cfg: &PlantConfig) {
        let b = self.tip_bottom(cfg);
        let r = phantom.contact_force([b.x, b.y], b.z, self.v.z);
        self.in_contact = r.regime != ContactRegime::NoContact;
        self.contact = if self.in_contact {
            r.normal_force * phantom.skin_normal(b.x, b.y)
        } else {
            Vec3::zeros()
        };
    }
}

/// One semi-implicit Euler step of `m a = f_cmd + f_contact − (0, 0, g_res)`.
pub fn step_plant(
    state: &PlantState,
    f_cmd: &Vec3,
    phantom: &Phantom,
    cfg: &PlantConfig,
    dt: f64,
) -> Result<PlantState> {
    let total = f_cmd + state.contact - Vec3::new(0.0, 0.0, cfg.gravity_residual);
    let v = state.v + total * (dt / cfg.mass);
    let speed = v.norm();
    if !(speed <= cfg.speed_limit) {
        return Err(Error::NumericalBlowup {
            speed,
            limit: cfg.speed_limit,
        });
    }
    let mut next = PlantState {
        p: state.p + v * dt,
        v,
        ..*state
    };
    next.update_contact(phantom, cfg);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{PhantomConfig, SurfaceProfile};

    fn flat() -> Phantom {
        let cfg = PhantomConfig {
            surface_profile: SurfaceProfile::Flat,
            ..PhantomConfig::default()
        };
        Phantom::new(cfg, None).unwrap()
    }

    #[test]
    fn free_probe_at_rest_stays_put() {
        let ph = flat();
        let cfg = PlantConfig::default();
        let s = PlantState::at(Point3::new(0.0, 0.0, 0.1), EulerZyx::default(), &ph, &cfg);
        let n = step_plant(&s, &Vec3::zeros(), &ph, &cfg, 0.001).unwrap();
        assert_eq!(n, s);
    }

    #[test]
    fn ballistic_push() {
        let ph = flat();
        let cfg = PlantConfig::default();
        let mut s = PlantState::at(Point3::new(0.0, 0.0, 1.0), EulerZyx::default(), &ph, &cfg);
        for _ in 0..100 {
            s = step_plant(&s, &Vec3::new(0.0, 0.0, -1.0), &ph, &cfg, 0.001).unwrap();
        }
        assert!((s.v.z + 1.0).abs() < 1e-9);
    }

    #[test]
    fn runaway_speed_is_reported() {
        let ph = flat();
        let cfg = PlantConfig::default();
        let s = PlantState::at(Point3::new(0.0, 0.0, 1.0), EulerZyx::default(), &ph, &cfg);
        assert!(matches!(
            step_plant(&s, &Vec3::new(1e4, 0.0, 0.0), &ph, &cfg, 0.001),
            Err(Error::NumericalBlowup { .. })
        ));
    }
}
