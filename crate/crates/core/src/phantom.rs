//! Analytic tissue phantom: curved skin, a soft skin+fat stack over a muscle
//! layer, and a rigid tumor sitting on the muscle.
//!
//! All geometry is expressed as height fields over the X-Y plane:
//!
//! * `z_skin(x, y)` is the visible surface,
//! * `z_muscle = z_skin - (skin_thickness + fat_thickness)`,
//! * `z_stop = z_muscle + h_tumor(x, y)` is the first rigid layer a probe
//!   meets when pressing straight down.
//!
//! The contact law is a penalty spring: the skin and fat act as springs in
//! series down to `z_stop`, after which the tumor (or muscle) spring takes
//! over.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{Point3, RoiBox, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceProfile {
    Flat,
    /// Cylindrical bump with its axis along +y, crest at x = 0.
    CylBump { amplitude: f64, radius: f64 },
    /// Radially symmetric Gaussian bump centered at the origin.
    GaussBump { amplitude: f64, sigma: f64 },
}

impl SurfaceProfile {
    fn height(&self, x: f64, y: f64) -> f64 {
        match *self {
            SurfaceProfile::Flat => 0.0,
            SurfaceProfile::CylBump { amplitude, radius } => {
                if x.abs() >= radius {
                    0.0
                } else {
                    ((radius * radius - x * x).sqrt() - (radius - amplitude)).max(0.0)
                }
            }
            SurfaceProfile::GaussBump { amplitude, sigma } => {
                amplitude * (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            SurfaceProfile::Flat => (0.0, 0.0),
            SurfaceProfile::CylBump { radius, .. } => {
                if self.height(x, y) <= 0.0 {
                    (0.0, 0.0)
                } else {
                    (-x / (radius * radius - x * x).sqrt(), 0.0)
                }
            }
            SurfaceProfile::GaussBump { sigma, .. } => {
                let h = self.height(x, y);
                let s2 = sigma * sigma;
                (-x / s2 * h, -y / s2 * h)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SurfaceProfile::Flat => true,
            SurfaceProfile::CylBump { amplitude, radius } => {
                amplitude >= 0.0 && radius > 0.0 && amplitude <= radius
            }
            SurfaceProfile::GaussBump { amplitude, sigma } => amplitude.is_finite() && sigma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(format!("bad surface profile {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    pub skin_thickness: f64,
    pub fat_thickness: f64,
    pub k_skin: f64,
    pub k_fat: f64,
    pub k_muscle: f64,
    pub k_tumor: f64,
    pub surface_profile: SurfaceProfile,
    /// Viscous term applied while the probe moves into the tissue, N·s/m.
    pub contact_damping: f64,
    /// Height of the muscle surface where the skin profile is zero.
    pub muscle_plane_z: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            skin_thickness: 0.004,
            fat_thickness: 0.015,
            // Series skin+fat stiffness is 200 N/m.
            k_skin: 600.0,
            k_fat: 300.0,
            k_muscle: 6000.0,
            k_tumor: 20000.0,
            surface_profile: SurfaceProfile::CylBump {
                amplitude: 0.01,
                radius: 0.2,
            },
            contact_damping: 1.0,
            muscle_plane_z: 0.0,
        }
    }
}

impl PhantomConfig {
    pub fn stack_depth(&self) -> f64 {
        self.skin_thickness + self.fat_thickness
    }

    /// Skin and fat springs in series.
    pub fn soft_stiffness(&self) -> f64 {
        1.0 / (1.0 / self.k_skin + 1.0 / self.k_fat)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.skin_thickness,
            self.fat_thickness,
            self.k_skin,
            self.k_fat,
            self.k_muscle,
            self.k_tumor,
            self.contact_damping,
            self.muscle_plane_z,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::ConfigInvalid("non-finite phantom parameter".into()));
        }
        if self.skin_thickness <= 0.0 || self.fat_thickness <= 0.0 {
            return Err(Error::ConfigInvalid(
                "layer thicknesses must be positive".into(),
            ));
        }
        if !(0.0 < self.k_fat
            && self.k_fat < self.k_skin
            && self.k_skin < self.k_muscle
            && self.k_muscle < self.k_tumor)
        {
            return Err(Error::ConfigInvalid(format!(
                "stiffness ordering k_fat < k_skin < k_muscle < k_tumor violated \
                 ({} / {} / {} / {})",
                self.k_fat, self.k_skin, self.k_muscle, self.k_tumor
            )));
        }
        if self.contact_damping < 0.0 {
            return Err(Error::ConfigInvalid("contact damping must be >= 0".into()));
        }
        self.surface_profile.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TumorShape {
    Hemisphere,
    /// Half-ellipsoid with semi-axes `(a, b)` in the plane and height `c`.
    Ellipsoid { semi_axes: [f64; 3] },
    /// Disc of the tumor radius minus an offset disc, flat topped with a
    /// rounded edge. The inner disc center sits `inner_offset` from the
    /// tumor center along +x; `width` is the widest radial extent.
    Crescent {
        inner_offset: f64,
        width: f64,
        height: f64,
        fillet: f64,
    },
}

impl TumorShape {
    pub fn name(&self) -> &'static str {
        match self {
            TumorShape::Hemisphere => "hemisphere",
            TumorShape::Ellipsoid { .. } => "ellipsoid",
            TumorShape::Crescent { .. } => "crescent",
        }
    }

    pub fn default_ellipsoid() -> Self {
        TumorShape::Ellipsoid {
            semi_axes: [0.012, 0.008, 0.008],
        }
    }

    pub fn default_crescent() -> Self {
        TumorShape::Crescent {
            inner_offset: 0.005,
            width: 0.008,
            height: 0.006,
            fillet: 0.0015,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TumorGeometry {
    pub shape: TumorShape,
    pub radius: f64,
    pub center_xy: [f64; 2],
}

impl Default for TumorGeometry {
    fn default() -> Self {
        TumorGeometry {
            shape: TumorShape::Hemisphere,
            radius: 0.01,
            center_xy: [0.0, 0.0],
        }
    }
}

impl TumorGeometry {
    pub fn hemisphere(radius: f64, center_xy: [f64; 2]) -> Self {
        TumorGeometry {
            shape: TumorShape::Hemisphere,
            radius,
            center_xy,
        }
    }

    /// Height above the muscle at `(x, y)`; zero outside the footprint.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        let lx = x - self.center_xy[0];
        let ly = y - self.center_xy[1];
        match self.shape {
            TumorShape::Hemisphere => {
                let r2 = self.radius * self.radius - lx * lx - ly * ly;
                if r2 > 0.0 {
                    r2.sqrt()
                } else {
                    0.0
                }
            }
            TumorShape::Ellipsoid { semi_axes: [a, b, c] } => {
                let s = 1.0 - (lx / a).powi(2) - (ly / b).powi(2);
                if s > 0.0 {
                    c * s.sqrt()
                } else {
                    0.0
                }
            }
            TumorShape::Crescent {
                inner_offset,
                width,
                height,
                fillet,
            } => {
                let inner_r = self.radius + inner_offset - width;
                let outer_gap = self.radius - (lx * lx + ly * ly).sqrt();
                let inner_gap = ((lx - inner_offset).powi(2) + ly * ly).sqrt() - inner_r;
                let s = outer_gap.min(inner_gap);
                if s <= 0.0 {
                    0.0
                } else if s >= fillet {
                    height
                } else {
                    // Quarter-round edge of radius `fillet`, scaled to height.
                    let t = 1.0 - s / fillet;
                    height * (1.0 - t * t).sqrt()
                }
            }
        }
    }

    pub fn max_height(&self) -> f64 {
        match self.shape {
            TumorShape::Hemisphere => self.radius,
            TumorShape::Ellipsoid { semi_axes } => semi_axes[2],
            TumorShape::Crescent { height, .. } => height,
        }
    }

    /// XY bounding box of the footprint.
    pub fn footprint_bounds(&self) -> RoiBox {
        let (hx, hy) = match self.shape {
            TumorShape::Ellipsoid { semi_axes } => (semi_axes[0], semi_axes[1]),
            _ => (self.radius, self.radius),
        };
        RoiBox {
            min_xy: [self.center_xy[0] - hx, self.center_xy[1] - hy],
            max_xy: [self.center_xy[0] + hx, self.center_xy[1] + hy],
        }
    }

    pub fn validate(&self, stack_depth: f64) -> Result<()> {
        if !(self.radius > 0.0) || self.center_xy.iter().any(|c| !c.is_finite()) {
            return Err(Error::ConfigInvalid("tumor radius must be positive".into()));
        }
        match self.shape {
            TumorShape::Hemisphere => {}
            TumorShape::Ellipsoid { semi_axes } => {
                if semi_axes.iter().any(|&a| !(a > 0.0)) {
                    return Err(Error::ConfigInvalid(
                        "ellipsoid semi-axes must be positive".into(),
                    ));
                }
            }
            TumorShape::Crescent {
                inner_offset,
                width,
                height,
                fillet,
            } => {
                let inner_r = self.radius + inner_offset - width;
                if !(width > 0.0 && width <= self.radius * 2.0)
                    || inner_offset < 0.0
                    || inner_r <= 0.0
                    || !(height > 0.0)
                    || !(fillet > 0.0)
                {
                    return Err(Error::ConfigInvalid(format!(
                        "bad crescent parameters {:?}",
                        self.shape
                    )));
                }
            }
        }
        if self.max_height() > stack_depth {
            return Err(Error::ConfigInvalid(format!(
                "tumor height {} exceeds soft stack depth {}",
                self.max_height(),
                stack_depth
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HardLayer {
    Tumor,
    Muscle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContactRegime {
    NoContact,
    SoftStack,
    HardStop(HardLayer),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactResponse {
    pub normal_force: f64,
    pub penetration: f64,
    pub regime: ContactRegime,
}

/// Immutable world model. Safe to share across threads.
#[derive(Debug, Clone)]
pub struct Phantom {
    cfg: PhantomConfig,
    tumor: Option<TumorGeometry>,
    k_soft: f64,
}

/// Validates both inputs and assembles the phantom.
pub fn build_phantom(cfg: PhantomConfig, tumor: TumorGeometry) -> Result<Phantom> {
    Phantom::new(cfg, Some(tumor))
}

impl Phantom {
    pub fn new(cfg: PhantomConfig, tumor: Option<TumorGeometry>) -> Result<Self> {
        cfg.validate()?;
        if let Some(t) = &tumor {
            t.validate(cfg.stack_depth())?;
        }
        let k_soft = cfg.soft_stiffness();
        Ok(Phantom { cfg, tumor, k_soft })
    }

    pub fn config(&self) -> &PhantomConfig {
        &self.cfg
    }

    pub fn tumor(&self) -> Option<&TumorGeometry> {
        self.tumor.as_ref()
    }

    pub fn soft_stiffness(&self) -> f64 {
        self.k_soft
    }

    pub fn z_skin(&self, x: f64, y: f64) -> f64 {
        self.cfg.muscle_plane_z + self.cfg.stack_depth() + self.cfg.surface_profile.height(x, y)
    }

    pub fn z_muscle(&self, x: f64, y: f64) -> f64 {
        self.z_skin(x, y) - self.cfg.stack_depth()
    }

    pub fn tumor_height(&self, x: f64, y: f64) -> f64 {
        self.tumor.as_ref().map_or(0.0, |t| t.height(x, y))
    }

    pub fn z_stop(&self, x: f64, y: f64) -> f64 {
        self.z_muscle(x, y) + self.tumor_height(x, y)
    }

    /// Outward unit normal of the skin surface.
    pub fn skin_normal(&self, x: f64, y: f64) -> Vec3 {
        let (gx, gy) = self.cfg.surface_profile.gradient(x, y);
        Vec3::new(-gx, -gy, 1.0).normalize()
    }

    /// Reaction force on a probe point at `(q, probe_z)` moving with
    /// vertical speed `probe_vz`.
    pub fn contact_force(&self, q: [f64; 2], probe_z: f64, probe_vz: f64) -> ContactResponse {
        let (x, y) = (q[0], q[1]);
        let skin = self.z_skin(x, y);
        let d = (skin - probe_z).max(0.0);
        if d <= 0.0 {
            return ContactResponse {
                normal_force: 0.0,
                penetration: 0.0,
                regime: ContactRegime::NoContact,
            };
        }
        let h = self.tumor_height(x, y);
        let d_stop = self.cfg.stack_depth() - h;
        let (elastic, regime) = if d <= d_stop {
            (self.k_soft * d, ContactRegime::SoftStack)
        } else {
            let (k_hard, layer) = if h > 0.0 {
                (self.cfg.k_tumor, HardLayer::Tumor)
            } else {
                (self.cfg.k_muscle, HardLayer::Muscle)
            };
            (
                self.k_soft * d_stop + k_hard * (d - d_stop),
                ContactRegime::HardStop(layer),
            )
        };
        let damping = self.cfg.contact_damping * (-probe_vz).max(0.0);
        ContactResponse {
            normal_force: elastic + damping,
            penetration: d,
            regime,
        }
    }

    /// Simulated depth-camera scan: one sample per jittered lattice cell
    /// over `region`, with isotropic Gaussian noise.
    pub fn synth_depth_cloud(
        &self,
        region: &RoiBox,
        density: f64,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<PointCloud> {
        if !(density > 0.0) || !(noise_sigma >= 0.0) {
            return Err(Error::ConfigInvalid(
                "density must be > 0 and noise_sigma >= 0".into(),
            ));
        }
        let spacing = density.sqrt().recip();
        let nx = (region.width() / spacing).floor() as usize;
        let ny = (region.height() / spacing).floor() as usize;
        if nx == 0 || ny == 0 {
            return Err(Error::EmptyRegion);
        }
        let sx = region.width() / nx as f64;
        let sy = region.height() / ny as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, noise_sigma).expect("finite sigma");
        let mut points = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let x = region.min_xy[0] + (i as f64 + rng.random::<f64>()) * sx;
                let y = region.min_xy[1] + (j as f64 + rng.random::<f64>()) * sy;
                let z = self.z_skin(x, y);
                let p = if noise_sigma > 0.0 {
                    Point3::new(
                        x + noise.sample(&mut rng),
                        y + noise.sample(&mut rng),
                        z + noise.sample(&mut rng),
                    )
                } else {
                    Point3::new(x, y, z)
                };
                points.push(p);
            }
        }
        Ok(PointCloud::new(points))
    }

    /// Samples drawn uniformly over the tumor footprint in X-Y and lifted
    /// to the exposed tumor surface `z_stop`.
    pub fn ground_truth_cloud(&self, samples_n: usize, seed: u64) -> Result<PointCloud> {
        let tumor = self.tumor.as_ref().ok_or(Error::NoTumor)?;
        let bounds = tumor.footprint_bounds();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(samples_n);
        while points.len() < samples_n {
            let x = rng.random_range(bounds.min_xy[0]..bounds.max_xy[0]);
            let y = rng.random_range(bounds.min_xy[1]..bounds.max_xy[1]);
            if tumor.height(x, y) > 0.0 {
                points.push(Point3::new(x, y, self.z_stop(x, y)));
            }
        }
        Ok(PointCloud::new(points))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> PhantomConfig {
        PhantomConfig {
            surface_profile: SurfaceProfile::Flat,
            ..PhantomConfig::default()
        }
    }

    /// Skin 1000 N/m and fat 666.67 N/m give a 400 N/m series stack.
    fn flat_k400() -> PhantomConfig {
        PhantomConfig {
            k_skin: 1000.0,
            k_fat: 2000.0 / 3.0,
            ..flat()
        }
    }

    #[test]
    fn hemisphere_apex_sits_one_radius_above_muscle() {
        let ph = build_phantom(flat(), TumorGeometry::hemisphere(0.01, [0.0, 0.0])).unwrap();
        assert!((ph.z_stop(0.0, 0.0) - ph.z_muscle(0.0, 0.0) - 0.01).abs() < 1e-15);
        assert_eq!(ph.z_stop(0.05, 0.05), ph.z_muscle(0.05, 0.05));
    }

    #[test]
    fn misordered_stiffness_is_rejected() {
        let cfg = PhantomConfig {
            k_fat: 800.0,
            k_skin: 500.0,
            ..flat()
        };
        assert!(matches!(
            build_phantom(cfg, TumorGeometry::default()),
            Err(Error::ConfigInvalid(_))
        ));
        let thin = PhantomConfig {
            skin_thickness: 0.0,
            ..flat()
        };
        assert!(Phantom::new(thin, None).is_err());
    }

    #[test]
    fn tall_tumor_is_rejected() {
        let t = TumorGeometry::hemisphere(0.03, [0.0, 0.0]);
        assert!(build_phantom(flat(), t).is_err());
    }

    #[test]
    fn contact_force_piecewise_values() {
        let ph = build_phantom(flat_k400(), TumorGeometry::hemisphere(0.01, [0.0, 0.0])).unwrap();
        assert!((ph.soft_stiffness() - 400.0).abs() < 1e-9);
        let skin = ph.z_skin(0.0, 0.0);

        let none = ph.contact_force([0.0, 0.0], skin + 0.001, 0.0);
        assert_eq!(none.normal_force, 0.0);
        assert_eq!(none.regime, ContactRegime::NoContact);

        let soft = ph.contact_force([0.05, 0.05], skin - 0.005, 0.0);
        assert!((soft.normal_force - 2.0).abs() < 1e-9);
        assert_eq!(soft.regime, ContactRegime::SoftStack);

        let hard = ph.contact_force([0.0, 0.0], skin - 0.010, 0.0);
        assert!((hard.normal_force - 23.6).abs() < 1e-9);
        assert_eq!(hard.regime, ContactRegime::HardStop(HardLayer::Tumor));
    }

    #[test]
    fn damping_only_resists_inward_motion() {
        let ph = Phantom::new(flat(), None).unwrap();
        let z = ph.z_skin(0.0, 0.0) - 0.002;
        let still = ph.contact_force([0.0, 0.0], z, 0.0).normal_force;
        let pressing = ph.contact_force([0.0, 0.0], z, -0.1).normal_force;
        let leaving = ph.contact_force([0.0, 0.0], z, 0.1).normal_force;
        assert!((pressing - still - 0.1 * ph.config().contact_damping).abs() < 1e-12);
        assert_eq!(leaving, still);
        let above = ph.contact_force([0.0, 0.0], z + 0.01, -1.0);
        assert_eq!(above.normal_force, 0.0);
    }

    #[test]
    fn noiseless_flat_scan_is_planar_and_deterministic() {
        let cfg = PhantomConfig {
            muscle_plane_z: 0.1 - 0.019,
            ..flat()
        };
        let ph = Phantom::new(cfg, None).unwrap();
        let roi = RoiBox::centered([0.0, 0.0], 0.05, 0.05).unwrap();
        let a = ph.synth_depth_cloud(&roi, 1e6, 0.0, 7).unwrap();
        assert!(a.points.iter().all(|p| (p.z - 0.1).abs() < 1e-15));
        let b = ph.synth_depth_cloud(&roi, 1e6, 0.0, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scan_noise_matches_requested_sigma() {
        let ph = Phantom::new(flat(), None).unwrap();
        let roi = RoiBox::centered([0.0, 0.0], 0.05, 0.05).unwrap();
        let cloud = ph.synth_depth_cloud(&roi, 1e6, 0.0005, 3).unwrap();
        assert!(cloud.len() >= 10_000);
        let skin = ph.z_skin(0.0, 0.0);
        let dz: Vec<f64> = cloud.points.iter().map(|p| p.z - skin).collect();
        let mean = dz.iter().sum::<f64>() / dz.len() as f64;
        let var = dz.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (dz.len() - 1) as f64;
        assert!((var.sqrt() - 0.0005).abs() < 0.1 * 0.0005, "std {}", var.sqrt());
    }

    #[test]
    fn empty_region_is_reported() {
        let ph = Phantom::new(flat(), None).unwrap();
        let tiny = RoiBox::centered([0.0, 0.0], 1e-5, 1e-5).unwrap();
        assert!(matches!(
            ph.synth_depth_cloud(&tiny, 1e6, 0.0, 1),
            Err(Error::EmptyRegion)
        ));
    }

    #[test]
    fn ground_truth_points_lie_on_the_sphere() {
        let ph = build_phantom(flat(), TumorGeometry::hemisphere(0.01, [0.01, -0.02])).unwrap();
        let gt = ph.ground_truth_cloud(1000, 5).unwrap();
        assert_eq!(gt.len(), 1000);
        let c = Point3::new(0.01, -0.02, ph.z_muscle(0.01, -0.02));
        assert!(gt.points.iter().all(|p| (p - c).norm() <= 0.01 + 1e-9));
        assert_eq!(gt, ph.ground_truth_cloud(1000, 5).unwrap());
    }

    #[test]
    fn crescent_excludes_inner_arc() {
        let t = TumorGeometry {
            shape: TumorShape::default_crescent(),
            ..TumorGeometry::default()
        };
        let ph = build_phantom(flat(), t).unwrap();
        let gt = ph.ground_truth_cloud(2000, 9).unwrap();
        let TumorShape::Crescent {
            inner_offset,
            width,
            ..
        } = t.shape
        else {
            unreachable!()
        };
        let inner_r = t.radius + inner_offset - width;
        for p in &gt.points {
            assert!(((p.x - inner_offset).powi(2) + p.y.powi(2)).sqrt() > inner_r);
        }
        // The thick side is fully raised, the hollow is not.
        assert!((t.height(-0.006, 0.0) - 0.006).abs() < 1e-12);
        assert_eq!(t.height(0.004, 0.0), 0.0);
    }

    #[test]
    fn no_tumor_means_no_ground_truth() {
        let ph = Phantom::new(flat(), None).unwrap();
        assert!(matches!(ph.ground_truth_cloud(10, 0), Err(Error::NoTumor)));
    }

    #[test]
    fn curved_skin_normal_tilts_away_from_crest() {
        let ph = Phantom::new(PhantomConfig::default(), None).unwrap();
        let n = ph.skin_normal(0.02, 0.0);
        assert!(n.x > 0.0 && n.z > 0.0);
        assert!((n.norm() - 1.0).abs() < 1e-12);
        let eps = 1e-7;
        let slope = (ph.z_skin(0.02 + eps, 0.0) - ph.z_skin(0.02 - eps, 0.0)) / (2.0 * eps);
        assert!((n.x / n.z + slope).abs() < 1e-6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn phantom() -> Phantom {
            build_phantom(
                PhantomConfig::default(),
                TumorGeometry::hemisphere(0.01, [0.002, -0.001]),
            )
            .unwrap()
        }

        proptest! {
            #[test]
            fn layers_are_ordered(x in -0.05f64..0.05, y in -0.05f64..0.05) {
                let ph = phantom();
                prop_assert!(ph.z_muscle(x, y) <= ph.z_stop(x, y));
                prop_assert!(ph.z_stop(x, y) <= ph.z_skin(x, y));
            }

            #[test]
            fn force_is_monotone_and_continuous(
                x in -0.03f64..0.03, y in -0.03f64..0.03,
                d1 in 0.0f64..0.03, d2 in 0.0f64..0.03,
            ) {
                let ph = phantom();
                let skin = ph.z_skin(x, y);
                let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
                let f_lo = ph.contact_force([x, y], skin - lo, 0.0).normal_force;
                let f_hi = ph.contact_force([x, y], skin - hi, 0.0).normal_force;
                prop_assert!(f_lo <= f_hi);
                prop_assert!(f_lo >= 0.0);

                let d_stop = skin - ph.z_stop(x, y);
                let eps = 1e-9;
                let below = ph.contact_force([x, y], skin - (d_stop - eps), 0.0).normal_force;
                let above = ph.contact_force([x, y], skin - (d_stop + eps), 0.0).normal_force;
                prop_assert!((above - below).abs() < 1e-4);
            }

            #[test]
            fn off_footprint_never_hits_tumor(
                r in 0.0101f64..0.05, a in 0.0f64..std::f64::consts::TAU, d in 0.0f64..0.03,
            ) {
                let ph = phantom();
                let (x, y) = (0.002 + r * a.cos(), -0.001 + r * a.sin());
                let resp = ph.contact_force([x, y], ph.z_skin(x, y) - d, 0.0);
                prop_assert_ne!(resp.regime, ContactRegime::HardStop(HardLayer::Tumor));
            }
        }
    }
}
