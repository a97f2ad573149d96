//! Load-cell gravity compensation.
//!
//! Readings are taken in the load-cell frame, whose z axis runs along the
//! probe. Compensation happens in two steps: subtract the static offset
//! measured with the probe out of contact, then remove the tip weight by
//! rotating into the inertial frame, subtracting `(0, 0, M_L)` and rotating
//! back. `R` maps local to inertial coordinates.

use nalgebra::Matrix3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Yaw `psi` about z, pitch `theta` about y, roll `phi` about x.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EulerZyx {
    pub psi: f64,
    pub theta: f64,
    pub phi: f64,
}

impl EulerZyx {
    pub fn new(psi: f64, theta: f64, phi: f64) -> Self {
        EulerZyx { psi, theta, phi }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rotation_zyx(self)
    }

    /// Zero-yaw orientation whose local z axis points along `axis`.
    pub fn aligning(axis: &Vec3) -> Self {
        let n = axis.normalize();
        EulerZyx {
            psi: 0.0,
            theta: n.x.atan2(n.z),
            phi: -n.y.clamp(-1.0, 1.0).asin(),
        }
    }

    /// Local z axis in inertial coordinates.
    pub fn axis(&self) -> Vec3 {
        self.rotation().column(2).into_owned()
    }
}

/// `R = Rz(psi) · Ry(theta) · Rx(phi)`.
pub fn rotation_zyx(e: &EulerZyx) -> Matrix3<f64> {
    let (sz, cz) = e.psi.sin_cos();
    let (sy, cy) = e.theta.sin_cos();
    let (sx, cx) = e.phi.sin_cos();
    let rz = Matrix3::new(cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx);
    rz * ry * rx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    LoadCellLocal,
    Inertial,
}

impl Frame {
    fn name(self) -> &'static str {
        match self {
            Frame::LoadCellLocal => "LoadCellLocal",
            Frame::Inertial => "Inertial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceReading {
    pub f: Vec3,
    pub frame: Frame,
}

impl ForceReading {
    pub fn local(f: Vec3) -> Self {
        ForceReading {
            f,
            frame: Frame::LoadCellLocal,
        }
    }

    pub fn inertial(f: Vec3) -> Self {
        ForceReading {
            f,
            frame: Frame::Inertial,
        }
    }

    fn expect(&self, frame: Frame) -> Result<()> {
        if self.frame == frame {
            Ok(())
        } else {
            Err(Error::FrameMismatch {
                expected: frame.name(),
                got: self.frame.name(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationParams {
    /// Tip weight M_L in Newtons.
    pub tip_weight_n: f64,
    /// Static load-cell bias in local coordinates, N.
    pub z_offset: [f64; 3],
}

impl Default for CalibrationParams {
    fn default() -> Self {
        CalibrationParams {
            tip_weight_n: 0.35,
            z_offset: [0.0; 3],
        }
    }
}

impl CalibrationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tip_weight_n >= 0.0) || self.z_offset.iter().any(|c| !c.is_finite()) {
            return Err(Error::ConfigInvalid(format!("bad calibration {self:?}")));
        }
        Ok(())
    }
}

pub fn remove_z_offset(raw: &ForceReading, cal: &CalibrationParams) -> Result<ForceReading> {
    raw.expect(Frame::LoadCellLocal)?;
    Ok(ForceReading::local(raw.f - Vec3::from(cal.z_offset)))
}

/// `f_out = Rᵀ (R f_local - (0, 0, M_L))`.
pub fn compensate_tip_weight(
    f_local: &ForceReading,
    e: &EulerZyx,
    cal: &CalibrationParams,
) -> Result<ForceReading> {
    f_local.expect(Frame::LoadCellLocal)?;
    let r = rotation_zyx(e);
    let inertial = r * f_local.f - Vec3::new(0.0, 0.0, cal.tip_weight_n);
    Ok(ForceReading::local(r.transpose() * inertial))
}

/// Offset removal followed by tip-weight compensation.
pub fn compensate(raw: &ForceReading, e: &EulerZyx, cal: &CalibrationParams) -> Result<ForceReading> {
    compensate_tip_weight(&remove_z_offset(raw, cal)?, e, cal)
}

pub fn to_inertial(f: &ForceReading, e: &EulerZyx) -> Result<ForceReading> {
    f.expect(Frame::LoadCellLocal)?;
    Ok(ForceReading::inertial(rotation_zyx(e) * f.f))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultantMode {
    /// Euclidean norm of the force vector.
    #[default]
    Norm,
    /// Root mean square of the three components, `‖f‖ / √3`.
    AxisRms,
}

pub fn resultant_force(f: &ForceReading) -> f64 {
    resultant_force_with(f, ResultantMode::Norm)
}

pub fn resultant_force_with(f: &ForceReading, mode: ResultantMode) -> f64 {
    match mode {
        ResultantMode::Norm => f.f.norm(),
        ResultantMode::AxisRms => f.f.norm() / 3f64.sqrt(),
    }
}

/// Static bias estimate from no-contact readings taken at orientation `e`:
/// the mean reading minus the known tip-weight contribution.
pub fn estimate_z_offset(samples: &[ForceReading], e: &EulerZyx, tip_weight_n: f64) -> Result<[f64; 3]> {
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    let mut sum = Vec3::zeros();
    for s in samples {
        s.expect(Frame::LoadCellLocal)?;
        sum += s.f;
    }
    let gravity = rotation_zyx(e).transpose() * Vec3::new(0.0, 0.0, tip_weight_n);
    let off = sum / samples.len() as f64 - gravity;
    Ok([off.x, off.y, off.z])
}

/// Simulated load cell: `Rᵀ (f_contact + (0, 0, M_L)) + bias + noise`,
/// optionally with Gaussian error on the orientation the sensor sees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadCellModel {
    pub noise_sigma: f64,
    pub bias: [f64; 3],
    pub tip_weight_n: f64,
    /// Standard deviation of the per-reading orientation error, rad.
    pub angle_noise: f64,
}

impl Default for LoadCellModel {
    fn default() -> Self {
        LoadCellModel {
            noise_sigma: 0.02,
            bias: [0.05, -0.03, 0.4],
            tip_weight_n: 0.35,
            angle_noise: 0.0,
        }
    }
}

impl LoadCellModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) || !(self.angle_noise >= 0.0) || !(self.tip_weight_n >= 0.0) {
            return Err(Error::ConfigInvalid(format!("bad load-cell model {self:?}")));
        }
        Ok(())
    }

    pub fn read<R: Rng + ?Sized>(
        &self,
        f_contact_inertial: &Vec3,
        e: &EulerZyx,
        rng: &mut R,
    ) -> ForceReading {
        let seen = if self.angle_noise > 0.0 {
            let n = Normal::new(0.0, self.angle_noise).expect("finite sigma");
            EulerZyx::new(
                e.psi + n.sample(rng),
                e.theta + n.sample(rng),
                e.phi + n.sample(rng),
            )
        } else {
            *e
        };
        let mut f = rotation_zyx(&seen).transpose()
            * (f_contact_inertial + Vec3::new(0.0, 0.0, self.tip_weight_n))
            + Vec3::from(self.bias);
        if self.noise_sigma > 0.0 {
            let n = Normal::new(0.0, self.noise_sigma).expect("finite sigma");
            f += Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng));
        }
        ForceReading::local(f)
    }

    /// Calibrates against `samples` out-of-contact readings at `e`.
    pub fn calibrate<R: Rng + ?Sized>(&self, e: &EulerZyx, samples: usize, rng: &mut R) -> Result<CalibrationParams> {
        let readings: Vec<ForceReading> = (0..samples)
            .map(|_| self.read(&Vec3::zeros(), e, rng))
            .collect();
        Ok(CalibrationParams {
            tip_weight_n: self.tip_weight_n,
            z_offset: estimate_z_offset(&readings, e, self.tip_weight_n)?,
        })
    }
}
