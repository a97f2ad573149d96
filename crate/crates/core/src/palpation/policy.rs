//! Discrete probing, contour following and the budgeted search loop.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::control::{
    admissible_force, desired_pose, impedance_force, min_jerk_offset, ControllerGains,
};
use super::plant::{step_plant, PlantConfig, PlantState};
use crate::calibration::{compensate, CalibrationParams, EulerZyx, LoadCellModel};
use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec2, Vec3};
use crate::phantom::Phantom;
use crate::registration::{cell_to_surface, Cell, SurfaceGrid};
use crate::search::{
    gp_fit, next_cell_bo, next_cell_random, Acquisition, GpHyper, StiffnessSample,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeParams {
    /// Force that ends an indentation and marks a tumor, N.
    pub f_thres: f64,
    /// Indentation depth that ends a probe without a tumor, m.
    pub d_thres: f64,
    pub indent_speed: f64,
    /// Min-jerk stroke amplitude A, m.
    pub amplitude: f64,
    /// Waypoint rate, Hz.
    pub osc_rate: f64,
    pub cf_timeout: f64,
    pub probe_mass: f64,
    pub tip_radius: f64,
    /// Pressing force held while contour following, N.
    pub f_press: f64,
    /// Height above the surface where each probe starts, m.
    pub approach_clearance: f64,
    /// Waypoints per min-jerk stroke.
    pub stroke_samples: usize,
    pub lost_contact_time: f64,
    /// Distance the return leg may travel without finding the tumor, m.
    pub return_search: f64,
    pub gravity_residual: f64,
    pub speed_limit: f64,
}

impl Default for ProbeParams {
    fn default() -> Self {
        ProbeParams {
            f_thres: 5.0,
            d_thres: 0.017,
            indent_speed: 0.01,
            amplitude: 0.0005,
            osc_rate: 80.0,
            cf_timeout: 5.0,
            probe_mass: 0.1,
            tip_radius: 0.0025,
            f_press: 6.0,
            approach_clearance: 0.003,
            stroke_samples: 5,
            lost_contact_time: 0.1,
            return_search: 0.003,
            gravity_residual: 0.0,
            speed_limit: 2.0,
        }
    }
}

impl ProbeParams {
    pub fn plant(&self) -> PlantConfig {
        PlantConfig {
            mass: self.probe_mass,
            tip_radius: self.tip_radius,
            gravity_residual: self.gravity_residual,
            speed_limit: self.speed_limit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.f_thres,
            self.d_thres,
            self.indent_speed,
            self.amplitude,
            self.osc_rate,
            self.probe_mass,
            self.f_press,
            self.lost_contact_time,
            self.return_search,
            self.speed_limit,
        ];
        if positive.iter().any(|&x| !(x > 0.0 && x.is_finite()))
            || !(self.cf_timeout >= 0.0 && self.cf_timeout.is_finite())
            || !(self.tip_radius >= 0.0)
            || !(self.approach_clearance > 0.0)
            || self.stroke_samples == 0
        {
            return Err(Error::ConfigInvalid(format!("bad probe parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SafetyStats {
    pub ticks: u64,
    /// Ticks whose commanded force exceeded the admissible bound.
    pub violations: u64,
    pub max_cmd_force: f64,
    pub admissible: f64,
}

impl SafetyStats {
    pub fn merge(&mut self, other: &SafetyStats) {
        self.ticks += other.ticks;
        self.violations += other.violations;
        self.max_cmd_force = self.max_cmd_force.max(other.max_cmd_force);
        self.admissible = self.admissible.max(other.admissible);
    }
}

/// Plant, load cell and calibration of one simulated instrument.
#[derive(Debug, Clone)]
pub struct Probe {
    pub state: PlantState,
    plant: PlantConfig,
    sensor: LoadCellModel,
    cal: CalibrationParams,
    rng: ChaCha8Rng,
    safety: SafetyStats,
}

impl Probe {
    /// Parks the probe well above the phantom. `sensor_rng` drives all
    /// measurement noise.
    pub fn new(
        plant: PlantConfig,
        sensor: LoadCellModel,
        cal: CalibrationParams,
        sensor_rng: ChaCha8Rng,
        phantom: &Phantom,
    ) -> Self {
        let park = Point3::new(0.0, 0.0, phantom.z_skin(0.0, 0.0) + 0.1);
        Probe {
            state: PlantState::at(park, EulerZyx::default(), phantom, &plant),
            plant,
            sensor,
            cal,
            rng: sensor_rng,
            safety: SafetyStats::default(),
        }
    }

    /// Replaces the static offset with the mean of `samples` readings taken
    /// out of contact at the current orientation.
    pub fn calibrate_offset(&mut self, samples: usize) -> Result<()> {
        if self.state.in_contact {
            return Err(Error::ConfigInvalid(
                "offset calibration needs the probe out of contact".into(),
            ));
        }
        let est = self
            .sensor
            .calibrate(&self.state.orientation, samples, &mut self.rng)?;
        self.cal.z_offset = est.z_offset;
        Ok(())
    }

    pub fn calibration(&self) -> &CalibrationParams {
        &self.cal
    }

    pub fn plant(&self) -> &PlantConfig {
        &self.plant
    }

    pub fn safety(&self) -> &SafetyStats {
        &self.safety
    }

    pub fn place(&mut self, p: Point3, orientation: EulerZyx, phantom: &Phantom) {
        self.state = PlantState::at(p, orientation, phantom, &self.plant);
    }

    /// One controller period toward `p_d` with zero desired velocity.
    pub fn tick(&mut self, p_d: &Point3, phantom: &Phantom, gains: &ControllerGains) -> Result<()> {
        let f_cmd = impedance_force(p_d, &self.state.p, &Vec3::zeros(), &self.state.v, gains);
        let mag = f_cmd.norm();
        let bound = admissible_force(gains);
        self.safety.ticks += 1;
        self.safety.admissible = bound;
        self.safety.max_cmd_force = self.safety.max_cmd_force.max(mag);
        if mag > bound {
            self.safety.violations += 1;
        }
        self.state = step_plant(&self.state, &f_cmd, phantom, &self.plant, gains.t)?;
        Ok(())
    }

    /// Compensated load-cell force in the probe frame; `.z` is the
    /// compressive component along the probe axis.
    pub fn sense(&mut self) -> Result<Vec3> {
        let raw = self
            .sensor
            .read(&self.state.contact, &self.state.orientation, &mut self.rng);
        Ok(compensate(&raw, &self.state.orientation, &self.cal)?.f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub cell: Cell,
    pub f_z: f64,
    pub d_z: f64,
    pub k: f64,
    pub classified_tumor: bool,
    /// Tip position along the probe axis at first contact, m.
    pub p_zi: f64,
    /// Tip position along the probe axis when the indentation stopped, m.
    pub p_zf: f64,
    /// Lowest point of the tip when the indentation stopped.
    pub contact_point: [f64; 3],
    /// Unit probe axis, pointing out of the tissue.
    pub axis: [f64; 3],
}

/// Indents along the grid normal of `cell` until the force or depth limit.
pub fn probe_cell(
    probe: &mut Probe,
    phantom: &Phantom,
    grid: &SurfaceGrid,
    cell: Cell,
    params: &ProbeParams,
    gains: &ControllerGains,
) -> Result<ProbeResult> {
    let (surface, normal) = cell_to_surface(grid, cell.u, cell.v)?;
    let orientation = EulerZyx::aligning(&normal);
    let axis = orientation.axis();
    let start = surface + axis * (params.approach_clearance + params.tip_radius);
    probe.place(start, orientation, phantom);

    let step = axis * (params.indent_speed * gains.t);
    let approach_ticks = ((2.0 * params.approach_clearance + 0.01) / (params.indent_speed * gains.t)) as u64;
    let press_ticks = (2.0 * (params.d_thres + params.f_thres / gains.k_p)
        / (params.indent_speed * gains.t)) as u64;
    let mut setpoint = start;
    let mut ticks = 0u64;
    let mut first: Option<(Point3, u64)> = None;
    loop {
        setpoint -= step;
        probe.tick(&setpoint, phantom, gains)?;
        ticks += 1;
        let f = probe.sense()?;
        let (p_i, t_i) = match first {
            Some(x) => x,
            None if probe.state.in_contact => {
                first = Some((probe.state.p, ticks));
                (probe.state.p, ticks)
            }
            None if ticks > approach_ticks => return Err(Error::NoContact),
            None => continue,
        };
        let d_z = (p_i - probe.state.p).dot(&axis);
        if f.z >= params.f_thres || d_z >= params.d_thres || ticks - t_i > press_ticks {
            let bottom = probe.state.tip_bottom(probe.plant());
            return Ok(ProbeResult {
                cell,
                f_z: f.z,
                d_z,
                k: if d_z > 0.0 { f.z / d_z } else { 0.0 },
                classified_tumor: f.z > params.f_thres && d_z < params.d_thres,
                p_zi: p_i.dot(&axis),
                p_zf: probe.state.p.dot(&axis),
                contact_point: [bottom.x, bottom.y, bottom.z],
                axis: [axis.x, axis.y, axis.z],
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    BoundaryReached,
    Timeout,
    LostContact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    /// Seconds since the start of the contour follow.
    pub t: f64,
    /// Tip center.
    pub p: [f64; 3],
    /// Compensated force in the probe frame.
    pub f: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalpationTrajectory {
    pub start_cell: Cell,
    /// Index of the probe that started this follow.
    pub probe_index: usize,
    pub direction: [f64; 2],
    pub axis: [f64; 3],
    pub waypoints: Vec<Waypoint>,
    pub outcome: Outcome,
}

impl PalpationTrajectory {
    /// Tip-bottom position of a waypoint.
    pub fn contact_point(&self, w: &Waypoint, tip_radius: f64) -> Point3 {
        Point3::from(w.p) - tip_radius * Vec3::from(self.axis)
    }
}

/// Follows the buried surface from the probe's current contact.
///
/// Strokes of `stroke_samples` waypoints each advance `2A` along a random
/// planar direction. The first time the boundary test fires the direction
/// reverses and the test is disarmed until the probe is back on stiff
/// material; the second firing ends the follow. A return leg that travels
/// `return_search` without re-arming also ends it.
pub fn contour_follow<R: Rng + ?Sized>(
    probe: &mut Probe,
    phantom: &Phantom,
    grid: &SurfaceGrid,
    start: &ProbeResult,
    params: &ProbeParams,
    gains: &ControllerGains,
    rng: &mut R,
) -> Result<PalpationTrajectory> {
    let theta = rng.random_range(0.0..TAU);
    let mut dir = Vec2::new(theta.cos(), theta.sin());
    let axis = probe.state.orientation.axis();
    let bias = params.f_press / gains.k_p;
    let tip_radius = params.tip_radius;
    let mut traj = PalpationTrajectory {
        start_cell: start.cell,
        probe_index: 0,
        direction: [dir.x, dir.y],
        axis: [axis.x, axis.y, axis.z],
        waypoints: Vec::new(),
        outcome: Outcome::Timeout,
    };
    let record = |traj: &mut PalpationTrajectory, t: f64, p: &Point3, f: &Vec3| {
        traj.waypoints.push(Waypoint {
            t,
            p: [p.x, p.y, p.z],
            f: [f.x, f.y, f.z],
        });
    };

    let mut f = probe.sense()?;
    record(&mut traj, 0.0, &probe.state.p, &f);
    if params.cf_timeout <= 0.0 {
        return Ok(traj);
    }

    let ticks_per_wp = 1.0 / (params.osc_rate * gains.t);
    let mut ticks = 0u64;
    let mut k_wp = 0u64;
    let mut armed = true;
    let mut return_from: Option<Vec2> = None;
    let mut off_contact = 0.0;
    loop {
        let anchor = probe.state.p.xy() + params.amplitude * dir;
        let mut reversed = false;
        for j in 0..params.stroke_samples {
            let s = (j + 1) as f64 / params.stroke_samples as f64;
            let target = anchor + min_jerk_offset(s, params.amplitude)? * dir;
            let p_now = probe.state.p;
            let p_d = desired_pose(&p_now, &(target - p_now.xy()), bias);
            k_wp += 1;
            let end_tick = (k_wp as f64 * ticks_per_wp).round() as u64;
            while ticks < end_tick {
                probe.tick(&p_d, phantom, gains)?;
                ticks += 1;
                f = probe.sense()?;
                let t = ticks as f64 * gains.t;
                if probe.state.in_contact {
                    off_contact = 0.0;
                } else {
                    off_contact += gains.t;
                    if off_contact > params.lost_contact_time {
                        record(&mut traj, t, &probe.state.p, &f);
                        traj.outcome = Outcome::LostContact;
                        return Ok(traj);
                    }
                }
                let bottom = probe.state.p - tip_radius * axis;
                let Some(surface_z) = grid.height_at(bottom.x, bottom.y) else {
                    continue;
                };
                let d_z = surface_z - bottom.z;
                if armed && d_z > params.d_thres && f.z < params.f_thres {
                    if return_from.is_some() {
                        record(&mut traj, t, &probe.state.p, &f);
                        traj.outcome = Outcome::BoundaryReached;
                        return Ok(traj);
                    }
                    armed = false;
                    reversed = true;
                    return_from = Some(bottom.xy());
                } else if !armed && d_z < params.d_thres && f.z >= params.f_thres {
                    armed = true;
                }
                if let (false, Some(from)) = (armed, return_from) {
                    if (bottom.xy() - from).norm() > params.return_search {
                        record(&mut traj, t, &probe.state.p, &f);
                        traj.outcome = Outcome::BoundaryReached;
                        return Ok(traj);
                    }
                }
            }
            let t = ticks as f64 * gains.t;
            record(&mut traj, t, &probe.state.p, &f);
            if t >= params.cf_timeout {
                traj.outcome = Outcome::Timeout;
                return Ok(traj);
            }
            if reversed {
                break;
            }
        }
        if reversed {
            dir = -dir;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Bo,
    Rs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cf,
    Discrete,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::Bo => "BO",
            Strategy::Rs => "RS",
        }
    }
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Cf => "CF",
            Mode::Discrete => "Discrete",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub strategy: Strategy,
    pub mode: Mode,
    pub budget: usize,
    /// Random probes taken before the GP drives selection.
    pub n_init: usize,
    pub gp: GpHyper,
    /// EI exploration offset, N/m.
    pub xi: f64,
    pub probe: ProbeParams,
    pub gains: ControllerGains,
    pub load_cell: LoadCellModel,
    pub cal: CalibrationParams,
    /// No-contact readings averaged for the offset estimate; 0 keeps
    /// `cal.z_offset` as given.
    pub offset_samples: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            strategy: Strategy::Bo,
            mode: Mode::Cf,
            budget: 50,
            n_init: 3,
            gp: GpHyper::default(),
            xi: 4.0,
            probe: ProbeParams::default(),
            gains: ControllerGains::default(),
            load_cell: LoadCellModel::default(),
            cal: CalibrationParams::default(),
            offset_samples: 500,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::ConfigInvalid("budget must be at least 1".into()));
        }
        if !(self.xi >= 0.0) {
            return Err(Error::ConfigInvalid("xi must be >= 0".into()));
        }
        self.gp.validate()?;
        self.probe.validate()?;
        self.gains.validate()?;
        self.load_cell.validate()?;
        self.cal.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRun {
    pub probes: Vec<ProbeResult>,
    pub trajectories: Vec<PalpationTrajectory>,
    pub safety: SafetyStats,
    pub calibration: CalibrationParams,
}

/// Independent random streams of one run.
pub fn policy_rngs(seed: u64) -> [ChaCha8Rng; 3] {
    [0u64, 1, 2].map(|stream| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(stream);
        r
    })
}

/// Spends `budget` palpations: choose a cell, probe it, and in CF mode
/// follow the contour from every probe classified as tumor. The GP is
/// refit after every probe.
pub fn run_policy(
    phantom: &Phantom,
    grid: &SurfaceGrid,
    cfg: &PolicyConfig,
    seed: u64,
) -> Result<PolicyRun> {
    cfg.validate()?;
    if grid.valid_count() < cfg.budget {
        return Err(Error::Exhausted);
    }
    let [mut select_rng, mut cf_rng, sensor_rng] = policy_rngs(seed);
    let mut probe = Probe::new(cfg.probe.plant(), cfg.load_cell, cfg.cal, sensor_rng, phantom);
    if cfg.offset_samples > 0 {
        probe.calibrate_offset(cfg.offset_samples)?;
    }

    let mut visited = BTreeSet::new();
    let mut samples: Vec<StiffnessSample> = Vec::with_capacity(cfg.budget);
    let mut probes = Vec::with_capacity(cfg.budget);
    let mut trajectories = Vec::new();
    for i in 0..cfg.budget {
        let cell = if cfg.strategy == Strategy::Rs || i < cfg.n_init.max(2) {
            next_cell_random(grid, &visited, &mut select_rng)?
        } else {
            let gp = gp_fit(&samples, &cfg.gp)?;
            let acq = Acquisition {
                xi: cfg.xi,
                best_k: gp.best_k(),
            };
            next_cell_bo(&gp, grid, &visited, &acq, &mut select_rng)?
        };
        visited.insert(cell);
        let result = probe_cell(&mut probe, phantom, grid, cell, &cfg.probe, &cfg.gains)?;
        samples.push(StiffnessSample {
            cell,
            k: result.k.max(0.0),
        });
        if cfg.mode == Mode::Cf && result.classified_tumor {
            let mut traj = contour_follow(
                &mut probe,
                phantom,
                grid,
                &result,
                &cfg.probe,
                &cfg.gains,
                &mut cf_rng,
            )?;
            traj.probe_index = i;
            trajectories.push(traj);
        }
        probes.push(result);
    }
    Ok(PolicyRun {
        probes,
        trajectories,
        safety: *probe.safety(),
        calibration: *probe.calibration(),
    })
}
