use nalgebra::Vector2;
use palpation::calibration::{CalibrationParams, EulerZyx, LoadCellModel};
use palpation::geometry::{Point3, RoiBox, Vec3};
use palpation::palpation::{
    contour_follow, desired_pose, impedance_force, min_jerk_offset, policy_rngs,
    probe_cell, run_policy, step_plant, ControllerGains, Mode, Outcome, PlantState, PolicyConfig,
    Probe, ProbeParams, Strategy,
};
use palpation::phantom::{build_phantom, Phantom, PhantomConfig, SurfaceProfile, TumorGeometry, TumorShape};
use palpation::registration::{register_scene, Cell, PreprocessParams, SurfaceGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn flat(k_skin: f64, k_fat: f64) -> PhantomConfig {
    PhantomConfig {
        surface_profile: SurfaceProfile::Flat,
        k_skin,
        k_fat,
        ..PhantomConfig::default()
    }
}

fn grid_for(ph: &Phantom, half: f64) -> SurfaceGrid {
    let region = RoiBox::new([-0.05, -0.05], [0.05, 0.05]).unwrap();
    let scan = ph.synth_depth_cloud(&region, 1.0e6, 0.0, 0).unwrap();
    let roi = RoiBox::new([-half, -half], [half, half]).unwrap();
    register_scene(&scan, &PreprocessParams::default(), &roi, 0.002, 0.002).unwrap().1
}

fn quiet_probe(ph: &Phantom, params: &ProbeParams) -> Probe {
    let sensor = LoadCellModel {
        noise_sigma: 0.0,
        bias: [0.0; 3],
        ..LoadCellModel::default()
    };
    let cal = CalibrationParams::default();
    Probe::new(params.plant(), sensor, cal, ChaCha8Rng::seed_from_u64(0), ph)
}

fn noisy_probe(ph: &Phantom, params: &ProbeParams, seed: u64) -> Probe {
    let [_, _, sensor_rng] = policy_rngs(seed);
    let mut p = Probe::new(params.plant(), LoadCellModel::default(), CalibrationParams::default(), sensor_rng, ph);
    p.calibrate_offset(500).unwrap();
    p
}

/// Depth at which the piecewise law first delivers `f` over a stop at
/// `d_stop` below the skin.
fn invert_force(f: f64, k_soft: f64, k_hard: f64, d_stop: f64) -> f64 {
    if k_soft * d_stop >= f {
        f / k_soft
    } else {
        d_stop + (f - k_soft * d_stop) / k_hard
    }
}

#[test]
fn apex_probe_stops_at_the_inverted_depth() {
    let cfg = flat(1200.0, 600.0);
    let ph = build_phantom(cfg.clone(), TumorGeometry::default()).unwrap();
    assert!((ph.soft_stiffness() - 400.0).abs() < 1e-9);
    let grid = grid_for(&ph, 0.016);
    let params = ProbeParams::default();
    let gains = ControllerGains::default();
    let mut probe = quiet_probe(&ph, &params);
    let apex = Cell::new(8, 8);
    assert_eq!(grid.cell_xy(apex), [0.0, 0.0]);
    let res = probe_cell(&mut probe, &ph, &grid, apex, &params, &gains).unwrap();
    let want = invert_force(5.0, 400.0, cfg.k_tumor, 0.009);
    assert!((want - 0.00907).abs() < 1e-12);
    assert!((res.d_z - want).abs() < 1e-4, "d_z {} want {want}", res.d_z);
    assert!(res.f_z >= 5.0 && res.classified_tumor);
    assert!((res.k - res.f_z / res.d_z).abs() < 1e-9);
    assert!((res.p_zi - res.p_zf - res.d_z).abs() < 1e-15);
}

#[test]
fn off_tumor_probe_reaches_depth_limit_first() {
    let ph = build_phantom(flat(600.0, 300.0), TumorGeometry::default()).unwrap();
    let grid = grid_for(&ph, 0.016);
    let params = ProbeParams::default();
    let mut probe = quiet_probe(&ph, &params);
    let corner = Cell::new(0, 0);
    let res = probe_cell(&mut probe, &ph, &grid, corner, &params, &ControllerGains::default()).unwrap();
    // 5 N only past the 19 mm soft stack with k_soft = 200 N/m.
    assert!(invert_force(5.0, 200.0, 6000.0, 0.019) > params.d_thres);
    assert!(!res.classified_tumor);
    assert!(res.d_z >= params.d_thres && res.f_z < 5.0);
}

#[test]
fn free_probe_falls_ballistically() {
    let ph = Phantom::new(flat(600.0, 300.0), None).unwrap();
    let params = ProbeParams::default();
    let plant = params.plant();
    let mut s = PlantState::at(Point3::new(0.0, 0.0, 1.0), EulerZyx::default(), &ph, &plant);
    for _ in 0..100 {
        s = step_plant(&s, &Vec3::new(0.0, 0.0, -1.0), &ph, &plant, 0.001).unwrap();
    }
    assert!((s.v.z + 1.0).abs() < 1e-9);
}

#[test]
fn pressed_probe_settles_at_spring_equilibrium() {
    let ph = Phantom::new(flat(600.0, 300.0), None).unwrap();
    let params = ProbeParams::default();
    let plant = params.plant();
    let skin = ph.z_skin(0.0, 0.0);
    let mut s = PlantState::at(Point3::new(0.0, 0.0, skin + plant.tip_radius), EulerZyx::default(), &ph, &plant);
    let push = 2.0;
    for _ in 0..60_000 {
        s = step_plant(&s, &Vec3::new(0.0, 0.0, -push), &ph, &plant, 0.001).unwrap();
    }
    let d = skin - s.tip_bottom(&plant).z;
    assert!((ph.soft_stiffness() * d - push).abs() < 0.01 * push, "d {d}");
}

#[test]
fn zero_timeout_records_one_waypoint() {
    let ph = build_phantom(flat(600.0, 300.0), TumorGeometry::default()).unwrap();
    let grid = grid_for(&ph, 0.016);
    let params = ProbeParams {
        cf_timeout: 0.0,
        ..ProbeParams::default()
    };
    let gains = ControllerGains::default();
    let mut probe = quiet_probe(&ph, &params);
    let res = probe_cell(&mut probe, &ph, &grid, Cell::new(8, 8), &params, &gains).unwrap();
    let traj = contour_follow(&mut probe, &ph, &grid, &res, &params, &gains, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(traj.outcome, Outcome::Timeout);
    assert_eq!(traj.waypoints.len(), 1);
}

#[test]
fn follows_from_the_apex_end_at_the_footprint() {
    let ph = build_phantom(PhantomConfig::default(), TumorGeometry::default()).unwrap();
    let grid = grid_for(&ph, 0.016);
    let params = ProbeParams::default();
    let gains = ControllerGains::default();
    for seed in 0..8 {
        let mut probe = noisy_probe(&ph, &params, seed);
        let res = probe_cell(&mut probe, &ph, &grid, Cell::new(8, 8), &params, &gains).unwrap();
        assert!(res.classified_tumor);
        let traj =
            contour_follow(&mut probe, &ph, &grid, &res, &params, &gains, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(traj.outcome, Outcome::BoundaryReached);
        assert!(traj.waypoints.len() >= 10);
        let last = traj.contact_point(traj.waypoints.last().unwrap(), params.tip_radius);
        let r = last.x.hypot(last.y);
        assert!((r - 0.01).abs() < 0.003, "seed {seed}: r {r}");
        assert!(traj.waypoints.last().unwrap().t <= params.cf_timeout);
        assert!(probe.safety().violations == 0);
    }
}

#[test]
fn classification_agrees_with_geometry() {
    let ph = build_phantom(PhantomConfig::default(), TumorGeometry::default()).unwrap();
    let grid = grid_for(&ph, 0.016);
    let params = ProbeParams::default();
    let gains = ControllerGains::default();
    let mut probe = noisy_probe(&ph, &params, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut agree, mut counted) = (0, 0);
    for _ in 0..100 {
        let cell = Cell::new(rng.random_range(0..grid.nx), rng.random_range(0..grid.ny));
        let [x, y] = grid.cell_xy(cell);
        let d_stop = ph.z_skin(x, y) - ph.z_stop(x, y);
        let truth = if d_stop <= params.d_thres - 0.001 {
            true
        } else if d_stop >= params.d_thres + 0.001 {
            false
        } else {
            continue;
        };
        let res = probe_cell(&mut probe, &ph, &grid, cell, &params, &gains).unwrap();
        counted += 1;
        agree += usize::from(res.classified_tumor == truth);
    }
    assert!(counted >= 80);
    assert!(agree as f64 >= 0.95 * counted as f64, "{agree}/{counted}");
}

fn policy(strategy: Strategy, mode: Mode, budget: usize) -> PolicyConfig {
    PolicyConfig {
        strategy,
        mode,
        budget,
        ..PolicyConfig::default()
    }
}

#[test]
fn budgets_and_modes_shape_the_run() {
    let ph = build_phantom(PhantomConfig::default(), TumorGeometry::default()).unwrap();
    let grid = grid_for(&ph, 0.015);
    let run = run_policy(&ph, &grid, &policy(Strategy::Bo, Mode::Cf, 50), 3).unwrap();
    assert_eq!(run.probes.len(), 50);
    let tumor: Vec<usize> = run
        .probes
        .iter()
        .enumerate()
        .filter(|(_, p)| p.classified_tumor)
        .map(|(i, _)| i)
        .collect();
    let followed: Vec<usize> = run.trajectories.iter().map(|t| t.probe_index).collect();
    assert_eq!(tumor, followed);
    assert_eq!(run.safety.violations, 0);

    let disc = run_policy(&ph, &grid, &policy(Strategy::Rs, Mode::Discrete, 50), 3).unwrap();
    assert!(disc.trajectories.is_empty());

    let crescent = TumorGeometry {
        shape: TumorShape::default_crescent(),
        ..TumorGeometry::default()
    };
    let ph = build_phantom(PhantomConfig::default(), crescent).unwrap();
    let grid = grid_for(&ph, 0.015);
    let run = run_policy(&ph, &grid, &policy(Strategy::Bo, Mode::Cf, 80), 4).unwrap();
    assert_eq!(run.probes.len(), 80);
}

#[test]
fn runs_are_bitwise_deterministic() {
    let ph = build_phantom(PhantomConfig::default(), TumorGeometry::default()).unwrap();
    let grid = grid_for(&ph, 0.015);
    let cfg = policy(Strategy::Bo, Mode::Cf, 20);
    let a = run_policy(&ph, &grid, &cfg, 11).unwrap();
    let b = run_policy(&ph, &grid, &cfg, 11).unwrap();
    assert_eq!(a, b);
    let c = run_policy(&ph, &grid, &cfg, 12).unwrap();
    assert_ne!(a.probes, c.probes);
}

#[test]
fn oversized_budget_is_exhausted() {
    let ph = build_phantom(PhantomConfig::default(), TumorGeometry::default()).unwrap();
    let grid = grid_for(&ph, 0.015);
    assert!(run_policy(&ph, &grid, &policy(Strategy::Rs, Mode::Discrete, 1000), 0).is_err());
}

proptest! {
    #[test]
    fn min_jerk_is_antisymmetric_and_monotone(t in 0.0f64..=1.0, a in 0.0001f64..0.01) {
        let s = min_jerk_offset(t, a).unwrap() + min_jerk_offset(1.0 - t, a).unwrap();
        prop_assert!(s.abs() <= 1e-12);
        let t2 = (t + 0.01).min(1.0);
        prop_assert!(min_jerk_offset(t2, a).unwrap() >= min_jerk_offset(t, a).unwrap() - 1e-15);
    }

    #[test]
    fn desired_pose_never_lifts(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
                                dx in -0.01f64..0.01, dy in -0.01f64..0.01, bias in 0.0f64..0.01) {
        let p = Point3::new(x, y, z);
        let d = desired_pose(&p, &Vector2::new(dx, dy), bias);
        prop_assert!(d.z <= p.z);
        prop_assert!((d.x - p.x - dx).abs() < 1e-15);
    }

    #[test]
    fn commanded_force_respects_the_bound(
        ex in -1.0f64..1.0, ey in -1.0f64..1.0, ez in -1.0f64..1.0,
        vx in -2.0f64..2.0, vy in -2.0f64..2.0, vz in -2.0f64..2.0,
        kp in 10.0f64..5000.0, kd in 0.0f64..100.0, e_thres in 0.0001f64..0.05,
    ) {
        let gains = ControllerGains { k_p: kp, k_d: kd, e_thres, t: 0.001 };
        let p = Point3::zeros();
        let v = Vec3::new(vx, vy, vz);
        let f = impedance_force(&Point3::new(ex, ey, ez), &p, &Vec3::zeros(), &v, &gains);
        for k in 0..3 {
            prop_assert!(f[k].abs() <= kp * e_thres + kd * v[k].abs() + 1e-9);
        }
    }
}
