//! Seeded experiment harness: one condition at a time or the full
//! strategy × mode × shape matrix, with CSV, JSON-lines and PLY outputs.
//!
//! Files written to a condition's `output_dir`:
//!
//! * `metrics.csv`: one row per trial; contains no timing so reruns are
//!   byte-identical,
//! * `summary.csv`: mean, max and combined F-score of the condition,
//! * `timing.csv`: wall time per trial,
//! * `trajectories.jsonl`: one record per probe and per contour waypoint,
//! * `recon_<trial>.ply`, `gt.ply`: reconstructed and ground-truth clouds,
//! * `report.json`: the resolved config and the summary.

mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

pub use config::{ExperimentConfig, GridSpec, ScanConfig};
pub use crate::ply::write_cloud as export_ply;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::palpation::{run_policy, Mode, Outcome, PolicyRun, SafetyStats, Strategy};
use crate::phantom::{build_phantom, Phantom};
use crate::ply;
use crate::recon::{aggregate_trials, extract_contact_points, fscore, FScoreReport};
use crate::registration::register_scene;

/// Everything one trial produced.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// `None` on success, otherwise the error that ended the trial.
    pub error: Option<String>,
    pub report: FScoreReport,
    pub n_probes: usize,
    pub n_tumor_probes: usize,
    pub n_trajectories: usize,
    pub n_waypoints: usize,
    pub n_boundary: usize,
    pub n_timeout: usize,
    pub n_lost: usize,
    /// XY distance from the tumor center of each BoundaryReached terminal
    /// contact point.
    pub boundary_radii: Vec<f64>,
    /// Waypoint count of each contour follow.
    pub waypoints_per_follow: Vec<usize>,
    /// Contour follows whose duration exceeded the timeout.
    pub overruns: usize,
    pub safety: SafetyStats,
    pub wall_time_s: f64,
    pub recon: Option<PointCloud>,
    pub run: Option<PolicyRun>,
}

impl TrialRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct TrialReport {
    pub label: String,
    pub shape: String,
    pub strategy: Strategy,
    pub mode: Mode,
    pub budget: usize,
    pub trials: Vec<TrialRecord>,
    pub mean_f: f64,
    pub max_f: f64,
    /// All trials' reconstructions pooled and scored once.
    pub combined: Option<FScoreReport>,
    pub total_waypoints: usize,
    pub wall_time_s: f64,
    pub output_dir: PathBuf,
}

impl TrialReport {
    pub fn safety(&self) -> SafetyStats {
        let mut s = SafetyStats::default();
        for t in &self.trials {
            s.merge(&t.safety);
        }
        s
    }

    pub fn failed(&self) -> usize {
        self.trials.iter().filter(|t| !t.succeeded()).count()
    }
}

fn run_trial_inner(
    cfg: &ExperimentConfig,
    phantom: &Phantom,
    gt: &PointCloud,
    rec: &mut TrialRecord,
) -> Result<()> {
    let scan = phantom.synth_depth_cloud(
        &cfg.scan.region,
        cfg.scan.density,
        cfg.scan.noise_sigma,
        rec.seed,
    )?;
    let roi = cfg.effective_roi()?;
    let (_, grid) = register_scene(&scan, &cfg.filter, &roi, cfg.grid.dx, cfg.grid.dy)?;
    let run = run_policy(phantom, &grid, &cfg.policy(), rec.seed)?;

    rec.n_probes = run.probes.len();
    rec.n_tumor_probes = run.probes.iter().filter(|p| p.classified_tumor).count();
    rec.n_trajectories = run.trajectories.len();
    rec.safety = run.safety;
    let center = cfg.tumor.center_xy;
    for traj in &run.trajectories {
        rec.n_waypoints += traj.waypoints.len();
        rec.waypoints_per_follow.push(traj.waypoints.len());
        let last = traj.waypoints.last().expect("every follow records a waypoint");
        if last.t > cfg.probe.cf_timeout + cfg.gains.t * 0.5 {
            rec.overruns += 1;
        }
        match traj.outcome {
            Outcome::BoundaryReached => {
                rec.n_boundary += 1;
                let c = traj.contact_point(last, cfg.probe.tip_radius);
                rec.boundary_radii
                    .push(((c.x - center[0]).powi(2) + (c.y - center[1]).powi(2)).sqrt());
            }
            Outcome::Timeout => rec.n_timeout += 1,
            Outcome::LostContact => rec.n_lost += 1,
        }
    }
    let extracted = extract_contact_points(
        &run.trajectories,
        &run.probes,
        &cfg.probe,
        cfg.probe.tip_radius,
    );
    rec.run = Some(run);
    let recon = extracted?;
    rec.report = fscore(&recon.points, gt, cfg.r_eval)?;
    rec.recon = Some(recon.points);
    Ok(())
}

/// Runs trial `trial` with seed `cfg.seed + trial`. Failures are recorded
/// in the returned record rather than propagated.
pub fn run_trial(cfg: &ExperimentConfig, phantom: &Phantom, gt: &PointCloud, trial: usize) -> TrialRecord {
    let start = Instant::now();
    let mut rec = TrialRecord {
        trial,
        seed: cfg.seed.wrapping_add(trial as u64),
        error: None,
        report: FScoreReport::failed(cfg.r_eval, gt.len()),
        n_probes: 0,
        n_tumor_probes: 0,
        n_trajectories: 0,
        n_waypoints: 0,
        n_boundary: 0,
        n_timeout: 0,
        n_lost: 0,
        boundary_radii: Vec::new(),
        waypoints_per_follow: Vec::new(),
        overruns: 0,
        safety: SafetyStats::default(),
        wall_time_s: 0.0,
        recon: None,
        run: None,
    };
    if let Err(e) = run_trial_inner(cfg, phantom, gt, &mut rec) {
        rec.error = Some(e.in_trial(trial).to_string());
        rec.report = FScoreReport::failed(cfg.r_eval, gt.len());
        rec.recon = None;
    }
    rec.wall_time_s = start.elapsed().as_secs_f64();
    rec
}

/// Runs every trial of one condition and writes its output files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<TrialReport> {
    cfg.validate()?;
    let start = Instant::now();
    let phantom = build_phantom(cfg.phantom.clone(), cfg.tumor)?;
    let gt = phantom.ground_truth_cloud(cfg.gt_samples, cfg.seed)?;
    let trials: Vec<TrialRecord> = if cfg.parallel {
        (0..cfg.trials)
            .into_par_iter()
            .map(|i| run_trial(cfg, &phantom, &gt, i))
            .collect()
    } else {
        (0..cfg.trials).map(|i| run_trial(cfg, &phantom, &gt, i)).collect()
    };
    let reports: Vec<FScoreReport> = trials.iter().map(|t| t.report).collect();
    let (mean_f, max_f) = aggregate_trials(&reports)?;
    let mut pooled = PointCloud::default();
    for t in &trials {
        if let Some(r) = &t.recon {
            pooled.extend(r);
        }
    }
    let combined = if pooled.is_empty() {
        None
    } else {
        Some(fscore(&pooled, &gt, cfg.r_eval)?)
    };
    let report = TrialReport {
        label: cfg.label(),
        shape: cfg.tumor.shape.name().to_string(),
        strategy: cfg.strategy,
        mode: cfg.mode,
        budget: cfg.budget,
        total_waypoints: trials.iter().map(|t| t.n_waypoints).sum(),
        trials,
        mean_f,
        max_f,
        combined,
        wall_time_s: start.elapsed().as_secs_f64(),
        output_dir: cfg.output_dir.clone(),
    };
    write_outputs(cfg, &report, &gt)?;
    Ok(report)
}

/// Shortest round-trip decimal form, stable across runs.
fn num(x: f64) -> String {
    format!("{x}")
}

const METRICS_HEADER: [&str; 22] = [
    "condition",
    "shape",
    "strategy",
    "mode",
    "budget",
    "trial",
    "seed",
    "status",
    "precision",
    "recall",
    "fscore",
    "r",
    "n_recon",
    "n_gt",
    "n_probes",
    "n_tumor_probes",
    "n_trajectories",
    "n_waypoints",
    "n_boundary",
    "n_timeout",
    "n_lost_contact",
    "safety_violations",
];

fn metrics_rows(report: &TrialReport) -> Vec<Vec<String>> {
    report
        .trials
        .iter()
        .map(|t| {
            vec![
                report.label.clone(),
                report.shape.clone(),
                report.strategy.label().to_string(),
                report.mode.label().to_string(),
                report.budget.to_string(),
                t.trial.to_string(),
                t.seed.to_string(),
                t.error.clone().unwrap_or_else(|| "ok".to_string()),
                num(t.report.precision),
                num(t.report.recall),
                num(t.report.fscore),
                num(t.report.r),
                t.report.n_recon.to_string(),
                t.report.n_gt.to_string(),
                t.n_probes.to_string(),
                t.n_tumor_probes.to_string(),
                t.n_trajectories.to_string(),
                t.n_waypoints.to_string(),
                t.n_boundary.to_string(),
                t.n_timeout.to_string(),
                t.n_lost.to_string(),
                t.safety.violations.to_string(),
            ]
        })
        .collect()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

const SUMMARY_HEADER: [&str; 11] = [
    "condition",
    "shape",
    "strategy",
    "mode",
    "budget",
    "trials",
    "failed",
    "mean_f",
    "max_f",
    "combined_f",
    "total_waypoints",
];

fn summary_row(report: &TrialReport) -> Vec<String> {
    vec![
        report.label.clone(),
        report.shape.clone(),
        report.strategy.label().to_string(),
        report.mode.label().to_string(),
        report.budget.to_string(),
        report.trials.len().to_string(),
        report.failed().to_string(),
        num(report.mean_f),
        num(report.max_f),
        report.combined.map_or(String::new(), |c| num(c.fscore)),
        report.total_waypoints.to_string(),
    ]
}

fn write_trajectories(path: &Path, report: &TrialReport) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for t in &report.trials {
        let Some(run) = &t.run else { continue };
        for (i, p) in run.probes.iter().enumerate() {
            let rec = json!({
                "trial": t.trial,
                "palpation_index": i,
                "t": 0.0,
                "p": p.contact_point,
                "f": [0.0, 0.0, p.f_z],
                "phase": "probe",
                "outcome": if p.classified_tumor { "tumor" } else { "clear" },
                "cell": [p.cell.u, p.cell.v],
                "k": p.k,
                "d_z": p.d_z,
            });
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        for traj in &run.trajectories {
            let outcome = serde_json::to_value(traj.outcome)?;
            for w in &traj.waypoints {
                let rec = json!({
                    "trial": t.trial,
                    "palpation_index": traj.probe_index,
                    "t": w.t,
                    "p": w.p,
                    "f": w.f,
                    "phase": "contour",
                    "outcome": outcome,
                    "direction": traj.direction,
                });
                serde_json::to_writer(&mut out, &rec)?;
                out.write_all(b"\n")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ReportJson<'a> {
    config: &'a ExperimentConfig,
    condition: &'a str,
    shape: &'a str,
    mean_f: f64,
    max_f: f64,
    combined: Option<FScoreReport>,
    failed: usize,
    total_waypoints: usize,
    admissible_force: f64,
    max_cmd_force: f64,
    safety_violations: u64,
}

fn write_outputs(cfg: &ExperimentConfig, report: &TrialReport, gt: &PointCloud) -> Result<()> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("metrics.csv"), &METRICS_HEADER, &metrics_rows(report))?;
    write_csv(&dir.join("summary.csv"), &SUMMARY_HEADER, &[summary_row(report)])?;
    let timing: Vec<Vec<String>> = report
        .trials
        .iter()
        .map(|t| vec![t.trial.to_string(), format!("{:.6}", t.wall_time_s)])
        .collect();
    write_csv(&dir.join("timing.csv"), &["trial", "wall_time_s"], &timing)?;
    write_trajectories(&dir.join("trajectories.jsonl"), report)?;
    ply::write_cloud(gt, dir.join("gt.ply"))?;
    for t in &report.trials {
        if let Some(r) = &t.recon {
            ply::write_cloud(r, dir.join(format!("recon_{}.ply", t.trial)))?;
        }
    }
    let safety = report.safety();
    let json = ReportJson {
        config: cfg,
        condition: &report.label,
        shape: &report.shape,
        mean_f: report.mean_f,
        max_f: report.max_f,
        combined: report.combined,
        failed: report.failed(),
        total_waypoints: report.total_waypoints,
        admissible_force: safety.admissible,
        max_cmd_force: safety.max_cmd_force,
        safety_violations: safety.violations,
    };
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&json)?)?;
    Ok(())
}

/// The eight conditions of the comparison table: hemisphere with a budget
/// of 50 and crescent with 80, each under RS/BO with and without contour
/// following. Each condition writes into its own subdirectory of `root`.
pub fn table_one_conditions(base: &ExperimentConfig, root: &Path) -> Result<Vec<ExperimentConfig>> {
    let mut out = Vec::new();
    for (shape, budget) in [("hemisphere", 50), ("crescent", 80)] {
        for mode in [Mode::Cf, Mode::Discrete] {
            for strategy in [Strategy::Rs, Strategy::Bo] {
                let mut c = base.clone();
                c.set_shape(shape)?;
                c.budget = budget;
                c.mode = mode;
                c.strategy = strategy;
                c.output_dir = root.join(format!(
                    "{}_{}_{}",
                    shape,
                    strategy.label().to_lowercase(),
                    mode.label().to_lowercase()
                ));
                out.push(c);
            }
        }
    }
    Ok(out)
}

/// One line of the combined table.
#[derive(Debug, Clone)]
pub struct MatrixRow {
    pub condition: String,
    pub shape: String,
    pub mean_f: f64,
    pub max_f: f64,
    pub budget: usize,
    pub trials: usize,
    pub failed: usize,
    /// Set when the whole condition could not run.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MatrixReport {
    pub rows: Vec<MatrixRow>,
    pub reports: Vec<TrialReport>,
    /// Per shape, every reconstruction of every condition pooled and
    /// scored once.
    pub combined: Vec<(String, FScoreReport)>,
}

/// Runs every condition and writes `matrix.csv` and a concatenated
/// `metrics.csv` into `root`. A failing condition is marked in its row and
/// the sweep continues.
pub fn run_matrix(cfgs: &[ExperimentConfig], root: &Path) -> Result<MatrixReport> {
    if cfgs.is_empty() {
        return Err(Error::Empty);
    }
    fs::create_dir_all(root)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut metrics = Vec::new();
    for cfg in cfgs {
        match run_experiment(cfg) {
            Ok(rep) => {
                rows.push(MatrixRow {
                    condition: rep.label.clone(),
                    shape: rep.shape.clone(),
                    mean_f: rep.mean_f,
                    max_f: rep.max_f,
                    budget: rep.budget,
                    trials: rep.trials.len(),
                    failed: rep.failed(),
                    error: None,
                });
                metrics.extend(metrics_rows(&rep));
                reports.push(rep);
            }
            Err(e) => rows.push(MatrixRow {
                condition: cfg.label(),
                shape: cfg.tumor.shape.name().to_string(),
                mean_f: 0.0,
                max_f: 0.0,
                budget: cfg.budget,
                trials: cfg.trials,
                failed: cfg.trials,
                error: Some(e.to_string()),
            }),
        }
    }

    let mut combined = Vec::new();
    let mut shapes: Vec<&str> = Vec::new();
    for c in cfgs {
        let name = c.tumor.shape.name();
        if !shapes.contains(&name) {
            shapes.push(name);
        }
    }
    for shape in shapes {
        let Some(cfg) = cfgs.iter().find(|c| c.tumor.shape.name() == shape) else {
            continue;
        };
        let mut pooled = PointCloud::default();
        for rep in reports.iter().filter(|r| r.shape == shape) {
            for t in &rep.trials {
                if let Some(r) = &t.recon {
                    pooled.extend(r);
                }
            }
        }
        if pooled.is_empty() {
            continue;
        }
        let phantom = build_phantom(cfg.phantom.clone(), cfg.tumor)?;
        let gt = phantom.ground_truth_cloud(cfg.gt_samples, cfg.seed)?;
        combined.push((shape.to_string(), fscore(&pooled, &gt, cfg.r_eval)?));
    }

    let mut table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.condition.clone(),
                r.shape.clone(),
                num(r.mean_f),
                num(r.max_f),
                r.budget.to_string(),
                r.trials.to_string(),
                r.failed.to_string(),
                r.error.clone().unwrap_or_else(|| "ok".into()),
            ]
        })
        .collect();
    for (shape, rep) in &combined {
        table.push(vec![
            "combined".into(),
            shape.clone(),
            num(rep.fscore),
            num(rep.fscore),
            String::new(),
            String::new(),
            String::new(),
            "ok".into(),
        ]);
    }
    write_csv(
        &root.join("matrix.csv"),
        &["condition", "shape", "mean_F", "max_F", "#P", "trials", "failed", "status"],
        &table,
    )?;
    write_csv(&root.join("metrics.csv"), &METRICS_HEADER, &metrics)?;
    Ok(MatrixReport {
        rows,
        reports,
        combined,
    })
}

/// Writes the ground-truth tumor cloud of `cfg` to `path`.
pub fn export_gt(cfg: &ExperimentConfig, path: &Path) -> Result<PointCloud> {
    cfg.phantom.validate()?;
    let phantom = build_phantom(cfg.phantom.clone(), cfg.tumor)?;
    let gt = phantom.ground_truth_cloud(cfg.gt_samples, cfg.seed)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    ply::write_cloud(&gt, path)?;
    Ok(gt)
}

/// Scores two PLY clouds against each other.
pub fn eval_ply(recon: &Path, gt: &Path, r: f64) -> Result<FScoreReport> {
    fscore(&ply::read_cloud(recon)?, &ply::read_cloud(gt)?, r)
}
