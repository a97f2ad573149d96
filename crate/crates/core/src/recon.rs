//! Tumor surface reconstruction from palpation contacts and its F-score
//! against ground truth.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::kdtree::{squared_distance, KdTree};
use crate::palpation::{PalpationTrajectory, ProbeParams, ProbeResult};
use crate::registration::{self, SurfaceMesh};

/// Contacts closer than this to an already kept point are dropped.
pub const DEDUP_DISTANCE: f64 = 0.0002;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReconCloud {
    pub points: PointCloud,
    /// Kept points per source, `"probe"` or `"contour"`.
    pub source_counts: BTreeMap<String, usize>,
}

impl ReconCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Greedy spatial thinning: keeps a point unless a kept point lies within
/// `min_dist`.
struct Thinner {
    cell: f64,
    buckets: HashMap<(i64, i64, i64), Vec<usize>>,
    kept: Vec<Point3>,
}

impl Thinner {
    fn new(min_dist: f64) -> Self {
        Thinner {
            cell: min_dist,
            buckets: HashMap::new(),
            kept: Vec::new(),
        }
    }

    fn key(&self, p: &Point3) -> (i64, i64, i64) {
        (
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
            (p.z / self.cell).floor() as i64,
        )
    }

    fn offer(&mut self, p: Point3) -> bool {
        let (kx, ky, kz) = self.key(&p);
        let r2 = self.cell * self.cell;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.buckets.get(&(kx + dx, ky + dy, kz + dz)) {
                        if ids.iter().any(|&i| squared_distance(&self.kept[i], &p) < r2) {
                            return false;
                        }
                    }
                }
            }
        }
        self.buckets.entry((kx, ky, kz)).or_default().push(self.kept.len());
        self.kept.push(p);
        true
    }
}

/// Contact points of tumor-classified probes and of contour waypoints whose
/// axial force reached `f_thres`, with the tip center shifted by
/// `tip_radius` along the probe axis onto the tissue.
pub fn extract_contact_points(
    trajectories: &[PalpationTrajectory],
    probe_results: &[ProbeResult],
    params: &ProbeParams,
    tip_radius: f64,
) -> Result<ReconCloud> {
    let mut thin = Thinner::new(DEDUP_DISTANCE);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for pr in probe_results.iter().filter(|p| p.classified_tumor) {
        if thin.offer(Point3::from(pr.contact_point)) {
            *counts.entry("probe".into()).or_default() += 1;
        }
    }
    for traj in trajectories {
        for w in traj.waypoints.iter().filter(|w| w.f[2] >= params.f_thres) {
            if thin.offer(traj.contact_point(w, tip_radius)) {
                *counts.entry("contour".into()).or_default() += 1;
            }
        }
    }
    if thin.kept.is_empty() {
        return Err(Error::EmptyReconstruction);
    }
    Ok(ReconCloud {
        points: PointCloud::new(thin.kept),
        source_counts: counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FScoreReport {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub r: f64,
    pub n_recon: usize,
    pub n_gt: usize,
}

impl FScoreReport {
    /// Report for a trial that produced no reconstruction.
    pub fn failed(r: f64, n_gt: usize) -> Self {
        FScoreReport {
            precision: 0.0,
            recall: 0.0,
            fscore: 0.0,
            r,
            n_recon: 0,
            n_gt,
        }
    }
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn fraction_within(from: &[Point3], to: &KdTree<'_>, r2: f64) -> f64 {
    let hits = from
        .iter()
        .filter(|p| to.nearest(p).is_some_and(|(_, d2)| d2 <= r2))
        .count();
    hits as f64 / from.len() as f64
}

/// Precision, recall and their harmonic mean at distance threshold `r`.
pub fn fscore(recon: &PointCloud, gt: &PointCloud, r: f64) -> Result<FScoreReport> {
    if recon.is_empty() || gt.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(r >= 0.0) {
        return Err(Error::ConfigInvalid("distance threshold must be >= 0".into()));
    }
    let r2 = r * r;
    let gt_tree = KdTree::new(&gt.points);
    let recon_tree = KdTree::new(&recon.points);
    let precision = fraction_within(&recon.points, &gt_tree, r2);
    let recall = fraction_within(&gt.points, &recon_tree, r2);
    Ok(FScoreReport {
        precision,
        recall,
        fscore: harmonic_mean(precision, recall),
        r,
        n_recon: recon.len(),
        n_gt: gt.len(),
    })
}

/// Delaunay mesh of the contacts with long bridging triangles removed.
pub fn reconstruct_mesh(cloud: &ReconCloud) -> Result<SurfaceMesh> {
    let mesh = registration::mesh_from_cloud(&cloud.points)?;
    let edge = |a: usize, b: usize| (mesh.vertices[a] - mesh.vertices[b]).norm();
    let mut lengths: Vec<f64> = mesh
        .triangles
        .iter()
        .flat_map(|t| [edge(t[0], t[1]), edge(t[1], t[2]), edge(t[2], t[0])])
        .collect();
    lengths.sort_by(f64::total_cmp);
    let median = lengths[lengths.len() / 2];
    let limit = 3.0 * median;
    let kept: Vec<[usize; 3]> = mesh
        .triangles
        .iter()
        .filter(|t| edge(t[0], t[1]) <= limit && edge(t[1], t[2]) <= limit && edge(t[2], t[0]) <= limit)
        .copied()
        .collect();
    if kept.is_empty() {
        return Err(Error::DegenerateCloud);
    }
    Ok(registration::assemble_mesh(&mesh.vertices, kept))
}

/// Mean and maximum F-score.
pub fn aggregate_trials(reports: &[FScoreReport]) -> Result<(f64, f64)> {
    if reports.is_empty() {
        return Err(Error::Empty);
    }
    let sum: f64 = reports.iter().map(|r| r.fscore).sum();
    let max = reports.iter().map(|r| r.fscore).fold(f64::NEG_INFINITY, f64::max);
    Ok((sum / reports.len() as f64, max))
}
