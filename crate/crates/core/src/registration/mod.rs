//! Scene registration: raw surface scan to ROI mesh to interpolated grid.
//!
//! The tissue surface is treated as a height field over X-Y. Meshing is a
//! 2D Delaunay triangulation of the projected points, and the grid heights
//! come from a C1 Clough–Tocher interpolant over that triangulation. Grid
//! normals are central differences of the interpolated heights; the mesh
//! keeps its own vertex normals for export only.

mod clough_tocher;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use clough_tocher::CloughTocher;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{Point3, RoiBox, Vec3};
use crate::kdtree::KdTree;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
    pub vertex_normals: Vec<Vec3>,
}

impl SurfaceMesh {
    pub fn bounds(&self) -> Option<RoiBox> {
        RoiBox::bounding(self.vertices.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessParams {
    pub voxel: f64,
    pub outlier_k: usize,
    pub outlier_sigma: f64,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        PreprocessParams {
            voxel: 0.002,
            outlier_k: 8,
            outlier_sigma: 2.0,
        }
    }
}

/// Voxel-centroid downsampling followed by statistical outlier removal.
///
/// A point is discarded when its mean distance to its `outlier_k` nearest
/// neighbors exceeds the population mean of that quantity by more than
/// `outlier_sigma` standard deviations.
pub fn preprocess_cloud(
    raw: &PointCloud,
    voxel: f64,
    outlier_k: usize,
    outlier_sigma: f64,
) -> Result<PointCloud> {
    if raw.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(voxel > 0.0) {
        return Err(Error::ConfigInvalid("voxel size must be positive".into()));
    }
    let mut cells: BTreeMap<(i64, i64, i64), (Point3, usize)> = BTreeMap::new();
    for p in &raw.points {
        let key = (
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        );
        let e = cells.entry(key).or_insert((Point3::zeros(), 0));
        e.0 += p;
        e.1 += 1;
    }
    let points: Vec<Point3> = cells.values().map(|(s, n)| s / *n as f64).collect();

    let k = outlier_k.min(points.len().saturating_sub(1));
    if k == 0 {
        return Ok(PointCloud::new(points));
    }
    let tree = KdTree::new(&points);
    let mean_dist: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let nn = tree.k_nearest(p, k, Some(i));
            nn.iter().map(|(_, d2)| d2.sqrt()).sum::<f64>() / nn.len() as f64
        })
        .collect();
    let n = mean_dist.len() as f64;
    let mu = mean_dist.iter().sum::<f64>() / n;
    let sd = (mean_dist.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / n).sqrt();
    let limit = mu + outlier_sigma * sd;
    let kept: Vec<Point3> = points
        .into_iter()
        .zip(&mean_dist)
        .filter(|(_, &d)| d <= limit)
        .map(|(p, _)| p)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }
    Ok(PointCloud::new(kept))
}

fn cross_z(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Drops unreferenced vertices and recomputes area-weighted vertex normals,
/// all oriented toward +z.
pub(crate) fn assemble_mesh(vertices: &[Point3], triangles: Vec<[usize; 3]>) -> SurfaceMesh {
    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut verts = Vec::new();
    let triangles: Vec<[usize; 3]> = triangles
        .into_iter()
        .map(|t| {
            t.map(|i| {
                *remap.entry(i).or_insert_with(|| {
                    verts.push(vertices[i]);
                    verts.len() - 1
                })
            })
        })
        .collect();
    let mut normals = vec![Vec3::zeros(); verts.len()];
    for t in &triangles {
        let (a, b, c) = (verts[t[0]], verts[t[1]], verts[t[2]]);
        let mut n = (b - a).cross(&(c - a));
        if n.z < 0.0 {
            n = -n;
        }
        for &i in t {
            normals[i] += n;
        }
    }
    for n in &mut normals {
        *n = n.normalize();
    }
    SurfaceMesh {
        vertices: verts,
        triangles,
        vertex_normals: normals,
    }
}

/// Delaunay-triangulates the X-Y projection of `cloud` and lifts it back to
/// 3D. Points sharing an X-Y location keep only their first occurrence.
pub fn mesh_from_cloud(cloud: &PointCloud) -> Result<SurfaceMesh> {
    let mut seen = HashSet::new();
    let pts: Vec<Point3> = cloud
        .points
        .iter()
        .filter(|p| p.iter().all(|c| c.is_finite()))
        .filter(|p| seen.insert((p.x.to_bits(), p.y.to_bits())))
        .copied()
        .collect();
    if pts.len() < 3 {
        return Err(Error::DegenerateCloud);
    }
    let planar: Vec<delaunator::Point> = pts
        .iter()
        .map(|p| delaunator::Point { x: p.x, y: p.y })
        .collect();
    let tri = delaunator::triangulate(&planar);
    let mut triangles = Vec::with_capacity(tri.triangles.len() / 3);
    for t in tri.triangles.chunks_exact(3) {
        let (a, b, c) = (&pts[t[0]], &pts[t[1]], &pts[t[2]]);
        let area2 = cross_z(a, b, c);
        let scale = ((b - a).xy().norm() * (c - a).xy().norm()).max(f64::MIN_POSITIVE);
        if area2.abs() <= 1e-12 * scale {
            continue;
        }
        triangles.push(if area2 > 0.0 {
            [t[0], t[1], t[2]]
        } else {
            [t[0], t[2], t[1]]
        });
    }
    if triangles.is_empty() {
        return Err(Error::DegenerateCloud);
    }
    Ok(assemble_mesh(&pts, triangles))
}

/// Keeps the triangles whose bounding box overlaps `roi`.
pub fn crop_roi(mesh: &SurfaceMesh, roi: &RoiBox) -> Result<SurfaceMesh> {
    match mesh.bounds() {
        Some(b) if b.intersects(roi) => {}
        _ => return Err(Error::EmptyRoi),
    }
    // Triangles overlapping the box are kept whole so the ROI border is
    // still covered.
    let kept: Vec<[usize; 3]> = mesh
        .triangles
        .iter()
        .filter(|t| {
            let xs = t.map(|i| mesh.vertices[i].x);
            let ys = t.map(|i| mesh.vertices[i].y);
            let bb = RoiBox {
                min_xy: [xs.iter().copied().fold(f64::INFINITY, f64::min), ys.iter().copied().fold(f64::INFINITY, f64::min)],
                max_xy: [xs.iter().copied().fold(f64::NEG_INFINITY, f64::max), ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)],
            };
            bb.intersects(roi)
        })
        .copied()
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let mut cropped = assemble_mesh(&mesh.vertices, kept);
    // Keep the input normals rather than the recomputed cropped ones, so
    // vertices on the ROI border do not lose their outside neighbors.
    let index: HashMap<[u64; 3], usize> = mesh
        .vertices
        .iter()
        .enumerate()
        .map(|(i, p)| ([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()], i))
        .collect();
    for (v, n) in cropped.vertices.iter().zip(cropped.vertex_normals.iter_mut()) {
        if let Some(&i) = index.get(&[v.x.to_bits(), v.y.to_bits(), v.z.to_bits()]) {
            *n = mesh.vertex_normals[i];
        }
    }
    Ok(cropped)
}

/// Grid cell index: `u` counts along x, `v` along y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub u: usize,
    pub v: usize,
}

impl Cell {
    pub fn new(u: usize, v: usize) -> Self {
        Cell { u, v }
    }
}

/// Uniform lattice over the ROI; node `(u, v)` sits at
/// `origin + (u·dx, v·dy)` and carries a surface height and normal.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub origin_xy: [f64; 2],
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major by `v`: index `v * nx + u`.
    pub height: Vec<f64>,
    pub normal: Vec<Vec3>,
    pub valid_mask: Vec<bool>,
}

impl SurfaceGrid {
    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        v * self.nx + u
    }

    pub fn is_valid(&self, cell: Cell) -> bool {
        cell.u < self.nx && cell.v < self.ny && self.valid_mask[self.index(cell.u, cell.v)]
    }

    pub fn cell_xy(&self, cell: Cell) -> [f64; 2] {
        [
            self.origin_xy[0] + cell.u as f64 * self.dx,
            self.origin_xy[1] + cell.v as f64 * self.dy,
        ]
    }

    pub fn valid_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.ny)
            .flat_map(move |v| (0..self.nx).map(move |u| Cell::new(u, v)))
            .filter(move |c| self.valid_mask[self.index(c.u, c.v)])
    }

    pub fn valid_count(&self) -> usize {
        self.valid_mask.iter().filter(|&&m| m).count()
    }

    /// Surface height under `(x, y)`: bilinear over the enclosing valid
    /// nodes, falling back to the mean of whichever of them are valid.
    pub fn height_at(&self, x: f64, y: f64) -> Option<f64> {
        let fu = ((x - self.origin_xy[0]) / self.dx).clamp(0.0, (self.nx - 1) as f64);
        let fv = ((y - self.origin_xy[1]) / self.dy).clamp(0.0, (self.ny - 1) as f64);
        let u0 = (fu.floor() as usize).min(self.nx.saturating_sub(2));
        let v0 = (fv.floor() as usize).min(self.ny.saturating_sub(2));
        let (tu, tv) = (fu - u0 as f64, fv - v0 as f64);
        let corners = [
            (u0, v0, (1.0 - tu) * (1.0 - tv)),
            (u0 + 1, v0, tu * (1.0 - tv)),
            (u0, v0 + 1, (1.0 - tu) * tv),
            (u0 + 1, v0 + 1, tu * tv),
        ];
        let valid: Vec<_> = corners
            .iter()
            .filter(|(u, v, _)| self.valid_mask[self.index(*u, *v)])
            .collect();
        match valid.len() {
            0 => None,
            4 => Some(
                valid
                    .iter()
                    .map(|(u, v, w)| w * self.height[self.index(*u, *v)])
                    .sum(),
            ),
            n => Some(
                valid
                    .iter()
                    .map(|(u, v, _)| self.height[self.index(*u, *v)])
                    .sum::<f64>()
                    / n as f64,
            ),
        }
    }
}

/// Surface point and unit normal of a valid grid cell.
pub fn cell_to_surface(grid: &SurfaceGrid, u: usize, v: usize) -> Result<(Point3, Vec3)> {
    if !grid.is_valid(Cell::new(u, v)) {
        return Err(Error::InvalidCell { u, v });
    }
    let [x, y] = grid.cell_xy(Cell::new(u, v));
    let i = grid.index(u, v);
    Ok((Point3::new(x, y, grid.height[i]), grid.normal[i]))
}

/// Interpolates the mesh onto a lattice spanning the mesh's X-Y bounds.
pub fn interpolate_grid(mesh: &SurfaceMesh, dx: f64, dy: f64) -> Result<SurfaceGrid> {
    let bounds = mesh.bounds().ok_or(Error::EmptyCloud)?;
    interpolate_grid_in(mesh, &bounds, dx, dy)
}

/// Interpolates the mesh onto a lattice anchored at `bounds.min_xy`.
/// Nodes outside the triangulation are masked invalid.
pub fn interpolate_grid_in(
    mesh: &SurfaceMesh,
    bounds: &RoiBox,
    dx: f64,
    dy: f64,
) -> Result<SurfaceGrid> {
    if !(dx > 0.0 && dy > 0.0) {
        return Err(Error::ConfigInvalid("grid spacing must be positive".into()));
    }
    if mesh.triangles.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let nx = (bounds.width() / dx + 1e-9).floor() as usize + 1;
    let ny = (bounds.height() / dy + 1e-9).floor() as usize + 1;
    let ct = CloughTocher::new(
        mesh.vertices.iter().map(|p| [p.x, p.y]).collect(),
        mesh.vertices.iter().map(|p| p.z).collect(),
        mesh.triangles.clone(),
    );
    let [ox, oy] = bounds.min_xy;
    let mut height = vec![f64::NAN; nx * ny];
    let mut valid = vec![false; nx * ny];
    for (ti, t) in mesh.triangles.iter().enumerate() {
        let xs = t.map(|i| mesh.vertices[i].x);
        let ys = t.map(|i| mesh.vertices[i].y);
        let (x0, x1) = (xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let (y0, y1) = (ys.iter().copied().fold(f64::INFINITY, f64::min), ys.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let u_lo = ((x0 - ox) / dx - 1e-9).ceil().max(0.0) as usize;
        let v_lo = ((y0 - oy) / dy - 1e-9).ceil().max(0.0) as usize;
        let u_hi = ((x1 - ox) / dx + 1e-9).floor();
        let v_hi = ((y1 - oy) / dy + 1e-9).floor();
        if u_hi < 0.0 || v_hi < 0.0 {
            continue;
        }
        let u_hi = (u_hi as usize).min(nx - 1);
        let v_hi = (v_hi as usize).min(ny - 1);
        for v in v_lo..=v_hi {
            for u in u_lo..=u_hi {
                let idx = v * nx + u;
                if valid[idx] {
                    continue;
                }
                let p = [ox + u as f64 * dx, oy + v as f64 * dy];
                let b = ct.barycentric(ti, p);
                if b.iter().all(|&c| c >= -1e-10) {
                    height[idx] = ct.eval(ti, b);
                    valid[idx] = true;
                }
            }
        }
    }
    let n_valid = valid.iter().filter(|&&m| m).count();
    if nx < 2 || ny < 2 || n_valid < 4 {
        return Err(Error::ResolutionTooCoarse {
            nx,
            ny,
            valid: n_valid,
        });
    }
    let slope = |idx_lo: Option<usize>, idx_hi: Option<usize>, here: usize, step: f64| {
        let ok = |i: Option<usize>| i.filter(|&i| valid[i]);
        match (ok(idx_lo), ok(idx_hi)) {
            (Some(a), Some(b)) => (height[b] - height[a]) / (2.0 * step),
            (Some(a), None) => (height[here] - height[a]) / step,
            (None, Some(b)) => (height[b] - height[here]) / step,
            (None, None) => 0.0,
        }
    };
    let mut normal = vec![Vec3::z(); nx * ny];
    for v in 0..ny {
        for u in 0..nx {
            let idx = v * nx + u;
            if !valid[idx] {
                continue;
            }
            let hx = slope(
                u.checked_sub(1).map(|u| v * nx + u),
                (u + 1 < nx).then(|| v * nx + u + 1),
                idx,
                dx,
            );
            let hy = slope(
                v.checked_sub(1).map(|v| v * nx + u),
                (v + 1 < ny).then(|| (v + 1) * nx + u),
                idx,
                dy,
            );
            normal[idx] = Vec3::new(-hx, -hy, 1.0).normalize();
        }
    }
    Ok(SurfaceGrid {
        origin_xy: [ox, oy],
        dx,
        dy,
        nx,
        ny,
        height,
        normal,
        valid_mask: valid,
    })
}

/// Full registration: filter, mesh, crop to the ROI and grid over it.
pub fn register_scene(
    raw: &PointCloud,
    filter: &PreprocessParams,
    roi: &RoiBox,
    dx: f64,
    dy: f64,
) -> Result<(SurfaceMesh, SurfaceGrid)> {
    let clean = preprocess_cloud(raw, filter.voxel, filter.outlier_k, filter.outlier_sigma)?;
    let mesh = mesh_from_cloud(&clean)?;
    let cropped = crop_roi(&mesh, roi)?;
    let grid = interpolate_grid_in(&cropped, roi, dx, dy)?;
    Ok((cropped, grid))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planar_square() -> PointCloud {
        PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.1),
            Point3::new(0.01, 0.0, 0.1),
            Point3::new(0.0, 0.01, 0.1),
            Point3::new(0.01, 0.01, 0.1),
        ])
    }

    #[test]
    fn square_meshes_into_two_upward_triangles() {
        let mesh = mesh_from_cloud(&planar_square()).unwrap();
        assert_eq!(mesh.triangles.len(), 2);
        for n in &mesh.vertex_normals {
            assert!((n - Vec3::z()).norm() < 1e-12);
        }
    }

    #[test]
    fn inclined_plane_normals() {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                let (x, y) = (i as f64 * 0.01, j as f64 * 0.01 + 0.001 * i as f64);
                pts.push(Point3::new(x, y, x));
            }
        }
        let mesh = mesh_from_cloud(&PointCloud::new(pts)).unwrap();
        let expect = Vec3::new(-1.0, 0.0, 1.0).normalize();
        for n in &mesh.vertex_normals {
            assert!((n - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let line = PointCloud::new((0..10).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.0)).collect());
        assert!(matches!(mesh_from_cloud(&line), Err(Error::DegenerateCloud)));
        let dup = PointCloud::new(vec![Point3::zeros(); 5]);
        assert!(matches!(mesh_from_cloud(&dup), Err(Error::DegenerateCloud)));
    }

    #[test]
    fn crop_outside_is_empty() {
        let mesh = mesh_from_cloud(&planar_square()).unwrap();
        let far = RoiBox::new([1.0, 1.0], [2.0, 2.0]).unwrap();
        assert!(matches!(crop_roi(&mesh, &far), Err(Error::EmptyRoi)));
        let all = RoiBox::new([-1.0, -1.0], [1.0, 1.0]).unwrap();
        assert_eq!(crop_roi(&mesh, &all).unwrap().triangles.len(), 2);
    }

    #[test]
    fn cell_lookup_contract() {
        let mesh = mesh_from_cloud(&planar_square()).unwrap();
        let grid = interpolate_grid(&mesh, 0.0025, 0.0025).unwrap();
        assert_eq!((grid.nx, grid.ny), (5, 5));
        let (p, n) = cell_to_surface(&grid, 0, 0).unwrap();
        assert_eq!([p.x, p.y], grid.origin_xy);
        assert!((p.z - 0.1).abs() < 1e-12);
        assert!((n - Vec3::z()).norm() < 1e-12);
        assert!(matches!(
            cell_to_surface(&grid, 9, 0),
            Err(Error::InvalidCell { u: 9, v: 0 })
        ));
    }

    #[test]
    fn masked_cell_is_invalid() {
        // Triangle covering only the lower-left half of its bounding box.
        let tri = PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.01, 0.0, 0.0),
            Point3::new(0.0, 0.01, 0.0),
        ]);
        let mesh = mesh_from_cloud(&tri).unwrap();
        let grid = interpolate_grid(&mesh, 0.002, 0.002).unwrap();
        assert!(!grid.is_valid(Cell::new(5, 5)));
        assert!(matches!(
            cell_to_surface(&grid, 5, 5),
            Err(Error::InvalidCell { .. })
        ));
    }

    #[test]
    fn spacing_wider_than_mesh_is_too_coarse() {
        let mesh = mesh_from_cloud(&planar_square()).unwrap();
        assert!(matches!(
            interpolate_grid(&mesh, 0.05, 0.05),
            Err(Error::ResolutionTooCoarse { .. })
        ));
    }

    #[test]
    fn isolated_point_is_filtered() {
        let mut pts = Vec::new();
        for i in 0..30 {
            for j in 0..30 {
                pts.push(Point3::new(i as f64 * 0.002, j as f64 * 0.002, 0.05));
            }
        }
        pts.push(Point3::new(0.03, 0.03, 0.15));
        let out = preprocess_cloud(&PointCloud::new(pts), 0.001, 8, 2.0).unwrap();
        assert_eq!(out.len(), 900);
        assert!(out.points.iter().all(|p| (p.z - 0.05).abs() < 1e-12));
    }
}
