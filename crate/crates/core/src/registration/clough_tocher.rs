//! Clough–Tocher C1 piecewise-cubic interpolation on a planar triangulation.
//!
//! Each triangle is split at its centroid into three cubic Bézier patches.
//! Vertex values and gradients fix the corner and edge ordinates; the
//! cross-edge derivative is made linear along every edge, in the direction
//! joining the centroids of the two triangles sharing it, which keeps the
//! interpolant C1 and affine invariant. Boundary edges use the direction to
//! the own centroid.
//!
//! Vertex gradients are estimated by a least-squares quadratic fit over the
//! two-ring of each vertex, so quadratic data is reproduced exactly.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct CloughTocher {
    pts: Vec<[f64; 2]>,
    vals: Vec<f64>,
    grads: Vec<[f64; 2]>,
    tris: Vec<[usize; 3]>,
    /// Inverse of the affine map from barycentric (b1, b2) to XY, per triangle.
    inv: Vec<[[f64; 2]; 2]>,
    /// Cross-edge direction parameter for the edge opposite each vertex.
    g: Vec<[f64; 3]>,
}

impl CloughTocher {
    pub fn new(pts: Vec<[f64; 2]>, vals: Vec<f64>, tris: Vec<[usize; 3]>) -> Self {
        let inv = tris
            .iter()
            .map(|t| {
                let (p0, p1, p2) = (pts[t[0]], pts[t[1]], pts[t[2]]);
                let (a, b) = (p1[0] - p0[0], p2[0] - p0[0]);
                let (c, d) = (p1[1] - p0[1], p2[1] - p0[1]);
                let det = a * d - b * c;
                [[d / det, -b / det], [-c / det, a / det]]
            })
            .collect();
        let mut ct = CloughTocher {
            grads: vec![[0.0; 2]; pts.len()],
            pts,
            vals,
            tris,
            inv,
            g: Vec::new(),
        };
        ct.grads = ct.estimate_gradients();
        ct.g = ct.edge_directions();
        ct
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.tris
    }

    pub fn gradient(&self, vertex: usize) -> [f64; 2] {
        self.grads[vertex]
    }

    pub fn barycentric(&self, tri: usize, p: [f64; 2]) -> [f64; 3] {
        let p0 = self.pts[self.tris[tri][0]];
        let m = &self.inv[tri];
        let (rx, ry) = (p[0] - p0[0], p[1] - p0[1]);
        let b1 = m[0][0] * rx + m[0][1] * ry;
        let b2 = m[1][0] * rx + m[1][1] * ry;
        [1.0 - b1 - b2, b1, b2]
    }

    fn centroid(&self, tri: usize) -> [f64; 2] {
        let t = self.tris[tri];
        let mut c = [0.0; 2];
        for &i in &t {
            c[0] += self.pts[i][0];
            c[1] += self.pts[i][1];
        }
        [c[0] / 3.0, c[1] / 3.0]
    }

    fn edge_directions(&self) -> Vec<[f64; 3]> {
        let mut edge_owner: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (ti, t) in self.tris.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                edge_owner.entry((a.min(b), a.max(b))).or_default().push(ti);
            }
        }
        (0..self.tris.len())
            .map(|ti| {
                let t = self.tris[ti];
                let mut g = [-0.5; 3];
                for (k, gk) in g.iter_mut().enumerate() {
                    let (a, b) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                    let Some(nb) = edge_owner[&(a.min(b), a.max(b))]
                        .iter()
                        .copied()
                        .find(|&o| o != ti)
                    else {
                        continue;
                    };
                    let c = self.barycentric(ti, self.centroid(nb));
                    *gk = match k {
                        0 => (2.0 * c[2] + c[1] - 1.0) / (2.0 - 3.0 * c[2] - 3.0 * c[1]),
                        1 => (2.0 * c[0] + c[2] - 1.0) / (2.0 - 3.0 * c[0] - 3.0 * c[2]),
                        _ => (2.0 * c[1] + c[0] - 1.0) / (2.0 - 3.0 * c[1] - 3.0 * c[0]),
                    };
                }
                g
            })
            .collect()
    }

    fn estimate_gradients(&self) -> Vec<[f64; 2]> {
        let n = self.pts.len();
        let mut ring: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for t in &self.tris {
            for k in 0..3 {
                ring[t[k]].insert(t[(k + 1) % 3]);
                ring[t[k]].insert(t[(k + 2) % 3]);
            }
        }
        (0..n)
            .map(|i| {
                let mut hood: BTreeSet<usize> = ring[i].clone();
                for &j in &ring[i] {
                    hood.extend(ring[j].iter().copied());
                }
                hood.remove(&i);
                self.fit_gradient(i, &hood)
            })
            .collect()
    }

    fn fit_gradient(&self, i: usize, hood: &BTreeSet<usize>) -> [f64; 2] {
        let m = hood.len();
        if m < 2 {
            return [0.0, 0.0];
        }
        let p = self.pts[i];
        let f = self.vals[i];
        let scale = (hood
            .iter()
            .map(|&j| (self.pts[j][0] - p[0]).powi(2) + (self.pts[j][1] - p[1]).powi(2))
            .sum::<f64>()
            / m as f64)
            .sqrt();
        if scale <= 0.0 {
            return [0.0, 0.0];
        }
        let cols = if m >= 6 { 5 } else { 2 };
        let mut a = DMatrix::<f64>::zeros(m, cols);
        let mut rhs = DVector::<f64>::zeros(m);
        for (row, &j) in hood.iter().enumerate() {
            let dx = (self.pts[j][0] - p[0]) / scale;
            let dy = (self.pts[j][1] - p[1]) / scale;
            a[(row, 0)] = dx;
            a[(row, 1)] = dy;
            if cols == 5 {
                a[(row, 2)] = dx * dx;
                a[(row, 3)] = dx * dy;
                a[(row, 4)] = dy * dy;
            }
            rhs[row] = self.vals[j] - f;
        }
        match a.svd(true, true).solve(&rhs, 1e-12) {
            Ok(x) => [x[0] / scale, x[1] / scale],
            Err(_) => [0.0, 0.0],
        }
    }

    /// Evaluates the interpolant inside triangle `tri` at barycentric `b`.
    pub fn eval(&self, tri: usize, b: [f64; 3]) -> f64 {
        let t = self.tris[tri];
        let (p0, p1, p2) = (self.pts[t[0]], self.pts[t[1]], self.pts[t[2]]);
        let e12 = [p1[0] - p0[0], p1[1] - p0[1]];
        let e23 = [p2[0] - p1[0], p2[1] - p1[1]];
        let e31 = [p0[0] - p2[0], p0[1] - p2[1]];
        let dot = |g: [f64; 2], e: [f64; 2]| g[0] * e[0] + g[1] * e[1];
        let (g1, g2, g3) = (self.grads[t[0]], self.grads[t[1]], self.grads[t[2]]);
        let (f1, f2, f3) = (self.vals[t[0]], self.vals[t[1]], self.vals[t[2]]);

        let df12 = dot(g1, e12);
        let df21 = -dot(g2, e12);
        let df23 = dot(g2, e23);
        let df32 = -dot(g3, e23);
        let df31 = dot(g3, e31);
        let df13 = -dot(g1, e31);

        let c3000 = f1;
        let c2100 = (df12 + 3.0 * c3000) / 3.0;
        let c2010 = (df13 + 3.0 * c3000) / 3.0;
        let c0300 = f2;
        let c1200 = (df21 + 3.0 * c0300) / 3.0;
        let c0210 = (df23 + 3.0 * c0300) / 3.0;
        let c0030 = f3;
        let c1020 = (df31 + 3.0 * c0030) / 3.0;
        let c0120 = (df32 + 3.0 * c0030) / 3.0;

        let c2001 = (c2100 + c2010 + c3000) / 3.0;
        let c0201 = (c1200 + c0300 + c0210) / 3.0;
        let c0021 = (c1020 + c0120 + c0030) / 3.0;

        let g = self.g[tri];
        let c0111 = (g[0] * (-c0300 + 3.0 * c0210 - 3.0 * c0120 + c0030)
            + (-c0300 + 2.0 * c0210 - c0120 + c0021 + c0201))
            / 2.0;
        let c1011 = (g[1] * (-c0030 + 3.0 * c1020 - 3.0 * c2010 + c3000)
            + (-c0030 + 2.0 * c1020 - c2010 + c2001 + c0021))
            / 2.0;
        let c1101 = (g[2] * (-c3000 + 3.0 * c2100 - 3.0 * c1200 + c0300)
            + (-c3000 + 2.0 * c2100 - c1200 + c2001 + c0201))
            / 2.0;

        let c1002 = (c1101 + c1011 + c2001) / 3.0;
        let c0102 = (c1101 + c0111 + c0201) / 3.0;
        let c0012 = (c1011 + c0111 + c0021) / 3.0;
        let c0003 = (c1002 + c0102 + c0012) / 3.0;

        // Barycentrics with respect to the sub-triangle containing the point;
        // one of b1..b3 is zero.
        let minval = b[0].min(b[1]).min(b[2]);
        let b1 = b[0] - minval;
        let b2 = b[1] - minval;
        let b3 = b[2] - minval;
        let b4 = 3.0 * minval;

        b1.powi(3) * c3000
            + 3.0 * b1 * b1 * b2 * c2100
            + 3.0 * b1 * b1 * b3 * c2010
            + 3.0 * b1 * b1 * b4 * c2001
            + 3.0 * b1 * b2 * b2 * c1200
            + 6.0 * b1 * b2 * b4 * c1101
            + 3.0 * b1 * b3 * b3 * c1020
            + 6.0 * b1 * b3 * b4 * c1011
            + 3.0 * b1 * b4 * b4 * c1002
            + b2.powi(3) * c0300
            + 3.0 * b2 * b2 * b3 * c0210
            + 3.0 * b2 * b2 * b4 * c0201
            + 6.0 * b2 * b3 * b4 * c0111
            + 3.0 * b2 * b3 * b3 * c0120
            + 3.0 * b2 * b4 * b4 * c0102
            + b3.powi(3) * c0030
            + 3.0 * b3 * b3 * b4 * c0021
            + 3.0 * b3 * b4 * b4 * c0012
            + b4.powi(3) * c0003
    }
}
