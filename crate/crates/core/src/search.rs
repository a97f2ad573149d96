//! Gaussian-process stiffness model over grid cells and the acquisition
//! rules that pick the next palpation cell.
//!
//! The kernel is squared-exponential in cell coordinates,
//! `k(a, b) = signal_var · exp(-|a - b|² / (2 ℓ²))` with ℓ in cells.
//! The prior mean is the mean of the observed stiffnesses, so far from all
//! samples the posterior relaxes to the sample mean with variance
//! `signal_var`. Variances are variances throughout; σ denotes the
//! posterior standard deviation.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::registration::{Cell, SurfaceGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StiffnessSample {
    pub cell: Cell,
    pub k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpHyper {
    /// Kernel length scale in cells.
    pub length_scale: f64,
    /// Prior variance, (N/m)².
    pub signal_var: f64,
    /// Observation noise variance, (N/m)².
    pub noise_var: f64,
}

impl Default for GpHyper {
    fn default() -> Self {
        GpHyper {
            length_scale: 3.0,
            signal_var: 1.0e4,
            noise_var: 25.0,
        }
    }
}

impl GpHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0) || !(self.signal_var > 0.0) || !(self.noise_var >= 0.0) {
            return Err(Error::ConfigInvalid(format!("bad GP hyperparameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acquisition {
    pub xi: f64,
    pub best_k: f64,
}

#[derive(Debug, Clone)]
pub struct GpModel {
    samples: Vec<StiffnessSample>,
    hyper: GpHyper,
    prior_mean: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

fn cell_sqdist(a: Cell, b: Cell) -> f64 {
    let du = a.u as f64 - b.u as f64;
    let dv = a.v as f64 - b.v as f64;
    du * du + dv * dv
}

impl GpHyper {
    pub fn kernel(&self, a: Cell, b: Cell) -> f64 {
        self.signal_var * (-cell_sqdist(a, b) / (2.0 * self.length_scale * self.length_scale)).exp()
    }
}

/// Fits the GP. Repeated cells are merged into one sample holding their
/// mean stiffness.
pub fn gp_fit(samples: &[StiffnessSample], hyper: &GpHyper) -> Result<GpModel> {
    hyper.validate()?;
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut merged: BTreeMap<Cell, (f64, usize)> = BTreeMap::new();
    for s in samples {
        let e = merged.entry(s.cell).or_insert((0.0, 0));
        e.0 += s.k;
        e.1 += 1;
    }
    let samples: Vec<StiffnessSample> = merged
        .into_iter()
        .map(|(cell, (sum, n))| StiffnessSample {
            cell,
            k: sum / n as f64,
        })
        .collect();
    let n = samples.len();
    let prior_mean = samples.iter().map(|s| s.k).sum::<f64>() / n as f64;
    let mut k = DMatrix::from_fn(n, n, |i, j| hyper.kernel(samples[i].cell, samples[j].cell));
    for i in 0..n {
        k[(i, i)] += hyper.noise_var;
    }
    let chol = match Cholesky::new(k.clone()) {
        Some(c) => c,
        None => {
            for i in 0..n {
                k[(i, i)] += 1e-10 * hyper.signal_var;
            }
            Cholesky::new(k).ok_or(Error::SingularKernel)?
        }
    };
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.k - prior_mean));
    let alpha = chol.solve(&y);
    Ok(GpModel {
        samples,
        hyper: *hyper,
        prior_mean,
        chol,
        alpha,
    })
}

impl GpModel {
    pub fn samples(&self) -> &[StiffnessSample] {
        &self.samples
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    /// Largest observed (merged) stiffness.
    pub fn best_k(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.k)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Posterior mean and variance at `cell`.
    pub fn predict(&self, cell: Cell) -> (f64, f64) {
        let kstar = DVector::from_iterator(
            self.samples.len(),
            self.samples.iter().map(|s| self.hyper.kernel(cell, s.cell)),
        );
        let mu = self.prior_mean + kstar.dot(&self.alpha);
        let w = self.chol.solve(&kstar);
        let var = (self.hyper.signal_var - kstar.dot(&w)).max(0.0);
        (mu, var)
    }
}

pub fn gp_predict(gp: &GpModel, cell: Cell) -> (f64, f64) {
    gp.predict(cell)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Closed-form EI for a Gaussian with mean `mu` and standard deviation
/// `sigma`, improving on `best_k + xi`.
pub fn ei_gaussian(mu: f64, sigma: f64, best_k: f64, xi: f64) -> f64 {
    let gain = mu - best_k - xi;
    if sigma <= 0.0 {
        return gain.max(0.0);
    }
    let z = gain / sigma;
    (gain * std_normal_cdf(z) + sigma * std_normal_pdf(z)).max(0.0)
}

pub fn expected_improvement(gp: &GpModel, cell: Cell, acq: &Acquisition) -> f64 {
    let (mu, var) = gp.predict(cell);
    ei_gaussian(mu, var.sqrt(), acq.best_k, acq.xi)
}

fn unvisited<'a>(
    grid: &'a SurfaceGrid,
    visited: &'a BTreeSet<Cell>,
) -> impl Iterator<Item = Cell> + 'a {
    grid.valid_cells().filter(move |c| !visited.contains(c))
}

/// Cell of maximal EI among unvisited valid cells. Cells whose EI is within
/// a relative 1e-12 of the maximum are treated as tied and one is drawn
/// uniformly.
pub fn next_cell_bo<R: Rng + ?Sized>(
    gp: &GpModel,
    grid: &SurfaceGrid,
    visited: &BTreeSet<Cell>,
    acq: &Acquisition,
    rng: &mut R,
) -> Result<Cell> {
    let scored: Vec<(Cell, f64)> = unvisited(grid, visited)
        .map(|c| (c, expected_improvement(gp, c, acq)))
        .collect();
    if scored.is_empty() {
        return Err(Error::Exhausted);
    }
    let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * best.abs();
    let ties: Vec<Cell> = scored
        .iter()
        .filter(|s| s.1 >= best - tol)
        .map(|s| s.0)
        .collect();
    Ok(ties[rng.random_range(0..ties.len())])
}

/// Uniform draw over unvisited valid cells.
pub fn next_cell_random<R: Rng + ?Sized>(
    grid: &SurfaceGrid,
    visited: &BTreeSet<Cell>,
    rng: &mut R,
) -> Result<Cell> {
    let candidates: Vec<Cell> = unvisited(grid, visited).collect();
    if candidates.is_empty() {
        return Err(Error::Exhausted);
    }
    Ok(candidates[rng.random_range(0..candidates.len())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hyper(noise_var: f64) -> GpHyper {
        GpHyper {
            noise_var,
            ..GpHyper::default()
        }
    }

    #[test]
    fn single_noise_free_sample_is_interpolated() {
        let s = [StiffnessSample {
            cell: Cell::new(2, 3),
            k: 500.0,
        }];
        let gp = gp_fit(&s, &hyper(0.0)).unwrap();
        let (mu, var) = gp.predict(Cell::new(2, 3));
        assert!((mu - 500.0).abs() < 1e-9);
        assert!(var <= 1e-9);
    }

    #[test]
    fn no_samples_is_an_error() {
        assert!(matches!(gp_fit(&[], &hyper(0.0)), Err(Error::NoSamples)));
    }

    #[test]
    fn far_cell_relaxes_to_prior() {
        let s = [
            StiffnessSample { cell: Cell::new(0, 0), k: 300.0 },
            StiffnessSample { cell: Cell::new(1, 0), k: 500.0 },
        ];
        let gp = gp_fit(&s, &hyper(1.0)).unwrap();
        let (mu, var) = gp.predict(Cell::new(200, 200));
        assert!((mu - 400.0).abs() < 1e-6);
        assert!((var - 1e4).abs() < 1e-6);
    }

    #[test]
    fn duplicates_are_averaged() {
        let s = [
            StiffnessSample { cell: Cell::new(1, 1), k: 100.0 },
            StiffnessSample { cell: Cell::new(1, 1), k: 300.0 },
        ];
        let gp = gp_fit(&s, &hyper(0.0)).unwrap();
        assert_eq!(gp.samples().len(), 1);
        assert!((gp.predict(Cell::new(1, 1)).0 - 200.0).abs() < 1e-9);
    }

    #[test]
    fn ei_closed_forms() {
        assert_eq!(ei_gaussian(1.0, 0.0, 2.0, 0.0), 0.0);
        assert_eq!(ei_gaussian(3.0, 0.0, 2.0, 0.5), 0.5);
        assert!((ei_gaussian(2.0, 1.0, 2.0, 0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn random_choice_is_seeded() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let grid = tiny_grid(5, 5);
            let visited = BTreeSet::new();
            (0..10)
                .map(|_| next_cell_random(&grid, &visited, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
    }

    fn tiny_grid(nx: usize, ny: usize) -> SurfaceGrid {
        SurfaceGrid {
            origin_xy: [0.0, 0.0],
            dx: 1.0,
            dy: 1.0,
            nx,
            ny,
            height: vec![0.0; nx * ny],
            normal: vec![crate::Vec3::z(); nx * ny],
            valid_mask: vec![true; nx * ny],
        }
    }

    #[test]
    fn exhausted_when_everything_is_visited() {
        let grid = tiny_grid(2, 2);
        let visited: BTreeSet<Cell> = grid.valid_cells().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            next_cell_random(&grid, &visited, &mut rng),
            Err(Error::Exhausted)
        ));
        let gp = gp_fit(
            &[StiffnessSample { cell: Cell::new(0, 0), k: 1.0 }],
            &hyper(1.0),
        )
        .unwrap();
        let acq = Acquisition { xi: 0.0, best_k: 1.0 };
        assert!(matches!(
            next_cell_bo(&gp, &grid, &visited, &acq, &mut rng),
            Err(Error::Exhausted)
        ));
    }
}
