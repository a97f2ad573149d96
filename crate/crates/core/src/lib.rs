//! Simulated tactile palpation for sub-dermal tumor reconstruction.
//!
//! The pipeline runs in four stages, each in its own module:
//!
//! * [`registration`] turns a depth-camera point cloud into a cropped surface
//!   mesh and a uniform, cubic-interpolated surface grid.
//! * [`search`] models probed stiffness over grid cells with a Gaussian
//!   process and picks the next palpation cell by Expected Improvement
//!   (or uniformly at random for the baseline).
//! * [`palpation`] drives a Cartesian point-probe plant against the
//!   [`phantom`]: discrete indentation with stiffness classification, then
//!   impedance-controlled contour following along the buried tumor.
//! * [`recon`] harvests contact points from the trajectories and scores them
//!   against ground truth with the F-score.
//!
//! [`calibration`] holds the load-cell offset and tip-weight compensation
//! used by the simulated sensor path, and [`experiment`] wires everything
//! into a seeded, file-producing harness.

pub mod calibration;
pub mod cloud;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod kdtree;
pub mod palpation;
pub mod phantom;
pub mod ply;
pub mod recon;
pub mod registration;
pub mod search;

pub use error::{Error, Result};
pub use geometry::{Point3, RoiBox, Vec2, Vec3};
