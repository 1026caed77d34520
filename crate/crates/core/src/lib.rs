//! Balancing domain decomposition by constraints (BDDC) for the lowest-order
//! Raviart–Thomas / piecewise-constant discretization of Darcy flow, with
//! adaptively enriched coarse spaces.
//!
//! The usual pipeline:
//!
//! ```no_run
//! use darcy_bddc::grid_fem::{Grid, Permeability, SaddleSystem, Wells};
//! use darcy_bddc::decomposition::Decomposition;
//! use darcy_bddc::solver::{Bddc, ConstraintMode, SolveConfig};
//!
//! let grid = Grid::new(2, &[60, 220], &[1.0, 1.0])?;
//! let perm = Permeability::uniform(&grid, 1.0)?;
//! let system = SaddleSystem::assemble(&grid, &perm, Wells::corners(&grid))?;
//! let dec = Decomposition::regular(&grid, &[2, 7])?;
//! let config = SolveConfig { tau: 10.0, constraints: ConstraintMode::Adaptive, ..Default::default() };
//! let report = Bddc::setup(&system, &dec, &config)?.solve(None)?;
//! println!("{} iterations, kappa {:.3}", report.iterations, report.kappa);
//! # Ok::<(), darcy_bddc::Error>(())
//! ```

pub mod adaptive;
pub mod cli;
pub mod coarse_space;
pub mod decomposition;
pub mod error;
pub mod grid_fem;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod solver;
pub mod substructure;

pub use error::{Error, Result};
