//! Cartesian grids, RT0/P0 degrees of freedom and assembly of the global
//! flux-pressure system.

mod element;
mod grid;
mod system;

pub use element::{axis_coefficients, element_mass_matrix, ElementKind};
pub use grid::Grid;
pub use system::{Permeability, SaddleSystem, Wells};
