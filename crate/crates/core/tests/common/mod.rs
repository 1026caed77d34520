#![allow(dead_code)]

use darcy_bddc::decomposition::{Decomposition, ScalingKind};
use darcy_bddc::grid_fem::{Grid, SaddleSystem, Wells};
use darcy_bddc::io::{synthetic_field, SyntheticKind};
use darcy_bddc::solver::{ConstraintMode, SolveConfig};

pub struct Case {
    pub system: SaddleSystem,
    pub decomposition: Decomposition,
}

pub fn case(counts: &[usize], splits: &[usize], kind: SyntheticKind) -> Case {
    let dim = counts.len();
    let grid = Grid::new(dim, counts, &vec![1.0; dim]).unwrap();
    let perm = synthetic_field(&grid, &kind).unwrap();
    let system = SaddleSystem::assemble(&grid, &perm, Wells::corners(&grid)).unwrap();
    let decomposition = Decomposition::regular(&grid, splits).unwrap();
    Case { system, decomposition }
}

pub fn config(mode: ConstraintMode, tau: f64, scaling: ScalingKind, tol: f64) -> SolveConfig {
    SolveConfig { tau, scaling, tol, maxit: 5000, constraints: mode }
}

pub fn adaptive(tau: f64) -> SolveConfig {
    config(ConstraintMode::Adaptive, tau, ScalingKind::Multiplicity, 1e-6)
}

/// `||a - b|| / ||b||`.
pub fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n
}

pub fn log_uniform(seed: u64) -> SyntheticKind {
    SyntheticKind::LogUniform { orders: 6.0, seed }
}
