//! Face constraints from local two-subdomain Darcy solves, in the spirit of
//! multiscale mixed finite element basis functions.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::coarse_space::{ConstraintSet, Origin};
use crate::decomposition::Decomposition;
use crate::error::{Error, Result};
use crate::grid_fem::SaddleSystem;
use crate::linalg::SparseLu;

/// Source density weights of one side: uniform `1/|Omega|`, or the well
/// distribution when the subdomain has a net source.
fn side_weights(system: &SaddleSystem, cells: &[usize]) -> Vec<f64> {
    let total: f64 = cells.iter().map(|&c| system.sources()[c]).sum();
    let l1: f64 = cells.iter().map(|&c| system.sources()[c].abs()).sum();
    if l1 > 0.0 && total.abs() > 1e-12 * l1 {
        return cells.iter().map(|&c| system.sources()[c] / total).collect();
    }
    let vol: f64 = cells.iter().map(|&c| system.cell_volume(c)).sum();
    cells.iter().map(|&c| system.cell_volume(c) / vol).collect()
}

/// Rows for every component of the face `pair`: `(component, support, row)`
/// with the row given as the outward flux of `pair.0`.
pub fn multiscale_rows(
    system: &SaddleSystem,
    decomposition: &Decomposition,
    pair: (usize, usize),
) -> Result<Vec<(usize, Vec<usize>, Vec<f64>)>> {
    let (i, j) = pair;
    let face = decomposition
        .face(pair)
        .ok_or_else(|| Error::invalid(format!("subdomains {i} and {j} share no face")))?;
    let cells: Vec<usize> = decomposition.cells(i).iter().chain(decomposition.cells(j)).copied().collect();
    let cell_pos: HashMap<usize, usize> = cells.iter().enumerate().map(|(l, &c)| (c, l)).collect();
    let inside = |c: usize| cell_pos.contains_key(&c);

    let mut dofs: Vec<usize> = cells
        .iter()
        .flat_map(|&c| system.cell_dofs(c))
        .map(|(d, _)| d)
        .filter(|&d| system.dof_cells(d).iter().all(|&c| inside(c)))
        .collect();
    dofs.sort_unstable();
    dofs.dedup();
    let dof_pos: HashMap<usize, usize> = dofs.iter().enumerate().map(|(l, &d)| (d, l)).collect();
    let (n_u, n_p) = (dofs.len(), cells.len());

    let mut src = side_weights(system, decomposition.cells(i));
    src.extend(side_weights(system, decomposition.cells(j)).into_iter().map(|v| -v));
    let sum: f64 = src.iter().sum();
    if sum.abs() > 1e-12 * src.iter().map(|v| v.abs()).sum::<f64>() {
        return Err(Error::InternalConsistency(format!(
            "pair {pair:?}: local source does not sum to zero ({sum:e})"
        )));
    }

    let mut k = Vec::new();
    let mut diag_sum = 0.0;
    for &c in &cells {
        system.push_cell_mass(c, |r, s, v| {
            if let (Some(&lr), Some(&ls)) = (dof_pos.get(&r), dof_pos.get(&s)) {
                if lr == ls {
                    diag_sum += v;
                }
                k.push((lr, ls, v));
            }
        });
    }
    let d = if n_u > 0 { diag_sum / n_u as f64 } else { 1.0 };
    for (lc, &c) in cells.iter().enumerate() {
        for (dof, entry) in system.cell_dofs(c) {
            if let Some(&ld) = dof_pos.get(&dof) {
                k.push((n_u + lc, ld, d * entry));
                k.push((ld, n_u + lc, d * entry));
            }
        }
        let v = d * system.cell_volume(c) / system.grid().cell_volume();
        k.push((n_u + n_p, n_u + lc, v));
        k.push((n_u + lc, n_u + n_p, v));
    }
    let lu = SparseLu::factor(n_u + n_p + 1, &k).map_err(|message| Error::NumericalFailure {
        subdomain: Some(i),
        message: format!("pair {pair:?} local Darcy problem: {message}"),
    })?;
    let mut rhs = vec![0.0; n_u + n_p + 1];
    for l in 0..n_p {
        rhs[n_u + l] = -d * src[l];
    }
    lu.solve_in_place(&mut rhs);

    Ok(face
        .components
        .iter()
        .enumerate()
        .map(|(ci, comp)| {
            let support: Vec<usize> = comp.iter().map(|&dof| decomposition.interface_index(dof).unwrap()).collect();
            let row = comp
                .iter()
                .zip(&support)
                .map(|(&dof, &k)| {
                    let sign = if decomposition.interface_sides(k)[0] == i { 1.0 } else { -1.0 };
                    sign * rhs[dof_pos[&dof]]
                })
                .collect();
            (ci, support, row)
        })
        .collect())
}

/// Appends one multiscale row per face component (dependent rows are
/// dropped). Returns the number of rows added.
pub fn add_multiscale_constraints(
    system: &SaddleSystem,
    decomposition: &Decomposition,
    constraints: &mut ConstraintSet,
) -> Result<usize> {
    let all: Vec<_> = decomposition
        .faces()
        .par_iter()
        .map(|f| multiscale_rows(system, decomposition, f.pair).map(|r| (f.pair, r)))
        .collect::<Result<_>>()?;
    let mut added = 0;
    for (pair, rows) in all {
        for (ci, support, row) in rows {
            added += constraints.append(pair, &support, vec![row], Origin::Multiscale, Some(ci));
        }
    }
    Ok(added)
}
