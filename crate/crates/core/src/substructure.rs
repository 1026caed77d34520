//! Per-subdomain operators: the interior saddle-point factorization, static
//! condensation to the interface and the Stokes-harmonic extension.
//!
//! Local flux numbering puts the interior dofs first, followed by the
//! interface dofs Gamma^i in the order of
//! [`Decomposition::subdomain_interface`]. Cells keep the ascending global
//! order of [`Decomposition::cells`].

use std::collections::HashMap;

use faer::Mat;
use rayon::prelude::*;

use crate::decomposition::Decomposition;
use crate::error::{Error, Result};
use crate::grid_fem::SaddleSystem;
use crate::linalg::{symmetrize, CsrMatrix, SparseLu};

#[derive(Debug)]
pub struct SubdomainOperator {
    id: usize,
    /// Global flux dof of every local flux dof.
    dofs: Vec<usize>,
    n_int: usize,
    cells: Vec<usize>,
    /// Local flux block `A^i`.
    a: CsrMatrix,
    /// Local scaled divergence `D B^i` (cells x local fluxes).
    b: CsrMatrix,
    /// Row `C_Q^i` (one entry per cell).
    mean_row: Vec<f64>,
    kkt: SparseLu,
}

impl SubdomainOperator {
    pub fn build(system: &SaddleSystem, decomposition: &Decomposition, id: usize) -> Result<Self> {
        let cells = decomposition.cells(id).to_vec();
        let gamma: Vec<usize> = decomposition
            .subdomain_interface(id)
            .iter()
            .map(|&k| decomposition.interface_dofs()[k])
            .collect();
        let mut interior: Vec<usize> = cells
            .iter()
            .flat_map(|&c| system.cell_dofs(c))
            .map(|(d, _)| d)
            .filter(|&d| decomposition.interface_index(d).is_none())
            .collect();
        interior.sort_unstable();
        interior.dedup();
        let n_int = interior.len();
        let dofs: Vec<usize> = interior.into_iter().chain(gamma).collect();
        let local: HashMap<usize, usize> = dofs.iter().enumerate().map(|(l, &g)| (g, l)).collect();

        let mut a_trip = Vec::new();
        let mut b_trip = Vec::new();
        for (lc, &c) in cells.iter().enumerate() {
            system.push_cell_mass(c, |r, s, v| a_trip.push((local[&r], local[&s], v)));
            let d = system.scale()[c];
            for (dof, entry) in system.cell_dofs(c) {
                b_trip.push((lc, local[&dof], d * entry));
            }
        }
        let n = dofs.len();
        let a = CsrMatrix::from_triplets(n, n, &a_trip);
        let b = CsrMatrix::from_triplets(cells.len(), n, &b_trip);

        // The mean row is scaled like B so the KKT pivots stay balanced.
        let d = system.scale()[cells[0]];
        let vref = system.grid().cell_volume();
        let mean_row: Vec<f64> = cells.iter().map(|&c| d * system.cell_volume(c) / vref).collect();

        let n_p = cells.len();
        let mut k = Vec::with_capacity(a.nnz() + 2 * b.nnz() + 2 * n_p);
        for (r, c, v) in a.triplets() {
            if r < n_int && c < n_int {
                k.push((r, c, v));
            }
        }
        for (r, c, v) in b.triplets() {
            if c < n_int {
                k.push((n_int + r, c, v));
                k.push((c, n_int + r, v));
            }
        }
        let m = n_int + n_p;
        for (lc, &v) in mean_row.iter().enumerate() {
            k.push((m, n_int + lc, v));
            k.push((n_int + lc, m, v));
        }
        let kkt = SparseLu::factor(m + 1, &k).map_err(|message| Error::NumericalFailure {
            subdomain: Some(id),
            message,
        })?;
        Ok(Self {
            id,
            dofs,
            n_int,
            cells,
            a,
            b,
            mean_row,
            kkt,
        })
    }

    /// Builds every subdomain operator in parallel.
    pub fn build_all(system: &SaddleSystem, decomposition: &Decomposition) -> Result<Vec<Self>> {
        (0..decomposition.n_subdomains())
            .into_par_iter()
            .map(|s| Self::build(system, decomposition, s))
            .collect()
    }

    pub fn id(&self) -> usize {
        self.id
    }

    /// Global flux dofs of the local numbering.
    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn n_local(&self) -> usize {
        self.dofs.len()
    }

    pub fn n_interior(&self) -> usize {
        self.n_int
    }

    pub fn n_gamma(&self) -> usize {
        self.dofs.len() - self.n_int
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn a(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn b(&self) -> &CsrMatrix {
        &self.b
    }

    pub fn mean_row(&self) -> &[f64] {
        &self.mean_row
    }

    /// 1-norm condition estimate of the interior KKT matrix.
    pub fn kkt_condest(&self) -> f64 {
        self.kkt.condest_symmetric()
    }

    /// Gathers the local values of a global flux vector.
    pub fn gather(&self, u: &[f64]) -> Vec<f64> {
        self.dofs.iter().map(|&d| u[d]).collect()
    }

    /// Solves the interior KKT system
    /// `A_II u + B_I^T p = g`, `B_I u + C_Q^T mu = h`, `C_Q p = 0`.
    pub fn interior_solve(&self, g: &[f64], h: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let n_p = self.cells.len();
        let mut rhs = Vec::with_capacity(self.n_int + n_p + 1);
        rhs.extend_from_slice(g);
        rhs.extend_from_slice(h);
        rhs.push(0.0);
        self.kkt.solve_in_place(&mut rhs);
        let mu = rhs[self.n_int + n_p];
        let p = rhs[self.n_int..self.n_int + n_p].to_vec();
        rhs.truncate(self.n_int);
        (rhs, p, mu)
    }

    /// Stokes-harmonic extension of interface values: the interior fluxes
    /// and local pressures.
    pub fn extend(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut full = vec![0.0; self.n_local()];
        full[self.n_int..].copy_from_slice(x);
        let ax = self.a.matvec(&full);
        let bx = self.b.matvec(&full);
        let g: Vec<f64> = ax[..self.n_int].iter().map(|v| -v).collect();
        let h: Vec<f64> = bx.iter().map(|v| -v).collect();
        let (w, p, _) = self.interior_solve(&g, &h);
        (w, p)
    }

    /// Full local flux vector of the extension of `x`.
    pub fn extend_full(&self, x: &[f64]) -> Vec<f64> {
        let (mut w, _) = self.extend(x);
        w.extend_from_slice(x);
        w
    }

    /// Interface part of `A^i u + (D B^i)^T p` for a full local flux `u`.
    pub fn interface_residual(&self, u: &[f64], p: &[f64]) -> Vec<f64> {
        let au = self.a.matvec(u);
        let btp = self.b.matvec_transpose(p);
        au[self.n_int..].iter().zip(&btp[self.n_int..]).map(|(a, b)| a + b).collect()
    }

    /// `S^i x`.
    pub fn schur_apply(&self, x: &[f64]) -> Vec<f64> {
        let (mut w, p) = self.extend(x);
        w.extend_from_slice(x);
        self.interface_residual(&w, &p)
    }

    /// Explicit `S^i`, assembled column by column and symmetrized.
    pub fn dense_schur(&self) -> Mat<f64> {
        let n = self.n_gamma();
        let n_p = self.cells.len();
        let m = self.n_int + n_p + 1;
        let mut rhs = Mat::<f64>::zeros(m, n);
        let mut e = vec![0.0; self.n_local()];
        for col in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[self.n_int + col] = 1.0;
            let ax = self.a.matvec(&e);
            let bx = self.b.matvec(&e);
            for r in 0..self.n_int {
                rhs[(r, col)] = -ax[r];
            }
            for r in 0..n_p {
                rhs[(self.n_int + r, col)] = -bx[r];
            }
        }
        self.kkt.solve_mat(&mut rhs);
        let mut s = Mat::<f64>::zeros(n, n);
        let mut u = vec![0.0; self.n_local()];
        for col in 0..n {
            for r in 0..self.n_int {
                u[r] = rhs[(r, col)];
            }
            for r in 0..n {
                u[self.n_int + r] = if r == col { 1.0 } else { 0.0 };
            }
            let p: Vec<f64> = (0..n_p).map(|r| rhs[(self.n_int + r, col)]).collect();
            let y = self.interface_residual(&u, &p);
            for r in 0..n {
                s[(r, col)] = y[r];
            }
        }
        symmetrize(&mut s);
        s
    }
}
