//! Coarse degrees of freedom, energy-minimal coarse basis functions and the
//! coarse flux-pressure problem.
//!
//! Every flux coarse dof lives on one face `(i, j)`, `i < j`. Its values are
//! stored as the row of subdomain `i` over interface dofs; subdomain `j`
//! carries the negated row, so that with global (+axis) orientation the
//! constraint says `c . w^i = c . w^j`.

use faer::Mat;
use rayon::prelude::*;

use crate::decomposition::Decomposition;
use crate::error::{Error, Result};
use crate::linalg::{dot, DenseLu, SparseLu};
use crate::substructure::SubdomainOperator;

/// Where a coarse dof came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    Initial,
    Adaptive,
    Multiscale,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoarseDof {
    pub pair: (usize, usize),
    /// Face component for initial and multiscale rows.
    pub component: Option<usize>,
    pub origin: Origin,
    /// Interface indices of the support, ascending.
    pub support: Vec<usize>,
    /// Row of subdomain `pair.0`, aligned with `support`.
    pub values: Vec<f64>,
}

/// Relative tolerance of the linear-dependence filter.
pub const DEPENDENCE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Default)]
pub struct ConstraintSet {
    dofs: Vec<CoarseDof>,
}

impl ConstraintSet {
    /// Zero-net-flux constraint on every face component.
    pub fn initial(decomposition: &Decomposition) -> Self {
        let mut dofs = Vec::new();
        for face in decomposition.faces() {
            for (ci, comp) in face.components.iter().enumerate() {
                let support: Vec<usize> = comp.iter().map(|&d| decomposition.interface_index(d).unwrap()).collect();
                let values = support
                    .iter()
                    .map(|&k| if decomposition.interface_sides(k)[0] == face.pair.0 { 1.0 } else { -1.0 })
                    .collect();
                dofs.push(CoarseDof {
                    pair: face.pair,
                    component: Some(ci),
                    origin: Origin::Initial,
                    support,
                    values,
                });
            }
        }
        Self { dofs }
    }

    pub fn dofs(&self) -> &[CoarseDof] {
        &self.dofs
    }

    /// Number of flux coarse dofs.
    pub fn n_flux(&self) -> usize {
        self.dofs.len()
    }

    /// Coarse space size: flux coarse dofs plus one pressure per subdomain.
    pub fn n_coarse(&self, n_subdomains: usize) -> usize {
        self.dofs.len() + n_subdomains
    }

    pub fn count(&self, origin: Origin) -> usize {
        self.dofs.iter().filter(|d| d.origin == origin).count()
    }

    /// Coarse dofs of a pair, in insertion order.
    pub fn on_pair(&self, pair: (usize, usize)) -> impl Iterator<Item = &CoarseDof> {
        self.dofs.iter().filter(move |d| d.pair == pair)
    }

    /// Appends `rows` (each aligned with `support`, given as the row of
    /// `pair.0`) after dropping those linearly dependent on the rows already
    /// on the pair. Returns how many were added.
    pub fn append(
        &mut self,
        pair: (usize, usize),
        support: &[usize],
        rows: Vec<Vec<f64>>,
        origin: Origin,
        component: Option<usize>,
    ) -> usize {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let expand = |d: &CoarseDof| -> Vec<f64> {
            support
                .iter()
                .map(|k| d.support.binary_search(k).map_or(0.0, |p| d.values[p]))
                .collect()
        };
        for d in self.on_pair(pair) {
            let v = expand(d);
            if let Some(q) = orthogonalize(&basis, v) {
                basis.push(q);
            }
        }
        let mut added = 0;
        for row in rows {
            assert_eq!(row.len(), support.len());
            if let Some(q) = orthogonalize(&basis, row.clone()) {
                basis.push(q);
                self.dofs.push(CoarseDof {
                    pair,
                    component,
                    origin,
                    support: support.to_vec(),
                    values: row,
                });
                added += 1;
            }
        }
        // keep coarse numbering grouped by pair so runs are reproducible
        self.dofs.sort_by_key(|d| d.pair);
        added
    }

    /// Per subdomain: `(coarse dof, local sign)` of the rows it carries.
    pub fn subdomain_dofs(&self, n_subdomains: usize) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); n_subdomains];
        for (g, d) in self.dofs.iter().enumerate() {
            out[d.pair.0].push((g, 1.0));
            out[d.pair.1].push((g, -1.0));
        }
        out
    }
}

/// Two-pass modified Gram-Schmidt step; `None` when `v` is dependent.
fn orthogonalize(basis: &[Vec<f64>], mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n0 = dot(&v, &v).sqrt();
    if n0 == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for q in basis {
            let a = dot(q, &v);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= a * y);
        }
    }
    let n = dot(&v, &v).sqrt();
    if n <= DEPENDENCE_TOL * n0 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

/// Constrained local problem and coarse basis of one subdomain.
#[derive(Debug)]
pub struct LocalCoarse {
    /// `(coarse dof, sign)` per local constraint row.
    rows: Vec<(usize, f64)>,
    /// Local constraint rows over Gamma^i positions (dense).
    cmat: Mat<f64>,
    kkt: SparseLu,
    /// Columns are the local coarse basis functions (full local flux vectors).
    psi: Mat<f64>,
    n_local: usize,
    n_int: usize,
}

impl LocalCoarse {
    fn build(op: &SubdomainOperator, decomposition: &Decomposition, cs: &ConstraintSet, rows: Vec<(usize, f64)>) -> Result<Self> {
        let s = op.id();
        let gamma = decomposition.subdomain_interface(s);
        let (n_loc, n_int) = (op.n_local(), op.n_interior());
        let n_p = op.cells().len();
        let m = rows.len();
        let mut cmat = Mat::<f64>::zeros(m, gamma.len());
        for (r, &(g, sign)) in rows.iter().enumerate() {
            let d = &cs.dofs[g];
            for (&k, &v) in d.support.iter().zip(&d.values) {
                let pos = gamma.binary_search(&k).expect("constraint support outside Gamma^i");
                cmat[(r, pos)] = sign * v;
            }
        }
        let dependent = dependent_rows(&cmat);
        if !dependent.is_empty() {
            return Err(Error::ConstraintRank { subdomain: s, rows: dependent });
        }

        // [A B^T C^T 0; B 0 0 Cq^T; C 0 0 0; 0 Cq 0 0]
        let (op_p, op_l, op_m) = (n_loc, n_loc + n_p, n_loc + n_p + m);
        let dim = op_m + 1;
        let mut k = Vec::with_capacity(op.a().nnz() + 2 * op.b().nnz() + 2 * m * 4 + 2 * n_p);
        k.extend(op.a().triplets());
        for (r, c, v) in op.b().triplets() {
            k.push((op_p + r, c, v));
            k.push((c, op_p + r, v));
        }
        // Constraint rows are scaled to the magnitude of A so pivoting stays sane.
        let cscale = op.a().diag().iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for r in 0..m {
            for c in 0..gamma.len() {
                let v = cmat[(r, c)];
                if v != 0.0 {
                    k.push((op_l + r, n_int + c, cscale * v));
                    k.push((n_int + c, op_l + r, cscale * v));
                }
            }
        }
        for (lc, &v) in op.mean_row().iter().enumerate() {
            k.push((op_m, op_p + lc, v));
            k.push((op_p + lc, op_m, v));
        }
        let kkt = SparseLu::factor(dim, &k).map_err(|message| Error::NumericalFailure {
            subdomain: Some(s),
            message: format!("constrained local problem: {message}"),
        })?;
        let mut rhs = Mat::<f64>::zeros(dim, m);
        for r in 0..m {
            rhs[(op_l + r, r)] = cscale;
        }
        kkt.solve_mat(&mut rhs);
        let psi = Mat::from_fn(n_loc, m, |i, j| rhs[(i, j)]);
        Ok(Self {
            rows,
            cmat,
            kkt,
            psi,
            n_local: n_loc,
            n_int,
        })
    }

    pub fn rows(&self) -> &[(usize, f64)] {
        &self.rows
    }

    /// Local constraint matrix `C_U^i` over Gamma^i.
    pub fn constraint_matrix(&self) -> &Mat<f64> {
        &self.cmat
    }

    /// Local coarse basis `Psi_i` (full local flux vectors as columns).
    pub fn psi(&self) -> &Mat<f64> {
        &self.psi
    }

    /// Solves the constrained problem with zero constraint values and the
    /// given interface load; returns the full local flux vector.
    pub fn constrained_solve(&self, load_gamma: &[f64]) -> Vec<f64> {
        let dim = self.kkt.dim();
        let mut rhs = vec![0.0; dim];
        rhs[self.n_int..self.n_local].copy_from_slice(load_gamma);
        self.kkt.solve_in_place(&mut rhs);
        rhs.truncate(self.n_local);
        rhs
    }

    /// Local restriction of the coarse function with coefficients `w`.
    pub fn coarse_function(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_local];
        for (col, &(g, sign)) in self.rows.iter().enumerate() {
            let a = sign * w[g];
            if a != 0.0 {
                for (r, o) in out.iter_mut().enumerate() {
                    *o += a * self.psi[(r, col)];
                }
            }
        }
        out
    }

    /// Adds `Psi_i^T` applied to a local interface vector into `acc`.
    pub fn restrict_to_coarse(&self, load_gamma: &[f64], acc: &mut [f64]) {
        for (col, &(g, sign)) in self.rows.iter().enumerate() {
            let v: f64 = load_gamma.iter().enumerate().map(|(r, x)| x * self.psi[(self.n_int + r, col)]).sum();
            acc[g] += sign * v;
        }
    }
}

/// Indices of rows that are linearly dependent on earlier rows.
pub fn dependent_rows(c: &Mat<f64>) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::new();
    for r in 0..c.nrows() {
        let v: Vec<f64> = (0..c.ncols()).map(|j| c[(r, j)]).collect();
        match orthogonalize(&basis, v) {
            Some(q) => basis.push(q),
            None => out.push(r),
        }
    }
    out
}

/// The coarse space: local bases plus the factored coarse saddle matrix
/// `[S_Pi B_0^T; B_0 0]` with the pressure of subdomain 0 pinned.
#[derive(Debug)]
pub struct CoarseSpace {
    locals: Vec<LocalCoarse>,
    n_flux: usize,
    n_sub: usize,
    s_pi: Mat<f64>,
    b0: Mat<f64>,
    volumes: Vec<f64>,
    lu: DenseLu,
}

impl CoarseSpace {
    pub fn build(subs: &[SubdomainOperator], decomposition: &Decomposition, cs: &ConstraintSet) -> Result<Self> {
        let n_sub = decomposition.n_subdomains();
        let n_flux = cs.n_flux();
        let rows = cs.subdomain_dofs(n_sub);
        let locals: Vec<LocalCoarse> = subs
            .par_iter()
            .zip(rows.into_par_iter())
            .map(|(op, r)| LocalCoarse::build(op, decomposition, cs, r))
            .collect::<Result<_>>()?;

        let mut s_pi = Mat::<f64>::zeros(n_flux, n_flux);
        let mut b0 = Mat::<f64>::zeros(n_sub, n_flux);
        for (op, lc) in subs.iter().zip(&locals) {
            let s = op.id();
            let m = lc.rows.len();
            let cols: Vec<Vec<f64>> = (0..m).map(|c| (0..lc.n_local).map(|r| lc.psi[(r, c)]).collect()).collect();
            let acols: Vec<Vec<f64>> = cols.iter().map(|v| op.a().matvec(v)).collect();
            for (a, &(ga, sa)) in lc.rows.iter().enumerate() {
                for (b, &(gb, sb)) in lc.rows.iter().enumerate() {
                    s_pi[(ga, gb)] += sa * sb * dot(&cols[a], &acols[b]);
                }
                let div: f64 = op.b().matvec(&cols[a]).iter().sum();
                b0[(s, ga)] += sa * div;
            }
        }
        crate::linalg::symmetrize(&mut s_pi);
        let volumes: Vec<f64> = (0..n_sub).map(|s| decomposition.cells(s).len() as f64).collect();

        let dim = n_flux + n_sub - 1;
        let mut k = Mat::<f64>::zeros(dim, dim);
        for i in 0..n_flux {
            for j in 0..n_flux {
                k[(i, j)] = s_pi[(i, j)];
            }
            for s in 1..n_sub {
                k[(n_flux + s - 1, i)] = b0[(s, i)];
                k[(i, n_flux + s - 1)] = b0[(s, i)];
            }
        }
        let lu = DenseLu::factor(&k).map_err(|e| {
            Error::Configuration(format!(
                "coarse problem is singular ({e}); every face needs at least one flux coarse dof"
            ))
        })?;
        Ok(Self {
            locals,
            n_flux,
            n_sub,
            s_pi,
            b0,
            volumes,
            lu,
        })
    }

    pub fn local(&self, s: usize) -> &LocalCoarse {
        &self.locals[s]
    }

    pub fn n_flux(&self) -> usize {
        self.n_flux
    }

    pub fn s_pi(&self) -> &Mat<f64> {
        &self.s_pi
    }

    pub fn b0(&self) -> &Mat<f64> {
        &self.b0
    }

    /// Solves `S_Pi w + B_0^T p0 = g`, `B_0 w = h`. `h` must be consistent
    /// (its first row is implied by the others). `p0` is returned with zero
    /// volume-weighted mean.
    pub fn solve(&self, g: &[f64], h: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut rhs: Vec<f64> = g.to_vec();
        rhs.extend_from_slice(&h[1..]);
        let x = self.lu.solve(&rhs);
        let w = x[..self.n_flux].to_vec();
        let mut p0 = vec![0.0];
        p0.extend_from_slice(&x[self.n_flux..]);
        let vol: f64 = self.volumes.iter().sum();
        let mean = p0.iter().zip(&self.volumes).map(|(p, v)| p * v).sum::<f64>() / vol;
        p0.iter_mut().for_each(|p| *p -= mean);
        debug_assert_eq!(p0.len(), self.n_sub);
        (w, p0)
    }
}
