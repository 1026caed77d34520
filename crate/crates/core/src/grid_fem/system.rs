use crate::decomposition::Decomposition;
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

use super::element::{axis_coefficients, ElementKind};
use super::grid::Grid;

const NO_DOF: usize = usize::MAX;

/// Per-cell permeability, `dim` values per cell (kx, ky[, kz]).
#[derive(Clone, Debug, PartialEq)]
pub struct Permeability {
    dim: usize,
    values: Vec<f64>,
}

impl Permeability {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::invalid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if values.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "permeability length {} is not a multiple of {dim}",
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!(
                "permeability of cell {} must be positive and finite, got {v}",
                i / dim
            )));
        }
        Ok(Self { dim, values })
    }

    pub fn uniform(grid: &Grid, k: f64) -> Result<Self> {
        Self::new(grid.dim(), vec![k; grid.n_cells() * grid.dim()])
    }

    /// Same value along every axis of a cell.
    pub fn isotropic(dim: usize, per_cell: &[f64]) -> Result<Self> {
        Self::new(dim, per_cell.iter().flat_map(|&k| std::iter::repeat(k).take(dim)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        &self.values[c * self.dim..(c + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One injector and one producer of equal strength.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wells {
    pub source: usize,
    pub sink: usize,
    pub strength: f64,
}

impl Wells {
    pub fn corners(grid: &Grid) -> Self {
        Self {
            source: 0,
            sink: grid.n_cells() - 1,
            strength: 1.0,
        }
    }

    /// Integrated source density per cell (`+strength` at the injector).
    pub fn sources(&self, n_cells: usize) -> Result<Vec<f64>> {
        if self.source >= n_cells || self.sink >= n_cells {
            return Err(Error::invalid(format!(
                "well cells ({}, {}) out of range for {n_cells} cells",
                self.source, self.sink
            )));
        }
        if !self.strength.is_finite() {
            return Err(Error::invalid("well strength must be finite"));
        }
        let mut s = vec![0.0; n_cells];
        s[self.source] += self.strength;
        s[self.sink] -= self.strength;
        Ok(s)
    }
}

/// Global mixed system
///
/// ```text
/// [ A    B^T D ] [ u    ]   [ 0   ]
/// [ D B  0     ] [ pbar ] = [ D f ]
/// ```
///
/// with boundary fluxes eliminated. `D` is identity until [`SaddleSystem::rescale`].
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    grid: Grid,
    perm: Permeability,
    element: ElementKind,
    face_dof: Vec<usize>,
    dof_face: Vec<usize>,
    dof_cells: Vec<[usize; 2]>,
    cell_coef: Vec<[f64; 3]>,
    a: CsrMatrix,
    b: CsrMatrix,
    f: Vec<f64>,
    scale: Vec<f64>,
    b_scaled: CsrMatrix,
    f_scaled: Vec<f64>,
    sources: Vec<f64>,
}

impl SaddleSystem {
    /// Assembles with the default exact element and one source/sink pair.
    pub fn assemble(grid: &Grid, perm: &Permeability, wells: Wells) -> Result<Self> {
        let sources = wells.sources(grid.n_cells())?;
        Self::assemble_with_sources(grid, perm, ElementKind::Exact, &sources)
    }

    /// `sources[c]` is the integral of the source density over cell `c`.
    pub fn assemble_with_sources(
        grid: &Grid,
        perm: &Permeability,
        element: ElementKind,
        sources: &[f64],
    ) -> Result<Self> {
        let n_cells = grid.n_cells();
        if perm.dim() != grid.dim() || perm.n_cells() != n_cells {
            return Err(Error::invalid(format!(
                "permeability has {} cells in {}D, grid has {n_cells} in {}D",
                perm.n_cells(),
                perm.dim(),
                grid.dim()
            )));
        }
        if sources.len() != n_cells {
            return Err(Error::invalid(format!("expected {n_cells} source values, got {}", sources.len())));
        }
        let l1: f64 = sources.iter().map(|v| v.abs()).sum();
        let sum: f64 = sources.iter().sum();
        let tol = 1e-12 * l1;
        if sum.abs() > tol {
            return Err(Error::CompatibilityViolation { sum, tol });
        }

        let mut face_dof = vec![NO_DOF; grid.n_faces()];
        let mut dof_face = Vec::with_capacity(grid.n_interior_faces());
        let mut dof_cells = Vec::with_capacity(grid.n_interior_faces());
        for face in 0..grid.n_faces() {
            if let (Some(n), Some(p)) = grid.face_cells(face) {
                face_dof[face] = dof_face.len();
                dof_face.push(face);
                dof_cells.push([n, p]);
            }
        }
        let n_u = dof_face.len();

        let cell_coef = (0..n_cells)
            .map(|c| axis_coefficients(grid.sizes(), perm.cell(c)))
            .collect::<Result<Vec<_>>>()?;

        let mut sys = Self {
            grid: grid.clone(),
            perm: perm.clone(),
            element,
            face_dof,
            dof_face,
            dof_cells,
            cell_coef,
            a: CsrMatrix::from_triplets(0, 0, &[]),
            b: CsrMatrix::from_triplets(0, 0, &[]),
            f: sources.iter().map(|s| -s).collect(),
            scale: vec![1.0; n_cells],
            b_scaled: CsrMatrix::from_triplets(0, 0, &[]),
            f_scaled: Vec::new(),
            sources: sources.to_vec(),
        };

        let mut a_trip = Vec::with_capacity(n_cells * 4 * grid.dim());
        let mut b_trip = Vec::with_capacity(n_cells * 2 * grid.dim());
        for c in 0..n_cells {
            sys.push_cell_mass(c, |r, s, v| a_trip.push((r, s, v)));
            for (dof, sign) in sys.cell_dofs(c) {
                b_trip.push((c, dof, sign));
            }
        }
        sys.a = CsrMatrix::from_triplets(n_u, n_u, &a_trip);
        sys.b = CsrMatrix::from_triplets(n_cells, n_u, &b_trip);
        sys.b_scaled = sys.b.clone();
        sys.f_scaled = sys.f.clone();
        Ok(sys)
    }

    /// Returns a copy whose pressure block is scaled per subdomain by the
    /// mean diagonal of `A` over the flux dofs touching the subdomain.
    pub fn rescale(&self, decomposition: &Decomposition) -> Result<Self> {
        if decomposition.n_cells() != self.n_cells() {
            return Err(Error::invalid("decomposition does not match the grid"));
        }
        let diag = self.a.diag();
        let n_sub = decomposition.n_subdomains();
        let mut sum = vec![0.0; n_sub];
        let mut cnt = vec![0usize; n_sub];
        for (dof, cells) in self.dof_cells.iter().enumerate() {
            let (i, j) = (decomposition.owner(cells[0]), decomposition.owner(cells[1]));
            sum[i] += diag[dof];
            cnt[i] += 1;
            if j != i {
                sum[j] += diag[dof];
                cnt[j] += 1;
            }
        }
        // A subdomain without flux dofs (single cell grid) keeps unit scaling.
        let d: Vec<f64> = (0..n_sub)
            .map(|i| if cnt[i] > 0 { sum[i] / cnt[i] as f64 } else { 1.0 })
            .collect();
        let scale: Vec<f64> = (0..self.n_cells()).map(|c| d[decomposition.owner(c)]).collect();
        Ok(self.with_scale(scale))
    }

    /// Replaces the pressure scaling with an explicit per-cell diagonal.
    pub fn with_scale(&self, scale: Vec<f64>) -> Self {
        assert_eq!(scale.len(), self.n_cells());
        let mut out = self.clone();
        out.b_scaled = self.b.scale_rows(&scale);
        out.f_scaled = self.f.iter().zip(&scale).map(|(f, d)| f * d).collect();
        out.scale = scale;
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn permeability(&self) -> &Permeability {
        &self.perm
    }

    pub fn element_kind(&self) -> ElementKind {
        self.element
    }

    pub fn n_flux(&self) -> usize {
        self.dof_face.len()
    }

    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    /// Flux block `A`.
    pub fn a(&self) -> &CsrMatrix {
        &self.a
    }

    /// Unscaled divergence block `B` (entries `-outward sign`).
    pub fn b(&self) -> &CsrMatrix {
        &self.b
    }

    /// `D B`.
    pub fn b_scaled(&self) -> &CsrMatrix {
        &self.b_scaled
    }

    /// Unscaled right-hand side, `f_c = -(integrated source over c)`.
    pub fn f(&self) -> &[f64] {
        &self.f
    }

    /// `D f`.
    pub fn f_scaled(&self) -> &[f64] {
        &self.f_scaled
    }

    /// Integrated source density per cell.
    pub fn sources(&self) -> &[f64] {
        &self.sources
    }

    /// Pressure scaling `D` per cell.
    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn cell_volume(&self, _cell: usize) -> f64 {
        self.grid.cell_volume()
    }

    pub fn face_dof(&self, face: usize) -> Option<usize> {
        let d = self.face_dof[face];
        (d != NO_DOF).then_some(d)
    }

    pub fn dof_face(&self, dof: usize) -> usize {
        self.dof_face[dof]
    }

    /// `[negative-side cell, positive-side cell]` of a flux dof.
    pub fn dof_cells(&self, dof: usize) -> [usize; 2] {
        self.dof_cells[dof]
    }

    /// Outward-normal sign of `dof` seen from `cell` (+1 when the cell is on
    /// the negative side, since dofs are oriented along +axis).
    pub fn outward_sign(&self, dof: usize, cell: usize) -> f64 {
        let [n, p] = self.dof_cells[dof];
        if cell == n {
            1.0
        } else if cell == p {
            -1.0
        } else {
            panic!("cell {cell} does not touch dof {dof}")
        }
    }

    /// Non-boundary faces of a cell as `(dof, B entry)`; the entry is the
    /// negated outward sign.
    pub fn cell_dofs(&self, cell: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(2 * self.grid.dim());
        for axis in 0..self.grid.dim() {
            for (plus, entry) in [(false, 1.0), (true, -1.0)] {
                if let Some(d) = self.face_dof(self.grid.cell_face(cell, axis, plus)) {
                    out.push((d, entry));
                }
            }
        }
        out
    }

    /// Element coefficients `c_axis` of a cell (see [`axis_coefficients`]).
    pub fn cell_coefficients(&self, cell: usize) -> [f64; 3] {
        self.cell_coef[cell]
    }

    /// Emits the non-boundary entries of the element mass matrix of `cell`.
    pub fn push_cell_mass(&self, cell: usize, mut push: impl FnMut(usize, usize, f64)) {
        let c = self.cell_coef[cell];
        for axis in 0..self.grid.dim() {
            let lo = self.face_dof(self.grid.cell_face(cell, axis, false));
            let hi = self.face_dof(self.grid.cell_face(cell, axis, true));
            let (diag, off) = match self.element {
                ElementKind::Exact => (2.0 * c[axis], c[axis]),
                ElementKind::Lumped => (3.0 * c[axis], 0.0),
            };
            if let Some(l) = lo {
                push(l, l, diag);
            }
            if let Some(h) = hi {
                push(h, h, diag);
            }
            if let (Some(l), Some(h), true) = (lo, hi, off != 0.0) {
                push(l, h, off);
                push(h, l, off);
            }
        }
    }

    /// Diagonal entry of the element matrix of `cell` at its face `dof`.
    pub fn cell_mass_diag(&self, cell: usize, dof: usize) -> f64 {
        let face = self.dof_face[dof];
        let (axis, _) = self.grid.face_position(face);
        let c = self.cell_coef[cell][axis];
        match self.element {
            ElementKind::Exact => 2.0 * c,
            ElementKind::Lumped => 3.0 * c,
        }
    }

    /// Shifts `p` by a constant so that its volume-weighted mean is zero.
    pub fn center_pressure(&self, p: &mut [f64]) {
        let vol: f64 = (0..p.len()).map(|c| self.cell_volume(c)).sum();
        let mean = p.iter().enumerate().map(|(c, v)| v * self.cell_volume(c)).sum::<f64>() / vol;
        p.iter_mut().for_each(|v| *v -= mean);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::Decomposition;

    fn unit(nx: usize, ny: usize) -> (Grid, Permeability) {
        let g = Grid::new(2, &[nx, ny], &[1.0, 1.0]).unwrap();
        let k = Permeability::uniform(&g, 1.0).unwrap();
        (g, k)
    }

    #[test]
    fn two_cells_one_dof() {
        let (g, k) = unit(2, 1);
        let s = SaddleSystem::assemble(&g, &k, Wells::corners(&g)).unwrap();
        assert_eq!(s.n_flux(), 1);
        assert!((s.a().get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.b().get(0, 0), -1.0);
        assert_eq!(s.b().get(1, 0), 1.0);
        assert_eq!(s.f(), &[-1.0, 1.0]);
        assert_eq!(s.f().iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn structure_invariants() {
        let g = Grid::new(3, &[3, 4, 2], &[1.0, 0.5, 2.0]).unwrap();
        let vals: Vec<f64> = (0..g.n_cells() * 3).map(|i| 1.0 + (i % 7) as f64).collect();
        let k = Permeability::new(3, vals).unwrap();
        let s = SaddleSystem::assemble(&g, &k, Wells::corners(&g)).unwrap();
        let a = s.a();
        for r in 0..a.nrows() {
            let (cols, _) = a.row(r);
            assert!(cols.len() <= 2 * 3);
            for &c in cols {
                assert_eq!(a.get(r, c), a.get(c, r));
            }
        }
        // every column of B: one +1 and one -1
        let bt: Vec<Vec<f64>> = (0..s.n_flux())
            .map(|d| (0..s.n_cells()).map(|c| s.b().get(c, d)).filter(|v| *v != 0.0).collect())
            .collect();
        for col in bt {
            assert_eq!(col.len(), 2);
            assert_eq!(col.iter().sum::<f64>(), 0.0);
        }
        // positive definite (dense check)
        let (ev, _) = crate::linalg::sym_eig(&a.to_dense()).unwrap();
        assert!(ev[0] > 0.0);
    }

    #[test]
    fn divergence_telescopes() {
        let (g, k) = unit(5, 4);
        let s = SaddleSystem::assemble(&g, &k, Wells::corners(&g)).unwrap();
        let u: Vec<f64> = (0..s.n_flux()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let bu = s.b().matvec(&u);
        assert!(bu.iter().sum::<f64>().abs() < 1e-12);
        // (Bu)_c = -(outward flux sum)
        for c in 0..s.n_cells() {
            let out: f64 = s.cell_dofs(c).iter().map(|&(d, _)| s.outward_sign(d, c) * u[d]).sum();
            assert!((bu[c] + out).abs() < 1e-12);
        }
    }

    #[test]
    fn incompatible_sources_rejected() {
        let (g, k) = unit(2, 2);
        let err = SaddleSystem::assemble_with_sources(&g, &k, ElementKind::Exact, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(err, Err(Error::CompatibilityViolation { .. })));
    }

    #[test]
    fn rescale_uniform() {
        let (g, k) = unit(4, 3);
        let s = SaddleSystem::assemble(&g, &k, Wells::corners(&g)).unwrap();
        let dec = Decomposition::from_owner(&g, vec![0; g.n_cells()]).unwrap();
        let r = s.rescale(&dec).unwrap();
        for &d in r.scale() {
            assert!((d - 2.0 / 3.0).abs() < 1e-15);
        }
        assert!((r.f_scaled()[0] + 2.0 / 3.0).abs() < 1e-15);
        assert!((r.b_scaled().get(0, 0) - 2.0 / 3.0 * s.b().get(0, 0)).abs() < 1e-15);
    }

    #[test]
    fn lumped_has_diagonal_a() {
        let (g, k) = unit(3, 3);
        let s = SaddleSystem::assemble_with_sources(&g, &k, ElementKind::Lumped, &[0.0; 9]).unwrap();
        for r in 0..s.n_flux() {
            assert_eq!(s.a().row(r).0, &[r]);
            assert!((s.a().get(r, r) - 1.0).abs() < 1e-15);
        }
    }
}
