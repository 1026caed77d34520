//! Nonoverlapping substructuring of the cell grid.
//!
//! Each interface flux dof is shared by exactly two subdomains (RT0 has no
//! corner or edge globs). Dofs shared by the same pair form a face; a face
//! of an irregular partition may split into several connected components,
//! each of which carries its own initial coarse dof.

use std::collections::HashMap;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::grid_fem::{Grid, SaddleSystem};

const NONE: usize = usize::MAX;

/// Flux dofs shared by subdomains `pair.0 < pair.1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub pair: (usize, usize),
    /// Global flux dof ids, ascending.
    pub dofs: Vec<usize>,
    /// Connected components of `dofs` (each ascending, ordered by first dof).
    pub components: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    owner: Vec<usize>,
    cells: Vec<Vec<usize>>,
    /// Interface flux dofs (global ids, ascending); position = interface index.
    interface: Vec<usize>,
    /// Global flux dof -> interface index.
    iface_pos: Vec<usize>,
    /// Per interface dof: the subdomains on its negative and positive side.
    iface_sides: Vec<[usize; 2]>,
    faces: Vec<Face>,
    /// Per subdomain: interface indices of Gamma^i, ascending.
    sub_iface: Vec<Vec<usize>>,
    /// Per subdomain: outward normal sign of each Gamma^i dof.
    sub_sign: Vec<Vec<f64>>,
    sub_faces: Vec<Vec<usize>>,
    disconnected: Vec<usize>,
}

impl Decomposition {
    /// Builds from a subdomain id per cell; ids must be exactly `0..N`.
    pub fn from_owner(grid: &Grid, owner: Vec<usize>) -> Result<Self> {
        if owner.len() != grid.n_cells() {
            return Err(Error::invalid(format!(
                "partition has {} entries, grid has {} cells",
                owner.len(),
                grid.n_cells()
            )));
        }
        let n_sub = owner.iter().max().map_or(0, |m| m + 1);
        let mut cells = vec![Vec::new(); n_sub];
        for (c, &s) in owner.iter().enumerate() {
            cells[s].push(c);
        }
        if let Some(s) = cells.iter().position(|c| c.is_empty()) {
            return Err(Error::invalid(format!("subdomain {s} has no cells")));
        }

        let flux = grid.interior_faces();
        let mut iface_pos = vec![NONE; flux.len()];
        let mut interface = Vec::new();
        let mut iface_sides = Vec::new();
        let mut face_of_pair: HashMap<(usize, usize), usize> = HashMap::new();
        let mut faces: Vec<Face> = Vec::new();
        for (dof, &(_, n, p)) in flux.iter().enumerate() {
            let (i, j) = (owner[n], owner[p]);
            if i == j {
                continue;
            }
            iface_pos[dof] = interface.len();
            interface.push(dof);
            iface_sides.push([i, j]);
            let pair = (i.min(j), i.max(j));
            let fi = *face_of_pair.entry(pair).or_insert_with(|| {
                faces.push(Face {
                    pair,
                    dofs: Vec::new(),
                    components: Vec::new(),
                });
                faces.len() - 1
            });
            faces[fi].dofs.push(dof);
        }
        faces.sort_by_key(|f| f.pair);
        for face in &mut faces {
            face.components = components(grid, &flux, &face.dofs);
        }

        let mut sub_iface = vec![Vec::new(); n_sub];
        let mut sub_sign = vec![Vec::new(); n_sub];
        for (k, &[i, j]) in iface_sides.iter().enumerate() {
            sub_iface[i].push(k);
            sub_sign[i].push(1.0);
            sub_iface[j].push(k);
            sub_sign[j].push(-1.0);
        }
        let mut sub_faces = vec![Vec::new(); n_sub];
        for (fi, f) in faces.iter().enumerate() {
            sub_faces[f.pair.0].push(fi);
            sub_faces[f.pair.1].push(fi);
        }

        let disconnected: Vec<usize> = (0..n_sub)
            .filter(|&s| !is_connected(grid, &owner, &cells[s]))
            .collect();
        for &s in &disconnected {
            warn!("subdomain {s} is not face-connected; its local problems may be singular");
        }

        Ok(Self {
            owner,
            cells,
            interface,
            iface_pos,
            iface_sides,
            faces,
            sub_iface,
            sub_sign,
            sub_faces,
            disconnected,
        })
    }

    /// Geometrically regular partition with `splits[a]` near-equal strips per axis.
    pub fn regular(grid: &Grid, splits: &[usize]) -> Result<Self> {
        let dim = grid.dim();
        if splits.len() != dim {
            return Err(Error::invalid(format!("expected {dim} splits, got {}", splits.len())));
        }
        for (a, (&s, &n)) in splits.iter().zip(grid.counts()).enumerate() {
            if s == 0 || s > n {
                return Err(Error::invalid(format!(
                    "split {s} along axis {a} must be between 1 and the cell count {n}"
                )));
            }
        }
        let strip = |a: usize, i: usize| -> usize {
            // largest k with floor(k n / s) <= i
            let (n, s) = (grid.counts()[a], splits[a]);
            (0..s).rev().find(|&k| k * n / s <= i).unwrap()
        };
        let mut sp = [1usize; 3];
        sp[..dim].copy_from_slice(splits);
        let owner = (0..grid.n_cells())
            .map(|c| {
                let ijk = grid.cell_coords(c);
                let mut b = [0usize; 3];
                for a in 0..dim {
                    b[a] = strip(a, ijk[a]);
                }
                b[0] + sp[0] * (b[1] + sp[1] * b[2])
            })
            .collect();
        Self::from_owner(grid, owner)
    }

    /// Reads a `PART` file (see [`crate::io::read_partition`]).
    pub fn import(path: &Path, grid: &Grid) -> Result<Self> {
        let owner = crate::io::read_partition(path, grid.n_cells())?;
        Self::from_owner(grid, owner)
    }

    pub fn n_subdomains(&self) -> usize {
        self.cells.len()
    }

    pub fn n_cells(&self) -> usize {
        self.owner.len()
    }

    pub fn owner(&self, cell: usize) -> usize {
        self.owner[cell]
    }

    pub fn owners(&self) -> &[usize] {
        &self.owner
    }

    pub fn cells(&self, sub: usize) -> &[usize] {
        &self.cells[sub]
    }

    /// Number of interface flux dofs.
    pub fn n_interface(&self) -> usize {
        self.interface.len()
    }

    pub fn interface_dofs(&self) -> &[usize] {
        &self.interface
    }

    /// Interface index of a global flux dof.
    pub fn interface_index(&self, dof: usize) -> Option<usize> {
        self.iface_pos.get(dof).copied().filter(|&k| k != NONE)
    }

    /// Subdomains on the negative/positive side of interface dof `k`.
    pub fn interface_sides(&self, k: usize) -> [usize; 2] {
        self.iface_sides[k]
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, pair: (usize, usize)) -> Option<&Face> {
        let key = (pair.0.min(pair.1), pair.0.max(pair.1));
        self.faces.binary_search_by_key(&key, |f| f.pair).ok().map(|k| &self.faces[k])
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_components(&self) -> usize {
        self.faces.iter().map(|f| f.components.len()).sum()
    }

    /// Maximum number of faces of any subdomain.
    pub fn max_faces_per_subdomain(&self) -> usize {
        self.sub_faces.iter().map(|f| f.len()).max().unwrap_or(0)
    }

    /// Interface indices of Gamma^i, ascending.
    pub fn subdomain_interface(&self, sub: usize) -> &[usize] {
        &self.sub_iface[sub]
    }

    /// Outward normal sign of each Gamma^i dof, aligned with [`Self::subdomain_interface`].
    pub fn subdomain_signs(&self, sub: usize) -> &[f64] {
        &self.sub_sign[sub]
    }

    /// Indices into [`Self::faces`] of the faces of a subdomain.
    pub fn subdomain_faces(&self, sub: usize) -> &[usize] {
        &self.sub_faces[sub]
    }

    pub fn disconnected_subdomains(&self) -> &[usize] {
        &self.disconnected
    }

    /// Net outward flux of an interface vector out of every subdomain.
    pub fn net_flux(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_subdomains())
            .map(|s| self.sub_iface[s].iter().zip(&self.sub_sign[s]).map(|(&k, &sg)| sg * x[k]).sum())
            .collect()
    }

    /// Transpose of [`Self::net_flux`].
    pub fn net_flux_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.iface_sides.iter().map(|&[i, j]| y[i] - y[j]).collect()
    }

    /// `max_i |net_i(x)| / sum_{Gamma^i} |x|`; zero for a balanced vector.
    pub fn balance_violation(&self, x: &[f64]) -> f64 {
        let net = self.net_flux(x);
        (0..self.n_subdomains())
            .map(|s| {
                let mass: f64 = self.sub_iface[s].iter().map(|&k| x[k].abs()).sum();
                if mass > 0.0 {
                    net[s].abs() / mass
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    /// Per-subdomain copies of an interface vector.
    pub fn restrict(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.sub_iface.iter().map(|idx| idx.iter().map(|&k| x[k]).collect()).collect()
    }
}

fn components(grid: &Grid, flux: &[(usize, usize, usize)], dofs: &[usize]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..dofs.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut seen: HashMap<(usize, [usize; 3]), usize> = HashMap::new();
    for (k, &d) in dofs.iter().enumerate() {
        for ent in grid.face_boundary_entities(flux[d].0) {
            match seen.get(&ent) {
                Some(&other) => {
                    let (a, b) = (find(&mut parent, k), find(&mut parent, other));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => {
                    seen.insert(ent, k);
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for k in 0..dofs.len() {
        let r = find(&mut parent, k);
        groups.entry(r).or_default().push(dofs[k]);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|c| c[0]);
    out
}

fn is_connected(grid: &Grid, owner: &[usize], cells: &[usize]) -> bool {
    let s = owner[cells[0]];
    let mut seen = vec![false; grid.n_cells()];
    let mut stack = vec![cells[0]];
    seen[cells[0]] = true;
    let mut count = 0;
    while let Some(c) = stack.pop() {
        count += 1;
        for axis in 0..grid.dim() {
            for plus in [false, true] {
                let f = grid.cell_face(c, axis, plus);
                let (n, p) = grid.face_cells(f);
                if let Some(nb) = if plus { p } else { n } {
                    if owner[nb] == s && !seen[nb] {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
        }
    }
    count == cells.len()
}

/// Interface averaging weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScalingKind {
    /// 1/2 on every interface dof.
    #[default]
    Multiplicity,
    /// Proportional to the subdomain-local diagonal of `A`.
    Stiffness,
}

impl std::str::FromStr for ScalingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multiplicity" => Ok(Self::Multiplicity),
            "stiffness" => Ok(Self::Stiffness),
            other => Err(Error::invalid(format!("unknown scaling '{other}'"))),
        }
    }
}

/// The averaging projection `E` and its complement on broken interface
/// vectors (one copy of Gamma^i per subdomain).
#[derive(Clone, Debug)]
pub struct WeightOperator {
    kind: ScalingKind,
    /// Per interface dof: weights of its negative- and positive-side subdomain.
    weights: Vec<[f64; 2]>,
    /// Per subdomain, aligned with Gamma^i.
    local: Vec<Vec<f64>>,
    sub_iface: Vec<Vec<usize>>,
}

impl WeightOperator {
    pub fn new(decomposition: &Decomposition, system: &SaddleSystem, kind: ScalingKind) -> Self {
        let weights: Vec<[f64; 2]> = decomposition
            .interface_dofs()
            .iter()
            .map(|&dof| match kind {
                ScalingKind::Multiplicity => [0.5, 0.5],
                ScalingKind::Stiffness => {
                    let [n, p] = system.dof_cells(dof);
                    let (dn, dp) = (system.cell_mass_diag(n, dof), system.cell_mass_diag(p, dof));
                    [dn / (dn + dp), dp / (dn + dp)]
                }
            })
            .collect();
        let local = (0..decomposition.n_subdomains())
            .map(|s| {
                decomposition
                    .subdomain_interface(s)
                    .iter()
                    .map(|&k| {
                        let [i, _] = decomposition.interface_sides(k);
                        weights[k][if i == s { 0 } else { 1 }]
                    })
                    .collect()
            })
            .collect();
        Self {
            kind,
            weights,
            local,
            sub_iface: (0..decomposition.n_subdomains())
                .map(|s| decomposition.subdomain_interface(s).to_vec())
                .collect(),
        }
    }

    pub fn kind(&self) -> ScalingKind {
        self.kind
    }

    /// `(delta_neg, delta_pos)` of interface dof `k`.
    pub fn weights(&self, k: usize) -> [f64; 2] {
        self.weights[k]
    }

    /// Weights of subdomain `s`, aligned with Gamma^s.
    pub fn local(&self, s: usize) -> &[f64] {
        &self.local[s]
    }

    /// Weighted sum of the copies: one value per interface dof.
    pub fn average(&self, broken: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.weights.len()];
        for (s, w) in broken.iter().enumerate() {
            for ((&k, &d), &v) in self.sub_iface[s].iter().zip(&self.local[s]).zip(w) {
                out[k] += d * v;
            }
        }
        out
    }

    /// Transpose of [`Self::average`]: weighted copies of an interface vector.
    pub fn restrict_weighted(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.sub_iface
            .iter()
            .zip(&self.local)
            .map(|(idx, d)| idx.iter().zip(d).map(|(&k, &w)| w * x[k]).collect())
            .collect()
    }

    /// `E w`: every copy replaced by the weighted average.
    pub fn apply_e(&self, broken: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let avg = self.average(broken);
        self.sub_iface.iter().map(|idx| idx.iter().map(|&k| avg[k]).collect()).collect()
    }

    /// `(I - E) w`.
    pub fn apply_i_minus_e(&self, broken: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let e = self.apply_e(broken);
        broken
            .iter()
            .zip(e)
            .map(|(w, ew)| w.iter().zip(ew).map(|(a, b)| a - b).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fem::{Permeability, Wells};

    fn grid2(nx: usize, ny: usize) -> Grid {
        Grid::new(2, &[nx, ny], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn regular_2x7_reference_layer() {
        let g = grid2(60, 220);
        let d = Decomposition::regular(&g, &[2, 7]).unwrap();
        assert_eq!(d.n_subdomains(), 14);
        assert_eq!(d.n_faces(), 19);
        assert_eq!(d.n_interface(), 580);
        assert_eq!(d.n_components(), 19);
        let sizes: Vec<usize> = (0..14).map(|s| d.cells(s).len()).collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(hi - lo <= 30, "strip sizes differ by more than one row: {sizes:?}");
    }

    #[test]
    fn regular_6x22_reference_layer() {
        let d = Decomposition::regular(&grid2(60, 220), &[6, 22]).unwrap();
        assert_eq!((d.n_subdomains(), d.n_faces(), d.n_interface()), (132, 236, 2360));
    }

    #[test]
    fn regular_3d_cutout() {
        let g = Grid::new(3, &[30, 30, 30], &[1.0; 3]).unwrap();
        let d = Decomposition::regular(&g, &[3, 3, 3]).unwrap();
        assert_eq!((d.n_subdomains(), d.n_faces(), d.n_interface()), (27, 54, 5400));
        assert_eq!(d.max_faces_per_subdomain(), 6);
    }

    #[test]
    fn regular_rejects_too_many_splits() {
        assert!(Decomposition::regular(&grid2(4, 4), &[5, 1]).is_err());
        assert!(Decomposition::regular(&grid2(4, 4), &[0, 1]).is_err());
    }

    #[test]
    fn single_subdomain_has_no_interface() {
        let g = grid2(5, 3);
        let d = Decomposition::from_owner(&g, vec![0; 15]).unwrap();
        assert_eq!((d.n_interface(), d.n_faces()), (0, 0));
    }

    #[test]
    fn column_stripes_give_one_face() {
        let g = grid2(4, 4);
        let owner = (0..16).map(|c| usize::from(c % 4 >= 2)).collect();
        let d = Decomposition::from_owner(&g, owner).unwrap();
        assert_eq!(d.n_faces(), 1);
        assert_eq!(d.faces()[0].dofs.len(), 4);
        assert_eq!(d.faces()[0].components.len(), 1);
    }

    #[test]
    fn split_face_has_two_components() {
        // subdomain 1 touches subdomain 0 along two separated segments
        //  row1: 0 1 1 0
        //  row0: 0 0 0 0   -> faces at x=1,x=3 in row 1 plus the bottom of row 1
        // Use a 3-subdomain layout where 0 and 1 meet in two separate pieces.
        let g = grid2(5, 1);
        let owner = vec![0, 1, 2, 1, 0];
        // 0|1 at x=1 and 1|0 at x=4: two separate components of face (0,1)
        let d = Decomposition::from_owner(&g, owner).unwrap();
        let f = d.face((0, 1)).unwrap();
        assert_eq!(f.dofs.len(), 2);
        assert_eq!(f.components.len(), 2);
        assert!(!d.disconnected_subdomains().is_empty());
    }

    #[test]
    fn l_shaped_face_is_connected() {
        // 2x2 with subdomain 1 in the top-right cell: two faces meeting at a vertex.
        let g = grid2(2, 2);
        let d = Decomposition::from_owner(&g, vec![0, 0, 0, 1]).unwrap();
        let f = d.face((0, 1)).unwrap();
        assert_eq!(f.dofs.len(), 2);
        assert_eq!(f.components.len(), 1);
    }

    fn system(g: &Grid, k: Vec<f64>) -> SaddleSystem {
        let perm = Permeability::isotropic(g.dim(), &k).unwrap();
        SaddleSystem::assemble(g, &perm, Wells::corners(g)).unwrap()
    }

    #[test]
    fn multiplicity_weights_and_projection() {
        let g = grid2(4, 4);
        let d = Decomposition::regular(&g, &[2, 2]).unwrap();
        let s = system(&g, vec![1.0; 16]);
        let w = WeightOperator::new(&d, &s, ScalingKind::Multiplicity);
        for k in 0..d.n_interface() {
            assert_eq!(w.weights(k), [0.5, 0.5]);
        }
        // continuous input is reproduced, (I-E) kills it
        let x: Vec<f64> = (0..d.n_interface()).map(|k| k as f64 + 0.25).collect();
        let b = d.restrict(&x);
        assert_eq!(w.apply_e(&b), b);
        assert!(w.apply_i_minus_e(&b).iter().flatten().all(|v| *v == 0.0));
        // jump (1, 0) on one dof
        let mut broken: Vec<Vec<f64>> = b.iter().map(|v| vec![0.0; v.len()]).collect();
        let [i, j] = d.interface_sides(0);
        let pos = |s: usize| d.subdomain_interface(s).iter().position(|&k| k == 0).unwrap();
        broken[i][pos(i)] = 1.0;
        let e = w.apply_e(&broken);
        let ime = w.apply_i_minus_e(&broken);
        assert_eq!((e[i][pos(i)], e[j][pos(j)]), (0.5, 0.5));
        assert_eq!((ime[i][pos(i)], ime[j][pos(j)]), (0.5, -0.5));
    }

    #[test]
    fn stiffness_weights_follow_local_diagonal() {
        let g = grid2(2, 1);
        let d = Decomposition::from_owner(&g, vec![0, 1]).unwrap();
        // cell 0: k = 1 (low permeability), cell 1: k = 1e6
        let s = system(&g, vec![1.0, 1e6]);
        let w = WeightOperator::new(&d, &s, ScalingKind::Stiffness);
        let [d0, d1] = w.weights(0);
        // d_i = 2 c_i with c ~ 1/k, so the low-k side carries 1 / (1 + 1e-6)
        assert!((d0 - 1.0 / (1.0 + 1e-6)).abs() < 1e-9);
        assert!((d0 + d1 - 1.0).abs() < 1e-15);
        let eq = system(&g, vec![3.0, 3.0]);
        assert_eq!(WeightOperator::new(&d, &eq, ScalingKind::Stiffness).weights(0), [0.5, 0.5]);
    }

    #[test]
    fn net_flux_transpose_is_adjoint() {
        let g = grid2(6, 4);
        let d = Decomposition::regular(&g, &[3, 2]).unwrap();
        let x: Vec<f64> = (0..d.n_interface()).map(|k| (k as f64).sin()).collect();
        let y: Vec<f64> = (0..d.n_subdomains()).map(|s| (s as f64).cos()).collect();
        let lhs: f64 = d.net_flux(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = d.net_flux_transpose(&y).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn e_is_idempotent(vals in proptest::collection::vec(-1.0f64..1.0, 64), stiff in any::<bool>(),
                               ks in proptest::collection::vec(-3.0f64..3.0, 36)) {
                let g = grid2(6, 6);
                let d = Decomposition::regular(&g, &[3, 2]).unwrap();
                let s = system(&g, ks.iter().map(|e| 10f64.powf(*e)).collect());
                let kind = if stiff { ScalingKind::Stiffness } else { ScalingKind::Multiplicity };
                let w = WeightOperator::new(&d, &s, kind);
                let mut it = vals.iter().cycle();
                let broken: Vec<Vec<f64>> = (0..d.n_subdomains())
                    .map(|sub| d.subdomain_interface(sub).iter().map(|_| *it.next().unwrap()).collect())
                    .collect();
                let e1 = w.apply_e(&broken);
                let e2 = w.apply_e(&e1);
                for (a, b) in e1.iter().flatten().zip(e2.iter().flatten()) {
                    prop_assert!((a - b).abs() <= 1e-15 * (1.0 + a.abs()));
                }
                for k in 0..d.n_interface() {
                    let [a, b] = w.weights(k);
                    prop_assert!(a > 0.0 && b > 0.0 && (a + b - 1.0).abs() < 1e-15);
                }
            }
        }
    }
}
