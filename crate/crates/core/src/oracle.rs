//! Brute-force references: a direct solve of the full flux-pressure system,
//! assembled again from scratch, and the dense spectrum of the preconditioned
//! interface operator.

use faer::Mat;

use crate::error::{Error, Result};
use crate::grid_fem::{ElementKind, Grid, Permeability, SaddleSystem};
use crate::linalg::{sym_eig, DenseLu, SparseLu};
use crate::solver::Bddc;

/// Largest system (flux plus pressure unknowns) the oracle accepts.
pub const DENSE_LIMIT: usize = 60_000;

/// Systems up to this size are factored densely, larger ones with sparse LU.
const DENSE_FACTOR_MAX: usize = 3_000;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseSolution {
    pub u: Vec<f64>,
    /// Zero volume-weighted mean.
    pub p: Vec<f64>,
}

/// The unscaled system in triplet form.
#[derive(Clone, Debug)]
pub struct Reassembled {
    pub n_flux: usize,
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<(usize, usize, f64)>,
    pub f: Vec<f64>,
}

/// Assembles the mixed system with its own face numbering loop: for every
/// axis, the faces between cell `c` and its `+axis` neighbour, cells visited
/// x fastest.
pub fn reassemble(grid: &Grid, perm: &Permeability, kind: ElementKind, sources: &[f64]) -> Reassembled {
    let dim = grid.dim();
    let n = grid.counts().to_vec();
    let h = grid.sizes().to_vec();
    let vol: f64 = h.iter().take(dim).product();
    let n_cells: usize = n.iter().take(dim).product();
    let stride = |a: usize| n.iter().take(a).product::<usize>();
    let coord = |c: usize, a: usize| (c / stride(a)) % n[a];

    // dof of the face on the high side of cell c along axis a
    let mut high = vec![[usize::MAX; 3]; n_cells];
    let mut n_flux = 0;
    for a in 0..dim {
        for (c, hc) in high.iter_mut().enumerate() {
            if coord(c, a) + 1 < n[a] {
                hc[a] = n_flux;
                n_flux += 1;
            }
        }
    }
    let mut a_trip = Vec::new();
    let mut b_trip = Vec::new();
    for c in 0..n_cells {
        for a in 0..dim {
            let lo = if coord(c, a) > 0 { Some(high[c - stride(a)][a]) } else { None };
            let hi = if high[c][a] != usize::MAX { Some(high[c][a]) } else { None };
            let coef = h[a] * h[a] / (6.0 * perm.cell(c)[a] * vol);
            let (d, o) = match kind {
                ElementKind::Exact => (2.0 * coef, coef),
                ElementKind::Lumped => (3.0 * coef, 0.0),
            };
            for x in [lo, hi].into_iter().flatten() {
                a_trip.push((x, x, d));
            }
            if let (Some(l), Some(r)) = (lo, hi) {
                if o != 0.0 {
                    a_trip.push((l, r, o));
                    a_trip.push((r, l, o));
                }
            }
            if let Some(l) = lo {
                b_trip.push((c, l, 1.0));
            }
            if let Some(r) = hi {
                b_trip.push((c, r, -1.0));
            }
        }
    }
    Reassembled { n_flux, a: a_trip, b: b_trip, f: sources.iter().map(|s| -s).collect() }
}

pub fn direct_solve(system: &SaddleSystem) -> Result<DenseSolution> {
    direct_solve_with_limit(system, DENSE_LIMIT)
}

/// Solves the scaled system with the first pressure pinned, then unscales
/// and re-centers the pressure.
pub fn direct_solve_with_limit(system: &SaddleSystem, limit: usize) -> Result<DenseSolution> {
    let grid = system.grid();
    let r = reassemble(grid, system.permeability(), system.element_kind(), system.sources());
    let n_p = grid.n_cells();
    let size = r.n_flux + n_p;
    if size > limit {
        return Err(Error::TooLarge { size, limit });
    }
    let total: f64 = r.f.iter().sum();
    let l1: f64 = r.f.iter().map(|v| v.abs()).sum();
    if total.abs() > 1e-12 * l1.max(1.0) {
        return Err(Error::CompatibilityViolation { sum: total, tol: 1e-12 * l1.max(1.0) });
    }
    let d = system.scale();
    // unknowns: u, then pbar_1 .. pbar_{n_p - 1}; row of cell 0 dropped
    let m = size - 1;
    let mut trip = r.a.clone();
    for &(c, dof, v) in &r.b {
        if c > 0 {
            let row = r.n_flux + c - 1;
            trip.push((row, dof, d[c] * v));
            trip.push((dof, row, d[c] * v));
        }
    }
    let mut rhs = vec![0.0; m];
    for c in 1..n_p {
        rhs[r.n_flux + c - 1] = d[c] * r.f[c];
    }
    let x = if m <= DENSE_FACTOR_MAX {
        let mut k = Mat::<f64>::zeros(m, m);
        for &(i, j, v) in &trip {
            k[(i, j)] += v;
        }
        DenseLu::factor(&k)
            .map_err(|message| Error::NumericalFailure { subdomain: None, message })?
            .solve(&rhs)
    } else {
        SparseLu::factor(m, &trip)
            .map_err(|message| Error::NumericalFailure { subdomain: None, message })?
            .solve(&rhs)
    };
    let u = x[..r.n_flux].to_vec();
    let mut p: Vec<f64> = std::iter::once(0.0).chain(x[r.n_flux..].iter().copied()).zip(d).map(|(v, s)| v * s).collect();
    let vol: f64 = (0..n_p).map(|c| system.cell_volume(c)).sum();
    let mean = p.iter().enumerate().map(|(c, v)| v * system.cell_volume(c)).sum::<f64>() / vol;
    p.iter_mut().for_each(|v| *v -= mean);
    Ok(DenseSolution { u, p })
}

fn dense_columns(n: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = f(&e);
        e[j] = 0.0;
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    m
}

/// Eigenvalues (descending) of the BDDC-preconditioned interface operator
/// restricted to interface vectors with zero net flux out of every subdomain.
pub fn preconditioned_spectrum(bddc: &Bddc) -> Result<Vec<f64>> {
    let n = bddc.n_interface();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { size: n, limit: DENSE_LIMIT });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let fail = |message: String| Error::NumericalFailure { subdomain: None, message };
    let proj = dense_columns(n, |x| bddc.project_balanced(x));
    let (pv, pw) = sym_eig(&proj).map_err(fail)?;
    let keep: Vec<usize> = (0..n).filter(|&k| pv[k] > 0.5).collect();
    let z = Mat::<f64>::from_fn(n, keep.len(), |i, j| pw[(i, keep[j])]);
    let s = dense_columns(n, |x| bddc.apply_schur(x));
    let m = dense_columns(n, |x| bddc.precondition(x));
    let sz = z.transpose() * &s * &z;
    let mz = z.transpose() * &m * &z;
    let sym = |a: &Mat<f64>| Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let (sv, sw) = sym_eig(&sym(&sz)).map_err(fail)?;
    if sv.first().is_some_and(|&v| v <= 0.0) {
        return Err(Error::InternalConsistency("interface Schur complement is not positive definite".into()));
    }
    let k = sv.len();
    let half = Mat::<f64>::from_fn(k, k, |i, j| (0..k).map(|l| sw[(i, l)] * sv[l].sqrt() * sw[(j, l)]).sum());
    let h = &half * &sym(&mz) * &half;
    let (mut ev, _) = sym_eig(&sym(&h)).map_err(fail)?;
    ev.reverse();
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fem::Wells;

    #[test]
    fn two_cells_by_hand() {
        let g = Grid::new(2, &[2, 1], &[1.0, 1.0]).unwrap();
        let perm = Permeability::uniform(&g, 1.0).unwrap();
        let s = SaddleSystem::assemble(&g, &perm, Wells { source: 0, sink: 1, strength: 1.0 }).unwrap();
        let sol = direct_solve(&s).unwrap();
        // -u = -1 from the divergence row of cell 0; 2/3 u - p0 + p1 = 0
        // with p0 = 0 pinned gives p1 = -2/3, then centering
        assert!((sol.u[0] - 1.0).abs() < 1e-14);
        assert!((sol.p[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((sol.p[1] + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn matches_grid_assembly() {
        let g = Grid::new(3, &[3, 4, 2], &[0.5, 1.0, 2.0]).unwrap();
        let vals: Vec<f64> = (0..24 * 3).map(|i| 0.1 + (i % 7) as f64).collect();
        let perm = Permeability::new(3, vals).unwrap();
        for kind in [ElementKind::Exact, ElementKind::Lumped] {
            let src: Vec<f64> = (0..24).map(|c| if c == 0 { 1.0 } else if c == 23 { -1.0 } else { 0.0 }).collect();
            let s = SaddleSystem::assemble_with_sources(&g, &perm, kind, &src).unwrap();
            let r = reassemble(&g, &perm, kind, &src);
            assert_eq!(r.n_flux, s.n_flux());
            let mut a = Mat::<f64>::zeros(r.n_flux, r.n_flux);
            r.a.iter().for_each(|&(i, j, v)| a[(i, j)] += v);
            let ad = s.a().to_dense();
            let mut b = Mat::<f64>::zeros(24, r.n_flux);
            r.b.iter().for_each(|&(i, j, v)| b[(i, j)] += v);
            let bd = s.b().to_dense();
            for i in 0..r.n_flux {
                for j in 0..r.n_flux {
                    assert!((a[(i, j)] - ad[(i, j)]).abs() < 1e-14);
                }
                for c in 0..24 {
                    assert_eq!(b[(c, i)], bd[(c, i)]);
                }
            }
            assert_eq!(r.f, s.f());
        }
    }

    #[test]
    fn zero_sources() {
        let g = Grid::new(2, &[3, 3], &[1.0, 1.0]).unwrap();
        let perm = Permeability::uniform(&g, 2.0).unwrap();
        let s = SaddleSystem::assemble(&g, &perm, Wells { source: 0, sink: 8, strength: 0.0 }).unwrap();
        let sol = direct_solve(&s).unwrap();
        assert!(sol.u.iter().chain(&sol.p).all(|v| *v == 0.0));
    }

    #[test]
    fn mirrored_field_gives_mirrored_solution() {
        let (nx, ny) = (5, 4);
        let g = Grid::new(2, &[nx, ny], &[1.0, 1.0]).unwrap();
        let k: Vec<f64> = (0..nx * ny).map(|c| 1.0 + ((c * 13) % 5) as f64).collect();
        let mirror = |c: usize| (nx - 1 - c % nx) + nx * (c / nx);
        let km: Vec<f64> = (0..nx * ny).map(|c| k[mirror(c)]).collect();
        let w = Wells { source: 0, sink: nx * ny - 1, strength: 1.0 };
        let wm = Wells { source: mirror(0), sink: mirror(nx * ny - 1), strength: 1.0 };
        let s = SaddleSystem::assemble(&g, &Permeability::isotropic(2, &k).unwrap(), w).unwrap();
        let sm = SaddleSystem::assemble(&g, &Permeability::isotropic(2, &km).unwrap(), wm).unwrap();
        let a = direct_solve(&s).unwrap();
        let b = direct_solve(&sm).unwrap();
        for c in 0..nx * ny {
            assert!((a.p[c] - b.p[mirror(c)]).abs() < 1e-12);
        }
        // x-faces are reflected with a sign change, y-faces only relabelled
        for dof in 0..s.n_flux() {
            let [n, p] = s.dof_cells(dof);
            let mirrored = (0..sm.n_flux())
                .find(|&d| {
                    let [mn, mp] = sm.dof_cells(d);
                    (mn == mirror(n) && mp == mirror(p)) || (mn == mirror(p) && mp == mirror(n))
                })
                .unwrap();
            let sign = if sm.dof_cells(mirrored)[0] == mirror(n) { 1.0 } else { -1.0 };
            assert!((a.u[dof] - sign * b.u[mirrored]).abs() < 1e-12);
        }
    }

    #[test]
    fn refuses_large_problems() {
        let g = Grid::new(2, &[10, 10], &[1.0, 1.0]).unwrap();
        let perm = Permeability::uniform(&g, 1.0).unwrap();
        let s = SaddleSystem::assemble(&g, &perm, Wells::corners(&g)).unwrap();
        assert!(matches!(direct_solve_with_limit(&s, 100), Err(Error::TooLarge { size: 280, limit: 100 })));
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        let g = Grid::new(2, &[40, 30], &[1.0, 1.0]).unwrap();
        let k: Vec<f64> = (0..1200).map(|c| 10f64.powi((c * 7 % 5) as i32 - 2)).collect();
        let s = SaddleSystem::assemble(&g, &Permeability::isotropic(2, &k).unwrap(), Wells::corners(&g)).unwrap();
        let sol = direct_solve(&s).unwrap();
        let bu = s.b().matvec(&sol.u);
        let res: f64 = bu.iter().zip(s.f()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(res < 1e-10);
        let r = s.a().matvec(&sol.u);
        let bt = s.b().matvec_transpose(&sol.p);
        let m: f64 = r.iter().zip(&bt).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
        assert!(m < 1e-8 * crate::linalg::max_abs(&r), "{m}");
    }
}
