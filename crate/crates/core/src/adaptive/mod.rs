//! Adaptive coarse space: local generalized eigenproblems on pairs of
//! adjacent subdomains and the constraints harvested from them.

mod multiscale;

pub use multiscale::{add_multiscale_constraints, multiscale_rows};

use faer::Mat;
use rayon::prelude::*;

use crate::coarse_space::{ConstraintSet, Origin};
use crate::decomposition::{Decomposition, WeightOperator};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, sym_eig, symmetrize};

/// Relative threshold below which eigenvalues of `Pi S Pi` are deflated.
pub const DEFLATION_TOL: f64 = 1e-12;
/// Relative tolerance of the `[c, -c]` structure check on harvested rows.
pub const SPLIT_TOL: f64 = 1e-10;

/// Dense pair operators for adjacent subdomains `i < j`.
///
/// The pair vector is Gamma^i followed by Gamma^j, so every shared dof
/// appears twice.
#[derive(Clone, Debug)]
pub struct PairProblem {
    pub pair: (usize, usize),
    n_i: usize,
    /// Shared interface dofs with their positions in Gamma^i and Gamma^j.
    shared: Vec<(usize, usize, usize)>,
    s: Mat<f64>,
    i_minus_e: Mat<f64>,
    /// Orthonormal basis of the constraint rows (rows of the matrix).
    q: Mat<f64>,
}

impl PairProblem {
    pub fn new(
        pair: (usize, usize),
        decomposition: &Decomposition,
        weights: &WeightOperator,
        constraints: &ConstraintSet,
        schur_i: &Mat<f64>,
        schur_j: &Mat<f64>,
    ) -> Result<Self> {
        let (i, j) = pair;
        if i >= j {
            return Err(Error::invalid(format!("pair ({i}, {j}) must be ordered")));
        }
        let face = decomposition
            .face(pair)
            .ok_or_else(|| Error::invalid(format!("subdomains {i} and {j} share no face")))?;
        let (gi, gj) = (decomposition.subdomain_interface(i), decomposition.subdomain_interface(j));
        let (n_i, n_j) = (gi.len(), gj.len());
        let n = n_i + n_j;
        let shared: Vec<(usize, usize, usize)> = face
            .dofs
            .iter()
            .map(|&d| {
                let k = decomposition.interface_index(d).unwrap();
                (k, gi.binary_search(&k).unwrap(), gj.binary_search(&k).unwrap())
            })
            .collect();

        let mut s = Mat::<f64>::zeros(n, n);
        for r in 0..n_i {
            for c in 0..n_i {
                s[(r, c)] = schur_i[(r, c)];
            }
        }
        for r in 0..n_j {
            for c in 0..n_j {
                s[(n_i + r, n_i + c)] = schur_j[(r, c)];
            }
        }
        symmetrize(&mut s);

        let mut ime = Mat::<f64>::zeros(n, n);
        for &(k, a, b) in &shared {
            let [dn, dp] = weights.weights(k);
            let (di, dj) = if decomposition.interface_sides(k)[0] == i { (dn, dp) } else { (dp, dn) };
            ime[(a, a)] = dj;
            ime[(a, n_i + b)] = -dj;
            ime[(n_i + b, n_i + b)] = di;
            ime[(n_i + b, a)] = -di;
        }

        let mut rows: Vec<Vec<f64>> = Vec::new();
        for d in constraints.on_pair(pair) {
            let mut r = vec![0.0; n];
            for (&k, &v) in d.support.iter().zip(&d.values) {
                let (a, b) = (gi.binary_search(&k).unwrap(), gj.binary_search(&k).unwrap());
                r[a] = v;
                r[n_i + b] = -v;
            }
            rows.push(r);
        }
        let basis = orthonormal_rows(rows);
        let q = Mat::from_fn(basis.len(), n, |r, c| basis[r][c]);
        Ok(Self {
            pair,
            n_i,
            shared,
            s,
            i_minus_e: ime,
            q,
        })
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    pub fn n_constraints(&self) -> usize {
        self.q.nrows()
    }

    /// Dense projector `Pi = I - C^T (C C^T)^{-1} C`.
    pub fn projector(&self) -> Mat<f64> {
        let n = self.dim();
        let qtq = self.q.transpose() * &self.q;
        Mat::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 } - qtq[(r, c)])
    }

    /// The constraint matrix (orthonormal rows spanning the pair constraints).
    pub fn constraint_rows(&self) -> &Mat<f64> {
        &self.q
    }

    pub fn i_minus_e(&self) -> &Mat<f64> {
        &self.i_minus_e
    }

    pub fn schur(&self) -> &Mat<f64> {
        &self.s
    }

    /// `(Pi (I-E)^T S (I-E) Pi, Pi S Pi)`.
    pub fn operators(&self) -> (Mat<f64>, Mat<f64>) {
        let pi = self.projector();
        let m = &self.i_minus_e * &pi;
        let mut lhs = m.transpose() * &self.s * &m;
        let mut rhs = &pi * &self.s * &pi;
        symmetrize(&mut lhs);
        symmetrize(&mut rhs);
        (lhs, rhs)
    }

    /// Solves the generalized eigenproblem on the complement of the null
    /// space of `Pi S Pi`.
    pub fn solve(&self) -> Result<PairEigen> {
        let (lhs, rhs) = self.operators();
        let fail = |message: String| Error::NumericalFailure {
            subdomain: None,
            message: format!("pair {:?}: {message}", self.pair),
        };
        let (sig, v) = sym_eig(&rhs).map_err(fail)?;
        let smax = sig.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..sig.len()).filter(|&k| sig[k] > DEFLATION_TOL * smax).collect();
        let n = self.dim();
        let w = Mat::from_fn(n, keep.len(), |r, c| v[(r, keep[c])] / sig[keep[c]].sqrt());
        let mut t = w.transpose() * &lhs * &w;
        symmetrize(&mut t);
        let (lam, y) = sym_eig(&t).map_err(fail)?;
        let m = lam.len();
        let order: Vec<usize> = (0..m).rev().collect();
        let values: Vec<f64> = order.iter().map(|&k| lam[k].max(0.0)).collect();
        let wy = &w * &y;
        let vectors = Mat::from_fn(n, m, |r, c| wy[(r, order[c])]);
        Ok(PairEigen {
            pair: self.pair,
            values,
            vectors,
            lhs,
        })
    }

    /// Harvests constraint rows from the eigenvectors with `lambda > tau`.
    /// Returns the rows (over the shared dofs, as the row of `pair.0`) and
    /// the pair indicator.
    pub fn select(&self, eig: &PairEigen, tau: f64) -> Result<(Vec<Vec<f64>>, f64)> {
        let k = eig.values.iter().take_while(|&&l| l > tau).count();
        let omega = eig.values.get(k).copied().unwrap_or(1.0).max(1.0);
        let n = self.dim();
        let mut rows = Vec::with_capacity(k);
        for l in 0..k {
            let wl: Vec<f64> = (0..n).map(|r| eig.vectors[(r, l)]).collect();
            let c: Vec<f64> = (0..n).map(|r| (0..n).map(|t| eig.lhs[(r, t)] * wl[t]).sum()).collect();
            let cmax = max_abs(&c);
            if cmax == 0.0 {
                continue;
            }
            let mut on_face = vec![false; n];
            let mut half = Vec::with_capacity(self.shared.len());
            for &(_, a, b) in &self.shared {
                on_face[a] = true;
                on_face[self.n_i + b] = true;
                if (c[a] + c[self.n_i + b]).abs() > SPLIT_TOL * cmax {
                    return Err(Error::InternalConsistency(format!(
                        "pair {:?}: harvested row is not of the form [c, -c]",
                        self.pair
                    )));
                }
                half.push(c[a]);
            }
            if (0..n).any(|r| !on_face[r] && c[r].abs() > SPLIT_TOL * cmax) {
                return Err(Error::InternalConsistency(format!(
                    "pair {:?}: harvested row has support off the shared face",
                    self.pair
                )));
            }
            let hmax = max_abs(&half);
            half.iter_mut().for_each(|v| *v /= hmax);
            rows.push(half);
        }
        Ok((rows, omega))
    }

    /// Interface indices of the shared face, ascending.
    pub fn shared_support(&self) -> Vec<usize> {
        self.shared.iter().map(|s| s.0).collect()
    }
}

fn orthonormal_rows(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mut v in rows {
        let n0 = crate::linalg::norm2(&v);
        for _ in 0..2 {
            for q in &out {
                let a = crate::linalg::dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= a * y);
            }
        }
        let n = crate::linalg::norm2(&v);
        if n > crate::coarse_space::DEPENDENCE_TOL * n0 {
            v.iter_mut().for_each(|x| *x /= n);
            out.push(v);
        }
    }
    out
}

/// Spectrum of one pair problem, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct PairEigen {
    pub pair: (usize, usize),
    pub values: Vec<f64>,
    /// Eigenvectors (pair vectors) as columns, aligned with `values`.
    pub vectors: Mat<f64>,
    lhs: Mat<f64>,
}

/// Outcome of the adaptive augmentation.
#[derive(Clone, Debug)]
pub struct AdaptiveReport {
    /// Per pair: `(pair, eigenvalues, selected count, indicator)`.
    pub pairs: Vec<PairSummary>,
    /// Indicator `max_ij omega_ij`.
    pub omega_tilde: f64,
    pub added: usize,
}

#[derive(Clone, Debug)]
pub struct PairSummary {
    pub pair: (usize, usize),
    pub eigenvalues: Vec<f64>,
    pub selected: usize,
    pub omega: f64,
}

/// Builds and solves every pair problem against `constraints`.
pub fn pair_problems(
    decomposition: &Decomposition,
    weights: &WeightOperator,
    constraints: &ConstraintSet,
    schurs: &[Mat<f64>],
) -> Result<Vec<(PairProblem, PairEigen)>> {
    decomposition
        .faces()
        .par_iter()
        .map(|f| {
            let (i, j) = f.pair;
            let p = PairProblem::new(f.pair, decomposition, weights, constraints, &schurs[i], &schurs[j])?;
            let e = p.solve()?;
            Ok((p, e))
        })
        .collect()
}

/// One-pass adaptive augmentation: solves every pair eigenproblem against
/// the current constraints, then appends the rows of eigenvectors above
/// `tau` (in pair order).
pub fn adapt(
    decomposition: &Decomposition,
    weights: &WeightOperator,
    constraints: &mut ConstraintSet,
    schurs: &[Mat<f64>],
    tau: f64,
) -> Result<AdaptiveReport> {
    if !(tau > 1.0) {
        return Err(Error::invalid("tau must exceed 1"));
    }
    let solved = pair_problems(decomposition, weights, constraints, schurs)?;
    let mut pairs = Vec::with_capacity(solved.len());
    let mut omega_tilde: f64 = 1.0;
    let mut added = 0;
    for (p, e) in &solved {
        let (rows, omega) = p.select(e, tau)?;
        let support = p.shared_support();
        let selected = rows.len();
        added += constraints.append(p.pair, &support, rows, Origin::Adaptive, None);
        omega_tilde = omega_tilde.max(omega);
        pairs.push(PairSummary {
            pair: p.pair,
            eigenvalues: e.values.clone(),
            selected,
            omega,
        });
    }
    Ok(AdaptiveReport {
        pairs,
        omega_tilde,
        added,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::ScalingKind;
    use crate::grid_fem::{Grid, Permeability, SaddleSystem, Wells};
    use crate::substructure::SubdomainOperator;

    struct Setup {
        d: Decomposition,
        w: WeightOperator,
        schurs: Vec<Mat<f64>>,
    }

    fn setup(nx: usize, ny: usize, splits: &[usize], k: impl Fn(usize) -> f64, scaling: ScalingKind) -> Setup {
        let g = Grid::new(2, &[nx, ny], &[1.0, 1.0]).unwrap();
        let ks: Vec<f64> = (0..g.n_cells()).map(k).collect();
        let perm = Permeability::isotropic(2, &ks).unwrap();
        let d = Decomposition::regular(&g, splits).unwrap();
        let s = SaddleSystem::assemble(&g, &perm, Wells::corners(&g)).unwrap().rescale(&d).unwrap();
        let subs = SubdomainOperator::build_all(&s, &d).unwrap();
        let w = WeightOperator::new(&d, &s, scaling);
        let schurs = subs.iter().map(|o| o.dense_schur()).collect();
        Setup { d, w, schurs }
    }

    fn problem(st: &Setup, cs: &ConstraintSet, pair: (usize, usize)) -> PairProblem {
        PairProblem::new(pair, &st.d, &st.w, cs, &st.schurs[pair.0], &st.schurs[pair.1]).unwrap()
    }

    fn close(a: &Mat<f64>, b: &Mat<f64>, tol: f64) -> bool {
        (0..a.nrows()).all(|r| (0..a.ncols()).all(|c| (a[(r, c)] - b[(r, c)]).abs() <= tol))
    }

    #[test]
    fn projector_properties() {
        let st = setup(8, 4, &[2, 1], |_| 1.0, ScalingKind::Multiplicity);
        let cs = ConstraintSet::initial(&st.d);
        let p = problem(&st, &cs, (0, 1));
        let pi = p.projector();
        assert!(close(&(&pi * &pi), &pi, 1e-13));
        assert!(close(&pi.transpose().to_owned(), &pi, 0.0));
        let cpi = p.constraint_rows() * &pi;
        assert!((0..cpi.nrows()).all(|r| (0..cpi.ncols()).all(|c| cpi[(r, c)].abs() < 1e-12)));
        // a vector already satisfying the constraints is unchanged
        let n = p.dim();
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        v[n - 1] = 2.0;
        let pv: Vec<f64> = (0..n).map(|r| (0..n).map(|c| pi[(r, c)] * v[c]).sum()).collect();
        let pv2: Vec<f64> = (0..n).map(|r| (0..n).map(|c| pi[(r, c)] * pv[c]).sum()).collect();
        for (a, b) in pv.iter().zip(&pv2) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn continuous_vectors_are_in_the_zero_spectrum() {
        let st = setup(8, 4, &[2, 1], |_| 1.0, ScalingKind::Multiplicity);
        let cs = ConstraintSet::initial(&st.d);
        let p = problem(&st, &cs, (0, 1));
        let e = p.solve().unwrap();
        let n_shared = p.shared.len();
        let zeros = e.values.iter().filter(|&&l| l < 1e-8).count();
        // pair-continuous subspace: everything except the jump across the
        // shared dofs, minus the removed constraint direction
        assert!(zeros >= p.dim() - n_shared - p.n_constraints());
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        // homogeneous pair: small spectrum
        assert!(e.values[0] < 10.0, "{}", e.values[0]);
    }

    #[test]
    fn tau_infinity_adds_nothing() {
        let st = setup(8, 8, &[2, 2], |c| if c % 3 == 0 { 1e-3 } else { 1.0 }, ScalingKind::Multiplicity);
        let mut cs = ConstraintSet::initial(&st.d);
        let before = cs.n_flux();
        let r = adapt(&st.d, &st.w, &mut cs, &st.schurs, f64::INFINITY).unwrap();
        assert_eq!((r.added, cs.n_flux()), (0, before));
        let lmax = r.pairs.iter().map(|p| p.eigenvalues[0]).fold(1.0, f64::max);
        assert_eq!(r.omega_tilde, lmax);
    }

    #[test]
    fn rejects_tau_at_most_one() {
        let st = setup(4, 4, &[2, 1], |_| 1.0, ScalingKind::Multiplicity);
        let mut cs = ConstraintSet::initial(&st.d);
        assert!(adapt(&st.d, &st.w, &mut cs, &st.schurs, 1.0).is_err());
    }

    fn channel(c: usize) -> f64 {
        let (x, y) = (c % 12, c / 12);
        if y == 5 || y == 6 || (x + y) % 7 == 0 {
            1e4
        } else {
            1.0
        }
    }

    #[test]
    fn augmentation_caps_pair_spectra() {
        for scaling in [ScalingKind::Multiplicity, ScalingKind::Stiffness] {
            let st = setup(12, 12, &[2, 2], channel, scaling);
            for tau in [100.0, 10.0, 3.0] {
                let mut cs = ConstraintSet::initial(&st.d);
                let r = adapt(&st.d, &st.w, &mut cs, &st.schurs, tau).unwrap();
                assert!(r.omega_tilde <= tau);
                for f in st.d.faces() {
                    let e = problem(&st, &cs, f.pair).solve().unwrap();
                    assert!(e.values[0] <= tau * (1.0 + 1e-8), "{:?} tau={tau}: {}", f.pair, e.values[0]);
                }
            }
        }
    }

    #[test]
    fn selection_is_monotone_in_tau() {
        let st = setup(12, 12, &[2, 2], channel, ScalingKind::Multiplicity);
        let mut counts = Vec::new();
        for tau in [3.0, 10.0, 100.0] {
            let mut cs = ConstraintSet::initial(&st.d);
            let r = adapt(&st.d, &st.w, &mut cs, &st.schurs, tau).unwrap();
            counts.push(r.pairs.iter().map(|p| p.selected).collect::<Vec<_>>());
        }
        for k in 0..counts[0].len() {
            assert!(counts[0][k] >= counts[1][k] && counts[1][k] >= counts[2][k]);
        }
    }

    #[test]
    fn fully_constrained_pair_has_empty_spectrum() {
        let st = setup(4, 2, &[2, 1], |_| 1.0, ScalingKind::Multiplicity);
        let mut cs = ConstraintSet::initial(&st.d);
        let support = cs.dofs()[0].support.clone();
        let unit: Vec<Vec<f64>> = (0..support.len())
            .map(|k| (0..support.len()).map(|t| if t == k { 1.0 } else { 0.0 }).collect())
            .collect();
        cs.append((0, 1), &support, unit, Origin::Adaptive, None);
        let p = problem(&st, &cs, (0, 1));
        let e = p.solve().unwrap();
        assert!(e.values.iter().all(|&l| l < 1e-10));
        let (rows, omega) = p.select(&e, 2.0).unwrap();
        assert!(rows.is_empty());
        assert_eq!(omega, 1.0);
    }
}
