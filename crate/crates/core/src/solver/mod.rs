//! Three-step BDDC solve of the mixed system.
//!
//! 1. A coarse solve gives fluxes `u0` that balance the sources subdomain by
//!    subdomain.
//! 2. Independent interior solves give `u* = u0 + u_I` with the right
//!    divergence inside every subdomain.
//! 3. Conjugate gradients on the interface, preconditioned by BDDC, compute
//!    the divergence-free correction. Pressures are recovered at the end.

mod pcg;

pub use pcg::{lanczos_extremes, pcg, PcgOutcome};

use faer::Mat;
use log::{info, warn};
use rayon::prelude::*;

use crate::adaptive::{adapt, add_multiscale_constraints, AdaptiveReport};
use crate::coarse_space::{CoarseSpace, ConstraintSet};
use crate::decomposition::{Decomposition, ScalingKind, WeightOperator};
use crate::error::{Error, Result};
use crate::grid_fem::SaddleSystem;
use crate::linalg::{norm2, sym_eig, CsrMatrix, SparseLu};
use crate::substructure::SubdomainOperator;

/// Which coarse constraints are used.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConstraintMode {
    /// Zero-net-flux constraints only.
    #[default]
    Initial,
    /// Initial constraints plus rows from the pair eigenproblems.
    Adaptive,
    /// Initial constraints plus traces of local Darcy solves.
    Multiscale,
}

impl std::str::FromStr for ConstraintMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "initial" => Ok(Self::Initial),
            "adaptive" => Ok(Self::Adaptive),
            "multiscale" => Ok(Self::Multiscale),
            other => Err(Error::invalid(format!("unknown constraint mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    /// Target condition number for adaptive constraints (`f64::INFINITY` = none).
    pub tau: f64,
    pub scaling: ScalingKind,
    /// Relative residual tolerance of conjugate gradients.
    pub tol: f64,
    pub maxit: usize,
    pub constraints: ConstraintMode,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tau: f64::INFINITY,
            scaling: ScalingKind::Multiplicity,
            tol: 1e-6,
            maxit: 1000,
            constraints: ConstraintMode::Initial,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 1.0) {
            return Err(Error::invalid("tau must exceed 1"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::invalid(format!("tolerance must lie in (0, 1), got {}", self.tol)));
        }
        if self.maxit == 0 {
            return Err(Error::invalid("maxit must be at least 1"));
        }
        Ok(())
    }
}

/// Result of one solve.
#[derive(Clone, Debug, Default)]
pub struct SolveReport {
    /// Fluxes.
    pub u: Vec<f64>,
    /// Pressures, zero volume-weighted mean.
    pub p: Vec<f64>,
    /// Coarse approximation after step 1.
    pub u0: Vec<f64>,
    /// Approximation after step 2.
    pub u_star: Vec<f64>,
    pub iterations: usize,
    pub kappa: f64,
    pub omega_tilde: Option<f64>,
    pub n_c: usize,
    pub eps0: Option<f64>,
    pub eps_star: Option<f64>,
    pub history: Vec<f64>,
    pub converged: bool,
    /// `||B u* - f|| / ||f||`.
    pub conservation_defect: f64,
    /// `||B u_corr|| / (||B|| ||u_corr||)`.
    pub correction_divergence: f64,
    /// Largest relative net flux of any CG iterate.
    pub balance_violation: f64,
    /// `||A u + B^T p|| / ||A u||`.
    pub momentum_residual: f64,
    pub warnings: Vec<String>,
}

/// Relative Euclidean errors of `u0` and `u*` against a reference flux.
pub fn relative_errors(u0: &[f64], u_star: &[f64], exact: &[f64]) -> Result<(f64, f64)> {
    let n = norm2(exact);
    if n == 0.0 {
        return Err(Error::invalid("reference flux is zero"));
    }
    let d = |u: &[f64]| u.iter().zip(exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / n;
    Ok((d(u0), d(u_star)))
}

/// True when coefficient jumps sit on the interface while subdomains are
/// nearly homogeneous, the setting where stiffness weights pay off.
pub fn suggests_stiffness(system: &SaddleSystem, decomposition: &Decomposition) -> bool {
    let mut across: f64 = 1.0;
    let mut within: f64 = 1.0;
    for dof in 0..system.n_flux() {
        let [n, p] = system.dof_cells(dof);
        let (a, b) = (system.cell_mass_diag(n, dof), system.cell_mass_diag(p, dof));
        let ratio = a.max(b) / a.min(b);
        if decomposition.interface_index(dof).is_some() {
            across = across.max(ratio);
        } else {
            within = within.max(ratio);
        }
    }
    across > 1e3 && within < 10.0
}

/// Set-up BDDC operators for one system and decomposition.
#[derive(Debug)]
pub struct Bddc {
    system: SaddleSystem,
    decomposition: Decomposition,
    weights: WeightOperator,
    subs: Vec<SubdomainOperator>,
    constraints: ConstraintSet,
    coarse: CoarseSpace,
    adaptive: Option<AdaptiveReport>,
    /// Pseudo-inverse of `N N^T` (N = net-flux incidence).
    nn_pinv: Mat<f64>,
    config: SolveConfig,
}

impl Bddc {
    /// `system` is the unscaled assembled system; the pressure rescaling is
    /// applied here.
    pub fn setup(system: &SaddleSystem, decomposition: &Decomposition, config: &SolveConfig) -> Result<Self> {
        config.validate()?;
        if config.scaling == ScalingKind::Multiplicity && suggests_stiffness(system, decomposition) {
            warn!("coefficient jumps are aligned with the interface; consider --scaling stiffness");
        }
        let system = system.rescale(decomposition)?;
        let weights = WeightOperator::new(decomposition, &system, config.scaling);
        let subs = SubdomainOperator::build_all(&system, decomposition)?;
        let mut constraints = ConstraintSet::initial(decomposition);
        let adaptive = match config.constraints {
            ConstraintMode::Initial => None,
            ConstraintMode::Adaptive => {
                let schurs: Vec<Mat<f64>> = subs.par_iter().map(|s| s.dense_schur()).collect();
                let r = adapt(decomposition, &weights, &mut constraints, &schurs, config.tau)?;
                info!("adaptive constraints: {} added, indicator {:.3}", r.added, r.omega_tilde);
                Some(r)
            }
            ConstraintMode::Multiscale => {
                let added = add_multiscale_constraints(&system, decomposition, &mut constraints)?;
                info!("multiscale constraints: {added} added");
                None
            }
        };
        Self::finish(system, decomposition, weights, subs, constraints, adaptive, config)
    }

    /// Like [`Bddc::setup`] but with a caller-supplied constraint set;
    /// `config.constraints` is ignored.
    pub fn setup_with_constraints(
        system: &SaddleSystem,
        decomposition: &Decomposition,
        config: &SolveConfig,
        constraints: ConstraintSet,
    ) -> Result<Self> {
        config.validate()?;
        let system = system.rescale(decomposition)?;
        let weights = WeightOperator::new(decomposition, &system, config.scaling);
        let subs = SubdomainOperator::build_all(&system, decomposition)?;
        Self::finish(system, decomposition, weights, subs, constraints, None, config)
    }

    fn finish(
        system: SaddleSystem,
        decomposition: &Decomposition,
        weights: WeightOperator,
        subs: Vec<SubdomainOperator>,
        constraints: ConstraintSet,
        adaptive: Option<AdaptiveReport>,
        config: &SolveConfig,
    ) -> Result<Self> {
        let coarse = CoarseSpace::build(&subs, decomposition, &constraints)?;
        let nn_pinv = net_flux_pinv(decomposition)?;
        Ok(Self {
            system,
            decomposition: decomposition.clone(),
            weights,
            subs,
            constraints,
            coarse,
            adaptive,
            nn_pinv,
            config: config.clone(),
        })
    }

    /// The rescaled system.
    pub fn system(&self) -> &SaddleSystem {
        &self.system
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    pub fn weights(&self) -> &WeightOperator {
        &self.weights
    }

    pub fn subdomains(&self) -> &[SubdomainOperator] {
        &self.subs
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn coarse(&self) -> &CoarseSpace {
        &self.coarse
    }

    pub fn adaptive_report(&self) -> Option<&AdaptiveReport> {
        self.adaptive.as_ref()
    }

    pub fn config(&self) -> &SolveConfig {
        &self.config
    }

    /// Coarse space size `n_c`.
    pub fn n_coarse(&self) -> usize {
        self.constraints.n_coarse(self.decomposition.n_subdomains())
    }

    pub fn n_interface(&self) -> usize {
        self.decomposition.n_interface()
    }

    fn assemble(&self, parts: Vec<Vec<f64>>) -> Vec<f64> {
        let mut out = vec![0.0; self.n_interface()];
        for (s, y) in parts.iter().enumerate() {
            for (&k, v) in self.decomposition.subdomain_interface(s).iter().zip(y) {
                out[k] += v;
            }
        }
        out
    }

    /// Assembled interface Schur complement applied to `x`.
    pub fn apply_schur(&self, x: &[f64]) -> Vec<f64> {
        let local = self.decomposition.restrict(x);
        let parts = self.subs.par_iter().zip(local.par_iter()).map(|(op, xs)| op.schur_apply(xs)).collect();
        self.assemble(parts)
    }

    /// BDDC preconditioner: coarse plus constrained local corrections,
    /// averaged by the interface weights.
    pub fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let rs = self.weights.restrict_weighted(r);
        let mut g = vec![0.0; self.coarse.n_flux()];
        for (s, ri) in rs.iter().enumerate() {
            self.coarse.local(s).restrict_to_coarse(ri, &mut g);
        }
        let h = vec![0.0; self.decomposition.n_subdomains()];
        let (w, _) = self.coarse.solve(&g, &h);
        let parts: Vec<Vec<f64>> = self
            .subs
            .par_iter()
            .zip(rs.par_iter())
            .map(|(op, ri)| {
                let lc = self.coarse.local(op.id());
                let wp = lc.coarse_function(&w);
                let wd = lc.constrained_solve(ri);
                let n_int = op.n_interior();
                wp[n_int..].iter().zip(&wd[n_int..]).map(|(a, b)| a + b).collect()
            })
            .collect();
        self.weights.average(&parts)
    }

    /// Orthogonal projection onto interface vectors with zero net flux out
    /// of every subdomain.
    pub fn project_balanced(&self, x: &[f64]) -> Vec<f64> {
        let y = self.decomposition.net_flux(x);
        let z = self.nn_pinv_apply(&y);
        let c = self.decomposition.net_flux_transpose(&z);
        x.iter().zip(&c).map(|(a, b)| a - b).collect()
    }

    fn nn_pinv_apply(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        (0..n).map(|r| (0..n).map(|c| self.nn_pinv[(r, c)] * y[c]).sum()).collect()
    }

    /// Runs the three-step method. With `reference` fluxes the relative
    /// errors of `u0` and `u*` are filled in.
    pub fn solve(&self, reference: Option<&[f64]>) -> Result<SolveReport> {
        let sys = &self.system;
        let dec = &self.decomposition;
        let n_u = sys.n_flux();
        let f = sys.f_scaled();

        // Step 1: coarse fluxes balancing the sources per subdomain.
        let g0: Vec<f64> = (0..dec.n_subdomains()).map(|s| dec.cells(s).iter().map(|&c| f[c]).sum()).collect();
        let (w0, _) = self.coarse.solve(&vec![0.0; self.coarse.n_flux()], &g0);
        let coarse_parts: Vec<Vec<f64>> =
            self.subs.par_iter().map(|op| self.coarse.local(op.id()).coarse_function(&w0)).collect();
        let mut u0 = vec![0.0; n_u];
        let gamma_parts: Vec<Vec<f64>> =
            self.subs.iter().zip(&coarse_parts).map(|(op, v)| v[op.n_interior()..].to_vec()).collect();
        let avg = self.weights.average(&gamma_parts);
        for (k, &dof) in dec.interface_dofs().iter().enumerate() {
            u0[dof] = avg[k];
        }
        for (op, v) in self.subs.iter().zip(&coarse_parts) {
            for (l, &dof) in op.dofs()[..op.n_interior()].iter().enumerate() {
                u0[dof] = v[l];
            }
        }

        // Step 2: interior corrections.
        let interior: Vec<Vec<f64>> = self
            .subs
            .par_iter()
            .map(|op| {
                let ul = op.gather(&u0);
                let au = op.a().matvec(&ul);
                let bu = op.b().matvec(&ul);
                let g: Vec<f64> = au[..op.n_interior()].iter().map(|v| -v).collect();
                let h: Vec<f64> = op.cells().iter().zip(&bu).map(|(&c, b)| f[c] - b).collect();
                op.interior_solve(&g, &h).0
            })
            .collect();
        let mut u_star = u0.clone();
        for (op, ui) in self.subs.iter().zip(&interior) {
            for (l, &dof) in op.dofs()[..op.n_interior()].iter().enumerate() {
                u_star[dof] += ui[l];
            }
        }
        let f_norm = norm2(sys.f());
        let div_defect: Vec<f64> = sys.b().matvec(&u_star).iter().zip(sys.f()).map(|(a, b)| a - b).collect();
        let conservation_defect = if f_norm > 0.0 { norm2(&div_defect) / f_norm } else { norm2(&div_defect) };

        // Step 3: interface problem for the correction.
        let r_mom: Vec<f64> = sys.a().matvec(&u_star).iter().map(|v| -v).collect();
        let r_div: Vec<f64> = sys.b_scaled().matvec(&u_star).iter().zip(f).map(|(a, b)| b - a).collect();
        let particular: Vec<(Vec<f64>, Vec<f64>)> = self
            .subs
            .par_iter()
            .map(|op| {
                let g: Vec<f64> = op.dofs()[..op.n_interior()].iter().map(|&d| r_mom[d]).collect();
                let h: Vec<f64> = op.cells().iter().map(|&c| r_div[c]).collect();
                let (up, pp, _) = op.interior_solve(&g, &h);
                let mut full = up.clone();
                full.resize(op.n_local(), 0.0);
                (up, op.interface_residual(&full, &pp))
            })
            .collect();
        let mut g: Vec<f64> = dec.interface_dofs().iter().map(|&d| r_mom[d]).collect();
        let contrib = self.assemble(particular.iter().map(|p| p.1.clone()).collect());
        g.iter_mut().zip(&contrib).for_each(|(a, b)| *a -= b);
        let h: Vec<f64> = (0..dec.n_subdomains())
            .map(|s| {
                let d = sys.scale()[dec.cells(s)[0]];
                -dec.cells(s).iter().map(|&c| r_div[c]).sum::<f64>() / d
            })
            .collect();
        let x_h = dec.net_flux_transpose(&self.nn_pinv_apply(&h));
        let s_xh = self.apply_schur(&x_h);
        let rhs0: Vec<f64> = g.iter().zip(&s_xh).map(|(a, b)| a - b).collect();
        let rhs = self.project_balanced(&rhs0);

        let mut balance_violation: f64 = 0.0;
        let outcome = pcg(
            |x| self.project_balanced(&self.apply_schur(x)),
            |r| self.project_balanced(&self.precondition(r)),
            &rhs,
            self.config.tol,
            self.config.maxit,
            |x| balance_violation = balance_violation.max(dec.balance_violation(x)),
        )?;
        let x: Vec<f64> = outcome.x.iter().zip(&x_h).map(|(a, b)| a + b).collect();

        let local_x = dec.restrict(&x);
        let extensions: Vec<Vec<f64>> =
            self.subs.par_iter().zip(local_x.par_iter()).map(|(op, xs)| op.extend(xs).0).collect();
        let mut u_corr = vec![0.0; n_u];
        for (k, &dof) in dec.interface_dofs().iter().enumerate() {
            u_corr[dof] = x[k];
        }
        for ((op, (up, _)), ext) in self.subs.iter().zip(&particular).zip(&extensions) {
            for (l, &dof) in op.dofs()[..op.n_interior()].iter().enumerate() {
                u_corr[dof] = up[l] + ext[l];
            }
        }
        let u: Vec<f64> = u_star.iter().zip(&u_corr).map(|(a, b)| a + b).collect();
        let b_norm = (2 * sys.grid().dim()) as f64;
        let uc_norm = norm2(&u_corr);
        let correction_divergence = if uc_norm > 0.0 {
            norm2(&sys.b().matvec(&u_corr)) / (b_norm * uc_norm)
        } else {
            0.0
        };

        let (p, momentum_residual) = recover_pressure(sys, &u)?;
        let mut warnings = Vec::new();
        if momentum_residual > 10.0 * self.config.tol {
            let msg = format!(
                "momentum residual {momentum_residual:.3e} exceeds 10 x tolerance after pressure recovery"
            );
            warn!("{msg}");
            warnings.push(msg);
        }
        let (eps0, eps_star) = match reference {
            Some(ue) => {
                let (a, b) = relative_errors(&u0, &u_star, ue)?;
                (Some(a), Some(b))
            }
            None => (None, None),
        };
        let report = SolveReport {
            u,
            p,
            u0,
            u_star,
            iterations: outcome.iterations,
            kappa: outcome.condition(),
            omega_tilde: self.adaptive.as_ref().map(|a| a.omega_tilde),
            n_c: self.n_coarse(),
            eps0,
            eps_star,
            history: outcome.history,
            converged: outcome.converged,
            conservation_defect,
            correction_divergence,
            balance_violation,
            momentum_residual,
            warnings,
        };
        if report.converged {
            Ok(report)
        } else {
            Err(Error::NonConvergence(Box::new(report)))
        }
    }
}

/// Pseudo-inverse of the subdomain graph matrix `N N^T`.
fn net_flux_pinv(decomposition: &Decomposition) -> Result<Mat<f64>> {
    let n = decomposition.n_subdomains();
    let mut m = Mat::<f64>::zeros(n, n);
    for k in 0..decomposition.n_interface() {
        let [i, j] = decomposition.interface_sides(k);
        m[(i, i)] += 1.0;
        m[(j, j)] += 1.0;
        m[(i, j)] -= 1.0;
        m[(j, i)] -= 1.0;
    }
    let (ev, v) = sym_eig(&m).map_err(|message| Error::NumericalFailure { subdomain: None, message })?;
    let emax = ev.iter().cloned().fold(0.0, f64::max);
    Ok(Mat::from_fn(n, n, |r, c| {
        (0..n)
            .filter(|&k| ev[k] > 1e-10 * emax)
            .map(|k| v[(r, k)] * v[(c, k)] / ev[k])
            .sum()
    }))
}

/// Pressure from fluxes: least-squares solution of `B^T D pbar = -A u`
/// through the cell Laplacian `(D B)(D B)^T` with cell 0 pinned, unscaled
/// and shifted to zero mean. Also returns `||A u + (D B)^T pbar|| / ||A u||`.
pub fn recover_pressure(system: &SaddleSystem, u: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = system.n_cells();
    let b = system.b_scaled();
    let au = system.a().matvec(u);
    let mut rhs: Vec<f64> = b.matvec(&au).iter().map(|v| -v).collect();
    let mut trip = Vec::new();
    // (B B^T)_{c,d} = sum over dofs of B_{c,dof} B_{d,dof}
    for dof in 0..system.n_flux() {
        let cells = system.dof_cells(dof);
        let vals = [b.get(cells[0], dof), b.get(cells[1], dof)];
        for x in 0..2 {
            for y in 0..2 {
                let (r, c) = (cells[x], cells[y]);
                if r != 0 && c != 0 {
                    trip.push((r, c, vals[x] * vals[y]));
                }
            }
        }
    }
    trip.push((0, 0, 1.0));
    rhs[0] = 0.0;
    let lap = CsrMatrix::from_triplets(n, n, &trip);
    let lu = SparseLu::factor_csr(&lap).map_err(|message| Error::NumericalFailure {
        subdomain: None,
        message: format!("pressure recovery: {message}"),
    })?;
    let pbar = lu.solve(&rhs);
    let btp = b.matvec_transpose(&pbar);
    let res: Vec<f64> = au.iter().zip(&btp).map(|(a, b)| a + b).collect();
    let au_norm = norm2(&au);
    let rel = if au_norm > 0.0 { norm2(&res) / au_norm } else { norm2(&res) };
    let mut p: Vec<f64> = pbar.iter().zip(system.scale()).map(|(a, d)| a * d).collect();
    system.center_pressure(&mut p);
    Ok((p, rel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fem::{Grid, Permeability, Wells};

    fn problem(nx: usize, ny: usize, splits: &[usize], ks: Option<Vec<f64>>) -> (SaddleSystem, Decomposition) {
        let g = Grid::new(2, &[nx, ny], &[1.0, 1.0]).unwrap();
        let perm = match ks {
            Some(k) => Permeability::isotropic(2, &k).unwrap(),
            None => Permeability::uniform(&g, 1.0).unwrap(),
        };
        let d = Decomposition::regular(&g, splits).unwrap();
        (SaddleSystem::assemble(&g, &perm, Wells::corners(&g)).unwrap(), d)
    }

    #[test]
    fn config_validation() {
        let mut c = SolveConfig::default();
        assert!(c.validate().is_ok());
        c.tau = 0.5;
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("tau must exceed 1"));
        c.tau = 2.0;
        c.tol = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn preconditioner_is_symmetric_and_zero_preserving() {
        let ks: Vec<f64> = (0..144).map(|i| 10f64.powi((i * 7 % 5) as i32 - 2)).collect();
        for scaling in [ScalingKind::Multiplicity, ScalingKind::Stiffness] {
            let (s, d) = problem(12, 12, &[3, 2], Some(ks.clone()));
            let cfg = SolveConfig { scaling, ..Default::default() };
            let bddc = Bddc::setup(&s, &d, &cfg).unwrap();
            let n = bddc.n_interface();
            assert!(bddc.precondition(&vec![0.0; n]).iter().all(|v| *v == 0.0));
            let r1: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let r2: Vec<f64> = (0..n).map(|i| (i as f64 * 1.91).cos()).collect();
            let a = crate::linalg::dot(&r1, &bddc.precondition(&r2));
            let b = crate::linalg::dot(&r2, &bddc.precondition(&r1));
            assert!((a - b).abs() <= 1e-11 * a.abs().max(b.abs()), "{a} {b}");
        }
    }

    #[test]
    fn multiplicity_output_is_balanced() {
        let (s, d) = problem(12, 8, &[3, 2], None);
        let bddc = Bddc::setup(&s, &d, &SolveConfig::default()).unwrap();
        let n = bddc.n_interface();
        let r: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
        let w = bddc.precondition(&r);
        assert!(d.balance_violation(&w) < 1e-10);
    }

    #[test]
    fn solve_is_conservative_and_converges() {
        let (s, d) = problem(16, 12, &[4, 3], None);
        let bddc = Bddc::setup(&s, &d, &SolveConfig::default()).unwrap();
        let rep = bddc.solve(None).unwrap();
        assert!(rep.converged);
        assert!(rep.conservation_defect < 1e-10, "{}", rep.conservation_defect);
        assert!(rep.correction_divergence < 1e-8);
        assert!(rep.balance_violation < 1e-9);
        let bu = s.b().matvec(&rep.u);
        let res: f64 = bu.iter().zip(s.f()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(res < 1e-10 * norm2(s.f()));
        let vol_mean: f64 = rep.p.iter().sum();
        assert!(vol_mean.abs() < 1e-10 * rep.p.iter().map(|v| v.abs()).sum::<f64>());
    }

    #[test]
    fn zero_sources_give_zero_solution() {
        let g = Grid::new(2, &[6, 6], &[1.0, 1.0]).unwrap();
        let perm = Permeability::uniform(&g, 1.0).unwrap();
        let d = Decomposition::regular(&g, &[2, 2]).unwrap();
        let s = SaddleSystem::assemble(&g, &perm, Wells { source: 0, sink: 35, strength: 0.0 }).unwrap();
        let rep = Bddc::setup(&s, &d, &SolveConfig::default()).unwrap().solve(None).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(rep.u.iter().all(|v| *v == 0.0));
        assert!(rep.p.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn pressure_recovery_ignores_constant_shift() {
        let (s, d) = problem(6, 6, &[2, 2], None);
        let s = s.rescale(&d).unwrap();
        let u: Vec<f64> = (0..s.n_flux()).map(|i| (i as f64).sin()).collect();
        let (p1, _) = recover_pressure(&s, &u).unwrap();
        let mut p2 = p1.clone();
        p2.iter_mut().for_each(|v| *v += 3.0);
        s.center_pressure(&mut p2);
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-12);
        }
        let (p0, _) = recover_pressure(&s, &vec![0.0; s.n_flux()]).unwrap();
        assert!(p0.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn relative_errors_reject_zero_reference() {
        assert!(relative_errors(&[1.0], &[1.0], &[0.0]).is_err());
        assert_eq!(relative_errors(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn non_convergence_carries_report() {
        let (s, d) = problem(16, 16, &[4, 4], None);
        let cfg = SolveConfig { maxit: 1, tol: 1e-12, ..Default::default() };
        match Bddc::setup(&s, &d, &cfg).unwrap().solve(None) {
            Err(Error::NonConvergence(rep)) => assert_eq!(rep.iterations, 1),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
