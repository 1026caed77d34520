mod common;

use common::*;
use darcy_bddc::adaptive::pair_problems;
use darcy_bddc::coarse_space::{ConstraintSet, Origin};
use darcy_bddc::decomposition::ScalingKind;
use darcy_bddc::io::SyntheticKind;
use darcy_bddc::oracle::{direct_solve, preconditioned_spectrum};
use darcy_bddc::solver::{recover_pressure, Bddc, ConstraintMode, SolveConfig};
use faer::Mat;

#[test]
fn small_random_problem_matches_direct_solve() {
    let c = case(&[8, 8], &[2, 2], log_uniform(7));
    let exact = direct_solve(&c.system).unwrap();
    let rep = Bddc::setup(&c.system, &c.decomposition, &SolveConfig::default()).unwrap().solve(None).unwrap();
    assert!(rel(&rep.u, &exact.u) <= 1e-5, "{}", rel(&rep.u, &exact.u));
    assert!(rel(&rep.p, &exact.p) <= 1e-5, "{}", rel(&rep.p, &exact.p));
    let mean: f64 = rep.p.iter().sum::<f64>() / rep.p.len() as f64;
    assert!(mean.abs() <= 1e-10);
}

#[test]
fn pressure_from_exact_flux() {
    for kind in [log_uniform(3), SyntheticKind::Channelized { contrast: 1e6, seed: 2 }] {
        let c = case(&[12, 10], &[3, 2], kind);
        let exact = direct_solve(&c.system).unwrap();
        let scaled = c.system.rescale(&c.decomposition).unwrap();
        let (p, residual) = recover_pressure(&scaled, &exact.u).unwrap();
        assert!(rel(&p, &exact.p) <= 1e-8, "{}", rel(&p, &exact.p));
        assert!(residual < 1e-8);
    }
}

#[test]
fn spectrum_floor_on_four_subdomains() {
    for scaling in [ScalingKind::Multiplicity, ScalingKind::Stiffness] {
        for mode in [ConstraintMode::Initial, ConstraintMode::Multiscale] {
            let c = case(&[10, 10], &[2, 2], log_uniform(11));
            let cfg = config(mode, f64::INFINITY, scaling, 1e-8);
            let b = Bddc::setup(&c.system, &c.decomposition, &cfg).unwrap();
            let ev = preconditioned_spectrum(&b).unwrap();
            let min = *ev.last().unwrap();
            assert!(min >= 1.0 - 1e-8, "{scaling:?} {mode:?}: {min}");
        }
    }
}

#[test]
fn fully_constrained_preconditioner_is_exact() {
    let c = case(&[9, 9], &[3, 3], log_uniform(5));
    let mut cs = ConstraintSet::initial(&c.decomposition);
    for f in c.decomposition.faces() {
        let support: Vec<usize> = f.dofs.iter().map(|&d| c.decomposition.interface_index(d).unwrap()).collect();
        let rows: Vec<Vec<f64>> = (0..support.len())
            .map(|k| {
                let sign = c.decomposition.subdomain_signs(f.pair.0)
                    [c.decomposition.subdomain_interface(f.pair.0).binary_search(&support[k]).unwrap()];
                (0..support.len()).map(|l| if l == k { sign } else { 0.0 }).collect()
            })
            .collect();
        cs.append(f.pair, &support, rows, Origin::Adaptive, None);
    }
    assert_eq!(cs.n_flux(), c.decomposition.n_interface());
    let b = Bddc::setup_with_constraints(&c.system, &c.decomposition, &SolveConfig::default(), cs).unwrap();
    for v in preconditioned_spectrum(&b).unwrap() {
        assert!((v - 1.0).abs() < 1e-8, "{v}");
    }
    let rep = b.solve(None).unwrap();
    assert!(rep.iterations <= 1);
}

#[test]
fn kappa_tracks_indicator() {
    for (kind, taus) in [
        (SyntheticKind::Channelized { contrast: 1e6, seed: 4 }, [f64::INFINITY, 100.0, 10.0, 3.0]),
        (log_uniform(9), [f64::INFINITY, 100.0, 10.0, 3.0]),
    ] {
        let c = case(&[24, 24], &[3, 3], kind);
        for tau in taus {
            let b = Bddc::setup(&c.system, &c.decomposition, &adaptive(tau)).unwrap();
            let rep = b.solve(None).unwrap();
            let w = rep.omega_tilde.unwrap();
            let nf = c.decomposition.max_faces_per_subdomain() as f64;
            assert!(rep.kappa <= 3.0 * w && rep.kappa >= w / 3.0, "tau {tau}: kappa {} omega {w}", rep.kappa);
            assert!(rep.kappa <= w * nf * nf);
        }
    }
}

#[test]
fn iterations_and_error_improve_with_tau() {
    let c = case(&[24, 24], &[4, 4], SyntheticKind::Channelized { contrast: 1e6, seed: 8 });
    let exact = direct_solve(&c.system).unwrap();
    let mut last = usize::MAX;
    let mut eps = Vec::new();
    for tau in [f64::INFINITY, 100.0, 10.0, 3.0] {
        let rep = Bddc::setup(&c.system, &c.decomposition, &adaptive(tau)).unwrap().solve(Some(&exact.u)).unwrap();
        assert!(rep.iterations <= last, "tau {tau}: {} > {last}", rep.iterations);
        last = rep.iterations;
        eps.push(rep.eps_star.unwrap());
    }
    assert!(eps[3] < eps[0]);
}

#[test]
fn augmented_pairs_respect_tau() {
    let c = case(&[16, 16], &[2, 2], log_uniform(21));
    for tau in [100.0, 10.0, 3.0] {
        let b = Bddc::setup(&c.system, &c.decomposition, &adaptive(tau)).unwrap();
        let schurs: Vec<Mat<f64>> = b.subdomains().iter().map(|s| s.dense_schur()).collect();
        for (_, e) in pair_problems(b.decomposition(), b.weights(), b.constraints(), &schurs).unwrap() {
            assert!(e.values.first().map_or(true, |&l| l <= tau * (1.0 + 1e-8)));
        }
        assert!(b.adaptive_report().unwrap().omega_tilde <= tau);
    }
}

#[test]
fn three_dimensional_problem() {
    let c = case(&[6, 6, 6], &[2, 2, 2], log_uniform(31));
    let exact = direct_solve(&c.system).unwrap();
    let cfg = SolveConfig { tol: 1e-10, ..adaptive(5.0) };
    let rep = Bddc::setup(&c.system, &c.decomposition, &cfg).unwrap().solve(Some(&exact.u)).unwrap();
    assert!(rel(&rep.u, &exact.u) < 1e-6);
    assert!(rep.kappa <= 5.0 * (1.0 + 1e-6) * 3.0);
}
