mod common;

use common::*;
use darcy_bddc::adaptive::pair_problems;
use darcy_bddc::decomposition::ScalingKind;
use darcy_bddc::io::SyntheticKind;
use darcy_bddc::linalg::max_abs;
use darcy_bddc::solver::{Bddc, ConstraintMode};
use faer::Mat;

fn cases() -> Vec<(String, Case)> {
    vec![
        ("homogeneous".into(), case(&[12, 12], &[3, 3], SyntheticKind::Constant(1.0))),
        ("log-uniform".into(), case(&[16, 12], &[2, 3], log_uniform(1))),
        ("channelized".into(), case(&[20, 20], &[2, 2], SyntheticKind::Channelized { contrast: 1e6, seed: 1 })),
        ("checkerboard".into(), case(&[12, 12], &[3, 3], SyntheticKind::Checkerboard { contrast: 1e6, block: vec![4, 4] })),
        ("3d".into(), case(&[6, 6, 4], &[2, 2, 2], log_uniform(2))),
    ]
}

#[test]
fn conservation_and_balance() {
    for (name, c) in cases() {
        for scaling in [ScalingKind::Multiplicity, ScalingKind::Stiffness] {
            for mode in [ConstraintMode::Initial, ConstraintMode::Adaptive, ConstraintMode::Multiscale] {
                let cfg = config(mode, if mode == ConstraintMode::Adaptive { 10.0 } else { f64::INFINITY }, scaling, 1e-8);
                let rep = Bddc::setup(&c.system, &c.decomposition, &cfg).unwrap().solve(None).unwrap();
                let tag = format!("{name} {scaling:?} {mode:?}");
                if scaling == ScalingKind::Multiplicity {
                    assert!(rep.conservation_defect <= 1e-10, "{tag}: {}", rep.conservation_defect);
                    assert!(rep.correction_divergence <= 1e-8, "{tag}: {}", rep.correction_divergence);
                }
                assert!(rep.balance_violation <= 1e-9, "{tag}: {}", rep.balance_violation);
                let bu = c.system.b().matvec(&rep.u);
                let f = c.system.f();
                assert!(rel(&bu, f) <= 1e-9, "{tag}: final divergence {}", rel(&bu, f));
            }
        }
    }
}

#[test]
fn averaging_is_a_projection() {
    for (name, c) in cases() {
        for scaling in [ScalingKind::Multiplicity, ScalingKind::Stiffness] {
            let b = Bddc::setup(&c.system, &c.decomposition, &config(ConstraintMode::Initial, f64::INFINITY, scaling, 1e-6)).unwrap();
            let w = b.weights();
            let broken: Vec<Vec<f64>> = (0..c.decomposition.n_subdomains())
                .map(|s| (0..c.decomposition.subdomain_interface(s).len()).map(|k| ((s * 31 + k * 7) as f64).sin()).collect())
                .collect();
            let e1 = w.apply_e(&broken);
            let e2 = w.apply_e(&e1);
            for (x, y) in e1.iter().flatten().zip(e2.iter().flatten()) {
                assert!((x - y).abs() <= 1e-12, "{name}");
            }
        }
    }
}

#[test]
fn pair_projectors_and_schur_symmetry() {
    for (name, c) in cases() {
        let b = Bddc::setup(&c.system, &c.decomposition, &adaptive(10.0)).unwrap();
        let schurs: Vec<Mat<f64>> = b.subdomains().iter().map(|s| s.dense_schur()).collect();
        for s in &schurs {
            let scale = (0..s.nrows()).map(|i| s[(i, i)].abs()).fold(0.0, f64::max);
            for i in 0..s.nrows() {
                for j in 0..i {
                    assert!((s[(i, j)] - s[(j, i)]).abs() <= 1e-12 * scale, "{name}");
                }
            }
        }
        for (p, _) in pair_problems(b.decomposition(), b.weights(), b.constraints(), &schurs).unwrap() {
            let pi = p.projector();
            let pp = &pi * &pi;
            let d: Vec<f64> = (0..pi.nrows()).flat_map(|i| (0..pi.ncols()).map(move |j| (i, j))).map(|(i, j)| pp[(i, j)] - pi[(i, j)]).collect();
            assert!(max_abs(&d) <= 1e-12, "{name} {:?}", p.pair);
        }
    }
}
