//! Preconditioned conjugate gradients with a Lanczos condition estimate.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, sym_eig};

#[derive(Clone, Debug, Default)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual after every iteration (entry 0 is 1).
    pub history: Vec<f64>,
    pub converged: bool,
    /// `(lambda_min, lambda_max)` of the Lanczos matrix.
    pub extreme_eigenvalues: (f64, f64),
}

impl PcgOutcome {
    pub fn condition(&self) -> f64 {
        let (lo, hi) = self.extreme_eigenvalues;
        if lo > 0.0 {
            (hi / lo).max(1.0)
        } else {
            1.0
        }
    }
}

/// Solves `A x = b` from a zero initial guess, stopping when
/// `||r|| <= tol ||b||`. `inspect` sees every iterate (used for balance
/// checks).
pub fn pcg(
    apply_a: impl Fn(&[f64]) -> Vec<f64>,
    apply_m: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    maxit: usize,
    mut inspect: impl FnMut(&[f64]),
) -> Result<PcgOutcome> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let r0 = norm2(b);
    let mut out = PcgOutcome {
        history: vec![1.0],
        converged: true,
        extreme_eigenvalues: (1.0, 1.0),
        ..Default::default()
    };
    if r0 == 0.0 {
        out.x = x;
        return Ok(out);
    }
    let mut r = b.to_vec();
    let mut z = apply_m(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    out.converged = false;
    for it in 0..maxit {
        let ap = apply_a(&p);
        let curv = dot(&p, &ap);
        if !(curv > 0.0) || !(rz > 0.0) {
            return Err(Error::Indefinite {
                iteration: it,
                curvature: if rz > 0.0 { curv } else { rz },
            });
        }
        let alpha = rz / curv;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        alphas.push(alpha);
        inspect(&x);
        let rel = norm2(&r) / r0;
        out.history.push(rel);
        out.iterations = it + 1;
        if rel <= tol {
            out.converged = true;
            break;
        }
        z = apply_m(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        betas.push(beta);
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    out.extreme_eigenvalues = lanczos_extremes(&alphas, &betas);
    out.x = x;
    Ok(out)
}

/// Extreme eigenvalues of the Lanczos tridiagonal matrix built from the CG
/// coefficients.
pub fn lanczos_extremes(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let m = alphas.len();
    if m == 0 {
        return (1.0, 1.0);
    }
    let mut t = Mat::<f64>::zeros(m, m);
    for j in 0..m {
        t[(j, j)] = 1.0 / alphas[j] + if j > 0 { betas[j - 1] / alphas[j - 1] } else { 0.0 };
        if j + 1 < m {
            let off = betas[j].sqrt() / alphas[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    match sym_eig(&t) {
        Ok((ev, _)) => (ev[0], ev[m - 1]),
        Err(_) => (1.0, 1.0),
    }
}
