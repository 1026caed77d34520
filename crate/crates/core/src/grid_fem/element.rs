use faer::Mat;

use crate::error::{Error, Result};

/// RT0 element mass matrix flavour.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ElementKind {
    /// Exact integration of the RT0 basis: per-axis block `c [[2,1],[1,2]]`.
    #[default]
    Exact,
    /// Row-sum lumping of the exact matrix: per-axis block `3c I`.
    Lumped,
}

/// Per-axis coefficient `c = h_axis / (6 * area_axis * k_axis)` where the
/// flux dof is the total flux through the face.
pub fn axis_coefficients(sizes: &[f64], perm: &[f64]) -> Result<[f64; 3]> {
    let dim = sizes.len();
    if perm.len() != dim {
        return Err(Error::invalid(format!("expected {dim} permeability values, got {}", perm.len())));
    }
    if let Some(k) = perm.iter().find(|&&k| !(k > 0.0 && k.is_finite())) {
        return Err(Error::invalid(format!("permeability must be positive and finite, got {k}")));
    }
    if let Some(h) = sizes.iter().find(|&&h| !(h > 0.0 && h.is_finite())) {
        return Err(Error::invalid(format!("cell size must be positive, got {h}")));
    }
    let mut c = [0.0; 3];
    for a in 0..dim {
        let area: f64 = (0..dim).filter(|&b| b != a).map(|b| sizes[b]).product();
        c[a] = sizes[a] / (6.0 * area * perm[a]);
    }
    Ok(c)
}

/// Dense `(2 dim) x (2 dim)` element matrix, local face order
/// `[x-, x+, y-, y+, (z-, z+)]`.
pub fn element_mass_matrix(sizes: &[f64], perm: &[f64], kind: ElementKind) -> Result<Mat<f64>> {
    let dim = sizes.len();
    let c = axis_coefficients(sizes, perm)?;
    let mut m = Mat::zeros(2 * dim, 2 * dim);
    for a in 0..dim {
        let (lo, hi) = (2 * a, 2 * a + 1);
        match kind {
            ElementKind::Exact => {
                m[(lo, lo)] = 2.0 * c[a];
                m[(hi, hi)] = 2.0 * c[a];
                m[(lo, hi)] = c[a];
                m[(hi, lo)] = c[a];
            }
            ElementKind::Lumped => {
                m[(lo, lo)] = 3.0 * c[a];
                m[(hi, hi)] = 3.0 * c[a];
            }
        }
    }
    Ok(m)
}
